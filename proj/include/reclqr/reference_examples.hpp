#pragma once

#include <reclqr/opinion.hpp>
#include <reclqr/synthesis.hpp>

#include <optional>

namespace reclqr {

// Three built-in two-topic, single-agent cases with closed-form solution
// sets, used to verify the whole pipeline end to end. Each one picks
// engagement-heavy weights whose effective stage cost leaves the strictly
// convex regime, in a different pathological way:
//   1: sign-indefinite cost; the unique free-endpoint optimum leaves an
//      unstable closed-loop mode.
//   2: sign-indefinite cost; extremal solutions exist but the infimum is not
//      attained for some initial states.
//   3: semidefinite cost without detectability; the optimal transformed
//      input is zero and the closed loop diverges.

struct ExampleCheck {
    std::string name;
    double deviation = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

struct ExampleReport {
    int which = 0;
    std::vector<ExampleCheck> checks;
    RiccatiSolutionSet solutions;
    Controller controller;

    bool all_pass() const {
        for (const auto& c : checks)
            if (!c.pass) return false;
        return true;
    }
    double max_deviation() const {
        double m = 0.0;
        for (const auto& c : checks) m = std::max(m, c.deviation);
        return m;
    }
};

struct Example1Params {
    double eta = 1.0;
    double xi = 0.5;
    double beta = 0.5;
};

struct Example3Params {
    double eta = 3.0;
    double xi = 0.5;
};

namespace detail {

inline void add_check(ExampleReport& rep, std::string name, double deviation, double tolerance) {
    rep.checks.push_back({std::move(name), deviation, tolerance, deviation <= tolerance});
}

inline void add_flag(ExampleReport& rep, std::string name, bool ok) {
    rep.checks.push_back({std::move(name), ok ? 0.0 : 1.0, 0.5, ok});
}

// Single agent, two topics, empty social graph.
inline OpinionModel two_topic_model(const Matrix& C) {
    OpinionModel model;
    model.n = 1;
    model.m = 2;
    model.laplacians.L = Matrix::Zero(1, 1);
    model.laplacians.L_b = Matrix::Zero(1, 1);
    model.laplacians.balancing_weights = Vector::Ones(1);
    model.C = C;
    model.A_a = Vector::Ones(1);
    model.X_anchor = Matrix::Zero(1, 2);
    return model;
}

inline TransformedProblem transformed_from_cost(const Matrix& A_c, const Matrix& Q,
                                                const Matrix& N, const Matrix& R) {
    Eigen::LLT<Matrix> llt(R);
    if (llt.info() != Eigen::Success)
        throw std::invalid_argument("reference example: R must be positive definite");
    const Matrix R_inv = llt.solve(Matrix::Identity(R.rows(), R.cols()));
    const Matrix A_tilde = A_c - R_inv * N;
    const Matrix Q_tilde = Q - N * R_inv * N;
    return make_transformed(A_tilde, Q_tilde, R, Vector::Zero(A_c.rows()),
                            Vector::Zero(A_c.rows()));
}

// Distance from the best assignment of computed solutions to expected ones;
// also fails when the counts differ.
inline double match_solution_set(const RiccatiSolutionSet& set,
                                 const std::vector<Matrix>& expected) {
    if (set.solutions.size() != expected.size()) return std::numeric_limits<double>::infinity();
    double worst = 0.0;
    for (const auto& e : expected) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& s : set.solutions) best = std::min(best, (s.P - e).norm());
        worst = std::max(worst, best);
    }
    return worst;
}

inline double subspace_distance(const Matrix& basis, const Matrix& expected_basis) {
    auto proj = [](const Matrix& b) -> Matrix {
        if (b.cols() == 0) return Matrix::Zero(b.rows(), b.rows());
        return b * (b.transpose() * b).ldlt().solve(b.transpose());
    };
    return (proj(basis) - proj(expected_basis)).norm();
}

}  // namespace detail

inline ExampleReport reproduce_example1(const Example1Params& p = {}) {
    if (!(p.eta > 0.0 && p.eta < 2.5))
        throw std::invalid_argument("example 1: eta must lie in (0, 5/2)");
    if (!(std::abs(p.xi) > 0.0 && std::abs(p.xi) < 1.0))
        throw std::invalid_argument("example 1: xi must lie in (-1,0) or (0,1)");
    if (!(p.beta > 0.0 && p.beta < p.eta * p.eta))
        throw std::invalid_argument("example 1: beta must lie in (0, eta^2)");

    ExampleReport rep;
    rep.which = 1;
    const double eta = p.eta, xi = p.xi, beta = p.beta;
    const double delta = std::sqrt(eta * eta - beta);

    // Prescribed cost matrices on top of the two-topic model.
    Matrix C(2, 2);
    C << 1.0, xi, 0.0, 0.5;
    const auto sys = assemble_system(detail::two_topic_model(C));
    Matrix Ncost = Matrix::Zero(2, 2);
    Ncost.diagonal() << -2.0 - eta, -2.5 + eta;
    Matrix Q = Matrix::Zero(2, 2);
    Q.diagonal() << (2.0 + eta) * (2.0 + eta), (eta - 2.5) * (eta - 2.5) - beta;
    const Matrix R = Matrix::Identity(2, 2);
    const auto tp = detail::transformed_from_cost(sys.A_c, Q, Ncost, R);

    Matrix A_tilde_cf(2, 2);
    A_tilde_cf << eta, xi, 0.0, -eta;
    Matrix Q_tilde_cf = Matrix::Zero(2, 2);
    Q_tilde_cf(1, 1) = -beta;
    detail::add_check(rep, "transform matches closed form",
                      std::max((tp.A_tilde - A_tilde_cf).norm(), (tp.Q_tilde - Q_tilde_cf).norm()),
                      1e-10);

    const auto cls = classify_matrices(tp.Q_tilde, tp.A_tilde);
    detail::add_flag(rep, "regime is indefinite", cls.regime == Regime::Indefinite);

    // Closed-form solution set: two diagonal solutions and two off-diagonal
    // ones parameterized by gamma = +/-1.
    auto P_gamma = [&](double gamma) {
        const double g = gamma * delta + eta;
        const double zeta = beta * beta + xi * xi * g * g;
        Matrix P(2, 2);
        P(0, 0) = 2.0 * eta * beta * beta / zeta;
        P(0, 1) = 2.0 * eta * beta * xi * g / zeta;
        P(1, 0) = P(0, 1);
        P(1, 1) = beta / g - P(0, 0);
        return P;
    };
    Matrix P_diag_hi = Matrix::Zero(2, 2);
    P_diag_hi(1, 1) = -eta + delta;
    Matrix P_minus_cf = Matrix::Zero(2, 2);
    P_minus_cf(1, 1) = -eta - delta;
    const Matrix P_plus_cf = P_gamma(-1.0);

    rep.solutions = enumerate_solutions(tp);
    detail::add_flag(rep, "enumeration exhaustive", rep.solutions.exhaustive);
    detail::add_check(
        rep, "solution set matches the four closed forms",
        detail::match_solution_set(rep.solutions,
                                   {P_diag_hi, P_minus_cf, P_plus_cf, P_gamma(+1.0)}),
        1e-8);
    detail::add_check(rep, "minimal solution",
                      rep.solutions.P_minus ? (*rep.solutions.P_minus - P_minus_cf).norm()
                                            : std::numeric_limits<double>::infinity(),
                      1e-8);
    detail::add_check(rep, "maximal solution",
                      rep.solutions.P_plus ? (*rep.solutions.P_plus - P_plus_cf).norm()
                                           : std::numeric_limits<double>::infinity(),
                      1e-8);

    rep.controller = free_endpoint_indefinite(tp, rep.solutions);
    detail::add_flag(rep, "finite optimum exists", rep.controller.exists);
    detail::add_flag(rep, "optimal input unique", rep.controller.unique);

    if (rep.solutions.P_minus && rep.solutions.P_plus) {
        const auto sc = supported_curvature(tp, *rep.solutions.P_minus, *rep.solutions.P_plus);
        detail::add_check(rep, "support subspace is the first coordinate line",
                          detail::subspace_distance(sc.N_basis, Matrix::Identity(2, 2).col(0)),
                          1e-8);
        Matrix Pi_cf(2, 2);
        Pi_cf << 1.0, -xi / (delta - eta), 0.0, 0.0;
        detail::add_check(rep, "invariant projector matches closed form",
                          (sc.projector - Pi_cf).norm(), 1e-8);
        const Matrix P_N_cf =
            P_minus_cf * Pi_cf + P_plus_cf * (Matrix::Identity(2, 2) - Pi_cf);
        detail::add_check(rep, "supported curvature matches closed form",
                          (sc.P_N - P_N_cf).norm(), 1e-8);
    }

    if (rep.controller.unique && rep.controller.closed_loop.size() > 0) {
        const ComplexVector cl = rep.controller.closed_loop_spectrum;
        double best = std::numeric_limits<double>::infinity();
        bool positive = false;
        for (Index i = 0; i < cl.size(); ++i) {
            best = std::min(best, std::abs(cl(i) - std::complex<double>(eta, 0.0)));
            positive = positive || cl(i).real() > 0.0;
        }
        detail::add_check(rep, "closed-loop spectrum contains eta", best, 1e-8);
        detail::add_flag(rep, "closed loop has an unstable mode", positive);

        const Matrix A_minus_cf = A_tilde_cf - P_minus_cf;
        const Matrix A_plus_cf = A_tilde_cf - P_plus_cf;
        const Vector e1 = Matrix::Identity(2, 2).col(0);
        Vector v2(2);
        v2 << xi / (delta - eta), 1.0;
        v2.normalize();
        detail::add_check(rep, "closed loop acts as the antistable map on the support",
                          (rep.controller.closed_loop * e1 - A_minus_cf * e1).norm(), 1e-8);
        detail::add_check(rep, "closed loop acts as the stable map on the complement",
                          (rep.controller.closed_loop * v2 - A_plus_cf * v2).norm(), 1e-8);
    }
    return rep;
}

inline ExampleReport reproduce_example2() {
    ExampleReport rep;
    rep.which = 2;

    const auto model = detail::two_topic_model(Matrix::Identity(2, 2));
    const auto sys = assemble_system(model);
    PerformanceWeights w;
    w.w_D = Vector::Zero(2);
    w.w_P = (Vector(2) << 8.0, 10.0).finished();
    w.w_EN = Vector::Constant(2, 6.0);
    w.w_EX = Vector::Ones(2);
    w.alpha_F = 0.0;
    const auto mats = assemble_stage_cost(w, model.laplacians, sys);
    const auto tp = make_transformed(mats, sys);

    Matrix Q_tilde_cf = Matrix::Zero(2, 2);
    Q_tilde_cf.diagonal() << -1.0, 1.0;
    detail::add_check(rep, "transform matches closed form",
                      std::max((tp.A_tilde - Matrix::Identity(2, 2)).norm(),
                               (tp.Q_tilde - Q_tilde_cf).norm()),
                      1e-10);
    const auto verdict = classify_weights(mats);
    detail::add_flag(rep, "regime is indefinite", verdict.regime == Regime::Indefinite);

    const double r2 = std::sqrt(2.0);
    Matrix P_minus_cf = Matrix::Zero(2, 2);
    P_minus_cf.diagonal() << 1.0, 1.0 - r2;
    Matrix P_plus_cf = Matrix::Zero(2, 2);
    P_plus_cf.diagonal() << 1.0, 1.0 + r2;

    rep.solutions = enumerate_solutions(tp);
    detail::add_flag(rep, "enumeration exhaustive", rep.solutions.exhaustive);
    detail::add_check(rep, "solution set is exactly the two diagonal forms",
                      detail::match_solution_set(rep.solutions, {P_minus_cf, P_plus_cf}), 1e-10);
    detail::add_check(rep, "minimal solution",
                      rep.solutions.P_minus ? (*rep.solutions.P_minus - P_minus_cf).norm()
                                            : std::numeric_limits<double>::infinity(),
                      1e-10);
    detail::add_check(rep, "maximal solution",
                      rep.solutions.P_plus ? (*rep.solutions.P_plus - P_plus_cf).norm()
                                           : std::numeric_limits<double>::infinity(),
                      1e-10);

    std::string why;
    const auto dichotomy = stabilizing_solution(tp, &why);
    detail::add_flag(rep, "Schur dichotomy correctly reports no spectral gap",
                     !dichotomy.has_value());

    const Matrix gap_kernel = kernel_basis(P_plus_cf - P_minus_cf, 1e-9);
    detail::add_check(rep, "kernel of the solution gap is the first coordinate line",
                      detail::subspace_distance(gap_kernel, Matrix::Identity(2, 2).col(0)), 1e-8);
    detail::add_flag(rep, "minimal solution has trivial kernel",
                     kernel_basis(P_minus_cf, 1e-9).cols() == 0);

    rep.controller = free_endpoint_indefinite(tp, rep.solutions);
    detail::add_flag(rep, "finite optimum exists", rep.controller.exists);
    detail::add_flag(rep, "optimal input is not unique", !rep.controller.unique);
    bool has_note = false;
    for (const auto& n : rep.controller.notes)
        has_note = has_note || n.find("infimum not attained") != std::string::npos;
    detail::add_flag(rep, "nonattainment diagnostic emitted", has_note);
    detail::add_check(rep, "offending direction is the first coordinate",
                      detail::subspace_distance(rep.controller.offending_directions,
                                                Matrix::Identity(2, 2).col(0)),
                      1e-8);
    const Vector x0 = Matrix::Identity(2, 2).col(0);
    const bool hits = rep.controller.offending_directions.cols() > 0 &&
                      (rep.controller.offending_directions.transpose() * x0).norm() > 0.5;
    detail::add_flag(rep, "infimum not attained from the first unit vector", hits);
    return rep;
}

inline ExampleReport reproduce_example3(const Example3Params& p = {}) {
    if (!(std::abs(p.xi) > 0.0 && std::abs(p.xi) < 1.0))
        throw std::invalid_argument("example 3: xi must lie in (-1,0) or (0,1)");
    if (!(p.eta > 2.0 + std::abs(p.xi)))
        throw std::invalid_argument("example 3: eta must exceed 2 + |xi|");

    ExampleReport rep;
    rep.which = 3;
    const double eta = p.eta, xi = p.xi;

    // This coupling matrix breaks the inter-topic conditions (C - I has no
    // zero eigenvalue and one unstable one), so the system is assembled
    // without the model gate; the instability exhibited below is the point.
    Matrix C(2, 2);
    C << 1.0, xi, xi, 1.0;
    const auto model = detail::two_topic_model(C);
    const auto sys = assemble_system(model);

    PerformanceWeights w;
    w.w_D = Vector::Zero(2);
    w.w_P = Vector::Constant(2, eta * eta);
    w.w_EN = Vector::Constant(2, 2.0 * eta);
    w.w_EX = Vector::Ones(2);
    w.alpha_F = 0.0;
    const auto mats = assemble_stage_cost(w, model.laplacians, sys);
    const auto tp = make_transformed(mats, sys);

    Matrix A_tilde_cf(2, 2);
    A_tilde_cf << -2.0 + eta, xi, xi, -2.0 + eta;
    detail::add_check(rep, "transform matches closed form",
                      std::max((tp.A_tilde - A_tilde_cf).norm(), tp.Q_tilde.norm()), 1e-10);

    const auto cls = classify_matrices(tp.Q_tilde, tp.A_tilde);
    detail::add_flag(rep, "regime is semidefinite without detectability",
                     cls.regime == Regime::SemidefiniteUndetectable);

    // Solutions are diagonal in the symmetric eigenbasis of A_tilde with
    // entries 0 or twice the eigenvalue.
    const double lp = -2.0 + eta + xi;
    const double lm = -2.0 + eta - xi;
    Matrix T(2, 2);
    T << 1.0, 1.0, 1.0, -1.0;
    T /= std::sqrt(2.0);
    std::vector<Matrix> expected;
    for (int e1 = 0; e1 < 2; ++e1)
        for (int e2 = 0; e2 < 2; ++e2) {
            Matrix D = Matrix::Zero(2, 2);
            D.diagonal() << 2.0 * lp * e1, 2.0 * lm * e2;
            expected.push_back(T * D * T.transpose());
        }

    rep.solutions = enumerate_solutions(tp);
    detail::add_flag(rep, "enumeration exhaustive", rep.solutions.exhaustive);
    detail::add_check(rep, "solution set matches the four eigenbasis forms",
                      detail::match_solution_set(rep.solutions, expected), 1e-8);

    const auto P_circ = smallest_psd_solution(rep.solutions);
    detail::add_check(rep, "smallest PSD solution is zero",
                      P_circ ? P_circ->norm() : std::numeric_limits<double>::infinity(), 1e-10);
    detail::add_check(rep, "minimal solution is zero",
                      rep.solutions.P_minus ? rep.solutions.P_minus->norm()
                                            : std::numeric_limits<double>::infinity(),
                      1e-10);
    detail::add_check(rep, "maximal solution is twice the drift",
                      rep.solutions.P_plus ? (*rep.solutions.P_plus - 2.0 * A_tilde_cf).norm()
                                           : std::numeric_limits<double>::infinity(),
                      1e-8);

    const auto verdict = classify_weights(mats);
    rep.controller = synthesize(sys, mats, verdict);
    detail::add_flag(rep, "controller exists and is unique",
                     rep.controller.exists && rep.controller.unique);
    detail::add_check(rep, "transformed optimal input is zero",
                      rep.controller.K_v.size() ? rep.controller.K_v.norm()
                                                : std::numeric_limits<double>::infinity(),
                      1e-10);

    std::vector<double> expected_re{lp, lm};
    std::sort(expected_re.begin(), expected_re.end());
    std::vector<double> got;
    for (Index i = 0; i < rep.controller.closed_loop_spectrum.size(); ++i)
        got.push_back(rep.controller.closed_loop_spectrum(i).real());
    std::sort(got.begin(), got.end());
    double spec_dev = std::numeric_limits<double>::infinity();
    if (got.size() == expected_re.size()) {
        spec_dev = 0.0;
        for (std::size_t i = 0; i < got.size(); ++i)
            spec_dev = std::max(spec_dev, std::abs(got[i] - expected_re[i]));
    }
    detail::add_check(rep, "closed-loop spectrum matches the drift eigenvalues", spec_dev, 1e-8);
    detail::add_flag(rep, "both closed-loop eigenvalues positive",
                     !got.empty() && got.front() > 0.0);

    // The recommendation input in original coordinates is u = eta * x; the
    // state escapes any bound and the run must be flagged, not clipped.
    const Matrix K = rep.controller.K;
    Policy policy = [&](double, const Vector& x) -> Vector { return -K * x; };
    Vector x0(2);
    x0 << 1.0, 0.0;
    const auto traj = simulate(sys, policy, x0, 80.0, 1e-2);
    detail::add_flag(rep, "closed-loop simulation diverges", traj.diverged);
    return rep;
}

struct ExampleOverrides {
    std::optional<double> eta;
    std::optional<double> xi;
    std::optional<double> beta;
};

inline ExampleReport reproduce_example(int which, const ExampleOverrides& ov = {}) {
    switch (which) {
        case 1: {
            Example1Params p;
            if (ov.eta) p.eta = *ov.eta;
            if (ov.xi) p.xi = *ov.xi;
            if (ov.beta) p.beta = *ov.beta;
            return reproduce_example1(p);
        }
        case 2: {
            if (ov.eta || ov.xi || ov.beta)
                throw std::invalid_argument("example 2 takes no parameters");
            return reproduce_example2();
        }
        case 3: {
            Example3Params p;
            if (ov.eta) p.eta = *ov.eta;
            if (ov.xi) p.xi = *ov.xi;
            if (ov.beta) throw std::invalid_argument("example 3 has no beta parameter");
            return reproduce_example3(p);
        }
        default:
            throw std::invalid_argument("example index must be 1, 2 or 3");
    }
}

}  // namespace reclqr
