#pragma once

#include <reclqr/graph.hpp>
#include <reclqr/linalg.hpp>

#include <functional>
#include <optional>

namespace reclqr {

/// Multi-topic opinion model: social Laplacian, inter-topic coupling C,
/// diagonal anchoring gains and anchor opinions (n agents, m topics).
struct OpinionModel {
    LaplacianPair laplacians;
    Matrix C;         // m x m
    Vector A_a;       // n, strictly positive anchoring gains
    Matrix X_anchor;  // n x m
    int n = 0;
    int m = 0;
};

/// Report of the inter-topic coupling conditions: nonnegative diagonal,
/// entries bounded by one in magnitude, zero a semisimple eigenvalue of
/// A = C - I, and every nonzero eigenvalue of A strictly stable.
struct InterTopicReport {
    bool diag_nonnegative = false;
    bool entries_bounded = false;
    bool zero_semisimple = false;
    bool nonzero_stable = false;
    int zero_algebraic = 0;
    int zero_geometric = 0;

    bool passed() const {
        return diag_nonnegative && entries_bounded && zero_semisimple && nonzero_stable &&
               zero_algebraic >= 1;
    }
};

inline InterTopicReport validate_inter_topic(const Matrix& C) {
    if (C.rows() != C.cols()) throw std::invalid_argument("inter-topic matrix must be square");
    const Index m = C.rows();
    InterTopicReport rep;

    rep.diag_nonnegative = (C.diagonal().array() >= 0.0).all();
    rep.entries_bounded = (C.cwiseAbs().array() <= 1.0 + 1e-12).all();

    const Matrix A = C - Matrix::Identity(m, m);
    const ComplexVector ev = spectrum(A);
    const double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
    const double cluster = 1e-8 * scale;

    rep.zero_algebraic = 0;
    rep.nonzero_stable = true;
    for (Index i = 0; i < m; ++i) {
        if (std::abs(ev(i)) <= cluster) {
            ++rep.zero_algebraic;
        } else if (ev(i).real() >= 0.0) {
            rep.nonzero_stable = false;
        }
    }
    const double sv_cut = 1e-10 * A.norm();
    Index rank = 0;
    {
        Eigen::JacobiSVD<Matrix> svd(A);
        for (Index i = 0; i < svd.singularValues().size(); ++i)
            if (svd.singularValues()(i) > sv_cut) ++rank;
    }
    rep.zero_geometric = static_cast<int>(m - rank);
    rep.zero_semisimple = (rep.zero_algebraic == rep.zero_geometric) && rep.zero_algebraic >= 1;
    return rep;
}

inline OpinionModel make_opinion_model(LaplacianPair laplacians, Matrix C, Vector anchoring,
                                       Matrix X_anchor) {
    OpinionModel model;
    model.n = static_cast<int>(laplacians.L.rows());
    model.m = static_cast<int>(C.rows());
    if (laplacians.L.rows() != laplacians.L.cols() || laplacians.L_b.rows() != laplacians.L.rows())
        throw std::invalid_argument("opinion model: Laplacian dimensions inconsistent");
    if (anchoring.size() != model.n)
        throw std::invalid_argument("opinion model: anchoring gain length must equal agent count");
    if (!(anchoring.array() > 0.0).all())
        throw std::invalid_argument("opinion model: anchoring gains must be strictly positive");
    if (X_anchor.rows() != model.n || X_anchor.cols() != model.m)
        throw std::invalid_argument("opinion model: anchor opinions must be n x m");
    const auto rep = validate_inter_topic(C);
    if (!rep.passed())
        throw std::invalid_argument("opinion model: inter-topic matrix violates the coupling conditions");
    model.laplacians = std::move(laplacians);
    model.C = std::move(C);
    model.A_a = std::move(anchoring);
    model.X_anchor = std::move(X_anchor);
    return model;
}

/// Vectorized dynamics xdot = A_c x + d + u; component (k-1)*n + i is agent i,
/// topic k (column-major stacking of the n x m opinion matrix).
struct VectorizedSystem {
    Matrix A_c;   // controlled drift
    Matrix A_uc;  // uncontrolled drift, A_uc = A_c + I
    Vector d;     // affine anchoring term
    Vector x_eq;  // uncontrolled equilibrium, A_uc x_eq + d = 0
    int n = 0;
    int m = 0;
    double a_min = 0.0;

    Index dim() const { return A_c.rows(); }
};

inline VectorizedSystem assemble_system(const OpinionModel& model) {
    const int n = model.n, m = model.m;
    const Matrix In = Matrix::Identity(n, n);
    const Matrix Im = Matrix::Identity(m, m);
    const Matrix M = model.laplacians.L + Matrix(model.A_a.asDiagonal());

    VectorizedSystem sys;
    sys.n = n;
    sys.m = m;
    sys.a_min = model.A_a.minCoeff();
    sys.A_c = kron(model.C, In) - kron(Im, M + 2.0 * In);
    sys.A_uc = kron(model.C, In) - kron(Im, M + In);
    sys.d = kron(Im, Matrix(model.A_a.asDiagonal())) *
            Eigen::Map<const Vector>(model.X_anchor.data(), n * m);

    Eigen::PartialPivLU<Matrix> lu(sys.A_uc);
    sys.x_eq = lu.solve(-sys.d);
    const double residual = (sys.A_uc * sys.x_eq + sys.d).cwiseAbs().maxCoeff();
    if (!sys.x_eq.allFinite() || residual > 1e-9 * std::max(1.0, sys.d.cwiseAbs().maxCoeff()))
        throw std::runtime_error(
            "assemble_system: uncontrolled drift numerically singular (model defect)");
    return sys;
}

/// Margin of the drift-stability bound: -(1 + a_min) - max Re spec(A_c).
/// Nonnegative certifies max Re spec(A_c) <= -(1 + a_min).
inline double spectral_abscissa_certificate(const VectorizedSystem& sys, double a_min) {
    return -(1.0 + a_min) - spectral_abscissa(sys.A_c);
}

inline Vector uncontrolled_equilibrium(const VectorizedSystem& sys) { return sys.x_eq; }

/// Sampled state/input path with the running stage-cost integral.
struct Trajectory {
    std::vector<double> times;
    std::vector<Vector> states;
    std::vector<Vector> inputs;
    std::vector<double> running_cost;
    bool diverged = false;
    double divergence_time = 0.0;
};

using Policy = std::function<Vector(double, const Vector&)>;
using StageCostFn = std::function<double(const Vector&, const Vector&)>;

// Fixed-step RK4 on xdot = A x + d + policy(t, x); the running cost rides
// along as an extra integrand. Integration stops (and the trajectory is
// flagged) when the state norm passes the divergence guard: blow-up is a
// legitimate outcome that must be observed, not clipped.
inline Trajectory integrate_affine(const Matrix& A, const Vector& d, const Policy& policy,
                                   const Vector& x0, double T, double dt,
                                   const StageCostFn& stage_cost = nullptr) {
    if (!(T > 0.0) || !(dt > 0.0) || dt > T)
        throw std::invalid_argument("simulate: require 0 < dt <= T");
    constexpr double divergence_guard = 1e12;

    const auto steps = static_cast<long>(std::ceil(T / dt - 1e-12));
    Trajectory traj;
    traj.times.reserve(steps + 1);
    traj.states.reserve(steps + 1);
    traj.inputs.reserve(steps + 1);
    traj.running_cost.reserve(steps + 1);

    auto rhs = [&](double t, const Vector& x, const Vector& u) -> Vector {
        return A * x + d + u;
    };

    double t = 0.0;
    Vector x = x0;
    double cost = 0.0;
    Vector u = policy(t, x);
    traj.times.push_back(t);
    traj.states.push_back(x);
    traj.inputs.push_back(u);
    traj.running_cost.push_back(cost);

    for (long k = 0; k < steps; ++k) {
        const double h = std::min(dt, T - t);
        const Vector u1 = policy(t, x);
        const Vector k1 = rhs(t, x, u1);
        const Vector x2 = x + 0.5 * h * k1;
        const Vector u2 = policy(t + 0.5 * h, x2);
        const Vector k2 = rhs(t + 0.5 * h, x2, u2);
        const Vector x3 = x + 0.5 * h * k2;
        const Vector u3 = policy(t + 0.5 * h, x3);
        const Vector k3 = rhs(t + 0.5 * h, x3, u3);
        const Vector x4 = x + h * k3;
        const Vector u4 = policy(t + h, x4);
        const Vector k4 = rhs(t + h, x4, u4);

        if (stage_cost) {
            const double c1 = stage_cost(x, u1);
            const double c2 = stage_cost(x2, u2);
            const double c3 = stage_cost(x3, u3);
            const double c4 = stage_cost(x4, u4);
            cost += (h / 6.0) * (c1 + 2.0 * c2 + 2.0 * c3 + c4);
        }
        x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        t += h;

        if (!x.allFinite() || x.cwiseAbs().maxCoeff() > divergence_guard) {
            traj.diverged = true;
            traj.divergence_time = t;
            traj.times.push_back(t);
            traj.states.push_back(x);
            traj.inputs.push_back(policy(t, x));
            traj.running_cost.push_back(cost);
            return traj;
        }
        u = policy(t, x);
        traj.times.push_back(t);
        traj.states.push_back(x);
        traj.inputs.push_back(u);
        traj.running_cost.push_back(cost);
    }
    return traj;
}

inline Trajectory simulate(const VectorizedSystem& sys, const Policy& policy, const Vector& x0,
                           double T, double dt = 1e-3, const StageCostFn& stage_cost = nullptr) {
    if (x0.size() != sys.dim()) throw std::invalid_argument("simulate: x0 dimension mismatch");
    return integrate_affine(sys.A_c, sys.d, policy, x0, T, dt, stage_cost);
}

}  // namespace reclqr
