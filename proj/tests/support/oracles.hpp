#pragma once

// Test-only oracles, independent of the library's solution paths: the
// entrywise matrix-form simulator, an exact matrix-exponential stepper, random
// model generators, and a finite-horizon transcription solved as one sparse
// KKT system.

#include <reclqr/opinion.hpp>
#include <reclqr/riccati.hpp>

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>
#include <unsupported/Eigen/MatrixFunctions>

#include <random>

namespace reclqr::testing {

// --- random models -------------------------------------------------------

inline DirectedGraph random_strongly_connected_graph(std::mt19937& rng, int n) {
    std::uniform_real_distribution<double> weight(0.5, 2.0);
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    DirectedGraph g;
    g.n = n;
    if (n == 1) return g;
    for (int i = 0; i < n; ++i) g.edges.push_back({i, (i + 1) % n, weight(rng)});
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            if (i == j || j == (i + 1) % n) continue;
            if (coin(rng) < 0.3) g.edges.push_back({i, j, weight(rng)});
        }
    }
    return g;
}

// Coupling matrices built from a strictly positive row-stochastic matrix:
// C = (1-theta) I + theta S has zero as a simple semisimple eigenvalue of
// C - I and all other eigenvalues strictly stable.
inline Matrix random_coupling(std::mt19937& rng, int m) {
    std::uniform_real_distribution<double> entry(0.1, 1.0);
    std::uniform_real_distribution<double> th(0.3, 1.0);
    if (m == 1) return Matrix::Ones(1, 1);
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    if (coin(rng) < 0.15) return Matrix::Identity(m, m);
    Matrix S(m, m);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) S(i, j) = entry(rng);
    S.array().colwise() /= S.rowwise().sum().array();
    const double theta = th(rng);
    return (1.0 - theta) * Matrix::Identity(m, m) + theta * S;
}

inline OpinionModel random_model(std::mt19937& rng, int max_n = 5, int max_m = 3,
                                 double a_min_low = 0.5, bool zero_anchor = false) {
    std::uniform_int_distribution<int> nd(1, max_n), md(1, max_m);
    std::uniform_real_distribution<double> ad(a_min_low, 2.0);
    std::uniform_real_distribution<double> xd(-1.0, 1.0);
    const int n = nd(rng), m = md(rng);
    const auto g = random_strongly_connected_graph(rng, n);
    const auto laplacians = balance(g);
    const Matrix C = random_coupling(rng, m);
    Vector A_a(n);
    for (int i = 0; i < n; ++i) A_a(i) = ad(rng);
    Matrix X(n, m);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) X(i, j) = zero_anchor ? 0.0 : xd(rng);
    return make_opinion_model(laplacians, C, A_a, X);
}

inline PerformanceWeights random_strictly_convex_weights(std::mt19937& rng, Index nm,
                                                         bool with_exposure = false,
                                                         double en_max = 0.8) {
    std::uniform_real_distribution<double> dp(0.5, 1.5), en(0.0, en_max), ex(0.8, 1.6),
        al(0.0, 0.5);
    PerformanceWeights w;
    w.w_D.resize(nm);
    w.w_P.resize(nm);
    w.w_EN.resize(nm);
    w.w_EX.resize(nm);
    for (Index i = 0; i < nm; ++i) {
        w.w_D(i) = dp(rng);
        w.w_P(i) = dp(rng);
        w.w_EN(i) = en(rng);
        w.w_EX(i) = ex(rng);
    }
    w.alpha_F = with_exposure ? al(rng) : 0.0;
    return w;
}

// --- entrywise matrix-form dynamics (independent of the Kronecker assembly)

// RK4 on Xdot = -L X - A_a (X - X0) + (U - X) + (X C' - X) with the policy
// given in the stacked coordinates; returns stacked states per step.
inline std::vector<Vector> simulate_matrix_form(const OpinionModel& model, const Policy& policy,
                                                const Vector& x0, double T, double dt) {
    const int n = model.n, m = model.m;
    const Matrix& L = model.laplacians.L;
    const Matrix Aa = model.A_a.asDiagonal();
    auto unstack = [&](const Vector& v) {
        return Matrix(Eigen::Map<const Matrix>(v.data(), n, m));
    };
    auto stack = [&](const Matrix& M) {
        return Vector(Eigen::Map<const Vector>(M.data(), n * m));
    };
    auto rhs = [&](double t, const Matrix& X) {
        const Matrix U = unstack(policy(t, stack(X)));
        return Matrix(-L * X - Aa * (X - model.X_anchor) + (U - X) +
                      (X * model.C.transpose() - X));
    };
    std::vector<Vector> states;
    const auto steps = static_cast<long>(std::ceil(T / dt - 1e-12));
    Matrix X = unstack(x0);
    double t = 0.0;
    states.push_back(stack(X));
    for (long k = 0; k < steps; ++k) {
        const double h = std::min(dt, T - t);
        const Matrix k1 = rhs(t, X);
        const Matrix k2 = rhs(t + 0.5 * h, X + 0.5 * h * k1);
        const Matrix k3 = rhs(t + 0.5 * h, X + 0.5 * h * k2);
        const Matrix k4 = rhs(t + h, X + h * k3);
        X += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        t += h;
        states.push_back(stack(X));
    }
    return states;
}

// --- exact affine stepper -------------------------------------------------

// Exact flow of xdot = M x + w over a step, via the block matrix exponential.
struct AffineStepper {
    Matrix E;
    Vector f;

    static AffineStepper make(const Matrix& M, const Vector& w, double h) {
        const Index n = M.rows();
        Matrix block = Matrix::Zero(n + 1, n + 1);
        block.topLeftCorner(n, n) = M * h;
        block.topRightCorner(n, 1) = w * h;
        const Matrix eb = block.exp();
        return {eb.topLeftCorner(n, n), eb.topRightCorner(n, 1)};
    }
    Vector step(const Vector& x) const { return E * x + f; }
};

// --- finite-horizon transcription oracle ----------------------------------

// Exact zero-order-hold discretization of the transformed problem with the
// stage cost integrated exactly (Gauss-Legendre in the step), solved as one
// sparse KKT system. Probing x0 = 0 and the unit vectors recovers the
// time-zero affine feedback v_0 = -K x0 + b.
struct DiscretizedStage {
    Matrix Ad, Bd;   // x+ = Ad x + Bd (v + d)
    Matrix Qd, Nd, Rd;
    Vector qd, rd;
    double constant = 0.0;
    double dt = 0.0;

    double stage_cost(const Vector& x, const Vector& v) const {
        return x.dot(Qd * x) + 2.0 * x.dot(Nd * v) + v.dot(Rd * v) + 2.0 * qd.dot(x) +
               2.0 * rd.dot(v) + constant;
    }
};

inline DiscretizedStage discretize_exact(const TransformedProblem& tp, double dt) {
    const Index nm = tp.dim();
    DiscretizedStage d;
    d.dt = dt;
    {
        Matrix block = Matrix::Zero(2 * nm, 2 * nm);
        block.topLeftCorner(nm, nm) = tp.A_tilde * dt;
        block.topRightCorner(nm, nm) = Matrix::Identity(nm, nm) * dt;
        const Matrix eb = block.exp();
        d.Ad = eb.topLeftCorner(nm, nm);
        d.Bd = eb.topRightCorner(nm, nm);
    }

    // 12-point Gauss-Legendre on [0, dt].
    static const double gl_x[6] = {0.1252334085114689, 0.3678314989981802, 0.5873179542866175,
                                   0.7699026741943047, 0.9041172563704749, 0.9815606342467192};
    static const double gl_w[6] = {0.2491470458134028, 0.2334925365383548, 0.2031674267230659,
                                   0.1600783285433462, 0.1069393259953184, 0.0471753363865118};

    Matrix Qxx = Matrix::Zero(nm, nm), Qxv = Matrix::Zero(nm, nm), Qvv = Matrix::Zero(nm, nm);
    Vector cx = Vector::Zero(nm), cv = Vector::Zero(nm);
    auto accumulate = [&](double tau, double weight) {
        Matrix block = Matrix::Zero(2 * nm, 2 * nm);
        block.topLeftCorner(nm, nm) = tp.A_tilde * tau;
        block.topRightCorner(nm, nm) = Matrix::Identity(nm, nm) * tau;
        const Matrix eb = block.exp();
        const Matrix E = eb.topLeftCorner(nm, nm);
        const Matrix F = eb.topRightCorner(nm, nm);
        Qxx += weight * E.transpose() * tp.Q_tilde * E;
        Qxv += weight * E.transpose() * tp.Q_tilde * F;
        Qvv += weight * F.transpose() * tp.Q_tilde * F;
        cx += weight * E.transpose() * tp.c;
        cv += weight * F.transpose() * tp.c;
    };
    for (int i = 0; i < 6; ++i) {
        const double half = 0.5 * dt;
        accumulate(half * (1.0 - gl_x[i]), half * gl_w[i]);
        accumulate(half * (1.0 + gl_x[i]), half * gl_w[i]);
    }

    // Quadratic form in (x, v) after substituting the in-step flow; the
    // constant input on the step is v + d.
    d.Qd = Qxx;
    d.Nd = Qxv;
    d.Rd = Qvv + dt * tp.R;
    d.qd = cx + Qxv * tp.d;
    d.rd = Qvv * tp.d + cv;
    d.constant = tp.d.dot(Qvv * tp.d) + 2.0 * cv.dot(tp.d);
    return d;
}

struct TranscriptionSolution {
    Vector v0;
    double cost = 0.0;
    double steady_rate = 0.0;  // mid-horizon stage-cost rate
};

// One finite-horizon solve: variables (x_1..x_N, v_0..v_{N-1}) and one
// multiplier block per dynamics row, interleaved per time step to keep the
// KKT matrix banded; factored once per horizon and reused across probe
// initial states.
class TranscriptionSolver {
  public:
    TranscriptionSolver(const TransformedProblem& tp, double dt, long steps)
        : tp_(tp), stage_(discretize_exact(tp, dt)), N_(steps), nm_(tp.dim()) {
        const Index dim = 3 * nm_ * N_;
        std::vector<Eigen::Triplet<double>> trip;
        trip.reserve(static_cast<std::size_t>(dim) * (4 * nm_ + 2));

        for (long k = 0; k < N_; ++k) {
            for (Index i = 0; i < nm_; ++i) {
                trip.emplace_back(li(k, i), xi(k + 1, i), 1.0);
                trip.emplace_back(xi(k + 1, i), li(k, i), 1.0);
                for (Index j = 0; j < nm_; ++j) {
                    trip.emplace_back(vi(k, i), vi(k, j), 2.0 * stage_.Rd(i, j));
                    trip.emplace_back(li(k, i), vi(k, j), -stage_.Bd(i, j));
                    trip.emplace_back(vi(k, j), li(k, i), -stage_.Bd(i, j));
                    if (k >= 1) {
                        trip.emplace_back(xi(k, i), xi(k, j), 2.0 * stage_.Qd(i, j));
                        trip.emplace_back(xi(k, i), vi(k, j), 2.0 * stage_.Nd(i, j));
                        trip.emplace_back(vi(k, j), xi(k, i), 2.0 * stage_.Nd(i, j));
                        trip.emplace_back(li(k, i), xi(k, j), -stage_.Ad(i, j));
                        trip.emplace_back(xi(k, j), li(k, i), -stage_.Ad(i, j));
                    }
                }
            }
        }
        Eigen::SparseMatrix<double> kkt(dim, dim);
        kkt.setFromTriplets(trip.begin(), trip.end());
        solver_.compute(kkt);
        if (solver_.info() != Eigen::Success)
            throw std::runtime_error("transcription: KKT factorization failed");
    }

    TranscriptionSolution solve(const Vector& x0) const {
        Vector rhs = Vector::Zero(3 * nm_ * N_);
        const Vector bd = stage_.Bd * tp_.d;
        for (long k = 0; k < N_; ++k) {
            rhs.segment(vi(k, 0), nm_) = -2.0 * stage_.rd;
            rhs.segment(li(k, 0), nm_) = bd;
            if (k >= 1) rhs.segment(xi(k, 0), nm_) = -2.0 * stage_.qd;
        }
        rhs.segment(vi(0, 0), nm_) -= 2.0 * stage_.Nd.transpose() * x0;
        rhs.segment(li(0, 0), nm_) += stage_.Ad * x0;

        const Vector z = solver_.solve(rhs);
        if (solver_.info() != Eigen::Success)
            throw std::runtime_error("transcription: KKT solve failed");

        TranscriptionSolution sol;
        sol.v0 = z.segment(vi(0, 0), nm_);
        auto state = [&](long k) -> Vector {
            return k == 0 ? x0 : Vector(z.segment(xi(k, 0), nm_));
        };
        sol.cost = 0.0;
        for (long k = 0; k < N_; ++k)
            sol.cost += stage_.stage_cost(state(k), z.segment(vi(k, 0), nm_));
        const long mid = N_ / 2;
        sol.steady_rate =
            stage_.stage_cost(state(mid), z.segment(vi(mid, 0), nm_)) / stage_.dt;
        return sol;
    }

  private:
    // per-step block layout: [v_k, lambda_k, x_{k+1}]
    Index vi(long k, Index i) const { return 3 * nm_ * k + i; }
    Index li(long k, Index i) const { return 3 * nm_ * k + nm_ + i; }
    Index xi(long k, Index i) const { return 3 * nm_ * (k - 1) + 2 * nm_ + i; }  // x_k, k>=1

    TransformedProblem tp_;
    DiscretizedStage stage_;
    long N_;
    Index nm_;
    Eigen::SparseLU<Eigen::SparseMatrix<double>> solver_;
};

struct TranscriptionGain {
    Matrix K_v;
    Vector b_v;
    double horizon = 0.0;
};

// Affine feedback at time zero, extracted from probe solves, with the horizon
// doubled until the steady-rate-adjusted optimal cost settles below
// `cost_tol` (the raw cost grows linearly whenever the optimal steady state
// has nonzero stage cost, so the adjusted cost is the convergent quantity).
inline TranscriptionGain transcription_feedback(const TransformedProblem& tp, double dt,
                                                double T_start, double cost_tol = 1e-6,
                                                int max_doublings = 3) {
    const Index nm = tp.dim();
    const Vector probe = Vector::Constant(nm, 0.7);
    double T = T_start;
    double prev_adjusted = std::numeric_limits<double>::quiet_NaN();
    TranscriptionGain out;
    for (int level = 0; level <= max_doublings; ++level) {
        const long N = static_cast<long>(std::llround(T / dt));
        TranscriptionSolver solver(tp, dt, N);
        const auto base = solver.solve(Vector::Zero(nm));
        out.b_v = base.v0;
        out.K_v.resize(nm, nm);
        for (Index i = 0; i < nm; ++i) {
            const auto sol = solver.solve(Vector::Unit(nm, i));
            out.K_v.col(i) = base.v0 - sol.v0;
        }
        out.horizon = T;
        const auto ref = solver.solve(probe);
        const double adjusted = ref.cost - ref.steady_rate * T;
        if (!std::isnan(prev_adjusted) && std::abs(adjusted - prev_adjusted) < cost_tol) break;
        prev_adjusted = adjusted;
        T *= 2.0;
    }
    return out;
}

// First-order Richardson step in dt removes the zero-order-hold bias of the
// extracted feedback.
inline TranscriptionGain transcription_feedback_extrapolated(const TransformedProblem& tp,
                                                             double dt, double T_start) {
    const auto coarse = transcription_feedback(tp, dt, T_start);
    const auto fine = transcription_feedback(tp, 0.5 * dt, T_start);
    TranscriptionGain out;
    out.K_v = 2.0 * fine.K_v - coarse.K_v;
    out.b_v = 2.0 * fine.b_v - coarse.b_v;
    out.horizon = std::max(coarse.horizon, fine.horizon);
    return out;
}

// Multiset distance between the spectrum of H and its negation (greedy
// nearest matching; adequate at the scales used in tests).
inline double pairing_distance(const ComplexVector& ev) {
    std::vector<std::complex<double>> pool(ev.data(), ev.data() + ev.size());
    double worst = 0.0;
    for (Index i = 0; i < ev.size(); ++i) {
        const std::complex<double> target = -ev(i);
        double best = std::numeric_limits<double>::infinity();
        std::size_t best_j = 0;
        for (std::size_t j = 0; j < pool.size(); ++j) {
            const double dist = std::abs(pool[j] - target);
            if (dist < best) {
                best = dist;
                best_j = j;
            }
        }
        worst = std::max(worst, best);
        pool.erase(pool.begin() + static_cast<long>(best_j));
    }
    return worst;
}

}  // namespace reclqr::testing
