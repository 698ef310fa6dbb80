#pragma once

#include <reclqr/linalg.hpp>
#include <reclqr/opinion.hpp>

#include <optional>
#include <random>
#include <string>

namespace reclqr {

/// Diagonal design weights of the performance index plus the exposure
/// regularization strength alpha_F. Vectors have length n*m.
struct PerformanceWeights {
    Vector w_D;   // deviation from the uncontrolled equilibrium
    Vector w_P;   // polarization penalty
    Vector w_EN;  // engagement reward (enters with negative sign)
    Vector w_EX;  // control effort, strictly positive
    double alpha_F = 0.0;
};

inline void validate_weights(const PerformanceWeights& w) {
    const Index nm = w.w_D.size();
    if (w.w_P.size() != nm || w.w_EN.size() != nm || w.w_EX.size() != nm)
        throw std::invalid_argument("weights: vectors must share one length");
    if (nm == 0) throw std::invalid_argument("weights: empty");
    if (!(w.w_D.array() >= 0.0).all() || !(w.w_P.array() >= 0.0).all() ||
        !(w.w_EN.array() >= 0.0).all())
        throw std::invalid_argument("weights: w_D, w_P, w_EN must be entrywise nonnegative");
    if (!(w.w_EX.array() > 0.0).all())
        throw std::invalid_argument("weights: w_EX must be entrywise positive");
    if (!(w.alpha_F >= 0.0)) throw std::invalid_argument("weights: alpha_F must be nonnegative");
}

/// Stage cost l(x,u) = x'Qx + 2x'Nu + u'Ru + 2c'x and its completed-square
/// transform (A_tilde, Q_tilde). The constant term dropped from l is kept so
/// reported totals can reinstate it.
struct StageCostMatrices {
    Matrix Q;        // W_D + W_P
    Matrix N;        // -W_EN / 2
    Matrix R;        // W_EX + alpha_F * L_u
    Vector c;        // -W_D x_eq
    Matrix A_tilde;  // A_c - R^{-1} N
    Matrix Q_tilde;  // Q - N R^{-1} N
    Matrix R_inv;
    Matrix L_u;
    Vector x_eq;
    double dropped_constant = 0.0;  // x_eq' W_D x_eq
    PerformanceWeights weights;

    Index dim() const { return Q.rows(); }
};

inline StageCostMatrices assemble_stage_cost(const PerformanceWeights& weights,
                                             const LaplacianPair& laplacians,
                                             const VectorizedSystem& sys) {
    validate_weights(weights);
    const Index nm = sys.dim();
    if (weights.w_D.size() != nm)
        throw std::invalid_argument("assemble_stage_cost: weight length must equal n*m");

    StageCostMatrices out;
    out.weights = weights;
    out.x_eq = sys.x_eq;
    out.Q = Matrix((weights.w_D + weights.w_P).asDiagonal());
    out.N = Matrix((-0.5 * weights.w_EN).asDiagonal());
    const Matrix L_sym = 0.5 * (laplacians.L_b + laplacians.L_b.transpose());
    out.L_u = kron(Matrix::Identity(sys.m, sys.m), L_sym);
    out.R = Matrix(weights.w_EX.asDiagonal()) + weights.alpha_F * out.L_u;
    out.c = -weights.w_D.cwiseProduct(sys.x_eq);
    out.dropped_constant = sys.x_eq.dot(weights.w_D.asDiagonal() * sys.x_eq);

    Eigen::LLT<Matrix> llt(out.R);
    if (llt.info() != Eigen::Success)
        throw std::runtime_error("assemble_stage_cost: R is not positive definite");
    out.R_inv = llt.solve(Matrix::Identity(nm, nm));
    out.R_inv = 0.5 * (out.R_inv + out.R_inv.transpose());

    out.A_tilde = sys.A_c - out.R_inv * out.N;
    out.Q_tilde = out.Q - out.N * out.R_inv * out.N;
    out.Q_tilde = 0.5 * (out.Q_tilde + out.Q_tilde.transpose());
    return out;
}

/// The five cost terms of one stage evaluation; `engagement` already carries
/// its negative sign, and `deviation` includes the constant part, so the
/// terms sum to `total` plus the recorded dropped constant.
struct StageCostValue {
    double total = 0.0;       // x'Qx + 2x'Nu + u'Ru + 2c'x
    double engagement = 0.0;  // -x' W_EN u
    double polarization = 0.0;
    double deviation = 0.0;  // (x - x_eq)' W_D (x - x_eq)
    double effort = 0.0;
    double exposure_regularization = 0.0;
};

inline StageCostValue evaluate_stage_cost(const StageCostMatrices& mats, const Vector& x,
                                          const Vector& u) {
    if (x.size() != mats.dim() || u.size() != mats.dim())
        throw std::invalid_argument("evaluate_stage_cost: dimension mismatch");
    StageCostValue v;
    v.total = x.dot(mats.Q * x) + 2.0 * x.dot(mats.N * u) + u.dot(mats.R * u) +
              2.0 * mats.c.dot(x);
    v.engagement = -x.dot(mats.weights.w_EN.asDiagonal() * u);
    v.polarization = x.dot(mats.weights.w_P.asDiagonal() * x);
    const Vector dx = x - mats.x_eq;
    v.deviation = dx.dot(mats.weights.w_D.asDiagonal() * dx);
    v.effort = u.dot(mats.weights.w_EX.asDiagonal() * u);
    v.exposure_regularization = mats.weights.alpha_F * u.dot(mats.L_u * u);
    return v;
}

/// Spectral sufficient condition for strict convexity of the effective
/// quadratic form: min(w_D) + min(w_P) - max(w_EN)^2 / (4 min(w_EX)).
inline double spectral_convexity_margin(const PerformanceWeights& w) {
    validate_weights(w);
    const double max_en = w.w_EN.maxCoeff();
    return w.w_D.minCoeff() + w.w_P.minCoeff() - max_en * max_en / (4.0 * w.w_EX.minCoeff());
}

struct PerIndexCheck {
    double lhs = 0.0;
    double rhs = 0.0;
    bool pass = false;  // strict inequality lhs > rhs
};

/// Per-index necessary-and-sufficient positive definiteness test for purely
/// diagonal costs (requires alpha_F = 0, reported inapplicable otherwise):
/// w_D[i] + w_P[i] > w_EN[i]^2 / (4 w_EX[i]).
struct DiagonalConvexityReport {
    bool applicable = false;
    std::vector<PerIndexCheck> checks;

    bool all_pass() const {
        if (!applicable) return false;
        for (const auto& c : checks)
            if (!c.pass) return false;
        return true;
    }
    bool all_pass_nonstrict() const {
        if (!applicable) return false;
        for (const auto& c : checks)
            if (!(c.lhs >= c.rhs)) return false;
        return true;
    }
};

inline DiagonalConvexityReport diagonal_convexity_check(const PerformanceWeights& w) {
    validate_weights(w);
    DiagonalConvexityReport rep;
    rep.applicable = (w.alpha_F == 0.0);
    if (!rep.applicable) return rep;
    rep.checks.resize(w.w_D.size());
    for (Index i = 0; i < w.w_D.size(); ++i) {
        auto& c = rep.checks[i];
        c.lhs = w.w_D(i) + w.w_P(i);
        c.rhs = w.w_EN(i) * w.w_EN(i) / (4.0 * w.w_EX(i));
        c.pass = c.lhs > c.rhs;
    }
    return rep;
}

/// Per-mode PD test for symmetric Q, R, W_EN that pairwise commute (and are
/// hence simultaneously orthogonally diagonalizable): q_i > w_EN,i^2 / (4 r_i)
/// in a common eigenbasis. Inapplicability is a result, not an error.
struct CommutingConvexityReport {
    bool applicable = false;
    double max_commutator = 0.0;
    Matrix basis;
    std::vector<PerIndexCheck> modes;

    bool all_pass() const {
        if (!applicable) return false;
        for (const auto& c : modes)
            if (!c.pass) return false;
        return true;
    }
};

inline CommutingConvexityReport commuting_convexity_check(const Matrix& Q, const Matrix& R, const Matrix& W_EN) {
    const Index nm = Q.rows();
    if (R.rows() != nm || W_EN.rows() != nm || Q.cols() != nm || R.cols() != nm ||
        W_EN.cols() != nm)
        throw std::invalid_argument("commuting_convexity_check: dimension mismatch");
    CommutingConvexityReport rep;
    auto comm = [](const Matrix& a, const Matrix& b) {
        const double scale = std::max(1.0, a.norm() * b.norm());
        return (a * b - b * a).norm() / scale;
    };
    rep.max_commutator = std::max({comm(Q, R), comm(Q, W_EN), comm(R, W_EN)});
    rep.applicable = rep.max_commutator <= 1e-9;
    if (!rep.applicable) return rep;

    // Common eigenbasis from a generic linear combination; retry the draw if a
    // degenerate combination merges distinct joint eigenspaces.
    std::mt19937 rng(12345);
    std::uniform_real_distribution<double> coef(0.5, 2.0);
    const double off_tol = 1e-8 * std::max({1.0, Q.norm(), R.norm(), W_EN.norm()});
    for (int attempt = 0; attempt < 8; ++attempt) {
        const Matrix M = coef(rng) * Q + coef(rng) * R + coef(rng) * W_EN;
        Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (M + M.transpose()));
        const Matrix& U = es.eigenvectors();
        const Matrix dq = U.transpose() * Q * U;
        const Matrix dr = U.transpose() * R * U;
        const Matrix dw = U.transpose() * W_EN * U;
        auto offdiag = [](const Matrix& m) {
            return (m - Matrix(m.diagonal().asDiagonal())).cwiseAbs().maxCoeff();
        };
        if (offdiag(dq) > off_tol || offdiag(dr) > off_tol || offdiag(dw) > off_tol) continue;
        rep.basis = U;
        rep.modes.resize(nm);
        for (Index i = 0; i < nm; ++i) {
            auto& c = rep.modes[i];
            c.lhs = dq(i, i);
            c.rhs = dw(i, i) * dw(i, i) / (4.0 * dr(i, i));
            c.pass = c.lhs > c.rhs;
        }
        return rep;
    }
    throw std::runtime_error("commuting_convexity_check: failed to construct a common eigenbasis");
}

enum class Regime {
    StrictlyConvex,
    SemidefiniteDetectable,
    SemidefiniteUndetectable,
    Indefinite,
};

inline std::string to_string(Regime r) {
    switch (r) {
        case Regime::StrictlyConvex: return "strictly_convex";
        case Regime::SemidefiniteDetectable: return "semidefinite_detectable";
        case Regime::SemidefiniteUndetectable: return "semidefinite_undetectable";
        case Regime::Indefinite: return "indefinite";
    }
    return "unknown";
}

struct WellPosednessVerdict {
    Regime regime = Regime::Indefinite;
    double spectral_margin = 0.0;
    double min_eig_Qtilde = 0.0;
    std::optional<bool> detectable;
    std::vector<std::string> certificates;
    bool boundary = false;  // min eigenvalue within tolerance of zero
};

/// PBH-style detectability of the semidefinite cost pair: every eigenvalue of
/// A_tilde with Re >= -tol must keep [lambda I - A_tilde; Q_tilde] at full
/// column rank. Works on Q_tilde directly, no square root is formed.
inline bool detectability_check(const Matrix& Q_tilde, const Matrix& A_tilde,
                                double axis_tol = tol::classification) {
    const Index nm = A_tilde.rows();
    Eigen::EigenSolver<Matrix> es(A_tilde, /*computeEigenvectors=*/false);
    if (es.info() != Eigen::Success) throw std::runtime_error("detectability: eigensolver failed");
    const ComplexVector ev = es.eigenvalues();
    const double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
    for (Index i = 0; i < ev.size(); ++i) {
        if (ev(i).real() < -axis_tol * scale) continue;
        ComplexMatrix stacked(2 * nm, nm);
        stacked.topRows(nm) =
            ev(i) * ComplexMatrix::Identity(nm, nm) - A_tilde.cast<std::complex<double>>();
        stacked.bottomRows(nm) = Q_tilde.cast<std::complex<double>>();
        Eigen::JacobiSVD<ComplexMatrix> svd(stacked);
        const auto& sv = svd.singularValues();
        if (sv(nm - 1) <= 1e-9 * std::max(1.0, sv(0))) return false;
    }
    return true;
}

struct RegimeClassification {
    Regime regime = Regime::Indefinite;
    double min_eig_Qtilde = 0.0;
    bool boundary = false;
    std::optional<bool> detectable;
};

/// Ground-truth regime from the eigenvalues of Q_tilde (relative tolerance
/// with an absolute floor so an exactly-zero Q_tilde lands on the
/// semidefinite branch under rounding), refined by detectability there.
inline RegimeClassification classify_matrices(const Matrix& Q_tilde, const Matrix& A_tilde,
                                              double classification_tol = tol::classification) {
    RegimeClassification out;
    const Vector eigs = symmetric_eigenvalues(Q_tilde);
    const double scale = std::max(1.0, eigs.cwiseAbs().maxCoeff());
    const double cut = classification_tol * scale;
    out.min_eig_Qtilde = eigs.minCoeff();
    if (out.min_eig_Qtilde > cut) {
        out.regime = Regime::StrictlyConvex;
    } else if (out.min_eig_Qtilde >= -cut) {
        out.boundary = true;
        const bool det = detectability_check(Q_tilde, A_tilde, classification_tol);
        out.detectable = det;
        out.regime = det ? Regime::SemidefiniteDetectable : Regime::SemidefiniteUndetectable;
    } else {
        out.regime = Regime::Indefinite;
    }
    return out;
}

/// Regime of an assembled stage cost plus the record of which sufficient
/// certificates fired (nonstrict variants certify the semidefinite case).
inline WellPosednessVerdict classify_weights(const StageCostMatrices& mats,
                                             double classification_tol = tol::classification) {
    WellPosednessVerdict verdict;
    const auto cls = classify_matrices(mats.Q_tilde, mats.A_tilde, classification_tol);
    verdict.regime = cls.regime;
    verdict.min_eig_Qtilde = cls.min_eig_Qtilde;
    verdict.boundary = cls.boundary;
    verdict.detectable = cls.detectable;
    verdict.spectral_margin = spectral_convexity_margin(mats.weights);

    if (verdict.spectral_margin > 0.0) verdict.certificates.push_back("spectral_margin");
    if (verdict.spectral_margin >= 0.0) verdict.certificates.push_back("spectral_margin_nonstrict");
    const auto c1 = diagonal_convexity_check(mats.weights);
    if (c1.applicable && c1.all_pass()) verdict.certificates.push_back("diagonal_per_index");
    if (c1.applicable && c1.all_pass_nonstrict())
        verdict.certificates.push_back("diagonal_per_index_nonstrict");
    try {
        const auto c2 =
            commuting_convexity_check(mats.Q, mats.R, Matrix(mats.weights.w_EN.asDiagonal()));
        if (c2.applicable && c2.all_pass()) verdict.certificates.push_back("commuting_per_mode");
        if (c2.applicable) {
            bool nonstrict = true;
            for (const auto& m : c2.modes) nonstrict = nonstrict && (m.lhs >= m.rhs);
            if (nonstrict) verdict.certificates.push_back("commuting_per_mode_nonstrict");
        }
    } catch (const std::runtime_error&) {
        // no common eigenbasis found; certificate simply does not fire
    }
    return verdict;
}

}  // namespace reclqr
