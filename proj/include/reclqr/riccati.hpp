#pragma once

#include <reclqr/linalg.hpp>
#include <reclqr/schur.hpp>
#include <reclqr/stage_cost.hpp>

#include <optional>
#include <string>

namespace reclqr {

/// Data of the completed-square problem: xdot = A_tilde x + v + d with stage
/// cost x'Q_tilde x + v'Rv + 2c'x.
struct TransformedProblem {
    Matrix A_tilde;
    Matrix Q_tilde;
    Matrix R;
    Matrix R_inv;
    Vector d;
    Vector c;

    Index dim() const { return A_tilde.rows(); }
};

inline TransformedProblem make_transformed(Matrix A_tilde, Matrix Q_tilde, Matrix R, Vector d,
                                           Vector c) {
    TransformedProblem tp;
    const Index nm = A_tilde.rows();
    if (Q_tilde.rows() != nm || R.rows() != nm || d.size() != nm || c.size() != nm)
        throw std::invalid_argument("transformed problem: dimension mismatch");
    Eigen::LLT<Matrix> llt(R);
    if (llt.info() != Eigen::Success)
        throw std::invalid_argument("transformed problem: R must be positive definite");
    tp.R_inv = llt.solve(Matrix::Identity(nm, nm));
    tp.R_inv = 0.5 * (tp.R_inv + tp.R_inv.transpose());
    tp.A_tilde = std::move(A_tilde);
    tp.Q_tilde = 0.5 * (Q_tilde + Q_tilde.transpose());
    tp.R = std::move(R);
    tp.d = std::move(d);
    tp.c = std::move(c);
    return tp;
}

inline TransformedProblem make_transformed(const StageCostMatrices& mats,
                                           const VectorizedSystem& sys) {
    TransformedProblem tp;
    tp.A_tilde = mats.A_tilde;
    tp.Q_tilde = mats.Q_tilde;
    tp.R = mats.R;
    tp.R_inv = mats.R_inv;
    tp.d = sys.d;
    tp.c = mats.c;
    return tp;
}

/// H = [[A_tilde, -R^{-1}], [-Q_tilde, -A_tilde^T]]; its spectrum is
/// symmetric under lambda -> -lambda.
inline Matrix build_hamiltonian(const TransformedProblem& tp) {
    const Index nm = tp.dim();
    Matrix H(2 * nm, 2 * nm);
    H.topLeftCorner(nm, nm) = tp.A_tilde;
    H.topRightCorner(nm, nm) = -tp.R_inv;
    H.bottomLeftCorner(nm, nm) = -tp.Q_tilde;
    H.bottomRightCorner(nm, nm) = -tp.A_tilde.transpose();
    return H;
}

/// Frobenius norm of A~'P + PA~ - P R^{-1} P + Q~.
inline double riccati_residual(const TransformedProblem& tp, const Matrix& P) {
    if (P.rows() != tp.dim() || P.cols() != tp.dim())
        throw std::invalid_argument("riccati_residual: dimension mismatch");
    return (tp.A_tilde.transpose() * P + P * tp.A_tilde - P * tp.R_inv * P + tp.Q_tilde).norm();
}

namespace detail {

// Solution from an nm-dimensional H-invariant subspace [X; Y] with X
// invertible: P = Y X^{-1}, symmetrized after an asymmetry check.
inline std::optional<Matrix> solution_from_subspace(const TransformedProblem& tp,
                                                    const Matrix& basis, std::string* why) {
    const Index nm = tp.dim();
    const Matrix X = basis.topRows(nm);
    const Matrix Y = basis.bottomRows(nm);
    if (condition_number(X) > tol::graph_condition) {
        if (why) *why = "invariant subspace is not a graph (top block ill-conditioned)";
        return std::nullopt;
    }
    Matrix P = X.transpose().fullPivLu().solve(Y.transpose()).transpose();
    const double asym = (P - P.transpose()).norm();
    if (asym > 1e-6 * (1.0 + P.norm())) {
        if (why) *why = "subspace yields a non-symmetric candidate";
        return std::nullopt;
    }
    P = 0.5 * (P + P.transpose());
    if (riccati_residual(tp, P) > tol::riccati_residual * (1.0 + P.squaredNorm())) {
        if (why) *why = "candidate fails the Riccati residual bound";
        return std::nullopt;
    }
    return P;
}

inline std::optional<Matrix> dichotomy_solution(const TransformedProblem& tp, bool stable,
                                                std::string* why) {
    const Index nm = tp.dim();
    const Matrix H = build_hamiltonian(tp);
    const ComplexVector ev = spectrum(H);
    const double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
    const double axis = tol::hamiltonian_axis * scale;
    for (Index i = 0; i < ev.size(); ++i) {
        if (std::abs(ev(i).real()) <= axis) {
            if (why) *why = "Hamiltonian eigenvalue on the imaginary axis (no dichotomy)";
            return std::nullopt;
        }
    }
    OrderedSchur os;
    try {
        os = ordered_real_schur(
            H, [&](std::complex<double> lam) { return stable ? lam.real() < 0.0 : lam.real() > 0.0; });
    } catch (const std::runtime_error& e) {
        if (why) *why = e.what();
        return std::nullopt;
    }
    if (os.leading != nm) {
        if (why) *why = "spectral split does not halve the Hamiltonian spectrum";
        return std::nullopt;
    }
    auto P = solution_from_subspace(tp, os.U.leftCols(nm), why);
    if (!P) return std::nullopt;
    const double asym = (*P - P->transpose()).norm();
    if (asym > 1e-9 * (1.0 + P->norm())) {
        if (why) *why = "solution asymmetry above tolerance";
        return std::nullopt;
    }
    const double abscissa = spectral_abscissa(tp.A_tilde - tp.R_inv * *P);
    if (stable ? abscissa >= 0.0 : false) {
        if (why) *why = "closed loop of the dichotomy solution is not strictly stable";
        return std::nullopt;
    }
    return P;
}

}  // namespace detail

/// Stabilizing solution P_plus from the stable H-invariant subspace (ordered
/// real Schur); absent when H has imaginary-axis eigenvalues or the subspace
/// is not a graph.
inline std::optional<Matrix> stabilizing_solution(const TransformedProblem& tp,
                                                  std::string* why = nullptr) {
    return detail::dichotomy_solution(tp, /*stable=*/true, why);
}

/// Antistabilizing solution P_minus from the antistable subspace.
inline std::optional<Matrix> antistabilizing_solution(const TransformedProblem& tp,
                                                      std::string* why = nullptr) {
    return detail::dichotomy_solution(tp, /*stable=*/false, why);
}

struct TaggedSolution {
    Matrix P;
    ComplexVector closed_loop_spectrum;
    double residual = 0.0;
    double min_eigenvalue = 0.0;
    bool stabilizing = false;      // spectrum strictly left of +tol
    bool antistabilizing = false;  // spectrum right of -tol
    bool marginal = false;         // some closed-loop eigenvalue on the axis
    bool psd = false;
};

struct RiccatiSolutionSet {
    std::vector<TaggedSolution> solutions;
    std::optional<Matrix> P_minus;  // Loewner-minimal
    std::optional<Matrix> P_plus;   // Loewner-maximal
    std::optional<Matrix> P_circ;   // Loewner-minimal PSD
    bool exhaustive = false;
    std::vector<std::string> notes;
};

namespace detail {

inline void tag_solution(const TransformedProblem& tp, TaggedSolution& sol) {
    const Matrix closed = tp.A_tilde - tp.R_inv * sol.P;
    sol.closed_loop_spectrum = spectrum(closed);
    sol.residual = riccati_residual(tp, sol.P);
    sol.min_eigenvalue = min_eigenvalue_sym(sol.P);
    const double cl_scale = std::max(1.0, sol.closed_loop_spectrum.cwiseAbs().maxCoeff());
    const double cl_tol = 1e-9 * cl_scale;
    double max_re = -std::numeric_limits<double>::infinity();
    double min_re = std::numeric_limits<double>::infinity();
    sol.marginal = false;
    for (Index i = 0; i < sol.closed_loop_spectrum.size(); ++i) {
        const double re = sol.closed_loop_spectrum(i).real();
        max_re = std::max(max_re, re);
        min_re = std::min(min_re, re);
        if (std::abs(re) <= cl_tol) sol.marginal = true;
    }
    sol.stabilizing = max_re < cl_tol;
    sol.antistabilizing = min_re > -cl_tol;
    sol.psd = sol.min_eigenvalue >= -tol::psd;
}

// Phase-align a complex eigenvector so that its dominant entry is real, and
// return the real part (valid basis vector for a simple real eigenvalue).
inline Vector real_eigenvector(const ComplexVector& v) {
    Index imax = 0;
    v.cwiseAbs().maxCoeff(&imax);
    const std::complex<double> phase = v(imax) / std::abs(v(imax));
    return (v / phase).real();
}

}  // namespace detail

/// Enumerate symmetric solutions over the admissible selections of
/// Hamiltonian eigenvalues: one member of each (lambda, -lambda) pair,
/// conjugate pairs kept together so candidate subspaces stay real, and a
/// defective zero pair contributing its unique invariant line. Selections
/// whose subspace is not a graph yield no solution; `exhaustive` records
/// whether every selection was processed.
inline RiccatiSolutionSet enumerate_solutions(const TransformedProblem& tp, int cap = 8) {
    const Index nm = tp.dim();
    if (nm > cap)
        throw std::invalid_argument("enumerate_solutions: dimension above enumeration cap");

    RiccatiSolutionSet set;
    const Matrix H = build_hamiltonian(tp);
    Eigen::EigenSolver<Matrix> es(H);
    if (es.info() != Eigen::Success)
        throw std::runtime_error("enumerate_solutions: eigensolver failed");
    const ComplexVector ev = es.eigenvalues();
    const ComplexMatrix V = es.eigenvectors();
    const double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
    const double zero_tol = tol::hamiltonian_axis * scale;
    const double pair_tol = 1e-8 * scale;

    bool enumeration_ok = true;

    // Zero cluster: a defective pair has one admissible invariant line (the
    // kernel of H restricted to the cluster's invariant plane).
    std::vector<Index> zero_idx;
    for (Index i = 0; i < ev.size(); ++i)
        if (std::abs(ev(i)) <= zero_tol) zero_idx.push_back(i);

    Matrix zero_candidate(2 * nm, 0);
    if (!zero_idx.empty()) {
        if (zero_idx.size() != 2) {
            set.notes.push_back("zero eigenvalue cluster of dimension " +
                                std::to_string(zero_idx.size()) + ": enumeration unavailable");
            enumeration_ok = false;
        } else {
            OrderedSchur os;
            try {
                os = ordered_real_schur(
                    H, [&](std::complex<double> lam) { return std::abs(lam) <= zero_tol; });
            } catch (const std::runtime_error& e) {
                set.notes.push_back(std::string("zero cluster isolation failed: ") + e.what());
                enumeration_ok = false;
            }
            if (enumeration_ok && os.leading != 2) {
                set.notes.push_back("zero cluster isolation found dimension " +
                                    std::to_string(os.leading));
                enumeration_ok = false;
            }
            if (enumeration_ok) {
                const Matrix G = os.U.leftCols(2);
                const Matrix Hg = G.transpose() * H * G;
                if (Hg.norm() <= zero_tol) {
                    set.notes.push_back(
                        "semisimple zero plane of the Hamiltonian: solution family is a continuum");
                    enumeration_ok = false;
                } else {
                    Eigen::JacobiSVD<Matrix> svd(Hg, Eigen::ComputeFullV);
                    zero_candidate = G * svd.matrixV().col(1);
                }
            }
        }
    }

    // Pair groups among the nonzero eigenvalues, keyed by the representative
    // with positive real part (and nonnegative imaginary part).
    struct PairGroup {
        std::complex<double> rep;
        Matrix plus_basis;   // real basis of the subspace for {rep (,conj)}
        Matrix minus_basis;  // real basis for the negated pair
    };
    std::vector<PairGroup> groups;

    if (enumeration_ok) {
        std::vector<char> used(ev.size(), 0);
        for (Index i : zero_idx) used[i] = 1;

        auto find_match = [&](std::complex<double> target, bool& ambiguous) -> Index {
            Index found = -1;
            for (Index j = 0; j < ev.size(); ++j) {
                if (used[j]) continue;
                if (std::abs(ev(j) - target) <= pair_tol) {
                    if (found >= 0) {
                        ambiguous = true;
                        return found;
                    }
                    found = j;
                }
            }
            return found;
        };

        for (Index i = 0; i < ev.size() && enumeration_ok; ++i) {
            if (used[i]) continue;
            const std::complex<double> lam = ev(i);
            if (std::abs(lam.real()) <= zero_tol) {
                set.notes.push_back("pure imaginary Hamiltonian eigenvalue: no real dichotomy of the pair");
                enumeration_ok = false;
                break;
            }
            if (lam.real() < 0.0) continue;  // will be claimed by its positive partner
            if (lam.imag() < -pair_tol) continue;

            used[i] = 1;
            bool ambiguous = false;
            PairGroup g;
            g.rep = lam;
            if (std::abs(lam.imag()) <= pair_tol) {
                const Index j = find_match(-lam, ambiguous);
                if (j < 0 || ambiguous) {
                    set.notes.push_back("eigenvalue pairing failed (repeated or unmatched values)");
                    enumeration_ok = false;
                    break;
                }
                used[j] = 1;
                g.plus_basis = detail::real_eigenvector(V.col(i));
                g.minus_basis = detail::real_eigenvector(V.col(j));
            } else {
                const Index ic = find_match(std::conj(lam), ambiguous);
                Index jneg = find_match(-lam, ambiguous);
                if (jneg < 0) jneg = find_match(-std::conj(lam), ambiguous);
                Index jneg_conj = -1;
                if (jneg >= 0) {
                    used[jneg] = 1;
                    jneg_conj = find_match(std::conj(ev(jneg)), ambiguous);
                }
                if (ic < 0 || jneg < 0 || jneg_conj < 0 || ambiguous) {
                    set.notes.push_back("eigenvalue pairing failed (repeated or unmatched values)");
                    enumeration_ok = false;
                    break;
                }
                used[ic] = 1;
                used[jneg_conj] = 1;
                g.plus_basis.resize(2 * nm, 2);
                g.plus_basis.col(0) = V.col(i).real();
                g.plus_basis.col(1) = V.col(i).imag();
                g.minus_basis.resize(2 * nm, 2);
                g.minus_basis.col(0) = V.col(jneg).real();
                g.minus_basis.col(1) = V.col(jneg).imag();
            }
            groups.push_back(std::move(g));
        }

        // Distinct representatives keep every selection well defined.
        for (std::size_t a = 0; a + 1 < groups.size() && enumeration_ok; ++a) {
            for (std::size_t b = a + 1; b < groups.size(); ++b) {
                if (std::abs(groups[a].rep - groups[b].rep) <= pair_tol) {
                    set.notes.push_back("repeated Hamiltonian eigenvalues beyond pairing tolerance");
                    enumeration_ok = false;
                    break;
                }
            }
        }
    }

    if (enumeration_ok) {
        const std::size_t n_sel = std::size_t{1} << groups.size();
        for (std::size_t mask = 0; mask < n_sel; ++mask) {
            Matrix basis(2 * nm, nm);
            Index col = 0;
            if (zero_candidate.cols() > 0) {
                basis.middleCols(col, zero_candidate.cols()) = zero_candidate;
                col += zero_candidate.cols();
            }
            for (std::size_t gi = 0; gi < groups.size(); ++gi) {
                const Matrix& chosen =
                    (mask >> gi) & 1u ? groups[gi].minus_basis : groups[gi].plus_basis;
                basis.middleCols(col, chosen.cols()) = chosen;
                col += chosen.cols();
            }
            if (col != nm) {
                set.notes.push_back("selection dimension mismatch; enumeration aborted");
                enumeration_ok = false;
                break;
            }
            const Matrix ortho =
                Eigen::HouseholderQR<Matrix>(basis).householderQ() * Matrix::Identity(2 * nm, nm);
            auto P = detail::solution_from_subspace(tp, ortho, nullptr);
            if (!P) continue;
            bool dup = false;
            for (const auto& s : set.solutions) {
                if ((s.P - *P).norm() <= tol::dedup * std::max(1.0, P->norm())) {
                    dup = true;
                    break;
                }
            }
            if (dup) continue;
            TaggedSolution sol;
            sol.P = *P;
            detail::tag_solution(tp, sol);
            set.solutions.push_back(std::move(sol));
        }
        set.exhaustive = enumeration_ok;
    }

    // Loewner extremes over the listed solutions.
    auto extremal = [&](bool maximal) -> std::optional<Matrix> {
        for (const auto& cand : set.solutions) {
            bool ok = true;
            for (const auto& other : set.solutions) {
                const Matrix diff = maximal ? cand.P - other.P : other.P - cand.P;
                if (min_eigenvalue_sym(diff) < -1e-8) {
                    ok = false;
                    break;
                }
            }
            if (ok) return cand.P;
        }
        return std::nullopt;
    };
    if (!set.solutions.empty()) {
        set.P_plus = extremal(true);
        set.P_minus = extremal(false);
    }

    // Cross-check against the Schur dichotomy when both paths produce a value,
    // and fall back to it when the enumeration could not run.
    std::string why;
    if (auto Pp = stabilizing_solution(tp, &why)) {
        if (set.P_plus) {
            if ((*set.P_plus - *Pp).norm() > 1e-8 * std::max(1.0, Pp->norm()))
                set.notes.push_back("dichotomy/enumeration disagree on the maximal solution");
        } else {
            set.P_plus = Pp;
            set.notes.push_back("maximal solution taken from the Schur dichotomy");
        }
    }
    if (auto Pm = antistabilizing_solution(tp, &why)) {
        if (set.P_minus) {
            if ((*set.P_minus - *Pm).norm() > 1e-8 * std::max(1.0, Pm->norm()))
                set.notes.push_back("dichotomy/enumeration disagree on the minimal solution");
        } else {
            set.P_minus = Pm;
            set.notes.push_back("minimal solution taken from the Schur dichotomy");
        }
    }

    if (set.exhaustive) {
        std::optional<Matrix> best;
        for (const auto& s : set.solutions) {
            if (!s.psd) continue;
            bool minimal = true;
            for (const auto& other : set.solutions) {
                if (!other.psd) continue;
                if (min_eigenvalue_sym(other.P - s.P) < -1e-8) {
                    minimal = false;
                    break;
                }
            }
            if (minimal) {
                best = s.P;
                break;
            }
        }
        set.P_circ = best;
    }
    return set;
}

/// Loewner-minimal PSD solution of an exhaustively enumerated set; absent when
/// no PSD solution exists. PSD solutions without a Loewner minimum are a
/// structural failure and throw.
inline std::optional<Matrix> smallest_psd_solution(const RiccatiSolutionSet& set) {
    if (!set.exhaustive)
        throw std::invalid_argument("smallest_psd_solution: requires an exhaustive enumeration");
    bool any_psd = false;
    for (const auto& s : set.solutions) any_psd = any_psd || s.psd;
    if (!any_psd) return std::nullopt;
    if (!set.P_circ)
        throw std::runtime_error(
            "smallest_psd_solution: PSD solutions are Loewner-incomparable (no minimum)");
    // Pairwise minimality re-verified against every listed PSD solution.
    for (const auto& s : set.solutions) {
        if (!s.psd) continue;
        if (min_eigenvalue_sym(s.P - *set.P_circ) < -1e-8)
            throw std::runtime_error("smallest_psd_solution: recorded minimum fails verification");
    }
    return set.P_circ;
}

}  // namespace reclqr
