#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

namespace reclqr {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using ComplexVector = Eigen::VectorXcd;
using ComplexMatrix = Eigen::MatrixXcd;
using Index = Eigen::Index;

namespace tol {
// Default classification tolerance for the sign of eigenvalues of Q-tilde;
// overridable via RECLQR_TOL at the CLI level.
inline constexpr double classification = 1e-9;
// Relative Frobenius bound on the Riccati residual of an accepted solution.
inline constexpr double riccati_residual = 1e-8;
// Absolute bound on the minimum eigenvalue of a solution still counted PSD.
inline constexpr double psd = 1e-8;
// Two enumerated solutions closer than this are the same solution.
inline constexpr double dedup = 1e-7;
// Hamiltonian eigenvalues within this (times scale) of the imaginary axis
// block the Schur dichotomy; a defective zero pair shows up at ~sqrt(eps).
inline constexpr double hamiltonian_axis = 1e-7;
// Residual threshold on the balanced Laplacian's column sums.
inline constexpr double balance_residual = 1e-9;
// Maximum condition number of the top block of a graph subspace.
inline constexpr double graph_condition = 1e10;
}  // namespace tol

inline Matrix kron(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Index i = 0; i < a.rows(); ++i)
        for (Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

inline ComplexVector spectrum(const Matrix& m) {
    Eigen::EigenSolver<Matrix> es(m, /*computeEigenvectors=*/false);
    if (es.info() != Eigen::Success) throw std::runtime_error("eigenvalue solver failed");
    return es.eigenvalues();
}

inline double spectral_abscissa(const Matrix& m) {
    return spectrum(m).real().maxCoeff();
}

inline double spectral_radius_bound(const Matrix& m) {
    const ComplexVector ev = spectrum(m);
    return ev.cwiseAbs().maxCoeff();
}

inline bool is_hurwitz(const Matrix& m, double margin = 0.0) {
    return spectral_abscissa(m) < -margin;
}

// Eigenvalues of a symmetric matrix, ascending.
inline Vector symmetric_eigenvalues(const Matrix& m) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (m + m.transpose()),
                                             Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw std::runtime_error("symmetric eigensolver failed");
    return es.eigenvalues();
}

inline double min_eigenvalue_sym(const Matrix& m) {
    return symmetric_eigenvalues(m).minCoeff();
}

// min eig(a - b) >= -slack, i.e. a is Loewner-greater up to slack.
inline bool loewner_geq(const Matrix& a, const Matrix& b, double slack) {
    return min_eigenvalue_sym(a - b) >= -slack;
}

// Orthonormal basis of the numerical kernel: right singular vectors whose
// singular value is <= rel_tol * max(sigma_max, floor).
inline Matrix kernel_basis(const Matrix& m, double rel_tol = 1e-9, double floor = 1.0) {
    if (m.size() == 0) return Matrix::Identity(m.cols(), m.cols());
    Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    const double cut = rel_tol * std::max(sv.size() > 0 ? sv(0) : 0.0, floor);
    Index rank = 0;
    for (Index i = 0; i < sv.size(); ++i)
        if (sv(i) > cut) ++rank;
    return svd.matrixV().rightCols(m.cols() - rank);
}

inline Index numerical_rank(const Matrix& m, double rel_tol = 1e-9, double floor = 0.0) {
    if (m.size() == 0) return 0;
    Eigen::JacobiSVD<Matrix> svd(m);
    const auto& sv = svd.singularValues();
    const double cut = rel_tol * std::max(sv.size() > 0 ? sv(0) : 0.0, floor);
    Index rank = 0;
    for (Index i = 0; i < sv.size(); ++i)
        if (sv(i) > cut) ++rank;
    return rank;
}

// Orthonormal basis of the column span.
inline Matrix range_basis(const Matrix& m, double rel_tol = 1e-9) {
    if (m.cols() == 0) return Matrix(m.rows(), 0);
    Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeFullU);
    const auto& sv = svd.singularValues();
    const double cut = rel_tol * std::max(sv.size() > 0 ? sv(0) : 0.0, 1e-300);
    Index rank = 0;
    for (Index i = 0; i < sv.size(); ++i)
        if (sv(i) > cut) ++rank;
    return svd.matrixU().leftCols(rank);
}

// Intersection of two column spans given orthonormal bases: the common kernel
// of the two orthogonal-complement projectors.
inline Matrix subspace_intersection(const Matrix& v1, const Matrix& v2, double rel_tol = 1e-9) {
    const Index n = v1.rows();
    if (v1.cols() == 0 || v2.cols() == 0) return Matrix(n, 0);
    Matrix stacked(2 * n, n);
    stacked.topRows(n) = Matrix::Identity(n, n) - v1 * v1.transpose();
    stacked.bottomRows(n) = Matrix::Identity(n, n) - v2 * v2.transpose();
    return kernel_basis(stacked, rel_tol);
}

inline double condition_number(const Matrix& m) {
    Eigen::JacobiSVD<Matrix> svd(m);
    const auto& sv = svd.singularValues();
    if (sv.size() == 0 || sv(sv.size() - 1) <= 0.0) return std::numeric_limits<double>::infinity();
    return sv(0) / (sv(sv.size() - 1));
}

inline std::vector<std::complex<double>> to_std(const ComplexVector& v) {
    return {v.data(), v.data() + v.size()};
}

}  // namespace reclqr
