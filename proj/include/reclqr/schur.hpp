#pragma once

#include <reclqr/linalg.hpp>

#include <functional>
#include <utility>

namespace reclqr {

/// Real Schur form T = U^T A U with selected eigenvalues moved to the leading
/// block; `leading` is the dimension of the corresponding invariant subspace,
/// spanned by the first `leading` columns of U.
struct OrderedSchur {
    Matrix T;
    Matrix U;
    Index leading = 0;
};

namespace detail {

inline bool block_boundary_zero(const Matrix& T, Index r, double scale) {
    return std::abs(T(r + 1, r)) <= 1e-12 * scale;
}

// Diagonal blocks (start, size) of a real quasi-triangular matrix.
inline std::vector<std::pair<Index, Index>> schur_blocks(const Matrix& T) {
    std::vector<std::pair<Index, Index>> blocks;
    const double scale = std::max(1.0, T.norm());
    Index r = 0;
    while (r < T.rows()) {
        Index p = 1;
        if (r + 1 < T.rows() && !block_boundary_zero(T, r, scale)) p = 2;
        blocks.emplace_back(r, p);
        r += p;
    }
    return blocks;
}

// Eigenvalue of a diagonal block; for a 2x2 block the member of the complex
// pair with nonnegative imaginary part (complex by Schur construction, but a
// real pair is handled for robustness).
inline std::complex<double> block_eigenvalue(const Matrix& T, Index start, Index size) {
    if (size == 1) return {T(start, start), 0.0};
    const double a = T(start, start), b = T(start, start + 1);
    const double c = T(start + 1, start), d = T(start + 1, start + 1);
    const double mean = 0.5 * (a + d);
    const double disc = 0.25 * (a - d) * (a - d) + b * c;
    if (disc >= 0.0) return {mean + std::sqrt(disc), 0.0};
    return {mean, std::sqrt(-disc)};
}

// Swap the adjacent diagonal blocks T[i..i+p) and T[i+p..i+p+q) by an
// orthogonal similarity, updating T and accumulating into U.
// Direct-swap construction: the columns of [X; I_q] with T11 X - X T22 = -T12
// span the T22-invariant subspace of the 2x2 block matrix; its QR factor
// rotates that subspace to the front.
inline bool swap_adjacent_blocks(Matrix& T, Matrix& U, Index i, Index p, Index q) {
    const Index n = T.rows();
    const Index w = p + q;
    const Matrix T11 = T.block(i, i, p, p);
    const Matrix T12 = T.block(i, i + p, p, q);
    const Matrix T22 = T.block(i + p, i + p, q, q);

    Matrix W;  // orthogonal, w x w
    if (p == 1 && q == 1) {
        // Rotation onto the eigenvector [b, d-a] of the trailing eigenvalue.
        const double b = T12(0, 0);
        const double da = T22(0, 0) - T11(0, 0);
        const double r = std::hypot(b, da);
        if (r <= 1e-300) return true;  // equal blocks, nothing to swap
        W.resize(2, 2);
        W << b / r, -da / r, da / r, b / r;
    } else {
        // Sylvester system (I_q (x) T11 - T22^T (x) I_p) vec(X) = -vec(T12).
        Matrix S = Matrix::Zero(p * q, p * q);
        Vector rhs(p * q);
        for (Index col = 0; col < q; ++col) {
            for (Index row = 0; row < p; ++row) {
                const Index k = col * p + row;
                rhs(k) = -T12(row, col);
                for (Index r2 = 0; r2 < p; ++r2) S(k, col * p + r2) += T11(row, r2);
                for (Index c2 = 0; c2 < q; ++c2) S(k, c2 * p + row) -= T22(c2, col);
            }
        }
        Eigen::FullPivLU<Matrix> lu(S);
        if (!lu.isInvertible()) return false;
        const Vector xv = lu.solve(rhs);
        Matrix X(p, q);
        for (Index col = 0; col < q; ++col)
            for (Index row = 0; row < p; ++row) X(row, col) = xv(col * p + row);

        Matrix stacked(w, q);
        stacked.topRows(p) = X;
        stacked.bottomRows(q) = Matrix::Identity(q, q);
        Eigen::HouseholderQR<Matrix> qr(stacked);
        W = qr.householderQ();
    }

    Matrix M(w, w);
    M.setZero();
    M.topLeftCorner(p, p) = T11;
    M.topRightCorner(p, q) = T12;
    M.bottomRightCorner(q, q) = T22;
    const Matrix Ms = W.transpose() * M * W;
    const double residual = Ms.bottomLeftCorner(p, q).norm();
    if (residual > 1e-8 * std::max(1.0, M.norm())) return false;

    T.block(i, i, w, n - i) = W.transpose() * T.block(i, i, w, n - i);
    T.block(0, i, i + w, w) = T.block(0, i, i + w, w) * W;
    T.block(i, i, w, w) = Ms;
    T.block(i + q, i, p, q).setZero();
    U.middleCols(i, w) = U.middleCols(i, w) * W;
    return true;
}

}  // namespace detail

/// Reorder a real Schur form in place so that all diagonal blocks whose
/// eigenvalue satisfies `select` come first. Returns the selected dimension.
/// Throws when an adjacent swap fails (eigenvalues too close to separate).
inline Index reorder_schur(Matrix& T, Matrix& U,
                           const std::function<bool(std::complex<double>)>& select) {
    auto blocks = detail::schur_blocks(T);
    Index top = 0;       // block index boundary of the selected cluster
    Index selected = 0;  // accumulated dimension
    for (std::size_t k = 0; k < blocks.size(); ++k) {
        const auto ev = detail::block_eigenvalue(T, blocks[k].first, blocks[k].second);
        if (!select(ev)) continue;
        selected += blocks[k].second;
        for (std::size_t j = k; j > static_cast<std::size_t>(top); --j) {
            const Index i = blocks[j - 1].first;
            const Index p = blocks[j - 1].second;
            const Index q = blocks[j].second;
            if (!detail::swap_adjacent_blocks(T, U, i, p, q))
                throw std::runtime_error("schur reorder: block swap failed (clustered eigenvalues)");
            blocks[j - 1].second = q;
            blocks[j].first = i + q;
            blocks[j].second = p;
        }
        ++top;
    }
    return selected;
}

inline OrderedSchur ordered_real_schur(const Matrix& A,
                                       const std::function<bool(std::complex<double>)>& select) {
    Eigen::RealSchur<Matrix> schur(A);
    if (schur.info() != Eigen::Success) throw std::runtime_error("real Schur decomposition failed");
    OrderedSchur out;
    out.T = schur.matrixT();
    out.U = schur.matrixU();
    out.leading = reorder_schur(out.T, out.U, select);
    return out;
}

/// Eigenvalues read off the diagonal blocks (conjugate pairs listed together).
inline ComplexVector schur_eigenvalues(const Matrix& T) {
    ComplexVector ev(T.rows());
    Index k = 0;
    for (const auto& [start, size] : detail::schur_blocks(T)) {
        const auto lam = detail::block_eigenvalue(T, start, size);
        if (size == 1) {
            ev(k++) = lam;
        } else {
            ev(k++) = lam;
            ev(k++) = std::conj(lam);
        }
    }
    return ev;
}

}  // namespace reclqr
