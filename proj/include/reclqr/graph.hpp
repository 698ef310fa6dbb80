#pragma once

#include <reclqr/linalg.hpp>

#include <cstddef>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace reclqr {

/// Directed weighted graph over agents, 0-based indices internally.
struct DirectedGraph {
    struct Edge {
        int source = 0;
        int target = 0;
        double weight = 0.0;
    };

    int n = 0;
    std::vector<Edge> edges;
};

/// Laplacian of the graph together with the Laplacian of its weight-balanced
/// reweighting L_b = diag(w) * L and the balancing weights w.
struct LaplacianPair {
    Matrix L;
    Matrix L_b;
    Vector balancing_weights;
};

inline void validate_graph(const DirectedGraph& g) {
    if (g.n <= 0) throw std::invalid_argument("graph: agent count must be positive");
    std::set<std::pair<int, int>> seen;
    for (const auto& e : g.edges) {
        if (e.source < 0 || e.source >= g.n || e.target < 0 || e.target >= g.n)
            throw std::invalid_argument("graph: edge index out of range");
        if (e.source == e.target)
            throw std::invalid_argument("graph: self-loops are not allowed");
        if (!(e.weight > 0.0))
            throw std::invalid_argument("graph: edge weights must be strictly positive");
        if (!seen.insert({e.source, e.target}).second)
            throw std::invalid_argument("graph: duplicate edge");
    }
}

// Edge-list text: header "n <count>", then lines "i j w" with 1-based
// indices; '#' starts a comment.
inline DirectedGraph load_graph(const std::string& text) {
    DirectedGraph g;
    std::istringstream in(text);
    std::string line;
    bool have_n = false;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        std::string first;
        if (!(ls >> first)) continue;
        if (first == "n") {
            if (have_n) throw std::invalid_argument("graph: repeated header line");
            if (!(ls >> g.n)) throw std::invalid_argument("graph: malformed header line");
            have_n = true;
            continue;
        }
        if (!have_n)
            throw std::invalid_argument("graph: edge before header line 'n <count>'");
        DirectedGraph::Edge e;
        int i = 0, j = 0;
        std::istringstream es(line);
        if (!(es >> i >> j >> e.weight)) {
            throw std::invalid_argument("graph: parse failure at line " + std::to_string(lineno));
        }
        std::string trailing;
        if (es >> trailing)
            throw std::invalid_argument("graph: trailing tokens at line " + std::to_string(lineno));
        e.source = i - 1;
        e.target = j - 1;
        g.edges.push_back(e);
    }
    if (!have_n) throw std::invalid_argument("graph: missing header line 'n <count>'");
    validate_graph(g);
    return g;
}

// L_ii = sum of out-weights, L_ij = -w_ij; rows sum to zero by construction.
inline Matrix laplacian(const DirectedGraph& g) {
    validate_graph(g);
    Matrix L = Matrix::Zero(g.n, g.n);
    for (const auto& e : g.edges) {
        L(e.source, e.target) -= e.weight;
        L(e.source, e.source) += e.weight;
    }
    return L;
}

inline bool is_strongly_connected(const DirectedGraph& g) {
    validate_graph(g);
    if (g.n == 1) return true;
    std::vector<std::vector<int>> fwd(g.n), rev(g.n);
    for (const auto& e : g.edges) {
        fwd[e.source].push_back(e.target);
        rev[e.target].push_back(e.source);
    }
    auto reaches_all = [&](const std::vector<std::vector<int>>& adj) {
        std::vector<char> seen(g.n, 0);
        std::vector<int> stack{0};
        seen[0] = 1;
        int count = 1;
        while (!stack.empty()) {
            const int v = stack.back();
            stack.pop_back();
            for (int w : adj[v]) {
                if (!seen[w]) {
                    seen[w] = 1;
                    ++count;
                    stack.push_back(w);
                }
            }
        }
        return count == g.n;
    };
    return reaches_all(fwd) && reaches_all(rev);
}

// Balance the graph by diagonal left-scaling: find w > 0 with w^T L = 0
// (one-dimensional left kernel for strongly connected graphs), normalize the
// smallest entry to 1, and set L_b = diag(w) L. Row sums of L_b are zero
// because rows of L sum to zero; column sums are w^T L = 0.
inline LaplacianPair balance(const DirectedGraph& g) {
    if (!is_strongly_connected(g))
        throw std::invalid_argument("balance: graph must be strongly connected");
    const Matrix L = laplacian(g);
    const int n = g.n;

    Vector w;
    if (n == 1) {
        w = Vector::Ones(1);
    } else {
        Eigen::EigenSolver<Matrix> es(L.transpose());
        if (es.info() != Eigen::Success) throw std::runtime_error("balance: eigensolver failed");
        Index best = 0;
        es.eigenvalues().cwiseAbs().minCoeff(&best);
        w = es.eigenvectors().col(best).real().cwiseAbs();
        const double wmax = w.maxCoeff();
        if (w.minCoeff() <= 1e-12 * wmax)
            throw std::runtime_error("balance: computed balancing vector has a nonpositive entry");
        w /= w.minCoeff();
    }

    LaplacianPair out;
    out.L = L;
    out.L_b = w.asDiagonal() * L;
    out.balancing_weights = w;

    const double col_residual = (out.L_b.colwise().sum()).cwiseAbs().maxCoeff();
    const double scale = std::max(1.0, out.L_b.cwiseAbs().maxCoeff());
    if (col_residual > tol::balance_residual * scale)
        throw std::runtime_error("balance: column-sum residual above tolerance");
    return out;
}

}  // namespace reclqr
