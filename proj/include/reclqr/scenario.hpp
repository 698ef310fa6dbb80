#pragma once

#include <reclqr/io_json.hpp>
#include <reclqr/riccati.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

namespace reclqr {

struct SimulationSpec {
    Vector x0;
    double T = 10.0;
    double dt = 1e-3;
};

/// A fully assembled scenario: model, vectorized system, stage cost, and the
/// simulation window, as loaded from a JSON config.
struct Scenario {
    DirectedGraph graph;
    OpinionModel model;
    VectorizedSystem sys;
    PerformanceWeights weights;
    StageCostMatrices mats;
    SimulationSpec sim;
    std::string output_dir = "out";
};

namespace detail {

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open file: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Whitespace matrix file: one row per line, '#' comments.
inline Matrix read_matrix_text(const std::filesystem::path& path) {
    std::istringstream in(read_file(path));
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        std::vector<double> row;
        double v;
        while (ls >> v) row.push_back(v);
        if (!row.empty()) rows.push_back(std::move(row));
    }
    if (rows.empty()) throw std::invalid_argument("matrix file is empty: " + path.string());
    Matrix m(rows.size(), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != rows.front().size())
            throw std::invalid_argument("matrix file has ragged rows: " + path.string());
        for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
    }
    return m;
}

inline Matrix matrix_field(const json& j, const std::filesystem::path& base) {
    if (j.is_string()) return read_matrix_text(base / j.get<std::string>());
    if (!j.is_array() || j.empty() || !j[0].is_array())
        throw std::invalid_argument("matrix field must be an array of rows or a file path");
    Matrix m(j.size(), j[0].size());
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (j[i].size() != j[0].size())
            throw std::invalid_argument("matrix field has ragged rows");
        for (std::size_t k = 0; k < j[i].size(); ++k) m(i, k) = j[i][k].get<double>();
    }
    return m;
}

// Scalars broadcast to a full vector, matching the homogeneous-weight setups.
inline Vector broadcast_field(const json& j, Index len, const char* name) {
    Vector v(len);
    if (j.is_number()) {
        v.setConstant(j.get<double>());
    } else if (j.is_array()) {
        if (static_cast<Index>(j.size()) != len)
            throw std::invalid_argument(std::string(name) + ": expected length " +
                                        std::to_string(len));
        for (Index i = 0; i < len; ++i) v(i) = j[static_cast<std::size_t>(i)].get<double>();
    } else {
        throw std::invalid_argument(std::string(name) + ": expected a number or an array");
    }
    if (!v.allFinite()) throw std::invalid_argument(std::string(name) + ": non-finite entries");
    return v;
}

}  // namespace detail

inline PerformanceWeights weights_from_json(const json& j, Index nm) {
    PerformanceWeights w;
    w.w_D = detail::broadcast_field(j.at("w_D"), nm, "weights.w_D");
    w.w_P = detail::broadcast_field(j.at("w_P"), nm, "weights.w_P");
    w.w_EN = detail::broadcast_field(j.at("w_EN"), nm, "weights.w_EN");
    w.w_EX = detail::broadcast_field(j.at("w_EX"), nm, "weights.w_EX");
    w.alpha_F = j.value("alpha_F", 0.0);
    validate_weights(w);
    return w;
}

inline Scenario load_scenario(const std::string& config_path) {
    namespace fs = std::filesystem;
    const fs::path path(config_path);
    const fs::path base = path.has_parent_path() ? path.parent_path() : fs::path(".");

    json cfg;
    try {
        cfg = json::parse(detail::read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw std::invalid_argument(std::string("config parse error: ") + e.what());
    }

    Scenario sc;
    const fs::path graph_path = base / cfg.at("graph").get<std::string>();
    if (!fs::exists(graph_path))
        throw std::invalid_argument("graph file does not exist: " + graph_path.string());
    sc.graph = load_graph(detail::read_file(graph_path));
    const auto laplacians = balance(sc.graph);

    const Matrix C = detail::matrix_field(cfg.at("C"), base);
    if (C.rows() != C.cols()) throw std::invalid_argument("C must be square");
    const int n = sc.graph.n;
    const int m = static_cast<int>(C.rows());

    const Vector A_a = detail::broadcast_field(cfg.at("A_a"), n, "A_a");
    Matrix X_anchor;
    if (cfg.at("X_anchor").is_number()) {
        X_anchor = Matrix::Constant(n, m, cfg.at("X_anchor").get<double>());
    } else {
        X_anchor = detail::matrix_field(cfg.at("X_anchor"), base);
        if (X_anchor.rows() != n || X_anchor.cols() != m)
            throw std::invalid_argument("X_anchor must be n x m");
    }
    if (!X_anchor.allFinite()) throw std::invalid_argument("X_anchor: non-finite entries");

    sc.model = make_opinion_model(laplacians, C, A_a, X_anchor);
    sc.sys = assemble_system(sc.model);

    const Index nm = sc.sys.dim();
    sc.weights = weights_from_json(cfg.at("weights"), nm);
    sc.mats = assemble_stage_cost(sc.weights, sc.model.laplacians, sc.sys);

    if (cfg.contains("simulation")) {
        const auto& sj = cfg.at("simulation");
        sc.sim.x0 = sj.contains("x0") ? detail::broadcast_field(sj.at("x0"), nm, "simulation.x0")
                                      : sc.sys.x_eq;
        sc.sim.T = sj.value("T", 10.0);
        sc.sim.dt = sj.value("dt", 1e-3);
        if (!(sc.sim.T > 0.0) || !(sc.sim.dt > 0.0) || sc.sim.dt > sc.sim.T)
            throw std::invalid_argument("simulation: require 0 < dt <= T");
    } else {
        sc.sim.x0 = sc.sys.x_eq;
    }
    sc.output_dir = cfg.value("output", std::string("out"));
    return sc;
}

}  // namespace reclqr
