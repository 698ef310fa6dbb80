#pragma once

#include <reclqr/graph.hpp>
#include <reclqr/reference_examples.hpp>
#include <reclqr/synthesis.hpp>

#include <json.hpp>

#include <fstream>
#include <ostream>

namespace reclqr {

// Insertion-ordered JSON keeps output byte-stable across runs.
using json = nlohmann::ordered_json;

inline json matrix_to_json(const Matrix& m) {
    json out;
    out["rows"] = m.rows();
    out["cols"] = m.cols();
    json data = json::array();
    for (Index i = 0; i < m.rows(); ++i)
        for (Index j = 0; j < m.cols(); ++j) data.push_back(m(i, j));
    out["data"] = data;
    return out;
}

inline Matrix matrix_from_json(const json& j) {
    const Index rows = j.at("rows").get<Index>();
    const Index cols = j.at("cols").get<Index>();
    const auto& data = j.at("data");
    if (static_cast<Index>(data.size()) != rows * cols)
        throw std::invalid_argument("matrix json: data length does not match dims");
    Matrix m(rows, cols);
    Index k = 0;
    for (Index i = 0; i < rows; ++i)
        for (Index jj = 0; jj < cols; ++jj) m(i, jj) = data[k++].get<double>();
    return m;
}

inline json vector_to_json(const Vector& v) {
    json out = json::array();
    for (Index i = 0; i < v.size(); ++i) out.push_back(v(i));
    return out;
}

inline Vector vector_from_json(const json& j) {
    Vector v(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Index>(i)) = j[i].get<double>();
    return v;
}

inline json spectrum_to_json(const ComplexVector& ev) {
    json out = json::array();
    for (Index i = 0; i < ev.size(); ++i)
        out.push_back(json{{"re", ev(i).real()}, {"im", ev(i).imag()}});
    return out;
}

inline json verdict_to_json(const WellPosednessVerdict& v) {
    json out;
    out["regime"] = to_string(v.regime);
    out["min_eig_Q_tilde"] = v.min_eig_Qtilde;
    out["spectral_margin"] = v.spectral_margin;
    out["boundary"] = v.boundary;
    if (v.detectable)
        out["detectable"] = *v.detectable;
    else
        out["detectable"] = nullptr;
    out["certificates"] = v.certificates;
    return out;
}

inline json controller_to_json(const Controller& c) {
    json out;
    out["regime"] = to_string(c.regime);
    out["exists"] = c.exists;
    out["unique"] = c.unique;
    out["K"] = c.K.size() ? matrix_to_json(c.K) : json(nullptr);
    out["b"] = c.b.size() ? vector_to_json(c.b) : json(nullptr);
    out["K_v"] = c.K_v.size() ? matrix_to_json(c.K_v) : json(nullptr);
    out["P_used"] = c.P_used.size() ? matrix_to_json(c.P_used) : json(nullptr);
    out["closed_loop"] = c.closed_loop.size() ? matrix_to_json(c.closed_loop) : json(nullptr);
    out["closed_loop_spectrum"] = c.closed_loop_spectrum.size()
                                      ? spectrum_to_json(c.closed_loop_spectrum)
                                      : json(nullptr);
    out["offending_directions"] = c.offending_directions.cols()
                                      ? matrix_to_json(c.offending_directions)
                                      : json(nullptr);
    out["notes"] = c.notes;
    return out;
}

inline Controller controller_from_json(const json& j) {
    Controller c;
    const std::string regime = j.at("regime").get<std::string>();
    if (regime == "strictly_convex") c.regime = Regime::StrictlyConvex;
    else if (regime == "semidefinite_detectable") c.regime = Regime::SemidefiniteDetectable;
    else if (regime == "semidefinite_undetectable") c.regime = Regime::SemidefiniteUndetectable;
    else if (regime == "indefinite") c.regime = Regime::Indefinite;
    else throw std::invalid_argument("controller json: unknown regime " + regime);
    c.exists = j.at("exists").get<bool>();
    c.unique = j.at("unique").get<bool>();
    if (!j.at("K").is_null()) c.K = matrix_from_json(j.at("K"));
    if (!j.at("b").is_null()) c.b = vector_from_json(j.at("b"));
    if (!j.at("K_v").is_null()) c.K_v = matrix_from_json(j.at("K_v"));
    if (!j.at("P_used").is_null()) c.P_used = matrix_from_json(j.at("P_used"));
    if (!j.at("closed_loop").is_null()) c.closed_loop = matrix_from_json(j.at("closed_loop"));
    if (j.contains("notes")) c.notes = j.at("notes").get<std::vector<std::string>>();
    return c;
}

inline json solution_set_to_json(const RiccatiSolutionSet& set) {
    json out;
    json sols = json::array();
    for (const auto& s : set.solutions) {
        json js;
        js["P"] = matrix_to_json(s.P);
        js["closed_loop_spectrum"] = spectrum_to_json(s.closed_loop_spectrum);
        js["residual"] = s.residual;
        js["min_eigenvalue"] = s.min_eigenvalue;
        js["stabilizing"] = s.stabilizing;
        js["antistabilizing"] = s.antistabilizing;
        js["marginal"] = s.marginal;
        js["psd"] = s.psd;
        sols.push_back(js);
    }
    out["solutions"] = sols;
    out["exhaustive"] = set.exhaustive;
    out["P_minus"] = set.P_minus ? matrix_to_json(*set.P_minus) : json(nullptr);
    out["P_plus"] = set.P_plus ? matrix_to_json(*set.P_plus) : json(nullptr);
    out["P_circ"] = set.P_circ ? matrix_to_json(*set.P_circ) : json(nullptr);
    // Pairwise Loewner order: loewner_leq[i][j] says solution i <= solution j.
    json order = json::array();
    for (const auto& a : set.solutions) {
        json row = json::array();
        for (const auto& b : set.solutions)
            row.push_back(min_eigenvalue_sym(b.P - a.P) >= -1e-8);
        order.push_back(row);
    }
    out["loewner_leq"] = order;
    out["notes"] = set.notes;
    return out;
}

inline json example_report_to_json(const ExampleReport& rep) {
    json out;
    out["example"] = rep.which;
    out["all_pass"] = rep.all_pass();
    out["max_deviation"] = rep.max_deviation();
    json checks = json::array();
    for (const auto& c : rep.checks) {
        checks.push_back(json{{"name", c.name},
                              {"pass", c.pass},
                              {"deviation", c.deviation},
                              {"tolerance", c.tolerance}});
    }
    out["checks"] = checks;
    out["solutions"] = solution_set_to_json(rep.solutions);
    out["controller"] = controller_to_json(rep.controller);
    return out;
}

inline json balance_to_json(const LaplacianPair& pair) {
    json out;
    out["n"] = pair.L.rows();
    out["balancing_weights"] = vector_to_json(pair.balancing_weights);
    out["L"] = matrix_to_json(pair.L);
    out["L_b"] = matrix_to_json(pair.L_b);
    out["row_sum_residual"] = pair.L_b.rowwise().sum().cwiseAbs().maxCoeff();
    out["col_sum_residual"] = pair.L_b.colwise().sum().cwiseAbs().maxCoeff();
    return out;
}

// CSV columns: t, x_1..x_nm, u_1..u_nm, running_cost.
inline void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
    if (traj.states.empty()) return;
    const Index nm = traj.states.front().size();
    os << "t";
    for (Index i = 1; i <= nm; ++i) os << ",x_" << i;
    for (Index i = 1; i <= nm; ++i) os << ",u_" << i;
    os << ",running_cost\n";
    os.precision(17);
    for (std::size_t k = 0; k < traj.times.size(); ++k) {
        os << traj.times[k];
        for (Index i = 0; i < nm; ++i) os << ',' << traj.states[k](i);
        for (Index i = 0; i < nm; ++i) os << ',' << traj.inputs[k](i);
        os << ',' << traj.running_cost[k] << '\n';
    }
}

inline void write_json_file(const std::string& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << j.dump(2) << '\n';
}

}  // namespace reclqr
