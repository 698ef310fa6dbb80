#include <reclqr/io_json.hpp>
#include <reclqr/scenario.hpp>

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <future>
#include <iostream>

namespace fs = std::filesystem;
using namespace reclqr;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInputError = 1;
constexpr int kExitRegimeFailure = 2;

double classification_tol_from_env() {
    const char* env = std::getenv("RECLQR_TOL");
    if (!env || !*env) return tol::classification;
    char* end = nullptr;
    const double v = std::strtod(env, &end);
    if (end == env || *end != '\0' || !(v > 0.0))
        throw std::invalid_argument("RECLQR_TOL must be a positive number");
    return v;
}

void ensure_dir(const std::string& dir) {
    if (!dir.empty()) fs::create_directories(dir);
}

std::map<std::string, double> parse_kv(const std::string& spec) {
    std::map<std::string, double> out;
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto eq = item.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("expected key=value in: " + item);
        out[item.substr(0, eq)] = std::stod(item.substr(eq + 1));
    }
    return out;
}

bool good_regime(Regime r) {
    return r == Regime::StrictlyConvex || r == Regime::SemidefiniteDetectable;
}

int cmd_check(const std::string& config, const std::string& out_dir, const std::string& sweep) {
    const double ctol = classification_tol_from_env();
    const auto sc = load_scenario(config);

    if (sweep.empty()) {
        const auto verdict = classify_weights(sc.mats, ctol);
        const json j = verdict_to_json(verdict);
        std::cout << j.dump(2) << std::endl;
        if (!out_dir.empty()) {
            ensure_dir(out_dir);
            write_json_file(out_dir + "/verdict.json", j);
        }
        return good_regime(verdict.regime) ? kExitOk : kExitRegimeFailure;
    }

    // --sweep key=v1,v2,...: re-assemble the stage cost per grid point and
    // merge the verdicts; points are independent and evaluated concurrently.
    const auto eq = sweep.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("--sweep expects key=v1,v2,...");
    const std::string key = sweep.substr(0, eq);
    std::vector<double> values;
    {
        std::stringstream ss(sweep.substr(eq + 1));
        std::string item;
        while (std::getline(ss, item, ',')) values.push_back(std::stod(item));
    }
    if (values.empty()) throw std::invalid_argument("--sweep has no values");

    auto eval_point = [&](double value) -> json {
        PerformanceWeights w = sc.weights;
        const Index nm = sc.sys.dim();
        if (key == "alpha_F") w.alpha_F = value;
        else if (key == "w_D") w.w_D = Vector::Constant(nm, value);
        else if (key == "w_P") w.w_P = Vector::Constant(nm, value);
        else if (key == "w_EN") w.w_EN = Vector::Constant(nm, value);
        else if (key == "w_EX") w.w_EX = Vector::Constant(nm, value);
        else throw std::invalid_argument("--sweep key must be one of alpha_F,w_D,w_P,w_EN,w_EX");
        const auto mats = assemble_stage_cost(w, sc.model.laplacians, sc.sys);
        const auto verdict = classify_weights(mats, ctol);
        json point;
        point["parameter"] = key;
        point["value"] = value;
        point["verdict"] = verdict_to_json(verdict);
        return point;
    };

    std::vector<std::future<json>> futures;
    futures.reserve(values.size());
    for (double v : values)
        futures.push_back(std::async(std::launch::async, eval_point, v));
    json merged = json::array();
    bool all_good = true;
    for (auto& f : futures) {
        json point = f.get();
        const std::string regime = point["verdict"]["regime"].get<std::string>();
        all_good = all_good &&
                   (regime == "strictly_convex" || regime == "semidefinite_detectable");
        merged.push_back(std::move(point));
    }
    std::cout << merged.dump(2) << std::endl;
    if (!out_dir.empty()) {
        ensure_dir(out_dir);
        write_json_file(out_dir + "/sweep_verdicts.json", merged);
    }
    return all_good ? kExitOk : kExitRegimeFailure;
}

int cmd_synthesize(const std::string& config, std::string out_dir) {
    const double ctol = classification_tol_from_env();
    const auto sc = load_scenario(config);
    if (out_dir.empty()) out_dir = sc.output_dir;
    ensure_dir(out_dir);

    const auto verdict = classify_weights(sc.mats, ctol);
    Controller ctrl;
    try {
        ctrl = synthesize(sc.sys, sc.mats, verdict);
    } catch (const std::exception& e) {
        json report;
        report["verdict"] = verdict_to_json(verdict);
        report["error"] = e.what();
        write_json_file(out_dir + "/report.json", report);
        std::cout << report.dump(2) << std::endl;
        return kExitRegimeFailure;
    }

    json report;
    report["verdict"] = verdict_to_json(verdict);
    json diag;
    const auto tp = make_transformed(sc.mats, sc.sys);
    if (ctrl.P_used.size()) {
        diag["riccati_residual"] = riccati_residual(tp, ctrl.P_used);
        diag["closed_loop_hurwitz"] = spectral_abscissa(ctrl.closed_loop) < 0.0;
    }
    diag["notes"] = ctrl.notes;
    report["diagnostics"] = diag;
    report["controller"] = controller_to_json(ctrl);
    // The enumeration regimes carry the full solution set when it is small
    // enough to enumerate.
    if ((verdict.regime == Regime::Indefinite ||
         verdict.regime == Regime::SemidefiniteUndetectable) &&
        sc.sys.dim() <= 8) {
        report["solution_set"] = solution_set_to_json(enumerate_solutions(tp));
    }

    write_json_file(out_dir + "/controller.json", controller_to_json(ctrl));
    write_json_file(out_dir + "/report.json", report);
    std::cout << report.dump(2) << std::endl;
    return (ctrl.exists && ctrl.unique) ? kExitOk : kExitRegimeFailure;
}

int cmd_simulate(const std::string& config, const std::string& policy_name,
                 const std::string& controller_path, std::string out_dir) {
    const auto sc = load_scenario(config);
    if (out_dir.empty()) out_dir = sc.output_dir;
    ensure_dir(out_dir);
    const Index nm = sc.sys.dim();

    Policy policy;
    std::string policy_desc;
    auto policy_from_file = [&](const std::string& path) {
        const auto j = json::parse(detail::read_file(path));
        const Controller ctrl = controller_from_json(j);
        if (!ctrl.exists || ctrl.K.size() == 0)
            throw std::invalid_argument("controller file has no usable gain");
        if (ctrl.K.rows() != nm || ctrl.K.cols() != nm)
            throw std::invalid_argument("controller dimension does not match the scenario");
        const Matrix K = ctrl.K;
        const Vector b = ctrl.b.size() ? ctrl.b : Vector::Zero(nm);
        policy = [K, b](double, const Vector& x) -> Vector { return -K * x + b; };
        policy_desc = "file:" + path;
    };

    if (!controller_path.empty()) {
        policy_from_file(controller_path);
    } else if (policy_name == "uncontrolled") {
        policy = [](double, const Vector& x) -> Vector { return x; };
        policy_desc = "uncontrolled";
    } else if (policy_name == "zero") {
        policy = [nm](double, const Vector&) -> Vector { return Vector::Zero(nm); };
        policy_desc = "zero";
    } else if (policy_name.rfind("file:", 0) == 0) {
        policy_from_file(policy_name.substr(5));
    } else {
        throw std::invalid_argument(
            "policy must be 'uncontrolled', 'zero', 'file:<controller.json>' or --controller");
    }

    StageCostFn stage = [&](const Vector& x, const Vector& u) {
        return evaluate_stage_cost(sc.mats, x, u).total;
    };
    const auto traj = simulate(sc.sys, policy, sc.sim.x0, sc.sim.T, sc.sim.dt, stage);

    {
        std::ofstream csv(out_dir + "/trajectory.csv");
        if (!csv) throw std::runtime_error("cannot write trajectory.csv");
        write_trajectory_csv(csv, traj);
    }
    const double elapsed = traj.times.back();
    json summary;
    summary["policy"] = policy_desc;
    summary["t_final"] = elapsed;
    summary["final_state"] = vector_to_json(traj.states.back());
    summary["distance_to_x_eq"] =
        (traj.states.back() - sc.sys.x_eq).cwiseAbs().maxCoeff();
    summary["quadratic_cost"] = traj.running_cost.back();
    summary["total_cost_with_constant"] =
        traj.running_cost.back() + sc.mats.dropped_constant * elapsed;
    summary["diverged"] = traj.diverged;
    summary["divergence_time"] = traj.diverged ? json(traj.divergence_time) : json(nullptr);
    write_json_file(out_dir + "/summary.json", summary);
    std::cout << summary.dump(2) << std::endl;
    return kExitOk;
}

int cmd_examples(const std::string& which, const std::string& params,
                 const std::string& out_dir) {
    ExampleOverrides ov;
    if (!params.empty()) {
        const auto kv = parse_kv(params);
        for (const auto& [k, v] : kv) {
            if (k == "eta") ov.eta = v;
            else if (k == "xi") ov.xi = v;
            else if (k == "beta") ov.beta = v;
            else throw std::invalid_argument("unknown example parameter: " + k);
        }
    }

    std::vector<int> selected;
    if (which == "all") {
        if (params.empty()) selected = {1, 2, 3};
        else throw std::invalid_argument("--params requires a single example (1 or 3)");
    } else if (which == "1" || which == "2" || which == "3") {
        selected = {std::stoi(which)};
    } else {
        throw std::invalid_argument("example selector must be 1, 2, 3 or all");
    }

    bool all_pass = true;
    json reports = json::array();
    for (int idx : selected) {
        const auto rep = reproduce_example(idx, ov);
        for (const auto& c : rep.checks) {
            std::cout << (c.pass ? "[PASS] " : "[FAIL] ") << "example " << idx << ": " << c.name
                      << " (deviation " << c.deviation << ", tolerance " << c.tolerance << ")\n";
        }
        all_pass = all_pass && rep.all_pass();
        reports.push_back(example_report_to_json(rep));
    }
    std::cout << (all_pass ? "all checks passed" : "some checks FAILED") << std::endl;
    if (!out_dir.empty()) {
        ensure_dir(out_dir);
        write_json_file(out_dir + "/examples_report.json", reports);
    }
    return all_pass ? kExitOk : kExitRegimeFailure;
}

int cmd_balance(const std::string& graph_path) {
    const auto g = load_graph(detail::read_file(graph_path));
    const auto pair = balance(g);
    std::cout << balance_to_json(pair).dump(2) << std::endl;
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "reclqr: recommendation-system controller synthesis over networked opinion dynamics"};
    app.require_subcommand(1);

    std::string config, out_dir, sweep, policy, controller_path, params, which = "all",
                graph_path;

    auto* check = app.add_subcommand("check", "classify the well-posedness of a scenario");
    check->add_option("--config", config, "scenario config JSON")->required();
    check->add_option("--out", out_dir, "output directory");
    check->add_option("--sweep", sweep, "grid sweep, e.g. w_EN=0.5,1.0,2.0");

    auto* synth = app.add_subcommand("synthesize", "synthesize the optimal recommendation policy");
    synth->add_option("--config", config, "scenario config JSON")->required();
    synth->add_option("--out", out_dir, "output directory");

    auto* sim = app.add_subcommand("simulate", "integrate the closed loop or a named policy");
    sim->add_option("--config", config, "scenario config JSON")->required();
    sim->add_option("--policy", policy, "uncontrolled | zero | file:<controller.json>");
    sim->add_option("--controller", controller_path, "controller JSON path");
    sim->add_option("--out", out_dir, "output directory");

    auto* ex = app.add_subcommand("examples", "run the built-in reference examples");
    ex->add_option("which", which, "1 | 2 | 3 | all")->capture_default_str();
    ex->add_option("--params", params, "overrides, e.g. eta=1.0,xi=0.5,beta=0.5");
    ex->add_option("--out", out_dir, "output directory");

    auto* bal = app.add_subcommand("balance-graph", "weight-balance a directed graph");
    bal->add_option("graph", graph_path, "edge-list file")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (check->parsed()) return cmd_check(config, out_dir, sweep);
        if (synth->parsed()) return cmd_synthesize(config, out_dir);
        if (sim->parsed()) return cmd_simulate(config, policy, controller_path, out_dir);
        if (ex->parsed()) return cmd_examples(which, params, out_dir);
        if (bal->parsed()) return cmd_balance(graph_path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return kExitInputError;
    }
    return kExitInputError;
}
