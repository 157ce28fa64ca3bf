// convecta: batch front door for the stochastic convected-wave laboratory.
// Subcommands: green, check, moment, holder, verify, snapshot, replay.
// Exit codes: 0 success, 1 verification failure, 2 invalid input,
// 3 model fails the existence condition, 4 quadrature non-convergence.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "convecta/estimators.hpp"
#include "convecta/lemma_verifier.hpp"
#include "convecta/manifest.hpp"
#include "convecta/parallel.hpp"
#include "convecta/quadrature.hpp"
#include "convecta/simulator.hpp"

using nlohmann::json;
using namespace convecta;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitVerifyFail = 1;
constexpr int kExitBadInput = 2;
constexpr int kExitNoSolution = 3;
constexpr int kExitNoConvergence = 4;

std::string fmt17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

struct Output {
    std::string out_dir; // empty: stdout only
    json result;

    void write_file(const std::string& name, const std::string& content) const {
        if (out_dir.empty()) return;
        std::ofstream f(out_dir + "/" + name, std::ios::binary);
        if (!f) throw std::runtime_error("cannot write " + out_dir + "/" + name);
        f << content;
    }
};

json make_manifest(const std::string& command, const json& config, uint64_t seed,
                   double wall_s) {
    json m;
    m["tool"] = kToolVersion;
    m["command"] = command;
    m["config"] = config;
    m["master_seed"] = seed;
    m["config_hash"] = fnv1a64(command + "|" + config.dump());
    m["wall_time_s"] = wall_s;
    return m;
}

CovarianceModel model_from_config(const json& config) {
    return covariance_model_from_json(config.at("model").dump());
}

json classification_to_json(const Classification& c) {
    json j;
    j["verdict"] = c.verdict == Verdict::Convergent   ? "convergent"
                   : c.verdict == Verdict::Divergent ? "divergent"
                                                     : "inconclusive";
    if (c.value) j["value"] = *c.value;
    if (!c.shell_sums.empty()) j["shells"] = c.shell_sums.size();
    return j;
}

// dyadic time step below both bounds, so grid times stay exact multiples
double dyadic_step(double upper) {
    double dt = 1.0;
    while (dt > upper) dt *= 0.5;
    return dt;
}

Discretization disc_from_config(const json& config, const FlowConfig& cfg, double h_min) {
    const json d = config.value("disc", json::object());
    const int n = d.value("n", 128);
    double L = d.value("half_extent", 0.0);
    if (L <= 0.0) {
        // margin formula: reach of the support plus two cells
        const double reach = cfg.t0 / (1.0 - cfg.mach);
        L = reach / (1.0 - 4.0 / n);
    }
    GridSpec grid(L, n);
    double dt = d.value("dt", 0.0);
    if (dt <= 0.0) dt = dyadic_step(std::min(grid.cell_size() / 4.0, h_min / 4.0));
    const int reps = d.value("replicates", 2000);
    const uint64_t seed = config.value("master_seed", uint64_t{1});
    return Discretization(grid, dt, reps, seed);
}

std::string ensemble_csv(const EnsembleResult& ens) {
    std::string s = "replicate,point_index,t,x1,x2,value\n";
    for (int r = 0; r < ens.replicates; ++r) {
        for (size_t p = 0; p < ens.points.size(); ++p) {
            s += std::to_string(r) + "," + std::to_string(p) + "," + fmt17(ens.points[p].t) +
                 "," + fmt17(ens.points[p].x.x1) + "," + fmt17(ens.points[p].x.x2) + "," +
                 fmt17(ens.at(r, static_cast<int>(p))) + "\n";
        }
    }
    return s;
}

std::string structure_csv(const StructureTable& tab) {
    std::string s = "h,s2,se,n\n";
    for (const auto& r : tab.rows) {
        s += fmt17(r.h) + "," + fmt17(r.s2) + "," + fmt17(r.se) + "," +
             std::to_string(r.n_pairs) + "\n";
    }
    return s;
}

std::string field_csv(const FieldIncrement& f, const GridSpec& grid) {
    std::string s = "x1,x2,value\n";
    for (int i = 0; i < f.n; ++i)
        for (int j = 0; j < f.n; ++j)
            s += fmt17(grid.center(i)) + "," + fmt17(grid.center(j)) + "," +
                 fmt17(f.at(i, j)) + "\n";
    return s;
}

// --- command bodies (config-driven so replay can re-dispatch) --------------

int run_green(const json& config, Output& out) {
    FlowConfig cfg(config.at("mach").get<double>(),
                   std::max(1.0, config.at("t").get<double>()));
    auto g = green(config.at("t").get<double>(),
                   {config.at("x1").get<double>(), config.at("x2").get<double>()}, cfg);
    out.result["value"] = g.value;
    out.result["on_support"] = g.on_support;
    out.result["singular"] = g.singular;
    return kExitOk;
}

int run_check(const json& config, Output& out) {
    auto model = model_from_config(config);
    const double alpha = config.value("alpha", 0.5);
    auto base = classify_base(model);
    auto dalang = classify_dalang(model);
    auto holder = classify_holder(model, alpha);
    auto band = max_holder_band(model);
    out.result["base"] = classification_to_json(base);
    out.result["dalang"] = classification_to_json(dalang);
    out.result["holder"] = classification_to_json(holder);
    out.result["holder_alpha"] = alpha;
    if (band.empty) {
        out.result["holder_band"] = nullptr;
    } else {
        out.result["holder_band"] = {band.lo, band.hi};
    }
    if (dalang.verdict != Verdict::Convergent) {
        out.result["note"] = "no real-valued solution: existence condition fails";
        return kExitNoSolution;
    }
    return kExitOk;
}

int run_moment(const json& config, Output& out) {
    const double t = config.at("t").get<double>();
    const double m = config.at("mach").get<double>();
    FlowConfig cfg(m, config.value("t0", t));
    auto model = model_from_config(config);
    const std::string method = config.value("method", "quadrature");
    if (method == "quadrature") {
        const auto route = config.value("route", "reduced") == "direct" ? MomentRoute::Direct
                                                                        : MomentRoute::Reduced;
        auto q = second_moment(t, cfg, model, config.value("rel_tol", 1e-4), route);
        out.result["value"] = q.value;
        out.result["abs_err"] = q.abs_err;
        out.result["evals"] = q.evals;
        out.result["converged"] = q.converged;
        if (!q.converged) return kExitNoConvergence;
        return kExitOk;
    }
    if (method != "mc") throw CLI::ValidationError("method must be quadrature or mc");
    auto disc = disc_from_config(config, cfg, t);
    auto ens = simulate_ensemble({{t, {0.0, 0.0}}}, cfg, model, disc);
    auto stats = moments(ens, 0);
    out.result["value"] = stats.var;
    out.result["se"] = stats.se_var;
    out.result["mean"] = stats.mean;
    out.result["se_mean"] = stats.se_mean;
    out.result["replicates"] = ens.replicates;
    out.write_file("samples.csv", ensemble_csv(ens));
    return kExitOk;
}

int run_holder(const json& config, Output& out) {
    const double t = config.at("t").get<double>();
    const double m = config.at("mach").get<double>();
    auto model = model_from_config(config);
    const std::string kind_s = config.value("kind", "time");
    const IncrementSpec::Kind kind =
        kind_s == "time" ? IncrementSpec::Kind::TimeShift : IncrementSpec::Kind::SpaceShift;
    const int axis = config.value("axis", 1);

    std::vector<double> hs;
    if (config.contains("h_list")) {
        for (const auto& v : config.at("h_list")) hs.push_back(v.get<double>());
    }
    const std::string method = config.value("method", "mc");
    FlowConfig cfg(m, config.value("t0", kind == IncrementSpec::Kind::TimeShift
                                            ? t + (hs.empty() ? 0.5 : hs.back())
                                            : t));

    StructureTable tab;
    if (method == "quadrature") {
        if (hs.empty()) throw CLI::ValidationError("quadrature method needs --h values");
        tab = structure_function_quadrature(t, kind, axis, hs, cfg, model,
                                            config.value("rel_tol", 1e-4));
    } else if (method == "mc") {
        auto disc = disc_from_config(config, cfg, hs.empty() ? t : hs.front());
        if (hs.empty()) {
            // fit window: smallest five dyadic h above 4 dt
            double h = 1.0;
            while (h / 2.0 > 4.0 * disc.dt) h /= 2.0;
            for (int i = 0; i < 5; ++i) {
                hs.push_back(h * std::pow(2.0, i));
            }
            std::sort(hs.begin(), hs.end());
        }
        std::vector<EvalPoint> pts{{t, {0.0, 0.0}}};
        for (double h : hs) {
            EvalPoint p{t, {0.0, 0.0}};
            if (kind == IncrementSpec::Kind::TimeShift)
                p.t += h;
            else if (axis == 1)
                p.x.x1 += h;
            else
                p.x.x2 += h;
            pts.push_back(p);
        }
        auto ens = simulate_ensemble(pts, cfg, model, disc);
        tab = structure_function(ens, 0, kind, axis, hs);
        out.write_file("samples.csv", ensemble_csv(ens));
    } else {
        throw CLI::ValidationError("method must be mc or quadrature");
    }
    auto fit = holder_fit(tab, model);
    out.result["slope"] = fit.slope;
    out.result["slope_ci_half"] = fit.slope_ci_half;
    out.result["holder_estimate"] = fit.holder_estimate;
    if (fit.band_predicted.empty) {
        out.result["band_predicted"] = nullptr;
    } else {
        out.result["band_predicted"] = {fit.band_predicted.lo, fit.band_predicted.hi};
    }
    json rows = json::array();
    for (const auto& r : tab.rows) rows.push_back({{"h", r.h}, {"s2", r.s2}, {"se", r.se}});
    out.result["table"] = rows;
    out.write_file("structure.csv", structure_csv(tab));
    return kExitOk;
}

int run_verify(const json& config, Output& out) {
    const std::string suite = config.at("suite").get<std::string>();
    const long draws = config.value("draws", long{10000});
    const uint64_t seed = config.value("seed", uint64_t{1});
    VerificationReport rep;
    if (suite == "lemma_2_2") {
        rep = check_lemma_2_2(draws, seed);
    } else if (suite == "lemma_3_1") {
        rep = check_lemma_3_1(draws, seed);
    } else if (suite == "theorem1_sandwich") {
        FlowConfig cfg(config.value("mach", 0.0), 1.0);
        std::vector<CovarianceModel> family;
        if (config.contains("alphas")) {
            for (const auto& a : config.at("alphas"))
                family.push_back(CovarianceModel::power_law(a.get<double>()));
        } else {
            family = {CovarianceModel::power_law(0.5), CovarianceModel::power_law(1.0),
                      CovarianceModel::power_law(1.5)};
        }
        rep = check_theorem1_sandwich(family, config.value("t", 0.25), cfg);
    } else if (suite == "remark2_limit") {
        FlowConfig cfg(config.value("mach", 0.5), config.value("t0", 1.0));
        auto model = config.contains("model") ? model_from_config(config)
                                              : CovarianceModel::power_law(1.0);
        rep = check_remark2_limit(model, cfg, config.value("h0", 0.25), config.value("c2", 1.0));
    } else {
        throw CLI::ValidationError("unknown suite: " + suite);
    }
    out.result["suite"] = rep.suite;
    out.result["draws"] = rep.draws;
    out.result["violations"] = rep.violations;
    out.result["worst_margin"] = rep.worst_margin;
    out.result["seed"] = rep.seed;
    out.result["recorded"] = rep.recorded;
    return rep.passed() ? kExitOk : kExitVerifyFail;
}

int run_snapshot(const json& config, Output& out) {
    const double t = config.at("t").get<double>();
    FlowConfig cfg(config.at("mach").get<double>(), std::max(t, config.value("t0", t)));
    auto model = model_from_config(config);
    auto disc = disc_from_config(config, cfg, std::max(t, 1e-3));
    auto field = simulate_field_snapshot(t, cfg, model, disc);
    out.result["n"] = field.n;
    out.result["t"] = t;
    double var = 0.0;
    for (double v : field.values) var += v * v;
    out.result["mean_square"] = field.values.empty() ? 0.0 : var / field.values.size();
    out.write_file("field.csv", field_csv(field, disc.grid));
    return kExitOk;
}

int dispatch(const std::string& command, const json& config, Output& out) {
    if (command == "green") return run_green(config, out);
    if (command == "check") return run_check(config, out);
    if (command == "moment") return run_moment(config, out);
    if (command == "holder") return run_holder(config, out);
    if (command == "verify") return run_verify(config, out);
    if (command == "snapshot") return run_snapshot(config, out);
    throw CLI::ValidationError("unknown command in manifest: " + command);
}

int execute(const std::string& command, json config, const std::string& out_dir,
            const std::string& config_file) {
    if (!config_file.empty()) {
        std::ifstream f(config_file);
        if (!f) throw std::runtime_error("cannot read config file " + config_file);
        json file_cfg = json::parse(f);
        // flags win on conflict
        file_cfg.update(config);
        config = std::move(file_cfg);
    }
    Output out;
    out.out_dir = out_dir;
    const auto start = std::chrono::steady_clock::now();
    const int code = dispatch(command, config, out);
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    json manifest =
        make_manifest(command, config, config.value("master_seed", uint64_t{1}), wall);
    manifest["threads"] = max_threads();
    manifest["exit_code"] = code;
    out.result["manifest"] = manifest;
    std::cout << out.result.dump(2) << "\n";
    if (!out_dir.empty()) {
        std::ofstream f(out_dir + "/manifest.json");
        f << manifest.dump(2) << "\n";
    }
    return code;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"numerical laboratory for the 2-D stochastic convected wave equation"};
    app.require_subcommand(1);
    app.fallthrough(); // parent flags (--threads) may follow the subcommand
    int threads = 0;
    std::string out_dir, config_file;
    app.add_option("--threads", threads, "worker thread cap (CONVECTA_THREADS as fallback)");

    json cli_cfg;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--out", out_dir, "output directory for CSV/manifest files");
        sub->add_option("--config", config_file, "JSON config file (flags win on conflict)");
    };

    // green
    auto* green_cmd = app.add_subcommand("green", "evaluate the convected kernel");
    double g_t = 1.0, g_m = 0.0;
    std::vector<double> g_x{0.0, 0.0};
    green_cmd->add_option("--t", g_t, "time")->required();
    green_cmd->add_option("--x", g_x, "point x1 x2")->expected(2);
    green_cmd->add_option("--mach", g_m, "Mach number");
    add_common(green_cmd);

    // check
    auto* check_cmd = app.add_subcommand("check", "classify a covariance model");
    std::string model_json;
    double alpha = 0.5;
    check_cmd->add_option("--model", model_json, "model JSON or @file")->required();
    check_cmd->add_option("--alpha", alpha, "exponent for the holder classification");
    add_common(check_cmd);

    // moment
    auto* moment_cmd = app.add_subcommand("moment", "second moment by quadrature or MC");
    std::string mm_method = "quadrature", mm_route = "reduced";
    double mm_t = 1.0, mm_m = 0.0, mm_t0 = 0.0, mm_rel = 1e-4, mm_L = 0.0, mm_dt = 0.0;
    int mm_n = 128, mm_reps = 2000;
    uint64_t mm_seed = 1;
    moment_cmd->add_option("--method", mm_method, "quadrature|mc");
    moment_cmd->add_option("--route", mm_route, "reduced|direct (quadrature only)");
    moment_cmd->add_option("--t", mm_t)->required();
    moment_cmd->add_option("--mach", mm_m);
    moment_cmd->add_option("--t0", mm_t0);
    moment_cmd->add_option("--model", model_json)->required();
    moment_cmd->add_option("--rel-tol", mm_rel);
    moment_cmd->add_option("--grid-n", mm_n);
    moment_cmd->add_option("--grid-extent", mm_L);
    moment_cmd->add_option("--dt", mm_dt);
    moment_cmd->add_option("--replicates", mm_reps);
    moment_cmd->add_option("--seed", mm_seed);
    add_common(moment_cmd);

    // holder
    auto* holder_cmd = app.add_subcommand("holder", "structure function and slope fit");
    std::string h_method = "mc", h_kind = "time";
    int h_axis = 1;
    double h_t = 1.0, h_m = 0.0, h_t0 = 0.0, h_L = 0.0, h_dt = 0.0;
    int h_n = 128, h_reps = 2000;
    uint64_t h_seed = 1;
    std::vector<double> h_list;
    holder_cmd->add_option("--method", h_method, "mc|quadrature");
    holder_cmd->add_option("--kind", h_kind, "time|space");
    holder_cmd->add_option("--axis", h_axis, "1|2 (space shifts)");
    holder_cmd->add_option("--t", h_t)->required();
    holder_cmd->add_option("--mach", h_m);
    holder_cmd->add_option("--t0", h_t0);
    holder_cmd->add_option("--model", model_json)->required();
    holder_cmd->add_option("--h-list", h_list, "increment magnitudes");
    holder_cmd->add_option("--grid-n", h_n);
    holder_cmd->add_option("--grid-extent", h_L);
    holder_cmd->add_option("--dt", h_dt);
    holder_cmd->add_option("--replicates", h_reps);
    holder_cmd->add_option("--seed", h_seed);
    add_common(holder_cmd);

    // verify
    auto* verify_cmd = app.add_subcommand("verify", "run a verification suite");
    std::string v_suite;
    long v_draws = 10000;
    uint64_t v_seed = 1;
    double v_t = 0.25, v_m = -1.0, v_h0 = 0.25, v_c2 = 1.0;
    verify_cmd->add_option("--suite", v_suite,
                           "lemma_2_2|lemma_3_1|theorem1_sandwich|remark2_limit")
        ->required();
    verify_cmd->add_option("--draws", v_draws);
    verify_cmd->add_option("--seed", v_seed);
    verify_cmd->add_option("--t", v_t);
    verify_cmd->add_option("--mach", v_m);
    verify_cmd->add_option("--h0", v_h0);
    verify_cmd->add_option("--c2", v_c2);
    verify_cmd->add_option("--model", model_json);
    add_common(verify_cmd);

    // snapshot
    auto* snap_cmd = app.add_subcommand("snapshot", "one replicate on the full grid");
    double s_t = 0.5, s_m = 0.0, s_t0 = 0.0, s_L = 0.0, s_dt = 0.0;
    int s_n = 64;
    uint64_t s_seed = 1;
    snap_cmd->add_option("--t", s_t)->required();
    snap_cmd->add_option("--mach", s_m);
    snap_cmd->add_option("--t0", s_t0);
    snap_cmd->add_option("--model", model_json)->required();
    snap_cmd->add_option("--grid-n", s_n);
    snap_cmd->add_option("--grid-extent", s_L);
    snap_cmd->add_option("--dt", s_dt);
    snap_cmd->add_option("--seed", s_seed);
    add_common(snap_cmd);

    // replay
    auto* replay_cmd = app.add_subcommand("replay", "re-run a stored manifest");
    std::string manifest_path;
    replay_cmd->add_option("--manifest", manifest_path, "manifest.json path")->required();
    add_common(replay_cmd);

    CLI11_PARSE(app, argc, argv);
    if (threads > 0) set_max_threads(threads);

    auto parse_model = [&](const std::string& text) -> json {
        if (!text.empty() && text[0] == '@') {
            std::ifstream f(text.substr(1));
            if (!f) throw std::runtime_error("cannot read model file " + text.substr(1));
            return json::parse(f);
        }
        return json::parse(text);
    };

    try {
        if (green_cmd->parsed()) {
            json cfg{{"t", g_t}, {"x1", g_x[0]}, {"x2", g_x[1]}, {"mach", g_m}};
            return execute("green", cfg, out_dir, config_file);
        }
        if (check_cmd->parsed()) {
            json cfg{{"model", parse_model(model_json)}, {"alpha", alpha}};
            return execute("check", cfg, out_dir, config_file);
        }
        if (moment_cmd->parsed()) {
            json cfg{{"method", mm_method}, {"route", mm_route},       {"t", mm_t},
                     {"mach", mm_m},        {"rel_tol", mm_rel},       {"master_seed", mm_seed},
                     {"model", parse_model(model_json)}};
            cfg["t0"] = mm_t0 > 0.0 ? mm_t0 : mm_t;
            json d{{"n", mm_n}, {"replicates", mm_reps}};
            if (mm_L > 0.0) d["half_extent"] = mm_L;
            if (mm_dt > 0.0) d["dt"] = mm_dt;
            cfg["disc"] = d;
            return execute("moment", cfg, out_dir, config_file);
        }
        if (holder_cmd->parsed()) {
            json cfg{{"method", h_method}, {"kind", h_kind},  {"axis", h_axis},
                     {"t", h_t},           {"mach", h_m},     {"master_seed", h_seed},
                     {"model", parse_model(model_json)}};
            if (h_t0 > 0.0) cfg["t0"] = h_t0;
            if (!h_list.empty()) cfg["h_list"] = h_list;
            json d{{"n", h_n}, {"replicates", h_reps}};
            if (h_L > 0.0) d["half_extent"] = h_L;
            if (h_dt > 0.0) d["dt"] = h_dt;
            cfg["disc"] = d;
            return execute("holder", cfg, out_dir, config_file);
        }
        if (verify_cmd->parsed()) {
            json cfg{{"suite", v_suite}, {"draws", v_draws}, {"seed", v_seed}, {"t", v_t},
                     {"h0", v_h0},       {"c2", v_c2}};
            if (v_m >= 0.0) cfg["mach"] = v_m;
            if (!model_json.empty()) cfg["model"] = parse_model(model_json);
            return execute("verify", cfg, out_dir, config_file);
        }
        if (snap_cmd->parsed()) {
            json cfg{{"t", s_t}, {"mach", s_m}, {"master_seed", s_seed},
                     {"model", parse_model(model_json)}};
            if (s_t0 > 0.0) cfg["t0"] = s_t0;
            json d{{"n", s_n}, {"replicates", 2}};
            if (s_L > 0.0) d["half_extent"] = s_L;
            if (s_dt > 0.0) d["dt"] = s_dt;
            cfg["disc"] = d;
            return execute("snapshot", cfg, out_dir, config_file);
        }
        if (replay_cmd->parsed()) {
            std::ifstream f(manifest_path);
            if (!f) throw std::runtime_error("cannot read manifest " + manifest_path);
            json manifest = json::parse(f);
            return execute(manifest.at("command").get<std::string>(), manifest.at("config"),
                           out_dir, "");
        }
    } catch (const ExistenceError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNoSolution;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitBadInput;
    } catch (const json::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitBadInput;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitBadInput;
    }
    return kExitBadInput;
}
