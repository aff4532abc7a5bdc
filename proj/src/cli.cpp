#include "relactrl/cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "relactrl/csv.hpp"
#include "relactrl/distance.hpp"
#include "relactrl/relevance.hpp"
#include "relactrl/rglc.hpp"
#include "relactrl/rng.hpp"
#include "relactrl/svg.hpp"
#include "relactrl/tdsm.hpp"

namespace relactrl {

namespace {

using json = nlohmann::ordered_json;

constexpr int kSchemaVersion = 1;
constexpr const char* kFlopConvention = "multiply-accumulate = 2 FLOPs; modulation excluded";

std::string format_pct(double ratio) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f%%", ratio * 100.0);
    return buf;
}

// Flag wins, then RELACTRL_SEED, then the caller's fallback (usually the
// config's seeds block).
std::optional<uint64_t> explicit_seed(std::optional<uint64_t> flag_seed) {
    if (flag_seed) return flag_seed;
    if (const char* env = std::getenv("RELACTRL_SEED")) {
        return std::strtoull(env, nullptr, 10);
    }
    return std::nullopt;
}

uint64_t resolve_seed(std::optional<uint64_t> flag_seed, uint64_t fallback = 1) {
    return explicit_seed(flag_seed).value_or(fallback);
}

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(path + ": " + e.what());
    }
    return j;
}

void write_json_file(const std::string& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw std::invalid_argument("cannot write " + path);
    out << j.dump(2) << "\n";
}

int64_t require_int(const json& j, const std::string& where, const std::string& key,
                    std::optional<int64_t> fallback = {}) {
    if (!j.contains(key)) {
        if (fallback) return *fallback;
        throw std::invalid_argument(where + ": missing required field '" + key + "'");
    }
    if (!j.at(key).is_number_integer()) {
        throw std::invalid_argument(where + ": field '" + key + "' must be an integer");
    }
    return j.at(key).get<int64_t>();
}

}  // namespace

RunConfig load_config_json(const std::string& path) {
    const json j = read_json_file(path);
    if (!j.contains("arch") || !j.at("arch").is_object()) {
        throw std::invalid_argument(path + ": missing 'arch' object");
    }
    const json& a = j.at("arch");
    RunConfig cfg;
    cfg.arch.D = require_int(a, path, "D");
    cfg.arch.L = require_int(a, path, "L");
    cfg.arch.heads = require_int(a, path, "heads", 1);
    cfg.arch.ffn_mult = require_int(a, path, "ffn_mult", 4);
    cfg.arch.cross_attention = a.value("cross_attention", false);
    cfg.arch.modulation = a.value("modulation", true);
    if (a.contains("extra_params")) {
        for (const auto& [name, v] : a.at("extra_params").items()) {
            if (!v.is_number_integer()) {
                throw std::invalid_argument(path + ": extra_params." + name +
                                            " must be an integer");
            }
            cfg.arch.extra_params[name] = v.get<int64_t>();
        }
    }
    if (j.contains("geometry")) {
        const json& g = j.at("geometry");
        cfg.grid_h = require_int(g, path, "H");
        cfg.grid_w = require_int(g, path, "W");
    }
    cfg.arch.tokens = cfg.grid_h * cfg.grid_w;
    if (j.contains("seeds")) {
        const json& s = j.at("seeds");
        cfg.model_seed = uint64_t(require_int(s, path, "model", 1));
        cfg.input_seed = uint64_t(require_int(s, path, "inputs", int64_t(cfg.model_seed)));
    }
    if (cfg.arch.D < 1 || cfg.arch.L < 1 || cfg.grid_h < 1 || cfg.grid_w < 1) {
        throw std::invalid_argument(path + ": arch and geometry fields must be positive");
    }
    return cfg;
}

PlacementPlan load_plan_json(const std::string& path) {
    const json j = read_json_file(path);
    if (!j.contains("entries") || !j.at("entries").is_array()) {
        throw std::invalid_argument(path + ": missing 'entries' array");
    }
    PlacementPlan plan;
    for (const auto& e : j.at("entries")) {
        PlanEntry pe;
        pe.layer = require_int(e, path, "layer");
        pe.n_groups = require_int(e, path, "n_groups", 1);
        pe.window_s = require_int(e, path, "window_s", 1);
        plan.entries.push_back(pe);
    }
    return plan;
}

namespace {

json arch_to_json(const ArchSpec& a) {
    json j;
    j["D"] = a.D;
    j["L"] = a.L;
    j["heads"] = a.heads;
    j["ffn_mult"] = a.ffn_mult;
    j["tokens"] = a.tokens;
    j["cross_attention"] = a.cross_attention;
    j["modulation"] = a.modulation;
    if (!a.extra_params.empty()) {
        json e;
        for (const auto& [name, v] : a.extra_params) e[name] = v;
        j["extra_params"] = e;
    }
    return j;
}

json plan_to_json(const PlacementPlan& plan) {
    json entries = json::array();
    for (const auto& e : plan.entries) {
        entries.push_back(json{{"layer", e.layer}, {"n_groups", e.n_groups},
                               {"window_s", e.window_s}});
    }
    return json{{"entries", entries}};
}

// ---- relevance ----

struct RelevanceOpts {
    std::string metrics_path;
    int64_t top_k = 11;
    std::string out_path;
    std::string svg_path;
    bool raw_normalize = false;
    std::vector<int64_t> tier_groups{2, 4, 8};
    int64_t tier_window = 2;
};

int cmd_relevance(const RelevanceOpts& opt) {
    const MetricsTable table = read_metrics_csv(opt.metrics_path);
    const std::vector<RelevanceRecord> records =
        compute_records(table.layers, table.fid, table.hdd, !opt.raw_normalize);

    TierPolicy policy;
    for (int64_t n : opt.tier_groups) policy.tiers.push_back(TierEntry{n, opt.tier_window});
    const PlacementPlan plan = plan_placement(records, opt.top_k, policy);

    json rep;
    rep["schema_version"] = kSchemaVersion;
    rep["command"] = "relevance";
    rep["config"] = json{{"metrics", opt.metrics_path},
                         {"top_k", opt.top_k},
                         {"normalize", opt.raw_normalize ? "raw_values" : "ranks"},
                         {"tier_groups", opt.tier_groups},
                         {"tier_window", opt.tier_window}};
    json recs = json::array();
    for (const auto& r : records) {
        recs.push_back(json{{"layer_index", r.layer_index},
                            {"fid", r.raw_fid},
                            {"hdd", r.raw_hdd},
                            {"fid_rank", r.fid_rank},
                            {"hdd_rank", r.hdd_rank},
                            {"crs", r.crs}});
    }
    rep["records"] = recs;
    rep["selected_layers"] = plan.layers();
    rep["plan"] = plan_to_json(plan);
    write_json_file(opt.out_path, rep);

    if (!opt.svg_path.empty()) {
        std::vector<int64_t> layers;
        std::vector<double> scores;
        for (const auto& r : records) {
            layers.push_back(r.layer_index);
            scores.push_back(r.crs);
        }
        const std::vector<int64_t> selected = plan.layers();
        std::set<int64_t> hot(selected.begin(), selected.end());
        write_score_bar_chart(opt.svg_path, "ControlNet Relevance Score by layer", layers,
                              scores, hot);
    }
    std::cout << "relevance: " << records.size() << " layers scored, top " << opt.top_k
              << " selected -> " << opt.out_path << "\n";
    return 0;
}

// ---- cost ----

struct CostOpts {
    std::string config_path;
    std::string plan_path;
    std::string baseline = "copy:13";
    std::string kind = "rglc";
    std::string out_path;
};

int cmd_cost(const CostOpts& opt) {
    const RunConfig cfg = load_config_json(opt.config_path);
    const PlacementPlan plan = load_plan_json(opt.plan_path);
    ModelConfig mc;
    mc.depth = cfg.arch.L;
    mc.geom = FeatureGeometry{cfg.grid_h, cfg.grid_w, cfg.arch.D};
    mc.heads = cfg.arch.heads;
    validate_plan(plan, mc);

    Baseline baseline;
    if (opt.baseline == "none") {
        baseline.copy_first_k = 0;
    } else if (opt.baseline.rfind("copy:", 0) == 0) {
        baseline.copy_first_k = std::stoll(opt.baseline.substr(5));
    } else {
        throw std::invalid_argument("baseline must be 'none' or 'copy:<k>', got '" +
                                    opt.baseline + "'");
    }
    PlanKind kind;
    if (opt.kind == "rglc") {
        kind = PlanKind::rglc;
    } else if (opt.kind == "copy") {
        kind = PlanKind::copy;
    } else {
        throw std::invalid_argument("kind must be 'rglc' or 'copy', got '" + opt.kind + "'");
    }

    const CostReport rep = plan_flops(cfg.arch, plan, cfg.arch.tokens, baseline, kind);

    json out;
    out["schema_version"] = kSchemaVersion;
    out["command"] = "cost";
    out["flop_convention"] = kFlopConvention;
    out["config"] = json{{"arch", arch_to_json(cfg.arch)},
                         {"plan", plan_to_json(plan)},
                         {"plan_kind", opt.kind},
                         {"baseline", opt.baseline}};
    json comps = json::array();
    for (const auto& c : rep.components) {
        comps.push_back(json{{"name", c.name}, {"params", c.params}, {"flops", c.flops}});
    }
    out["components"] = comps;
    out["totals"] = json{{"params", rep.total_params}, {"flops", rep.total_flops}};
    out["backbone"] = json{{"params", rep.backbone_params}, {"flops", rep.backbone_flops}};
    json ratios;
    ratios["params_vs_backbone"] = rep.param_ratio_vs_backbone;
    ratios["params_vs_backbone_pct"] = format_pct(rep.param_ratio_vs_backbone);
    ratios["flops_vs_backbone"] = rep.flop_ratio_vs_backbone;
    ratios["flops_vs_backbone_pct"] = format_pct(rep.flop_ratio_vs_backbone);
    if (rep.param_ratio_vs_baseline) {
        ratios["baseline"] = rep.baseline_name;
        ratios["params_vs_baseline"] = *rep.param_ratio_vs_baseline;
        ratios["params_vs_baseline_pct"] = format_pct(*rep.param_ratio_vs_baseline);
        ratios["flops_vs_baseline"] = *rep.flop_ratio_vs_baseline;
        ratios["flops_vs_baseline_pct"] = format_pct(*rep.flop_ratio_vs_baseline);
    }
    out["ratios"] = ratios;
    write_json_file(opt.out_path, out);

    std::cout << "cost: params +" << rep.total_params << " ("
              << format_pct(rep.param_ratio_vs_backbone) << " of backbone), flops +"
              << rep.total_flops << " (" << format_pct(rep.flop_ratio_vs_backbone)
              << " of backbone) -> " << opt.out_path << "\n";
    return 0;
}

// ---- verify-distance ----

struct DistanceOpts {
    int64_t H = 8, W = 8, d = 2, s = 2;
    int64_t t_h = 0, t_w = 0;
    int64_t samples = 10000;
    std::optional<uint64_t> seed;
    std::string out_path;
};

int cmd_verify_distance(const DistanceOpts& opt) {
    const uint64_t seed = resolve_seed(opt.seed);
    const DistanceQuery q{opt.H, opt.W, opt.d, opt.t_h, opt.t_w};
    const DistanceReport rep = verify_distance(q, GroupWindow{opt.s}, opt.samples, seed);

    const bool bound_ok = rep.lower_bound <= rep.exact + 1e-12;
    const bool mc_ok = std::fabs(rep.mc_estimate - rep.exact) <=
                       3.0 * rep.mc_stderr + 1e-12;

    json out;
    out["schema_version"] = kSchemaVersion;
    out["command"] = "verify_distance";
    out["config"] = json{{"H", opt.H}, {"W", opt.W}, {"d", opt.d},   {"s", opt.s},
                         {"t_h", opt.t_h}, {"t_w", opt.t_w},
                         {"samples", opt.samples}, {"seed", seed}};
    out["exact"] = rep.exact;
    out["lower_bound"] = rep.lower_bound;
    out["mc_estimate"] = rep.mc_estimate;
    out["mc_stderr"] = rep.mc_stderr;
    out["samples"] = rep.samples;
    out["checks"] = json{{"bound_holds", bound_ok}, {"mc_within_3_sigma", mc_ok}};
    out["verdict"] = (bound_ok && mc_ok) ? "pass" : "fail";

    std::cout << out.dump(2) << "\n";
    if (!opt.out_path.empty()) write_json_file(opt.out_path, out);
    return (bound_ok && mc_ok) ? 0 : 3;
}

// ---- demo ----

struct DemoOpts {
    std::string config_path;
    std::string plan_path;
    std::optional<uint64_t> seed;
    bool demo_init = false;
    std::optional<int64_t> skip;
    bool sweep = false;
    int64_t trials = 2;
    std::string sweep_out = "sweep_metrics.csv";
};

int cmd_demo(const DemoOpts& opt) {
    const RunConfig cfg = load_config_json(opt.config_path);
    const PlacementPlan plan = load_plan_json(opt.plan_path);

    uint64_t model_seed = cfg.model_seed;
    uint64_t input_seed = cfg.input_seed;
    if (const auto root = explicit_seed(opt.seed)) {
        model_seed = derive_seed(*root, 1);
        input_seed = derive_seed(*root, 2);
    }

    ModelConfig mc;
    mc.depth = cfg.arch.L;
    mc.geom = FeatureGeometry{cfg.grid_h, cfg.grid_w, cfg.arch.D};
    mc.heads = cfg.arch.heads;
    mc.ffn_mult = cfg.arch.ffn_mult;
    mc.cross_attention = cfg.arch.cross_attention;

    ControlledModel model = build_model(mc, plan, model_seed);
    if (opt.demo_init) demo_init(model, derive_seed(model_seed, 0xde));

    if (opt.sweep) {
        if (!opt.demo_init) {
            throw std::invalid_argument(
                "--sweep needs --demo-init: at zero init every skip proxy is 0");
        }
        const std::vector<SweepRow> rows = skip_sweep(model, opt.trials, input_seed);
        MetricsTable table;
        for (const auto& r : rows) {
            table.layers.push_back(r.layer);
            table.fid.push_back(r.proxy_fid);
            table.hdd.push_back(r.proxy_hdd);
        }
        write_metrics_csv(opt.sweep_out, table);
        std::cout << "demo: sweep over " << rows.size() << " hosted layers ("
                  << opt.trials << " trials) -> " << opt.sweep_out << "\n";
        return 0;
    }

    Stream s(derive_seed(input_seed, 4));
    auto normal_volume = [&](std::vector<int64_t> shape) {
        Tensor t(std::move(shape), 0.0);
        for (double& v : t.data) v = s.next_normal();
        return t;
    };
    const Tensor latent = normal_volume({mc.geom.H, mc.geom.W, mc.geom.D});
    const Tensor cond = normal_volume({mc.geom.H, mc.geom.W, mc.geom.D});
    const Tensor t_embed = normal_volume({mc.geom.D});

    const Tensor full = forward(model, latent, cond, t_embed);
    std::set<int64_t> skip;
    if (opt.skip) skip.insert(*opt.skip);
    const Tensor skipped = forward(model, latent, cond, t_embed, skip);

    double sq = 0.0;
    double max_token = 0.0;
    const int64_t tokens = mc.geom.tokens();
    for (int64_t tok = 0; tok < tokens; ++tok) {
        double tok_sq = 0.0;
        for (int64_t j = 0; j < mc.geom.D; ++j) {
            const double dv = full.data[size_t(tok * mc.geom.D + j)] -
                              skipped.data[size_t(tok * mc.geom.D + j)];
            tok_sq += dv * dv;
        }
        sq += tok_sq;
        max_token = std::max(max_token, std::sqrt(tok_sq));
    }
    const double mse = sq / double(full.numel());
    std::cout << "demo: layers=" << mc.depth << " hosted=" << model.control.size()
              << (opt.demo_init ? " demo-init" : " zero-init");
    if (opt.skip) {
        std::cout << " skip=" << *opt.skip;
    } else {
        std::cout << " skip=none";
    }
    std::cout << " deviation_mse=" << mse << " deviation_max_token_l2=" << max_token << "\n";
    return 0;
}

// ---- bench ----

struct BenchOpts {
    std::string config_path;
    int64_t iters = 3;
    int64_t n_groups = 4;
    int64_t window_s = 2;
    std::optional<uint64_t> seed;
};

int cmd_bench(const BenchOpts& opt) {
    if (opt.iters < 1) throw std::invalid_argument("iters must be >= 1");
    const RunConfig cfg = load_config_json(opt.config_path);
    const uint64_t seed = resolve_seed(opt.seed, cfg.model_seed);

    const FeatureGeometry geom{cfg.grid_h, cfg.grid_w, cfg.arch.D};
    const GroupWindow window{opt.window_s};
    const ShuffleSpec spec = make_shuffle_spec(geom, opt.n_groups, derive_seed(seed, 1));
    const TdsmParams params = make_tdsm_params(spec, derive_seed(seed, 2));

    Stream s(derive_seed(seed, 3));
    Tensor x({geom.H, geom.W, geom.D}, 0.0);
    for (double& v : x.data) v = s.next_normal();

    const int64_t N = geom.tokens();
    const int64_t D = geom.D;
    Tensor wq({D, D}, 0.0), wk({D, D}, 0.0), wv({D, D}, 0.0), wo({D, D}, 0.0);
    const double sigma = 1.0 / std::sqrt(double(D));
    for (Tensor* w : {&wq, &wk, &wv, &wo})
        for (double& v : w->data) v = sigma * s.next_normal();

    auto time_ms = [](auto&& fn) {
        const auto t0 = std::chrono::steady_clock::now();
        fn();
        const auto t1 = std::chrono::steady_clock::now();
        return std::chrono::duration<double, std::milli>(t1 - t0).count();
    };

    double tdsm_total = 0.0, full_total = 0.0;
    for (int64_t it = 0; it < opt.iters; ++it) {
        tdsm_total += time_ms([&] { tdsm_forward(x, spec, window, params); });
        full_total += time_ms([&] {
            Graph g;
            Graph::NodeId flat = g.reshape(g.leaf(x), {N, D});
            Graph::NodeId q = g.matmul(flat, g.leaf(wq));
            Graph::NodeId k = g.matmul(flat, g.leaf(wk));
            Graph::NodeId v = g.matmul(flat, g.leaf(wv));
            Graph::NodeId attn =
                g.softmax_rows(g.scale(g.matmul(q, g.transpose(k)), 1.0 / std::sqrt(double(D))));
            g.matmul(g.matmul(attn, v), g.leaf(wo));
        });
    }

    const RglcShape shape{opt.n_groups, opt.window_s};
    const double ratio = double(grouped_attention_flops(cfg.arch, shape, N)) /
                         double(full_attention_flops(D, N));
    std::cout << "bench: N=" << N << " D=" << D << " n=" << opt.n_groups
              << " s=" << opt.window_s << " iters=" << opt.iters << "\n";
    std::cout << "  tdsm_forward    mean " << tdsm_total / double(opt.iters) << " ms\n";
    std::cout << "  full attention  mean " << full_total / double(opt.iters) << " ms\n";
    std::cout << "  analytical grouped/full attention FLOP ratio: " << ratio << "\n";
    return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
    CLI::App app{"RelaCtrl efficiency lab: relevance scoring, lightweight control blocks, "
                 "cost accounting, and shuffle-mixer distance verification"};
    app.require_subcommand(1);

    RelevanceOpts rel;
    auto* c_rel = app.add_subcommand("relevance",
                                     "Score layers from a skip-study metrics CSV and plan "
                                     "control placement");
    c_rel->add_option("--metrics", rel.metrics_path, "metrics CSV (layer_index,fid,hdd)")
        ->required();
    c_rel->add_option("--top", rel.top_k, "number of layers to select")->required();
    c_rel->add_option("--out", rel.out_path, "output report JSON")->required();
    c_rel->add_option("--svg", rel.svg_path, "optional CRS bar chart SVG");
    c_rel->add_flag("--raw-normalize", rel.raw_normalize,
                    "min-max normalize raw metric values instead of their ranks");
    c_rel->add_option("--tier-groups", rel.tier_groups,
                      "channel-group counts per relevance tier, high to low");
    c_rel->add_option("--tier-window", rel.tier_window, "window side for every tier");

    CostOpts cost;
    auto* c_cost = app.add_subcommand("cost", "Analytical parameter/FLOP report for a plan");
    c_cost->add_option("--config", cost.config_path, "arch config JSON")->required();
    c_cost->add_option("--plan", cost.plan_path, "placement plan JSON")->required();
    c_cost->add_option("--baseline", cost.baseline, "'copy:<k>' or 'none' (default copy:13)");
    c_cost->add_option("--kind", cost.kind, "materialize plan as 'rglc' or 'copy' blocks");
    c_cost->add_option("--out", cost.out_path, "output report JSON")->required();

    DistanceOpts dist;
    auto* c_dist = app.add_subcommand("verify-distance",
                                      "Check the interactive-distance bound and MC estimate");
    c_dist->add_option("--H", dist.H, "token grid height");
    c_dist->add_option("--W", dist.W, "token grid width");
    c_dist->add_option("--d", dist.d, "group channel width");
    c_dist->add_option("--s", dist.s, "window side");
    c_dist->add_option("--th", dist.t_h, "query token row");
    c_dist->add_option("--tw", dist.t_w, "query token column on the flattened W*d axis");
    c_dist->add_option("--samples", dist.samples, "MC sample count");
    c_dist->add_option("--seed", dist.seed, "root seed (default env RELACTRL_SEED or 1)");
    c_dist->add_option("--out", dist.out_path, "optional report JSON path");

    DemoOpts demo;
    auto* c_demo = app.add_subcommand("demo",
                                      "Toy controlled forward, skip deviations, and the "
                                      "skip sweep that feeds the relevance command");
    c_demo->add_option("--config", demo.config_path, "arch config JSON")->required();
    c_demo->add_option("--plan", demo.plan_path, "placement plan JSON")->required();
    c_demo->add_option("--seed", demo.seed, "root seed (default env RELACTRL_SEED or 1)");
    c_demo->add_flag("--demo-init", demo.demo_init,
                     "draw zero-convs from normal(0, 0.02) so skips are measurable");
    c_demo->add_option("--skip", demo.skip, "layer index to skip in the comparison forward");
    c_demo->add_flag("--sweep", demo.sweep, "run the skip sweep and write a metrics CSV");
    c_demo->add_option("--trials", demo.trials, "sweep trials (default 2)");
    c_demo->add_option("--sweep-out", demo.sweep_out, "sweep CSV path");

    BenchOpts bench;
    auto* c_bench = app.add_subcommand("bench",
                                       "Wall-clock TDSM vs full attention plus the analytical "
                                       "FLOP ratio");
    c_bench->add_option("--config", bench.config_path, "arch config JSON")->required();
    c_bench->add_option("--iters", bench.iters, "timing iterations");
    c_bench->add_option("--n", bench.n_groups, "channel groups");
    c_bench->add_option("--s", bench.window_s, "window side");
    c_bench->add_option("--seed", bench.seed, "root seed");

    std::vector<const char*> argv;
    argv.push_back("relactrl");
    for (const auto& a : args) argv.push_back(a.c_str());

    try {
        app.parse(int(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (c_rel->parsed()) return cmd_relevance(rel);
        if (c_cost->parsed()) return cmd_cost(cost);
        if (c_dist->parsed()) return cmd_verify_distance(dist);
        if (c_demo->parsed()) return cmd_demo(demo);
        if (c_bench->parsed()) return cmd_bench(bench);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}

}  // namespace relactrl
