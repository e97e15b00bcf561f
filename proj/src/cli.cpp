#include "qaspr/cli.hpp"

#include <CLI11.hpp>
#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include "qaspr/checkpoint.hpp"
#include "qaspr/config.hpp"
#include "qaspr/eval.hpp"
#include "qaspr/log.hpp"
#include "qaspr/reasoner.hpp"
#include "qaspr/rule_confidence.hpp"
#include "qaspr/synthetic.hpp"
#include "qaspr/training.hpp"

namespace qaspr {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

struct CommonFlags {
    std::optional<std::string> config;
    std::optional<std::string> train_dir;
    std::optional<std::string> ind_dir;
    std::optional<std::string> out;
    std::optional<std::uint64_t> seed;
    std::optional<std::uint64_t> eval_seed;
    std::optional<int> threads;
    std::optional<std::string> eval_mask;
    std::optional<double> p_e;
    std::optional<int> max_epochs;

    void attach(CLI::App* cmd) {
        cmd->add_option("--config", config, "JSON run configuration");
        cmd->add_option("--train-dir", train_dir, "training split directory (train/valid/test.txt)");
        cmd->add_option("--ind-dir", ind_dir, "inductive split directory");
        cmd->add_option("--out", out, "output directory");
        cmd->add_option("--seed", seed, "training / masking seed");
        cmd->add_option("--eval-seed", eval_seed, "evaluation masking seed");
        cmd->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
        cmd->add_option("--eval-mask", eval_mask, "masking at evaluation time")
            ->check(CLI::IsMember({"sampled", "none"}));
        cmd->add_option("--p-e", p_e, "probability multiplier");
        cmd->add_option("--max-epochs", max_epochs, "maximum training epochs");
    }

    RunConfig resolve(RunConfig base) const {
        if (config) base = load_run_config(*config);
        apply(base);
        return base;
    }

    void apply(RunConfig& c) const {
        if (train_dir) c.train_dir = *train_dir;
        if (ind_dir) c.ind_dir = *ind_dir;
        if (out) c.out = *out;
        if (seed) c.seed = *seed;
        if (eval_seed) c.eval_seed = *eval_seed;
        if (threads) c.threads = *threads;
        if (eval_mask) c.eval_mask = *eval_mask;
        if (p_e) c.p_e = *p_e;
        if (max_epochs) c.max_epochs = *max_epochs;
        c.validate();
    }
};

std::string utc_timestamp() {
    auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return os.str();
}

json metrics_document(const RunConfig& cfg, const MetricsReport& report, const std::string& split) {
    json j = metrics_json(report);
    j["dataset"] = cfg.dataset;
    j["version"] = cfg.version;
    j["split"] = split;
    j["directions"] = "both";
    j["seed"] = cfg.seed;
    j["eval_seed"] = cfg.eval_seed;
    j["config"] = cfg.to_json();
    j["timestamp"] = utc_timestamp();
    return j;
}

void write_json(const fs::path& path, const json& j) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

void write_ranks_csv(const fs::path& path, const MetricsReport& report, const Vocab& vocab) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "query_head,query_rel,target,rank\n";
    for (const auto& q : report.ranks) {
        out << vocab.entities.name(q.head) << ',' << vocab.relations.name(q.rel) << ','
            << vocab.entities.name(q.target) << ',' << q.rank << '\n';
    }
}

InductiveSplit load_split(const RunConfig& cfg) {
    if (cfg.train_dir.empty() || cfg.ind_dir.empty()) {
        throw ConfigError({"train_dir and ind_dir are required"});
    }
    return load_inductive_split(cfg.train_dir, cfg.ind_dir);
}

json checkpoint_metadata(const RunConfig& cfg, std::size_t relation_count, int best_epoch) {
    return {{"d", cfg.d},         {"L", cfg.L},           {"K", cfg.K},
            {"relation_count", relation_count},           {"seed", cfg.seed},
            {"best_epoch", best_epoch}, {"config", cfg.to_json()}};
}

struct TrainedRun {
    RunConfig cfg;
    InductiveSplit split;
    ConfidenceTable table;
    FitResult fit;
};

TrainedRun train_run(const RunConfig& cfg, const fs::path& out_dir) {
    fs::create_directories(out_dir);
    auto split = load_split(cfg);
    auto table = mine_confidence(split.train_graph);
    std::ofstream curve(out_dir / "curve.jsonl", std::ios::trunc);
    auto result = fit(split, table, cfg.reasoner(), cfg.mask(), cfg.train(), cfg.eval(),
                      [&](const CurvePoint& p) { curve << curve_json(p).dump() << '\n' << std::flush; });
    TrainedRun run{cfg, std::move(split), std::move(table), std::move(result)};
    save_checkpoint(out_dir / "best.ckpt",
                    checkpoint_metadata(cfg, run.split.train_graph.relation_count(), run.fit.best_epoch),
                    run.fit.best.store());
    write_json(out_dir / "valid_metrics.json", metrics_document(cfg, run.fit.best_valid, "valid"));
    return run;
}

MetricsReport test_run(const TrainedRun& run, const fs::path& out_dir, const std::string& name) {
    EvalConfig ecfg = run.cfg.eval();
    ecfg.keep_ranks = true;
    auto report = evaluate(run.split, run.table, run.fit.best, run.cfg.reasoner(), run.cfg.mask(), ecfg);
    auto doc = metrics_document(run.cfg, report, "test");
    if (!name.empty()) doc["variant"] = name;
    write_json(out_dir / "metrics.json", doc);
    write_ranks_csv(out_dir / "ranks.csv", report, run.split.ind_vocab);
    return report;
}

int cmd_mine_rules(const RunConfig& cfg) {
    fs::create_directories(cfg.out);
    auto [graph, vocab] = build_graph(load_tsv(cfg.train_dir / "train.txt"));
    auto table = mine_confidence(graph);
    std::ofstream out(cfg.out / "confidence.csv", std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write confidence.csv");
    write_confidence_csv(out, table, vocab.relations);
    log().info("wrote {}", (cfg.out / "confidence.csv").string());
    return 0;
}

int cmd_train(std::ostream& out, const RunConfig& cfg) {
    auto run = train_run(cfg, cfg.out);
    out << json{{"best_epoch", run.fit.best_epoch}, {"valid_mrr", run.fit.best_valid.mrr},
                      {"checkpoint", (cfg.out / "best.ckpt").string()}}
                     .dump()
              << '\n';
    return 0;
}

int cmd_eval(std::ostream& out, const std::string& checkpoint, const CommonFlags& flags, bool dump_ranks) {
    auto ck = load_checkpoint(checkpoint);
    RunConfig cfg = flags.config ? load_run_config(*flags.config) : RunConfig::from_json(ck.metadata.at("config"));
    flags.apply(cfg);
    auto split = load_split(cfg);
    auto table = mine_confidence(split.train_graph);
    if (ck.metadata.at("relation_count").get<std::size_t>() != split.train_graph.relation_count()) {
        throw ValidationError("checkpoint relation count does not match the dataset");
    }
    auto params = ModelParams::from_store(std::move(ck.params), cfg.reasoner(), split.train_graph.relation_count());
    EvalConfig ecfg = cfg.eval();
    ecfg.keep_ranks = dump_ranks;
    auto report = evaluate(split, table, params, cfg.reasoner(), cfg.mask(), ecfg);
    fs::create_directories(cfg.out);
    auto doc = metrics_document(cfg, report, "test");
    write_json(cfg.out / "metrics.json", doc);
    if (dump_ranks) write_ranks_csv(cfg.out / "ranks.csv", report, split.ind_vocab);
    out << metrics_json(report).dump() << '\n';
    return 0;
}

int cmd_ablate(std::ostream& out, RunConfig cfg, const std::optional<std::string>& variant, const std::optional<std::string>& grid) {
    if (grid) {
        cfg.pe_grid.clear();
        std::stringstream ss(*grid);
        std::string item;
        while (std::getline(ss, item, ',')) {
            try {
                cfg.pe_grid.push_back(std::stod(item));
            } catch (const std::exception&) {
                throw ConfigError({"pe_grid entry '" + item + "' is not a number"});
            }
        }
        cfg.validate();
    }
    struct Variant {
        std::string name;
        RunConfig cfg;
    };
    std::vector<Variant> variants;
    auto add = [&](const std::string& name) {
        RunConfig v = cfg;
        if (name == "no-mask") v.masking_enabled = false;
        if (name == "no-score") v.scoring_enabled = false;
        variants.push_back({name, v});
    };
    if (variant) {
        add(*variant);
    } else {
        for (const char* name : {"full", "no-mask", "no-score"}) add(name);
        for (double pe : cfg.pe_grid) {
            RunConfig v = cfg;
            v.p_e = pe;
            std::ostringstream name;
            name << "pe-" << pe;
            variants.push_back({name.str(), v});
        }
    }
    json table = json::array();
    for (auto& v : variants) {
        const fs::path dir = cfg.out / v.name;
        v.cfg.out = dir;
        log().info("ablation variant {}", v.name);
        auto run = train_run(v.cfg, dir);
        auto report = test_run(run, dir, v.name);
        json row = metrics_json(report);
        row["variant"] = v.name;
        row["p_e"] = v.cfg.p_e;
        row["masking_enabled"] = v.cfg.masking_enabled;
        row["scoring_enabled"] = v.cfg.scoring_enabled;
        table.push_back(row);
    }
    fs::create_directories(cfg.out);
    write_json(cfg.out / "ablation.json", {{"seed", cfg.seed}, {"config", cfg.to_json()}, {"variants", table}});
    out << table.dump() << '\n';
    return 0;
}

int cmd_inspect_mask(std::ostream& out, const RunConfig& cfg, const std::string& head, const std::string& relation,
                     const std::string& graph_name, const std::optional<std::string>& checkpoint,
                     std::uint64_t query_index) {
    auto split = load_split(cfg);
    auto table = mine_confidence(split.train_graph);
    const bool use_ind = graph_name == "ind";
    const auto& graph = use_ind ? split.ind_graph : split.train_graph;
    const auto& vocab = use_ind ? split.ind_vocab : split.train_vocab;
    auto source = vocab.entities.find(head);
    if (!source) throw ValidationError("unknown entity '" + head + "' in " + graph_name + " graph");
    auto rel = vocab.relations.find(relation);
    if (!rel) throw ValidationError("unknown relation '" + relation + "'");

    auto params = checkpoint ? ModelParams::from_store(load_checkpoint(*checkpoint).params, cfg.reasoner(),
                                                       split.train_graph.relation_count())
                             : ModelParams::init(cfg.reasoner(), split.train_graph.relation_count(), cfg.seed);
    auto rcfg = cfg.reasoner();
    rcfg.masking_enabled = true;
    auto fwd = forward(Query{*source, *rel}, graph, table, params, rcfg, cfg.mask(),
                       query_mask_stream(cfg.eval_seed, 0, query_index));
    json hops = json::array();
    for (std::size_t h = 0; h < fwd.state.hop_masks.size(); ++h) {
        const auto& m = fwd.state.hop_masks[h];
        json cands = json::array();
        for (const auto& [r, c] : m.confidences) {
            cands.push_back({{"relation", vocab.relations.name(r)},
                             {"confidence", c},
                             {"removal_prob", m.removal_prob.at(r)},
                             {"retained", m.retains(r)}});
        }
        json retained = json::array();
        for (RelationId r : m.retained) retained.push_back(vocab.relations.name(r));
        hops.push_back({{"hop", m.hop},
                        {"frontier_size", fwd.state.frontiers[h].size()},
                        {"candidates", cands},
                        {"retained", retained}});
    }
    json doc{{"query", {{"head", head}, {"relation", relation}, {"graph", graph_name}}},
             {"seed", cfg.eval_seed},
             {"query_index", query_index},
             {"p_e", cfg.p_e},
             {"p_tau", cfg.p_tau},
             {"hops", hops}};
    out << doc.dump(2) << '\n';
    return 0;
}

int cmd_grad_check(std::ostream& out, const RunConfig& cfg, double tolerance) {
    auto report = model_grad_check(cfg.seed, tolerance);
    json entries = json::array();
    for (const auto& e : report.entries) {
        entries.push_back({{"tensor", e.name}, {"max_rel_error", e.max_rel_error}, {"max_abs_error", e.max_abs_error},
                           {"coords", e.coords}});
    }
    out << json{{"passed", report.passed()}, {"tolerance", tolerance}, {"tensors", entries}}.dump(2) << '\n';
    return report.passed() ? 0 : 1;
}

int cmd_gen_synthetic(std::ostream& os, const fs::path& out, const SyntheticConfig& sc) {
    make_rule_kg(sc).write(out / "train", out / "ind");
    os << json{{"train_dir", (out / "train").string()}, {"ind_dir", (out / "ind").string()}}.dump() << '\n';
    return 0;
}

std::string error_kind(const std::exception& e) {
    if (dynamic_cast<const ConfigError*>(&e)) return "config";
    if (dynamic_cast<const ValidationError*>(&e)) return "validation";
    if (dynamic_cast<const DataError*>(&e)) return "data";
    return "runtime";
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out) {
    CLI::App app{"Inductive knowledge graph completion with query-dependent masking and path scoring", "qaspr"};
    app.require_subcommand(1);

    CommonFlags flags;
    auto* mine = app.add_subcommand("mine-rules", "dump single-rule confidences as CSV");
    auto* train = app.add_subcommand("train", "train and keep the best-validation checkpoint");
    auto* eval = app.add_subcommand("eval", "filtered MRR / Hits@k on the inductive test queries");
    auto* ablate = app.add_subcommand("ablate", "train and evaluate ablation variants and a p_e sweep");
    auto* inspect = app.add_subcommand("inspect-mask", "print per-hop masks for one query as JSON");
    auto* grad = app.add_subcommand("grad-check", "finite-difference check of the full model on a toy graph");
    auto* gen = app.add_subcommand("gen-synthetic", "write the planted-rule benchmark in GraIL layout");
    for (auto* cmd : {mine, train, eval, ablate, inspect, grad}) flags.attach(cmd);

    std::string checkpoint;
    bool dump_ranks = false;
    eval->add_option("--checkpoint", checkpoint, "checkpoint written by train")->required();
    eval->add_flag("--ranks", dump_ranks, "also write per-query ranks.csv");

    std::optional<std::string> variant;
    std::optional<std::string> pe_grid;
    ablate->add_option("--variant", variant, "run a single variant")->check(CLI::IsMember({"full", "no-mask", "no-score"}));
    ablate->add_option("--pe-grid", pe_grid, "comma-separated p_e values for the sweep");

    std::string head, relation, graph_name = "train";
    std::optional<std::string> inspect_ckpt;
    std::uint64_t query_index = 0;
    inspect->add_option("--head", head, "query entity name")->required();
    inspect->add_option("--relation", relation, "query relation name (inv:<name> for inverse)")->required();
    inspect->add_option("--graph", graph_name, "graph to reason over")->check(CLI::IsMember({"train", "ind"}));
    inspect->add_option("--checkpoint", inspect_ckpt, "parameters (default: initialization from --seed)");
    inspect->add_option("--query-index", query_index, "mask stream index");

    double tolerance = 1e-4;
    grad->add_option("--tolerance", tolerance, "maximum relative error");

    std::string gen_out = "data/synthetic";
    SyntheticConfig sc;
    gen->add_option("--out", gen_out, "output root (train/ and ind/ are created)");
    gen->add_option("--noise", sc.noise_fraction, "noise edges as a fraction of base edges");
    gen->add_option("--seed", sc.seed, "generator seed");
    gen->add_option("--rule-pairs", sc.rule_pairs, "planted rule pairs per half");
    gen->add_option("--background-edges", sc.background_edges, "random background edges per half");
    gen->add_option("--valid-queries", sc.valid_queries, "held-out validation facts");
    gen->add_option("--test-queries", sc.test_queries, "held-out test facts");

    std::vector<std::string> argv(args.rbegin(), args.rend());
    try {
        app.parse(argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            out << app.help();
            return 0;
        }
        std::cerr << "error: usage: " << e.what() << '\n';
        return 2;
    }

    try {
        if (*mine) return cmd_mine_rules(flags.resolve({}));
        if (*train) return cmd_train(out, flags.resolve({}));
        if (*eval) return cmd_eval(out, checkpoint, flags, dump_ranks);
        if (*ablate) return cmd_ablate(out, flags.resolve({}), variant, pe_grid);
        if (*inspect) return cmd_inspect_mask(out, flags.resolve({}), head, relation, graph_name, inspect_ckpt, query_index);
        if (*grad) return cmd_grad_check(out, flags.resolve({}), tolerance);
        if (*gen) return cmd_gen_synthetic(out, gen_out, sc);
    } catch (const std::exception& e) {
        std::string msg = e.what();
        for (auto& ch : msg) {
            if (ch == '\n') ch = ' ';
        }
        std::cerr << "error: " << error_kind(e) << ": " << msg << '\n';
        return error_kind(e) == "config" ? 2 : 1;
    }
    return 1;
}

int run_cli(const std::vector<std::string>& args) { return run_cli(args, std::cout); }

}  // namespace qaspr
