#include "qaspr/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace qaspr {

namespace {

std::string join(const std::vector<std::string>& parts) {
    std::string out;
    for (const auto& p : parts) out += (out.empty() ? "" : "; ") + p;
    return out;
}

using Setter = std::function<void(RunConfig&, const nlohmann::json&)>;

template <typename T>
Setter field(T RunConfig::*member) {
    return [member](RunConfig& c, const nlohmann::json& v) { c.*member = v.get<T>(); };
}

Setter path_field(std::filesystem::path RunConfig::*member) {
    return [member](RunConfig& c, const nlohmann::json& v) { c.*member = v.get<std::string>(); };
}

const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = {
        {"dataset", field(&RunConfig::dataset)},
        {"version", field(&RunConfig::version)},
        {"train_dir", path_field(&RunConfig::train_dir)},
        {"ind_dir", path_field(&RunConfig::ind_dir)},
        {"out", path_field(&RunConfig::out)},
        {"L", field(&RunConfig::L)},
        {"K", field(&RunConfig::K)},
        {"d", field(&RunConfig::d)},
        {"masking_enabled", field(&RunConfig::masking_enabled)},
        {"scoring_enabled", field(&RunConfig::scoring_enabled)},
        {"relu", field(&RunConfig::relu)},
        {"shared_transform", field(&RunConfig::shared_transform)},
        {"separate_scorers", field(&RunConfig::separate_scorers)},
        {"p_e", field(&RunConfig::p_e)},
        {"p_tau", field(&RunConfig::p_tau)},
        {"eps", field(&RunConfig::eps)},
        {"batch_size", field(&RunConfig::batch_size)},
        {"lr", field(&RunConfig::lr)},
        {"max_epochs", field(&RunConfig::max_epochs)},
        {"patience", field(&RunConfig::patience)},
        {"eval_every", field(&RunConfig::eval_every)},
        {"seed", field(&RunConfig::seed)},
        {"eval_seed", field(&RunConfig::eval_seed)},
        {"eval_mask", field(&RunConfig::eval_mask)},
        {"threads", field(&RunConfig::threads)},
        {"pe_grid", field(&RunConfig::pe_grid)},
    };
    return table;
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> problems)
    : std::runtime_error("invalid config: " + join(problems)), problems_(std::move(problems)) {}

ReasonerConfig RunConfig::reasoner() const {
    return {L, K, d, masking_enabled, scoring_enabled, relu, shared_transform, separate_scorers};
}

MaskConfig RunConfig::mask() const { return {p_e, p_tau, eps, seed}; }

TrainConfig RunConfig::train() const { return {batch_size, lr, max_epochs, patience, eval_every, seed, threads}; }

EvalConfig RunConfig::eval() const { return {eval_mask == "sampled", eval_seed, threads, false}; }

void RunConfig::validate() const {
    std::vector<std::string> problems;
    auto require = [&](bool ok, const std::string& msg) {
        if (!ok) problems.push_back(msg);
    };
    require(L >= 1, "L must be >= 1");
    require(K >= 1, "K must be >= 1");
    require(d >= 1, "d must be >= 1");
    require(p_e >= 0.0 && p_e <= 1.0, "p_e must lie in [0, 1]");
    require(p_tau >= 0.0 && p_tau <= 1.0, "p_tau must lie in [0, 1]");
    require(eps > 0.0, "eps must be > 0");
    require(batch_size >= 1, "batch_size must be >= 1");
    require(lr > 0.0, "lr must be > 0");
    require(max_epochs >= 0, "max_epochs must be >= 0");
    require(patience >= 1, "patience must be >= 1");
    require(eval_every >= 1, "eval_every must be >= 1");
    require(eval_mask == "sampled" || eval_mask == "none", "eval_mask must be 'sampled' or 'none'");
    require(threads >= 1, "threads must be >= 1");
    for (double p : pe_grid) require(p >= 0.0 && p <= 1.0, "pe_grid values must lie in [0, 1]");
    if (!problems.empty()) throw ConfigError(std::move(problems));
}

nlohmann::json RunConfig::to_json() const {
    return {
        {"dataset", dataset},
        {"version", version},
        {"train_dir", train_dir.string()},
        {"ind_dir", ind_dir.string()},
        {"out", out.string()},
        {"L", L},
        {"K", K},
        {"d", d},
        {"masking_enabled", masking_enabled},
        {"scoring_enabled", scoring_enabled},
        {"relu", relu},
        {"shared_transform", shared_transform},
        {"separate_scorers", separate_scorers},
        {"p_e", p_e},
        {"p_tau", p_tau},
        {"eps", eps},
        {"batch_size", batch_size},
        {"lr", lr},
        {"max_epochs", max_epochs},
        {"patience", patience},
        {"eval_every", eval_every},
        {"seed", seed},
        {"eval_seed", eval_seed},
        {"eval_mask", eval_mask},
        {"threads", threads},
        {"pe_grid", pe_grid},
    };
}

void RunConfig::merge_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError({"config must be a JSON object"});
    std::vector<std::string> problems;
    for (const auto& [key, value] : j.items()) {
        auto it = setters().find(key);
        if (it == setters().end()) {
            problems.push_back("unknown key '" + key + "'");
            continue;
        }
        try {
            it->second(*this, value);
        } catch (const nlohmann::json::exception&) {
            problems.push_back("field '" + key + "' has the wrong type");
        }
    }
    if (!problems.empty()) throw ConfigError(std::move(problems));
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
    RunConfig c;
    c.merge_json(j);
    return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError({"cannot read config " + path.string()});
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError({path.string() + ": " + e.what()});
    }
    return RunConfig::from_json(j);
}

}  // namespace qaspr
