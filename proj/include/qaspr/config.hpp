#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "qaspr/eval.hpp"
#include "qaspr/masking.hpp"
#include "qaspr/reasoner.hpp"
#include "qaspr/training.hpp"

namespace qaspr {

class ConfigError : public std::runtime_error {
   public:
    explicit ConfigError(std::vector<std::string> problems);
    const std::vector<std::string>& problems() const { return problems_; }

   private:
    std::vector<std::string> problems_;
};

// Flat run configuration. JSON keys match the field names; unknown keys are
// rejected and every invalid field is reported at once.
struct RunConfig {
    std::string dataset = "custom";
    std::string version;
    std::filesystem::path train_dir;
    std::filesystem::path ind_dir;
    std::filesystem::path out = "run";

    int L = 3;
    int K = 150;
    int d = 32;
    bool masking_enabled = true;
    bool scoring_enabled = true;
    bool relu = false;
    bool shared_transform = false;
    bool separate_scorers = false;

    double p_e = 0.5;
    double p_tau = 0.5;
    double eps = 1e-12;

    int batch_size = 100;
    double lr = 5e-3;
    int max_epochs = 30;
    int patience = 5;
    int eval_every = 1;

    std::uint64_t seed = 0;
    std::uint64_t eval_seed = 20240917;
    std::string eval_mask = "sampled";  // sampled | none
    int threads = 1;

    std::vector<double> pe_grid{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};

    ReasonerConfig reasoner() const;
    MaskConfig mask() const;
    TrainConfig train() const;
    EvalConfig eval() const;

    // Throws ConfigError listing every problem.
    void validate() const;
    // All fields, including data and output paths.
    nlohmann::json to_json() const;
    static RunConfig from_json(const nlohmann::json& j);
    // Overlays j onto this config; unknown keys and type errors are collected.
    void merge_json(const nlohmann::json& j);
};

RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace qaspr
