#pragma once
// Full-softmax multi-class log-loss, Adam training over both query
// directions, and early stopping on validation MRR.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "json.hpp"
#include "qaspr/eval.hpp"
#include "qaspr/kg.hpp"
#include "qaspr/masking.hpp"
#include "qaspr/numerics.hpp"
#include "qaspr/reasoner.hpp"
#include "qaspr/rule_confidence.hpp"

namespace qaspr {

struct TrainConfig {
    int batch_size = 100;  // triples per batch, two queries each
    double lr = 5e-3;
    int max_epochs = 30;
    int patience = 5;  // evaluations without improvement before stopping
    int eval_every = 1;
    std::uint64_t seed = 0;
    int threads = 1;

    void validate() const;
};

// -scores[target] + logsumexp(scores).
nn::Tape::Ref multiclass_logloss(nn::Tape& tape, nn::Tape::Ref scores, EntityId target);
double multiclass_logloss(std::span<const double> scores, EntityId target);

struct TrainingQuery {
    Triple fact;  // removed from the graph while this query runs
    Query query;
    EntityId target;
};

// (s, r, ?) -> o and (o, inv(r), ?) -> s for one fact.
std::pair<TrainingQuery, TrainingQuery> directed_queries(const Triple& fact, std::size_t raw_relation_count);

struct EpochStats {
    int epoch = 0;
    double mean_loss = 0.0;
    std::size_t n_queries = 0;
};

// Loss of one query; accumulates gradients into grads when non-null.
double query_loss(const TrainingQuery& q, const KnowledgeGraph& g, const ConfidenceTable& table,
                  const ModelParams& params, const ReasonerConfig& rcfg, const MaskConfig& mcfg,
                  std::uint64_t mask_stream, nn::GradBuffer* grads);

EpochStats train_epoch(const InductiveSplit& split, const ConfidenceTable& table, ModelParams& params,
                       const ReasonerConfig& rcfg, const MaskConfig& mcfg, const TrainConfig& tcfg, int epoch_index);

struct CurvePoint {
    int epoch = 0;
    double loss = 0.0;
    std::optional<double> valid_mrr;
};

struct FitResult {
    ModelParams best;
    int best_epoch = 0;
    MetricsReport best_valid;
    std::vector<CurvePoint> curve;
};

using CurveCallback = std::function<void(const CurvePoint&)>;

// Epoch 0 evaluates the initialization; evaluations then run every eval_every
// epochs and after the final epoch.
FitResult fit(const InductiveSplit& split, const ConfidenceTable& table, const ReasonerConfig& rcfg,
              const MaskConfig& mcfg, const TrainConfig& tcfg, const EvalConfig& ecfg,
              const CurveCallback& on_point = {});

nlohmann::json curve_json(const CurvePoint& p);

// Finite-difference check of the end-to-end query loss on a small fixed graph.
// The frontier and masks realized at the base point are replayed for every
// perturbation so the loss stays smooth in the parameters.
nn::GradCheckReport model_grad_check(std::uint64_t seed, double tolerance, const ReasonerConfig& rcfg = {2, 3, 4});

}  // namespace qaspr
