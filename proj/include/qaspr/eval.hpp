#pragma once
// Filtered ranking metrics over both query directions.

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "qaspr/kg.hpp"
#include "qaspr/masking.hpp"
#include "qaspr/reasoner.hpp"
#include "qaspr/rule_confidence.hpp"

namespace qaspr {

// Known true answers per (entity, relation), inverse direction included.
class AnswerIndex {
   public:
    AnswerIndex(std::size_t relation_count, std::size_t raw_relation_count);
    void add(const Triple& t);  // adds t and its inverse
    void add_all(std::span<const Triple> ts) {
        for (const auto& t : ts) add(t);
    }
    // Sorted, unique tails t with (head, rel, t) known.
    std::span<const EntityId> answers(EntityId head, RelationId rel) const;

   private:
    std::uint64_t key(EntityId h, RelationId r) const { return static_cast<std::uint64_t>(h) * relation_count_ + r; }
    std::size_t relation_count_;
    std::size_t raw_relation_count_;
    std::unordered_map<std::uint64_t, std::vector<EntityId>> answers_;
};

// 1 + #{score > target} + #{x != target, score == target} / 2 over the
// entities not in filter_out. Throws if the target itself is filtered.
double filtered_rank(std::span<const double> scores, EntityId target, std::span<const EntityId> filter_out);

struct EvalConfig {
    bool sample_masks = true;  // false: no masking at evaluation time
    std::uint64_t eval_seed = 20240917;
    int threads = 1;
    bool keep_ranks = false;
};

struct QueryRank {
    EntityId head;
    RelationId rel;
    EntityId target;
    double rank;
};

struct MetricsReport {
    double mrr = 0.0;
    double hits1 = 0.0;
    double hits10 = 0.0;
    std::size_t n_queries = 0;
    std::vector<QueryRank> ranks;
};

MetricsReport summarize(std::vector<QueryRank> ranks, bool keep_ranks);

// Scores both directions of every triple in queries against g.
MetricsReport evaluate_queries(const KnowledgeGraph& g, std::span<const Triple> queries, const AnswerIndex& known,
                               const ConfidenceTable& table, const ModelParams& params, const ReasonerConfig& rcfg,
                               const MaskConfig& mcfg, const EvalConfig& ecfg);

// Test queries over the inductive fact graph; filter = ind facts, ind valid and test triples.
MetricsReport evaluate(const InductiveSplit& split, const ConfidenceTable& table, const ModelParams& params,
                       const ReasonerConfig& rcfg, const MaskConfig& mcfg, const EvalConfig& ecfg);

// Validation queries over the training graph; filter = train facts and valid triples.
MetricsReport evaluate_valid(const InductiveSplit& split, const ConfidenceTable& table, const ModelParams& params,
                             const ReasonerConfig& rcfg, const MaskConfig& mcfg, const EvalConfig& ecfg);

nlohmann::json metrics_json(const MetricsReport& report);

}  // namespace qaspr
