#pragma once
// Query-conditioned L-hop forward pass.
//
// For a query (s, r_q, ?) every edge (x, r, o) followed at hop l carries the
// message h_x^(l-1) + W_{r_q} [h_{r_q}; h_r] (h_x^(0) = 0), and h_o^(l) is the
// sum of the messages o receives. Only frontier entities emit: at hop 1 the
// frontier is {s}; afterwards it is the top-K entities reached at the previous
// hop ranked by cumulative path score (max over parents plus w . h_o^(l)).
// Relations are masked per hop before messages flow. The final score of x is
// w . h_x^(L), zero for entities not reached at hop L.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "qaspr/kg.hpp"
#include "qaspr/masking.hpp"
#include "qaspr/numerics.hpp"
#include "qaspr/rng.hpp"
#include "qaspr/rule_confidence.hpp"

namespace qaspr {

struct ReasonerConfig {
    int L = 3;
    int K = 150;
    int d = 32;
    bool masking_enabled = true;
    bool scoring_enabled = true;  // false: no top-k pruning ("w/o S")
    bool relu = false;            // ReLU on intermediate hop embeddings
    bool shared_transform = false;
    bool separate_scorers = false;  // path scorer kept apart from the loss scorer and frozen

    void validate() const;
};

class ModelParams {
   public:
    // Uniform(-1/sqrt(d), 1/sqrt(d)) initialization.
    static ModelParams init(const ReasonerConfig& cfg, std::size_t relation_count, std::uint64_t seed);
    // Adopts a loaded store after checking every tensor's shape against cfg.
    static ModelParams from_store(nn::ParamStore store, const ReasonerConfig& cfg, std::size_t relation_count);

    nn::ParamStore& store() { return store_; }
    const nn::ParamStore& store() const { return store_; }
    std::size_t d() const { return d_; }
    std::size_t relation_count() const { return relation_count_; }

    nn::ParamId rel_emb() const { return rel_emb_; }
    nn::ParamId query_transform() const { return transform_; }
    nn::ParamId score_vec() const { return score_vec_; }
    nn::ParamId path_score_vec() const { return path_score_vec_.value_or(score_vec_); }

    std::size_t relation_offset(RelationId r) const;
    std::size_t transform_offset(RelationId r_q) const;

    std::span<const double> relation(RelationId r) const;
    // d x 2d row-major block used for query relation r_q.
    std::span<const double> transform(RelationId r_q) const;
    std::span<const double> scorer() const;
    std::span<const double> path_scorer() const;

   private:
    ModelParams() = default;
    nn::ParamStore store_;
    std::size_t d_ = 0;
    std::size_t relation_count_ = 0;
    bool shared_ = false;
    nn::ParamId rel_emb_ = 0;
    nn::ParamId transform_ = 0;
    nn::ParamId score_vec_ = 0;
    std::optional<nn::ParamId> path_score_vec_;
};

// h_parent + W_{r_q} [h_{r_q}; h_{edge_rel}]. An empty h_parent means zero.
std::vector<double> message(std::span<const double> h_parent, RelationId edge_rel, RelationId r_q,
                            const ModelParams& params);

double score_node(std::span<const double> h, std::span<const double> w);
double score_node(std::span<const double> h, const ModelParams& params);

// max(parent_scores) + s_cur; throws on an empty list.
double accumulate_score(std::span<const double> parent_scores, double s_cur);

// K highest scores, ties to the lower id, returned ascending by id.
std::vector<EntityId> select_topk(const std::map<EntityId, double>& cum_score, int K);

struct Query {
    EntityId source = 0;
    RelationId rel = 0;
};

struct ReasonerState {
    int hop = 0;
    std::map<EntityId, std::vector<double>> emb;  // entities reached at the last hop
    std::map<EntityId, double> cum_score;         // cumulative path scores at the last hop
    std::vector<EntityId> frontier;               // top-k of the last hop, next emitters
    std::vector<std::vector<EntityId>> frontiers;  // emitters used at hop 1..L
    std::vector<HopMask> hop_masks;
};

struct ForwardOptions {
    // Skipped together with its inverse (training removes the query fact).
    std::optional<Triple> excluded_edge;
    // Replay a previously realized structure (gradient checking).
    const std::vector<std::vector<EntityId>>* forced_frontiers = nullptr;
    const std::vector<HopMask>* forced_masks = nullptr;
};

struct ForwardResult {
    nn::Tape tape;
    nn::Tape::Ref scores = 0;  // taped score vector over all entities
    std::vector<double> final_scores;
    ReasonerState state;
};

// Per-query mask stream: hop l draws from RandomStream(mask_stream, {l}).
inline std::uint64_t query_mask_stream(std::uint64_t seed, std::uint64_t phase, std::uint64_t query_index) {
    return derive_seed(seed, {phase, query_index});
}

ForwardResult forward(const Query& query, const KnowledgeGraph& g, const ConfidenceTable& table,
                      const ModelParams& params, const ReasonerConfig& cfg, const MaskConfig& mask_cfg,
                      std::uint64_t mask_stream, const ForwardOptions& options = {});

}  // namespace qaspr
