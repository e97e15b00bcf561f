#pragma once
// Query-dependent relation masking. Each hop's candidate relations get a
// removal probability that grows as their confidence toward the query relation
// falls below the hop maximum; the retained subset is drawn relation by
// relation.

#include <cstdint>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include "qaspr/kg.hpp"
#include "qaspr/rng.hpp"
#include "qaspr/rule_confidence.hpp"

namespace qaspr {

struct MaskConfig {
    double p_e = 0.5;
    double p_tau = 0.5;
    double eps = 1e-12;
    std::uint64_t seed = 0;

    void validate() const;
};

struct HopMask {
    int hop = 0;
    std::vector<RelationId> candidates;                      // ascending
    std::vector<std::pair<RelationId, double>> confidences;  // aligned with candidates
    std::map<RelationId, double> removal_prob;
    std::vector<RelationId> retained;  // ascending, subset of candidates

    bool retains(RelationId r) const;
};

// Union of out-edge relations over the frontier, ascending and unique. Edges
// listed in excluded are treated as absent.
std::vector<RelationId> candidate_relations(const KnowledgeGraph& g, std::span<const EntityId> frontier,
                                            std::span<const Triple> excluded = {});

// Throws std::invalid_argument on an empty row.
std::map<RelationId, double> removal_probabilities(std::span<const std::pair<RelationId, double>> row,
                                                   const MaskConfig& cfg);

// Keeps each relation with probability 1 - p, one draw per relation in id order.
std::vector<RelationId> sample_mask(const std::map<RelationId, double>& probs, RandomStream& rng);

HopMask build_hop_mask(const KnowledgeGraph& g, std::span<const EntityId> frontier, const ConfidenceTable& table,
                       RelationId r_q, const MaskConfig& cfg, RandomStream& rng, int hop = 1,
                       std::span<const Triple> excluded = {});

// Hop mask with every candidate retained (masking disabled).
HopMask full_hop_mask(const KnowledgeGraph& g, std::span<const EntityId> frontier, const ConfidenceTable& table,
                      RelationId r_q, int hop = 1, std::span<const Triple> excluded = {});

}  // namespace qaspr
