#include "qaspr/masking.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace qaspr {

void MaskConfig::validate() const {
    if (!(p_e >= 0.0 && p_e <= 1.0)) throw std::invalid_argument("p_e must lie in [0, 1]");
    if (!(p_tau >= 0.0 && p_tau <= 1.0)) throw std::invalid_argument("p_tau must lie in [0, 1]");
    if (!(eps > 0.0)) throw std::invalid_argument("eps must be positive");
}

bool HopMask::retains(RelationId r) const { return std::binary_search(retained.begin(), retained.end(), r); }

std::vector<RelationId> candidate_relations(const KnowledgeGraph& g, std::span<const EntityId> frontier,
                                            std::span<const Triple> excluded) {
    std::vector<char> seen(g.relation_count(), 0);
    for (EntityId v : frontier) {
        for (const auto& e : g.neighbors(v)) {
            if (std::find(excluded.begin(), excluded.end(), Triple{v, e.rel, e.tail}) != excluded.end()) continue;
            seen[e.rel] = 1;
        }
    }
    std::vector<RelationId> out;
    for (RelationId r = 0; r < seen.size(); ++r) {
        if (seen[r]) out.push_back(r);
    }
    return out;
}

std::map<RelationId, double> removal_probabilities(std::span<const std::pair<RelationId, double>> row,
                                                   const MaskConfig& cfg) {
    if (row.empty()) throw std::invalid_argument("removal_probabilities: empty confidence row");
    double c_max = row.front().second;
    double c_sum = 0.0;
    for (const auto& [r, c] : row) {
        c_max = std::max(c_max, c);
        c_sum += c;
    }
    const double c_avg = c_sum / static_cast<double>(row.size());
    const double spread = c_max - c_avg;
    std::map<RelationId, double> probs;
    for (const auto& [r, c] : row) {
        double p = 0.0;
        if (spread >= cfg.eps) p = std::min((c_max - c) / spread * cfg.p_e, cfg.p_tau);
        probs[r] = std::clamp(p, 0.0, cfg.p_tau);
    }
    return probs;
}

std::vector<RelationId> sample_mask(const std::map<RelationId, double>& probs, RandomStream& rng) {
    std::vector<RelationId> kept;
    for (const auto& [r, p] : probs) {
        // p = 0 always keeps, p = 1 never does: uniform() is in [0, 1).
        if (rng.uniform() >= p) kept.push_back(r);
    }
    return kept;
}

HopMask build_hop_mask(const KnowledgeGraph& g, std::span<const EntityId> frontier, const ConfidenceTable& table,
                       RelationId r_q, const MaskConfig& cfg, RandomStream& rng, int hop,
                       std::span<const Triple> excluded) {
    HopMask mask;
    mask.hop = hop;
    mask.candidates = candidate_relations(g, frontier, excluded);
    if (mask.candidates.empty()) return mask;
    mask.confidences = confidence_row(table, mask.candidates, r_q);
    mask.removal_prob = removal_probabilities(mask.confidences, cfg);
    mask.retained = sample_mask(mask.removal_prob, rng);
    return mask;
}

HopMask full_hop_mask(const KnowledgeGraph& g, std::span<const EntityId> frontier, const ConfidenceTable& table,
                      RelationId r_q, int hop, std::span<const Triple> excluded) {
    HopMask mask;
    mask.hop = hop;
    mask.candidates = candidate_relations(g, frontier, excluded);
    mask.confidences = confidence_row(table, mask.candidates, r_q);
    for (RelationId r : mask.candidates) mask.removal_prob[r] = 0.0;
    mask.retained = mask.candidates;
    return mask;
}

}  // namespace qaspr
