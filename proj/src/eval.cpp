#include "qaspr/eval.hpp"

#include <algorithm>
#include <stdexcept>

#include "qaspr/parallel.hpp"

namespace qaspr {

AnswerIndex::AnswerIndex(std::size_t relation_count, std::size_t raw_relation_count)
    : relation_count_(relation_count), raw_relation_count_(raw_relation_count) {
    if (relation_count != 2 * raw_relation_count) throw std::invalid_argument("AnswerIndex: inconsistent relation counts");
}

void AnswerIndex::add(const Triple& t) {
    if (t.rel >= relation_count_) throw std::out_of_range("AnswerIndex: relation out of range");
    const auto n = static_cast<RelationId>(raw_relation_count_);
    const RelationId inv = t.rel < n ? t.rel + n : t.rel - n;
    auto insert = [this](EntityId h, RelationId r, EntityId x) {
        auto& v = answers_[key(h, r)];
        auto it = std::lower_bound(v.begin(), v.end(), x);
        if (it == v.end() || *it != x) v.insert(it, x);
    };
    insert(t.head, t.rel, t.tail);
    insert(t.tail, inv, t.head);
}

std::span<const EntityId> AnswerIndex::answers(EntityId head, RelationId rel) const {
    auto it = answers_.find(key(head, rel));
    if (it == answers_.end()) return {};
    return it->second;
}

double filtered_rank(std::span<const double> scores, EntityId target, std::span<const EntityId> filter_out) {
    if (target >= scores.size()) throw std::out_of_range("filtered_rank: target out of range");
    std::vector<char> filtered(scores.size(), 0);
    for (EntityId x : filter_out) {
        if (x == target) throw std::invalid_argument("filtered_rank: target is in the filter set");
        if (x < scores.size()) filtered[x] = 1;
    }
    const double t = scores[target];
    std::size_t greater = 0;
    std::size_t equal = 0;
    for (std::size_t x = 0; x < scores.size(); ++x) {
        if (filtered[x] || x == target) continue;
        if (scores[x] > t) ++greater;
        else if (scores[x] == t) ++equal;
    }
    return 1.0 + static_cast<double>(greater) + static_cast<double>(equal) / 2.0;
}

MetricsReport summarize(std::vector<QueryRank> ranks, bool keep_ranks) {
    MetricsReport r;
    r.n_queries = ranks.size();
    if (ranks.empty()) return r;
    double rr = 0.0, h1 = 0.0, h10 = 0.0;
    for (const auto& q : ranks) {
        rr += 1.0 / q.rank;
        h1 += q.rank <= 1.0 ? 1.0 : 0.0;
        h10 += q.rank <= 10.0 ? 1.0 : 0.0;
    }
    const auto n = static_cast<double>(ranks.size());
    r.mrr = rr / n;
    r.hits1 = h1 / n;
    r.hits10 = h10 / n;
    if (keep_ranks) r.ranks = std::move(ranks);
    return r;
}

MetricsReport evaluate_queries(const KnowledgeGraph& g, std::span<const Triple> queries, const AnswerIndex& known,
                               const ConfidenceTable& table, const ModelParams& params, const ReasonerConfig& rcfg,
                               const MaskConfig& mcfg, const EvalConfig& ecfg) {
    ReasonerConfig cfg = rcfg;
    if (!ecfg.sample_masks) cfg.masking_enabled = false;
    const auto n_raw = static_cast<RelationId>(g.relation_count() / 2);
    std::vector<QueryRank> ranks(2 * queries.size());
    parallel_for(ranks.size(), ecfg.threads, [&](std::size_t i) {
        const Triple& t = queries[i / 2];
        const bool head_direction = i % 2 == 1;
        const EntityId source = head_direction ? t.tail : t.head;
        const RelationId rel = head_direction ? (t.rel < n_raw ? t.rel + n_raw : t.rel - n_raw) : t.rel;
        const EntityId target = head_direction ? t.head : t.tail;
        auto fwd = forward(Query{source, rel}, g, table, params, cfg, mcfg,
                           query_mask_stream(ecfg.eval_seed, 0, i));
        std::vector<EntityId> filter;
        for (EntityId x : known.answers(source, rel)) {
            if (x != target) filter.push_back(x);
        }
        ranks[i] = {source, rel, target, filtered_rank(fwd.final_scores, target, filter)};
    });
    return summarize(std::move(ranks), ecfg.keep_ranks);
}

MetricsReport evaluate(const InductiveSplit& split, const ConfidenceTable& table, const ModelParams& params,
                       const ReasonerConfig& rcfg, const MaskConfig& mcfg, const EvalConfig& ecfg) {
    const auto& rel = split.ind_vocab.relations;
    AnswerIndex known(rel.count(), rel.raw_count());
    known.add_all(split.ind_graph.triples());
    known.add_all(split.ind_valid_queries);
    known.add_all(split.test_queries);
    return evaluate_queries(split.ind_graph, split.test_queries, known, table, params, rcfg, mcfg, ecfg);
}

MetricsReport evaluate_valid(const InductiveSplit& split, const ConfidenceTable& table, const ModelParams& params,
                             const ReasonerConfig& rcfg, const MaskConfig& mcfg, const EvalConfig& ecfg) {
    const auto& rel = split.train_vocab.relations;
    AnswerIndex known(rel.count(), rel.raw_count());
    known.add_all(split.train_graph.triples());
    known.add_all(split.valid_queries);
    return evaluate_queries(split.train_graph, split.valid_queries, known, table, params, rcfg, mcfg, ecfg);
}

nlohmann::json metrics_json(const MetricsReport& report) {
    return {{"mrr", report.mrr}, {"hits1", report.hits1}, {"hits10", report.hits10}, {"n_queries", report.n_queries}};
}

}  // namespace qaspr
