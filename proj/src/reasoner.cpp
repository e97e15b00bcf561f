#include "qaspr/reasoner.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace qaspr {

void ReasonerConfig::validate() const {
    if (L < 1) throw std::invalid_argument("L must be >= 1");
    if (K < 1) throw std::invalid_argument("K must be >= 1");
    if (d < 1) throw std::invalid_argument("d must be >= 1");
}

namespace {

constexpr const char* kRelEmb = "rel_emb";
constexpr const char* kTransform = "query_transform";
constexpr const char* kScoreVec = "score_vec";
constexpr const char* kPathScoreVec = "path_score_vec";

std::vector<std::size_t> transform_shape(const ReasonerConfig& cfg, std::size_t relation_count) {
    const auto d = static_cast<std::size_t>(cfg.d);
    if (cfg.shared_transform) return {d, 2 * d};
    return {relation_count, d, 2 * d};
}

}  // namespace

ModelParams ModelParams::init(const ReasonerConfig& cfg, std::size_t relation_count, std::uint64_t seed) {
    cfg.validate();
    const auto d = static_cast<std::size_t>(cfg.d);
    const double bound = 1.0 / std::sqrt(static_cast<double>(d));
    RandomStream rng(seed, {0x1417});
    auto uniform = [&](std::vector<std::size_t> shape) {
        nn::Tensor t(std::move(shape));
        for (auto& x : t.data) x = rng.uniform(-bound, bound);
        return t;
    };
    nn::ParamStore store;
    store.add(kRelEmb, uniform({relation_count, d}));
    store.add(kTransform, uniform(transform_shape(cfg, relation_count)));
    store.add(kScoreVec, uniform({d}));
    if (cfg.separate_scorers) store.add(kPathScoreVec, uniform({d}), /*trainable=*/false);
    return from_store(std::move(store), cfg, relation_count);
}

ModelParams ModelParams::from_store(nn::ParamStore store, const ReasonerConfig& cfg, std::size_t relation_count) {
    cfg.validate();
    const auto d = static_cast<std::size_t>(cfg.d);
    auto expect = [&](const char* name, const std::vector<std::size_t>& shape) {
        auto id = store.find(name);
        if (!id) throw std::invalid_argument(std::string("parameters missing tensor '") + name + "'");
        const auto& got = store.value(*id).shape;
        if (got != shape) {
            throw std::invalid_argument(std::string("tensor '") + name + "' has shape " + nn::shape_string(got) +
                                        ", config expects " + nn::shape_string(shape));
        }
        if (!store.value(*id).all_finite()) throw std::invalid_argument(std::string("tensor '") + name + "' is not finite");
        return *id;
    };
    ModelParams m;
    m.d_ = d;
    m.relation_count_ = relation_count;
    m.shared_ = cfg.shared_transform;
    m.rel_emb_ = expect(kRelEmb, {relation_count, d});
    m.transform_ = expect(kTransform, transform_shape(cfg, relation_count));
    m.score_vec_ = expect(kScoreVec, {d});
    const std::size_t expected_count = cfg.separate_scorers ? 4 : 3;
    if (cfg.separate_scorers) m.path_score_vec_ = expect(kPathScoreVec, {d});
    if (store.size() != expected_count) throw std::invalid_argument("parameter store has unexpected extra tensors");
    m.store_ = std::move(store);
    if (m.path_score_vec_) {
        // The path scorer never receives gradient through hard top-k selection.
        nn::ParamStore rebuilt;
        for (nn::ParamId p = 0; p < m.store_.size(); ++p) {
            rebuilt.add(m.store_.name(p), m.store_.value(p), p != *m.path_score_vec_);
        }
        m.store_ = std::move(rebuilt);
    }
    return m;
}

std::size_t ModelParams::relation_offset(RelationId r) const {
    if (r >= relation_count_) throw std::out_of_range("relation id " + std::to_string(r) + " out of range");
    return static_cast<std::size_t>(r) * d_;
}

std::size_t ModelParams::transform_offset(RelationId r_q) const {
    if (r_q >= relation_count_) throw std::out_of_range("relation id " + std::to_string(r_q) + " out of range");
    return shared_ ? 0 : static_cast<std::size_t>(r_q) * d_ * 2 * d_;
}

std::span<const double> ModelParams::relation(RelationId r) const {
    return std::span<const double>(store_.value(rel_emb_).data).subspan(relation_offset(r), d_);
}

std::span<const double> ModelParams::transform(RelationId r_q) const {
    return std::span<const double>(store_.value(transform_).data).subspan(transform_offset(r_q), 2 * d_ * d_);
}

std::span<const double> ModelParams::scorer() const { return store_.value(score_vec_).data; }
std::span<const double> ModelParams::path_scorer() const { return store_.value(path_score_vec()).data; }

std::vector<double> message(std::span<const double> h_parent, RelationId edge_rel, RelationId r_q,
                            const ModelParams& params) {
    const std::size_t d = params.d();
    if (!h_parent.empty() && h_parent.size() != d) {
        throw std::invalid_argument("message: parent embedding has dimension " + std::to_string(h_parent.size()) +
                                    ", expected " + std::to_string(d));
    }
    auto w = params.transform(r_q);
    auto hq = params.relation(r_q);
    auto hr = params.relation(edge_rel);
    std::vector<double> out(d, 0.0);
    for (std::size_t i = 0; i < d; ++i) {
        double s = h_parent.empty() ? 0.0 : h_parent[i];
        const double* row = w.data() + i * 2 * d;
        for (std::size_t j = 0; j < d; ++j) s += row[j] * hq[j] + row[d + j] * hr[j];
        out[i] = s;
    }
    return out;
}

double score_node(std::span<const double> h, std::span<const double> w) {
    if (h.size() != w.size()) throw std::invalid_argument("score_node: dimension mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < h.size(); ++i) s += w[i] * h[i];
    return s;
}

double score_node(std::span<const double> h, const ModelParams& params) { return score_node(h, params.path_scorer()); }

double accumulate_score(std::span<const double> parent_scores, double s_cur) {
    if (parent_scores.empty()) throw std::invalid_argument("accumulate_score: no parent scores");
    return *std::max_element(parent_scores.begin(), parent_scores.end()) + s_cur;
}

std::vector<EntityId> select_topk(const std::map<EntityId, double>& cum_score, int K) {
    if (K < 1) throw std::invalid_argument("select_topk: K must be >= 1");
    std::vector<std::pair<double, EntityId>> ranked;
    ranked.reserve(cum_score.size());
    for (const auto& [v, s] : cum_score) ranked.emplace_back(s, v);
    const auto k = std::min(ranked.size(), static_cast<std::size_t>(K));
    auto better = [](const auto& a, const auto& b) { return a.first > b.first || (a.first == b.first && a.second < b.second); };
    std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(k), ranked.end(), better);
    std::vector<EntityId> out;
    out.reserve(k);
    for (std::size_t i = 0; i < k; ++i) out.push_back(ranked[i].second);
    std::sort(out.begin(), out.end());
    return out;
}

ForwardResult forward(const Query& query, const KnowledgeGraph& g, const ConfidenceTable& table,
                      const ModelParams& params, const ReasonerConfig& cfg, const MaskConfig& mask_cfg,
                      std::uint64_t mask_stream, const ForwardOptions& options) {
    cfg.validate();
    if (query.source >= g.entity_count()) {
        throw std::out_of_range("query entity " + std::to_string(query.source) + " not in graph");
    }
    if (query.rel >= g.relation_count() || query.rel >= params.relation_count()) {
        throw std::out_of_range("query relation " + std::to_string(query.rel) + " out of range");
    }
    if (table.relation_count() != g.relation_count()) {
        throw std::invalid_argument("confidence table and graph disagree on relation count");
    }

    const std::size_t d = params.d();
    const RelationId r_q = query.rel;
    ForwardResult result{nn::Tape(params.store()), 0, {}, {}};
    nn::Tape& tape = result.tape;
    ReasonerState& state = result.state;

    std::vector<Triple> excluded;
    if (options.excluded_edge) {
        const auto& e = *options.excluded_edge;
        const RelationId inv = e.rel < g.relation_count() / 2 ? e.rel + static_cast<RelationId>(g.relation_count() / 2)
                                                               : e.rel - static_cast<RelationId>(g.relation_count() / 2);
        excluded = {e, Triple{e.tail, inv, e.head}};
    }
    auto is_excluded = [&](EntityId h, RelationId r, EntityId t) {
        return !excluded.empty() && (excluded[0] == Triple{h, r, t} || excluded[1] == Triple{h, r, t});
    };

    // W_{r_q} [h_{r_q}; h_r] is shared by every edge labelled r within this query.
    const nn::Tape::Ref w_q = tape.param_slice(params.query_transform(), params.transform_offset(r_q), d, 2 * d);
    const nn::Tape::Ref h_q = tape.param_slice(params.rel_emb(), params.relation_offset(r_q), d);
    std::vector<std::optional<nn::Tape::Ref>> edge_msg(g.relation_count());
    auto relation_message = [&](RelationId r) {
        auto& slot = edge_msg[r];
        if (!slot) {
            auto h_r = r == r_q ? h_q : tape.param_slice(params.rel_emb(), params.relation_offset(r), d);
            slot = tape.linear(w_q, tape.concat(h_q, h_r));
        }
        return *slot;
    };

    const auto path_w = params.path_scorer();
    std::map<EntityId, nn::Tape::Ref> emb_ref;  // entities reached at the current hop
    std::map<EntityId, double> cum;
    std::vector<EntityId> frontier{query.source};

    for (int hop = 1; hop <= cfg.L; ++hop) {
        if (hop > 1) {
            if (options.forced_frontiers) {
                frontier = options.forced_frontiers->at(static_cast<std::size_t>(hop - 1));
            } else if (cfg.scoring_enabled) {
                frontier = select_topk(cum, cfg.K);
            } else {
                frontier.clear();
                for (const auto& [v, s] : cum) frontier.push_back(v);
            }
        }
        state.frontiers.push_back(frontier);

        HopMask mask;
        if (options.forced_masks) {
            mask = options.forced_masks->at(static_cast<std::size_t>(hop - 1));
        } else if (cfg.masking_enabled) {
            RandomStream rng(mask_stream, {static_cast<std::uint64_t>(hop)});
            mask = build_hop_mask(g, frontier, table, r_q, mask_cfg, rng, hop, excluded);
        } else {
            mask = full_hop_mask(g, frontier, table, r_q, hop, excluded);
        }
        std::vector<char> keep(g.relation_count(), 0);
        for (RelationId r : mask.retained) keep[r] = 1;

        struct Incoming {
            std::vector<nn::Tape::Ref> terms;
            std::vector<double> parent_scores;
        };
        std::map<EntityId, Incoming> incoming;
        for (EntityId x : frontier) {
            std::optional<nn::Tape::Ref> h_x;
            double parent_score = 0.0;
            if (hop > 1) {
                auto it = emb_ref.find(x);
                if (it == emb_ref.end()) throw std::logic_error("frontier entity was not reached at the previous hop");
                h_x = it->second;
                parent_score = cum.at(x);
            }
            for (const auto& e : g.neighbors(x)) {
                if (!keep[e.rel] || is_excluded(x, e.rel, e.tail)) continue;
                auto& in = incoming[e.tail];
                if (h_x) in.terms.push_back(*h_x);
                in.terms.push_back(relation_message(e.rel));
                in.parent_scores.push_back(parent_score);
            }
        }
        state.hop_masks.push_back(std::move(mask));

        std::map<EntityId, nn::Tape::Ref> next_emb;
        std::map<EntityId, double> next_cum;
        for (auto& [o, in] : incoming) {
            auto h = tape.sum_list(in.terms);
            if (cfg.relu && hop < cfg.L) h = tape.relu(h);
            next_emb.emplace(o, h);
            next_cum.emplace(o, accumulate_score(in.parent_scores, score_node(tape.value(h), path_w)));
        }
        emb_ref = std::move(next_emb);
        cum = std::move(next_cum);
        state.hop = hop;
    }

    state.cum_score = cum;
    state.frontier = cfg.scoring_enabled ? select_topk(cum, cfg.K) : std::vector<EntityId>{};
    if (!cfg.scoring_enabled) {
        for (const auto& [v, s] : cum) state.frontier.push_back(v);
    }

    const nn::Tape::Ref w_s = tape.param(params.score_vec());
    std::vector<nn::Tape::Ref> scalars;
    std::vector<std::size_t> indices;
    for (const auto& [v, h] : emb_ref) {
        auto hv = tape.value(h);
        state.emb.emplace(v, std::vector<double>(hv.begin(), hv.end()));
        scalars.push_back(tape.dot(w_s, h));
        indices.push_back(v);
    }
    result.scores = tape.scatter(scalars, indices, g.entity_count());
    auto sv = tape.value(result.scores);
    result.final_scores.assign(sv.begin(), sv.end());
    return result;
}

}  // namespace qaspr
