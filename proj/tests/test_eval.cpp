#include "doctest.h"
#include "helpers.hpp"
#include "qaspr/eval.hpp"
#include "qaspr/synthetic.hpp"

using namespace qaspr;

TEST_CASE("filtered rank") {
    // o = 0, x1 = 1 (filtered), x2 = 2, x3 = 3
    std::vector<double> s{0.9, 0.95, 0.5, 0.9};
    std::vector<EntityId> filter{1};
    CHECK(filtered_rank(s, 0, filter) == 1.5);
    CHECK(filtered_rank(s, 0, {}) == 2.5);

    std::vector<double> top{5.0, 1.0, 2.0};
    CHECK(filtered_rank(top, 0, {}) == 1.0);
    for (std::size_t n : {1u, 2u, 7u}) {
        std::vector<double> flat(n, 0.0);
        CHECK(filtered_rank(flat, 0, {}) == (n + 1) / 2.0);
    }
    std::vector<EntityId> self{0};
    CHECK_THROWS(filtered_rank(s, 0, self));
    CHECK_THROWS(filtered_rank(s, 9, {}));
}

TEST_CASE("summaries") {
    auto r = summarize({{0, 0, 1, 1.0}, {0, 0, 2, 4.0}}, false);
    CHECK(r.mrr == 0.625);
    CHECK(r.hits1 == 0.5);
    CHECK(r.hits10 == 1.0);
    CHECK(r.n_queries == 2);
    CHECK(r.ranks.empty());
    CHECK(summarize({}, true).n_queries == 0);

    auto j = metrics_json(r);
    CHECK(j["mrr"] == 0.625);
    CHECK(j["n_queries"] == 2);
}

TEST_CASE("answer index stores both directions") {
    AnswerIndex idx(4, 2);
    idx.add({0, 1, 5});
    idx.add({0, 1, 2});
    idx.add({0, 1, 5});
    auto a = idx.answers(0, 1);
    CHECK(std::vector<EntityId>(a.begin(), a.end()) == std::vector<EntityId>{2, 5});
    auto b = idx.answers(5, 3);
    CHECK(std::vector<EntityId>(b.begin(), b.end()) == std::vector<EntityId>{0});
    CHECK(idx.answers(9, 0).empty());
}

TEST_CASE("zero-parameter model ties every candidate") {
    SyntheticConfig sc;
    sc.entities_per_half = 20;
    sc.rule_pairs = 30;
    sc.background_edges = 20;
    sc.valid_queries = 4;
    sc.test_queries = 6;
    auto split = make_rule_kg(sc).build();
    auto table = mine_confidence(split.train_graph);
    ReasonerConfig rcfg;
    rcfg.L = 2;
    rcfg.d = 3;
    auto params = ModelParams::init(rcfg, split.train_graph.relation_count(), 0);
    for (nn::ParamId id = 0; id < params.store().size(); ++id) {
        for (auto& x : params.store().value(id).data) x = 0.0;
    }
    EvalConfig ecfg;
    ecfg.keep_ranks = true;
    auto report = evaluate(split, table, params, rcfg, {}, ecfg);
    CHECK(report.n_queries == 2 * split.test_queries.size());

    AnswerIndex known(split.ind_vocab.relations.count(), split.ind_vocab.relations.raw_count());
    known.add_all(split.ind_graph.triples());
    known.add_all(split.test_queries);
    for (const auto& q : report.ranks) {
        const auto filtered = known.answers(q.head, q.rel).size() - 1;
        const double n_candidates = static_cast<double>(split.ind_graph.entity_count() - filtered);
        CHECK(q.rank == (n_candidates + 1.0) / 2.0);
    }
}

TEST_CASE("evaluation is reproducible across thread counts") {
    SyntheticConfig sc;
    sc.entities_per_half = 25;
    sc.rule_pairs = 30;
    sc.valid_queries = 5;
    sc.test_queries = 8;
    auto split = make_rule_kg(sc).build();
    auto table = mine_confidence(split.train_graph);
    ReasonerConfig rcfg;
    rcfg.L = 2;
    rcfg.d = 4;
    auto params = ModelParams::init(rcfg, split.train_graph.relation_count(), 4);
    EvalConfig one, many;
    many.threads = 4;
    CHECK(evaluate(split, table, params, rcfg, {}, one).mrr == evaluate(split, table, params, rcfg, {}, many).mrr);

    // p_e = 0 with masking on equals masking off.
    auto nomask = rcfg;
    nomask.masking_enabled = false;
    MaskConfig pe0{.p_e = 0.0};
    CHECK(evaluate(split, table, params, rcfg, pe0, one).mrr == evaluate(split, table, params, nomask, pe0, one).mrr);
}
