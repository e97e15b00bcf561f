#include "doctest.h"
#include "helpers.hpp"

using namespace qaspr;
using qaspr::test::ent;
using qaspr::test::graph_of;
using qaspr::test::rel;

TEST_CASE("load_tsv parses, skips blank lines, rejects short rows") {
    test::TempDir dir("tsv");
    auto ok = load_tsv(dir.write("ok.txt", "a\tr1\tb\n\nc\tr2\td\r\n"));
    REQUIRE(ok.size() == 2);
    CHECK(ok[0] == RawTriple{"a", "r1", "b"});
    CHECK(std::get<2>(ok[1]) == "d");

    CHECK(load_tsv(dir.write("empty.txt", "")).empty());

    try {
        load_tsv(dir.write("bad.txt", "a\tr1\n"));
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("line 1: expected 3 fields") != std::string::npos);
    }
    CHECK_THROWS(load_tsv(dir.path / "missing.txt"));
}

TEST_CASE("inverse closure and dedup") {
    auto [g, v] = graph_of({{"a", "r1", "b"}});
    CHECK(g.triples().size() == 2);
    CHECK(g.entity_count() == 2);
    CHECK(g.relation_count() == 2);
    CHECK(v.relations.name(1) == "inv:r1");
    CHECK(v.relations.inverse(0) == 1);
    CHECK(v.relations.inverse(1) == 0);
    CHECK(*v.relations.find("inv:r1") == 1);

    auto [g2, v2] = graph_of({{"a", "r1", "b"}, {"a", "r1", "b"}});
    CHECK(g2.triples().size() == 2);
}

TEST_CASE("adjacency is sorted by (relation, tail)") {
    auto [g, v] = graph_of({{"a", "r1", "b"}, {"a", "r2", "b"}, {"a", "r1", "c"}});
    auto nb = g.neighbors(ent(v, "a"));
    REQUIRE(nb.size() == 3);
    CHECK(nb[0] == KnowledgeGraph::Edge{rel(v, "r1"), ent(v, "b")});
    CHECK(nb[1] == KnowledgeGraph::Edge{rel(v, "r1"), ent(v, "c")});
    CHECK(nb[2] == KnowledgeGraph::Edge{rel(v, "r2"), ent(v, "b")});

    auto [g2, v2] = graph_of({{"a", "r1", "b"}, {"c", "r1", "b"}});
    auto tails = g2.tails(ent(v2, "b"), rel(v2, "inv:r1"));
    CHECK(tails == std::vector<EntityId>{ent(v2, "a"), ent(v2, "c")});
    CHECK_THROWS_AS(g2.neighbors(99), std::out_of_range);
}

TEST_CASE("isolated entity has no neighbors") {
    std::vector<Triple> ts{{0, 0, 1}, {1, 1, 0}};
    KnowledgeGraph g(ts, 3, 2);
    CHECK(g.neighbors(2).empty());
}

TEST_CASE("relations_between") {
    auto [g, v] = graph_of({{"a", "r1", "b"}, {"a", "r2", "b"}});
    auto a = ent(v, "a"), b = ent(v, "b");
    auto rs = g.relations_between(a, b);
    CHECK(std::vector<RelationId>(rs.begin(), rs.end()) == std::vector<RelationId>{rel(v, "r1"), rel(v, "r2")});
    auto back = g.relations_between(b, a);
    CHECK(std::vector<RelationId>(back.begin(), back.end()) ==
          std::vector<RelationId>{rel(v, "inv:r1"), rel(v, "inv:r2")});
    CHECK(g.relations_between(a, a).empty());
    CHECK(g.contains({a, rel(v, "r1"), b}));
    CHECK_FALSE(g.contains({b, rel(v, "r1"), a}));
}

TEST_CASE("fixed relation vocabulary rejects unknown relations") {
    RelationVocab rels({"r1"});
    CHECK_NOTHROW(build_graph(std::vector<RawTriple>{{"x", "r1", "y"}}, &rels));
    CHECK_THROWS_AS(build_graph(std::vector<RawTriple>{{"x", "r9", "y"}}, &rels), ValidationError);
}

TEST_CASE("inductive split validation") {
    const std::vector<RawTriple> train{{"a", "r1", "b"}, {"b", "r2", "c"}};
    const std::vector<RawTriple> valid{{"a", "r2", "c"}};
    const std::vector<RawTriple> ind{{"x", "r1", "y"}, {"y", "r2", "z"}};
    const std::vector<RawTriple> test{{"x", "r2", "z"}};

    auto split = build_inductive_split(train, valid, ind, {}, test);
    CHECK(split.train_graph.entity_count() == 3);
    CHECK(split.ind_graph.entity_count() == 3);
    CHECK(split.train_queries.size() == 2);
    CHECK(split.valid_queries.size() == 1);
    CHECK(split.test_queries.size() == 1);
    CHECK(split.ind_vocab.relations.raw_names() == split.train_vocab.relations.raw_names());
    CHECK_NOTHROW(validate_split(split));

    SUBCASE("shared entity") {
        std::vector<RawTriple> overlap{{"x", "r1", "a"}};
        CHECK_THROWS_AS(build_inductive_split(train, valid, overlap, {}, {}), ValidationError);
    }
    SUBCASE("unknown relation in the inductive graph") {
        std::vector<RawTriple> bad{{"x", "r7", "y"}};
        CHECK_THROWS_AS(build_inductive_split(train, valid, bad, {}, {}), ValidationError);
    }
    SUBCASE("test query on an unknown entity") {
        std::vector<RawTriple> bad_test{{"x", "r2", "nowhere"}};
        CHECK_THROWS_AS(build_inductive_split(train, valid, ind, {}, bad_test), ValidationError);
    }
}

TEST_CASE("load_inductive_split reads the directory layout") {
    test::TempDir dir("split");
    dir.write("tr/train.txt", "a\tr1\tb\nb\tr1\tc\n");
    dir.write("tr/valid.txt", "a\tr1\tc\n");
    dir.write("tr/test.txt", "");
    dir.write("ind/train.txt", "x\tr1\ty\n");
    dir.write("ind/valid.txt", "");
    dir.write("ind/test.txt", "y\tr1\tx\n");
    auto split = load_inductive_split(dir.path / "tr", dir.path / "ind");
    CHECK(split.test_queries.size() == 1);
    CHECK_THROWS(load_inductive_split(dir.path / "tr", dir.path / "nope"));
}
