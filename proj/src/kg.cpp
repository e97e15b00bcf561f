#include "qaspr/kg.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "qaspr/log.hpp"

namespace qaspr {

std::uint32_t NameIndex::get_or_add(const std::string& name) {
    auto it = ids_.find(name);
    if (it != ids_.end()) return it->second;
    auto id = static_cast<std::uint32_t>(names_.size());
    names_.push_back(name);
    ids_.emplace(name, id);
    return id;
}

std::optional<std::uint32_t> NameIndex::find(const std::string& name) const {
    auto it = ids_.find(name);
    if (it == ids_.end()) return std::nullopt;
    return it->second;
}

RelationVocab::RelationVocab(std::vector<std::string> raw_names) {
    for (auto& n : raw_names) raw_.get_or_add(n);
}

RelationId RelationVocab::inverse(RelationId r) const {
    if (r >= count()) throw std::out_of_range("relation id " + std::to_string(r) + " out of range");
    auto n = static_cast<RelationId>(raw_count());
    return r < n ? r + n : r - n;
}

std::optional<RelationId> RelationVocab::find(const std::string& name) const {
    static const std::string prefix = "inv:";
    if (name.rfind(prefix, 0) == 0) {
        if (auto id = raw_.find(name.substr(prefix.size()))) return *id + static_cast<RelationId>(raw_count());
    }
    return raw_.find(name);
}

std::string RelationVocab::name(RelationId r) const {
    if (r >= count()) throw std::out_of_range("relation id " + std::to_string(r) + " out of range");
    if (is_inverse(r)) return "inv:" + raw_.name(r - static_cast<RelationId>(raw_count()));
    return raw_.name(r);
}

KnowledgeGraph::KnowledgeGraph(std::vector<Triple> triples, std::size_t entity_count,
                               std::size_t relation_count)
    : triples_(std::move(triples)), entity_count_(entity_count), relation_count_(relation_count) {
    std::sort(triples_.begin(), triples_.end());
    triples_.erase(std::unique(triples_.begin(), triples_.end()), triples_.end());
    offsets_.assign(entity_count_ + 1, 0);
    for (const auto& t : triples_) {
        if (t.head >= entity_count_ || t.tail >= entity_count_ || t.rel >= relation_count_) {
            throw std::out_of_range("triple references id outside graph bounds");
        }
        ++offsets_[t.head + 1];
    }
    for (std::size_t i = 0; i < entity_count_; ++i) offsets_[i + 1] += offsets_[i];
    // triples_ is sorted by (head, rel, tail), so edges land already ordered.
    edges_.reserve(triples_.size());
    for (const auto& t : triples_) {
        edges_.push_back({t.rel, t.tail});
        pair_relations_[pair_key(t.head, t.tail)].push_back(t.rel);
    }
}

void KnowledgeGraph::check_entity(EntityId v) const {
    if (v >= entity_count_) {
        throw std::out_of_range("entity id " + std::to_string(v) + " out of range (entity count " +
                                std::to_string(entity_count_) + ")");
    }
}

std::span<const KnowledgeGraph::Edge> KnowledgeGraph::neighbors(EntityId v) const {
    check_entity(v);
    return std::span<const Edge>(edges_).subspan(offsets_[v], offsets_[v + 1] - offsets_[v]);
}

std::vector<EntityId> KnowledgeGraph::tails(EntityId v, RelationId r) const {
    auto out = neighbors(v);
    auto lo = std::lower_bound(out.begin(), out.end(), Edge{r, 0});
    std::vector<EntityId> result;
    for (auto it = lo; it != out.end() && it->rel == r; ++it) result.push_back(it->tail);
    return result;
}

std::span<const RelationId> KnowledgeGraph::relations_between(EntityId u, EntityId v) const {
    check_entity(u);
    check_entity(v);
    auto it = pair_relations_.find(pair_key(u, v));
    if (it == pair_relations_.end()) return {};
    return it->second;
}

bool KnowledgeGraph::contains(const Triple& t) const {
    if (t.head >= entity_count_ || t.tail >= entity_count_) return false;
    auto rels = relations_between(t.head, t.tail);
    return std::binary_search(rels.begin(), rels.end(), t.rel);
}

std::vector<RawTriple> load_tsv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::vector<RawTriple> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::size_t start = 0;
        while (true) {
            auto tab = line.find('\t', start);
            fields.push_back(line.substr(start, tab - start));
            if (tab == std::string::npos) break;
            start = tab + 1;
        }
        if (fields.size() != 3) {
            throw DataError(path.string() + ": line " + std::to_string(lineno) + ": expected 3 fields, got " +
                            std::to_string(fields.size()));
        }
        out.emplace_back(std::move(fields[0]), std::move(fields[1]), std::move(fields[2]));
    }
    if (in.bad()) throw std::runtime_error("I/O error reading " + path.string());
    return out;
}

std::pair<KnowledgeGraph, Vocab> build_graph(std::span<const RawTriple> raw,
                                             const RelationVocab* fixed_relations) {
    Vocab vocab;
    if (fixed_relations) {
        vocab.relations = *fixed_relations;
        for (const auto& [h, r, t] : raw) {
            if (!vocab.relations.find(r)) throw ValidationError("unknown relation '" + r + "'");
        }
    } else {
        std::vector<std::string> names;
        NameIndex seen;
        for (const auto& [h, r, t] : raw) {
            if (seen.find(r)) continue;
            seen.get_or_add(r);
            names.push_back(r);
        }
        vocab.relations = RelationVocab(std::move(names));
    }

    std::vector<Triple> triples;
    triples.reserve(2 * raw.size());
    for (const auto& [h, r, t] : raw) {
        EntityId head = vocab.entities.get_or_add(h);
        EntityId tail = vocab.entities.get_or_add(t);
        RelationId rel = *vocab.relations.find(r);
        triples.push_back({head, rel, tail});
        triples.push_back({tail, vocab.relations.inverse(rel), head});
    }
    std::size_t before = triples.size();
    std::sort(triples.begin(), triples.end());
    triples.erase(std::unique(triples.begin(), triples.end()), triples.end());
    if (before != triples.size()) {
        log().info("dropped {} duplicate triples (including inverses)", before - triples.size());
    }
    KnowledgeGraph g(std::move(triples), vocab.entities.size(), vocab.relations.count());
    return {std::move(g), std::move(vocab)};
}

std::vector<Triple> encode_triples(std::span<const RawTriple> raw, const Vocab& vocab,
                                   const std::string& what) {
    std::vector<Triple> out;
    out.reserve(raw.size());
    for (const auto& [h, r, t] : raw) {
        auto rel = vocab.relations.find(r);
        if (!rel) throw ValidationError(what + ": unknown relation '" + r + "'");
        auto head = vocab.entities.find(h);
        auto tail = vocab.entities.find(t);
        if (!head || !tail) {
            throw ValidationError(what + ": entity '" + (head ? t : h) + "' not in the fact graph");
        }
        out.push_back({*head, *rel, *tail});
    }
    return out;
}

namespace {

void require_file(const std::filesystem::path& p) {
    if (!std::filesystem::is_regular_file(p)) throw std::runtime_error("missing file " + p.string());
}

// Valid triples whose entities never occur in train.txt cannot be reasoned over.
std::vector<Triple> encode_known(std::span<const RawTriple> raw, const Vocab& vocab, const std::string& what) {
    std::vector<RawTriple> kept;
    for (const auto& rt : raw) {
        if (vocab.entities.find(std::get<0>(rt)) && vocab.entities.find(std::get<2>(rt))) kept.push_back(rt);
    }
    if (kept.size() != raw.size()) {
        log().warn("{}: skipped {} triples with entities absent from the fact graph", what, raw.size() - kept.size());
    }
    return encode_triples(kept, vocab, what);
}

}  // namespace

InductiveSplit build_inductive_split(std::span<const RawTriple> train, std::span<const RawTriple> valid,
                                     std::span<const RawTriple> ind_facts, std::span<const RawTriple> ind_valid,
                                     std::span<const RawTriple> test) {
    InductiveSplit split;
    std::tie(split.train_graph, split.train_vocab) = build_graph(train);
    split.train_queries = encode_triples(train, split.train_vocab, "train.txt");
    split.valid_queries = encode_known(valid, split.train_vocab, "valid.txt");

    try {
        std::tie(split.ind_graph, split.ind_vocab) = build_graph(ind_facts, &split.train_vocab.relations);
    } catch (const ValidationError& e) {
        throw ValidationError(std::string("inductive train.txt: ") + e.what());
    }
    for (const auto& name : split.ind_vocab.entities.names()) {
        if (split.train_vocab.entities.find(name)) {
            throw ValidationError("entity '" + name + "' appears in both the training and inductive graphs");
        }
    }

    auto check_ind_queries = [&](std::span<const RawTriple> raw, const std::string& what) {
        for (const auto& [h, r, t] : raw) {
            for (const auto* e : {&h, &t}) {
                if (split.train_vocab.entities.find(*e)) {
                    throw ValidationError(what + ": entity '" + *e + "' belongs to the training graph");
                }
            }
        }
        return encode_triples(raw, split.ind_vocab, what);
    };
    split.ind_valid_queries = check_ind_queries(ind_valid, "inductive valid.txt");
    split.test_queries = check_ind_queries(test, "inductive test.txt");
    validate_split(split);
    return split;
}

InductiveSplit load_inductive_split(const std::filesystem::path& train_dir,
                                    const std::filesystem::path& ind_dir) {
    for (const char* f : {"train.txt", "valid.txt", "test.txt"}) {
        require_file(train_dir / f);
        require_file(ind_dir / f);
    }
    auto split = build_inductive_split(load_tsv(train_dir / "train.txt"), load_tsv(train_dir / "valid.txt"),
                                       load_tsv(ind_dir / "train.txt"), load_tsv(ind_dir / "valid.txt"),
                                       load_tsv(ind_dir / "test.txt"));
    log().info("loaded split: train {} entities / {} facts, ind {} entities / {} facts, {} test queries",
               split.train_graph.entity_count(), split.train_queries.size(), split.ind_graph.entity_count(),
               split.ind_graph.triples().size() / 2, split.test_queries.size());
    return split;
}

void validate_split(const InductiveSplit& split) {
    for (const auto& name : split.ind_vocab.entities.names()) {
        if (split.train_vocab.entities.find(name)) {
            throw ValidationError("entity '" + name + "' shared between training and inductive graphs");
        }
    }
    if (split.ind_vocab.relations.raw_names() != split.train_vocab.relations.raw_names()) {
        throw ValidationError("inductive graph relation vocabulary differs from training vocabulary");
    }
    auto check = [](const std::vector<Triple>& qs, const KnowledgeGraph& g, const char* what) {
        for (const auto& q : qs) {
            if (q.head >= g.entity_count() || q.tail >= g.entity_count() || q.rel >= g.relation_count()) {
                throw ValidationError(std::string(what) + ": query references an id outside its graph");
            }
        }
    };
    check(split.train_queries, split.train_graph, "train queries");
    check(split.valid_queries, split.train_graph, "valid queries");
    check(split.test_queries, split.ind_graph, "test queries");
    check(split.ind_valid_queries, split.ind_graph, "ind valid queries");
}

}  // namespace qaspr
