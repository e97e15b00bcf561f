#pragma once
// Knowledge-graph core: vocabularies, indexed immutable triple store, and the
// inductive benchmark split loader (GraIL directory layout).

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <tuple>
#include <unordered_map>
#include <utility>
#include <vector>

namespace qaspr {

using EntityId = std::uint32_t;
using RelationId = std::uint32_t;

struct Triple {
    EntityId head = 0;
    RelationId rel = 0;
    EntityId tail = 0;

    friend auto operator<=>(const Triple&, const Triple&) = default;
};

using RawTriple = std::tuple<std::string, std::string, std::string>;

class DataError : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

class ValidationError : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

// Dense name <-> id map, ids assigned in first-appearance order.
class NameIndex {
   public:
    std::uint32_t get_or_add(const std::string& name);
    std::optional<std::uint32_t> find(const std::string& name) const;
    const std::string& name(std::uint32_t id) const { return names_.at(id); }
    std::size_t size() const { return names_.size(); }
    const std::vector<std::string>& names() const { return names_; }

   private:
    std::vector<std::string> names_;
    std::unordered_map<std::string, std::uint32_t> ids_;
};

// Raw relations occupy ids [0, raw_count); the inverse of raw id r is r + raw_count.
class RelationVocab {
   public:
    RelationVocab() = default;
    explicit RelationVocab(std::vector<std::string> raw_names);

    std::size_t raw_count() const { return raw_.size(); }
    std::size_t count() const { return 2 * raw_.size(); }
    RelationId inverse(RelationId r) const;
    bool is_inverse(RelationId r) const { return r >= raw_count(); }
    std::optional<RelationId> find(const std::string& name) const;
    // Inverse relations print as "inv:<name>".
    std::string name(RelationId r) const;
    const std::vector<std::string>& raw_names() const { return raw_.names(); }

   private:
    NameIndex raw_;
};

struct Vocab {
    NameIndex entities;
    RelationVocab relations;
};

class KnowledgeGraph {
   public:
    KnowledgeGraph() = default;
    // Builds indices from an already inverse-closed, deduplicated triple list.
    KnowledgeGraph(std::vector<Triple> triples, std::size_t entity_count, std::size_t relation_count);

    std::span<const Triple> triples() const { return triples_; }
    std::size_t entity_count() const { return entity_count_; }
    std::size_t relation_count() const { return relation_count_; }

    struct Edge {
        RelationId rel;
        EntityId tail;
        friend auto operator<=>(const Edge&, const Edge&) = default;
    };

    // Out-edges of v sorted by (rel, tail).
    std::span<const Edge> neighbors(EntityId v) const;
    // Tails t with (v, r, t) in the graph, ascending.
    std::vector<EntityId> tails(EntityId v, RelationId r) const;
    // {r : (u, r, v) in the graph}, ascending.
    std::span<const RelationId> relations_between(EntityId u, EntityId v) const;
    bool contains(const Triple& t) const;

   private:
    static std::uint64_t pair_key(EntityId u, EntityId v) {
        return (static_cast<std::uint64_t>(u) << 32) | v;
    }
    void check_entity(EntityId v) const;

    std::vector<Triple> triples_;
    std::size_t entity_count_ = 0;
    std::size_t relation_count_ = 0;
    std::vector<std::size_t> offsets_;
    std::vector<Edge> edges_;
    std::unordered_map<std::uint64_t, std::vector<RelationId>> pair_relations_;
};

std::vector<RawTriple> load_tsv(const std::filesystem::path& path);

// Assigns ids, adds inverse triples, drops duplicates. With a fixed relation
// vocabulary every relation name must already be known; entities always get a
// fresh vocabulary.
std::pair<KnowledgeGraph, Vocab> build_graph(std::span<const RawTriple> raw,
                                             const RelationVocab* fixed_relations = nullptr);

// Maps raw triples onto existing vocabularies without augmentation.
std::vector<Triple> encode_triples(std::span<const RawTriple> raw, const Vocab& vocab,
                                   const std::string& what);

struct InductiveSplit {
    Vocab train_vocab;
    KnowledgeGraph train_graph;
    std::vector<Triple> train_queries;
    std::vector<Triple> valid_queries;
    Vocab ind_vocab;  // shares relations with train_vocab
    KnowledgeGraph ind_graph;
    std::vector<Triple> ind_valid_queries;  // optional ind valid.txt, used only for filtering
    std::vector<Triple> test_queries;
};

// Builds and validates a split from raw triples (train.txt, valid.txt of the
// training directory; train.txt, valid.txt, test.txt of the inductive one).
InductiveSplit build_inductive_split(std::span<const RawTriple> train, std::span<const RawTriple> valid,
                                     std::span<const RawTriple> ind_facts, std::span<const RawTriple> ind_valid,
                                     std::span<const RawTriple> test);

InductiveSplit load_inductive_split(const std::filesystem::path& train_dir,
                                    const std::filesystem::path& ind_dir);

// Throws ValidationError describing the first violated invariant.
void validate_split(const InductiveSplit& split);

}  // namespace qaspr
