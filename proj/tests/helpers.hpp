#pragma once

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "qaspr/kg.hpp"
#include "qaspr/rng.hpp"

namespace qaspr::test {

inline std::pair<KnowledgeGraph, Vocab> graph_of(const std::vector<RawTriple>& raw) { return build_graph(raw); }

inline EntityId ent(const Vocab& v, const std::string& name) { return *v.entities.find(name); }
inline RelationId rel(const Vocab& v, const std::string& name) { return *v.relations.find(name); }

// Fresh scratch directory under the system temp dir, removed on destruction.
struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const std::string& tag) {
        static int counter = 0;
        path = std::filesystem::temp_directory_path() /
               ("qaspr_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    std::filesystem::path write(const std::string& name, const std::string& content) const {
        auto p = path / name;
        std::filesystem::create_directories(p.parent_path());
        std::ofstream(p) << content;
        return p;
    }
};

// Random graph with up to the given sizes; entity and relation names are e<i>, r<j>.
inline std::vector<RawTriple> random_raw_graph(RandomStream& rng, std::size_t max_entities, std::size_t max_relations,
                                               std::size_t max_triples) {
    const auto n_ent = 2 + rng.below(max_entities - 1);
    const auto n_rel = 1 + rng.below(max_relations);
    const auto n_tri = 1 + rng.below(max_triples);
    std::vector<RawTriple> raw;
    for (std::size_t i = 0; i < n_tri; ++i) {
        raw.emplace_back("e" + std::to_string(rng.below(n_ent)), "r" + std::to_string(rng.below(n_rel)),
                         "e" + std::to_string(rng.below(n_ent)));
    }
    return raw;
}

}  // namespace qaspr::test
