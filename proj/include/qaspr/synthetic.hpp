#pragma once
// Planted-rule benchmark: r_q(s, o) holds exactly when r_1(s, o) does. The two
// entity halves never share an edge, giving an inductive split whose test
// answers are recoverable from the single rule r_1 => r_q.

#include <cstdint>
#include <filesystem>
#include <vector>

#include "qaspr/kg.hpp"

namespace qaspr {

struct SyntheticConfig {
    std::size_t entities_per_half = 100;
    std::size_t rule_pairs = 100;        // per half
    std::size_t background_edges = 150;  // per half, spread over background relations
    std::size_t background_relations = 3;
    double noise_fraction = 0.0;  // extra random edges, as a fraction of the base edges
    std::size_t noise_relations = 3;
    std::size_t valid_queries = 20;  // held-out r_q facts of the training half
    std::size_t test_queries = 30;   // held-out r_q facts of the unseen half
    std::uint64_t seed = 1;
};

struct SyntheticSplit {
    std::vector<RawTriple> train;
    std::vector<RawTriple> valid;
    std::vector<RawTriple> ind_train;
    std::vector<RawTriple> ind_valid;
    std::vector<RawTriple> ind_test;

    InductiveSplit build() const;
    // GraIL layout: train_dir/{train,valid,test}.txt and ind_dir/{train,valid,test}.txt.
    void write(const std::filesystem::path& train_dir, const std::filesystem::path& ind_dir) const;
};

SyntheticSplit make_rule_kg(const SyntheticConfig& cfg);

}  // namespace qaspr
