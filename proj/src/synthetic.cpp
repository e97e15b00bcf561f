#include "qaspr/synthetic.hpp"

#include <fstream>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>

#include "qaspr/rng.hpp"

namespace qaspr {

namespace {

struct Half {
    std::vector<RawTriple> facts;
    std::vector<RawTriple> held_out;  // r_q facts removed from the fact list
};

Half make_half(const SyntheticConfig& cfg, const std::string& prefix, std::size_t n_held_out, RandomStream& rng) {
    const std::size_t n = cfg.entities_per_half;
    if (n < 2) throw std::invalid_argument("synthetic graph needs at least two entities per half");
    auto entity = [&](std::uint64_t i) { return prefix + std::to_string(i); };
    std::set<std::pair<std::uint64_t, std::uint64_t>> rule_pairs;
    const std::size_t max_pairs = n * (n - 1);
    if (cfg.rule_pairs > max_pairs / 2) throw std::invalid_argument("too many rule pairs for entity count");
    while (rule_pairs.size() < cfg.rule_pairs) {
        auto s = rng.below(n), o = rng.below(n);
        if (s != o) rule_pairs.emplace(s, o);
    }
    if (n_held_out > rule_pairs.size()) throw std::invalid_argument("more held-out queries than rule pairs");

    Half half;
    // Hold out a random subset of r_q facts; their r_1 counterparts stay.
    std::vector<std::pair<std::uint64_t, std::uint64_t>> pairs(rule_pairs.begin(), rule_pairs.end());
    for (std::size_t i = pairs.size(); i > 1; --i) std::swap(pairs[i - 1], pairs[rng.below(i)]);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const auto [s, o] = pairs[i];
        half.facts.emplace_back(entity(s), "r1", entity(o));
        RawTriple q{entity(s), "rq", entity(o)};
        if (i < n_held_out) half.held_out.push_back(std::move(q));
        else half.facts.push_back(std::move(q));
    }
    std::set<std::tuple<std::uint64_t, std::size_t, std::uint64_t>> extra;
    auto random_edges = [&](std::size_t count, std::size_t n_rel, const std::string& rel_prefix) {
        std::size_t added = 0;
        while (added < count) {
            auto s = rng.below(n), o = rng.below(n);
            auto r = static_cast<std::size_t>(rng.below(n_rel));
            if (s == o || !extra.emplace(s, r + (rel_prefix == "n" ? 1000 : 0), o).second) continue;
            half.facts.emplace_back(entity(s), rel_prefix + std::to_string(r), entity(o));
            ++added;
        }
    };
    random_edges(cfg.background_edges, cfg.background_relations, "b");
    const std::size_t base = 2 * cfg.rule_pairs + cfg.background_edges;
    random_edges(static_cast<std::size_t>(cfg.noise_fraction * static_cast<double>(base) + 0.5), cfg.noise_relations,
                 "n");
    return half;
}

void write_tsv(const std::filesystem::path& path, const std::vector<RawTriple>& triples) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    for (const auto& [h, r, t] : triples) out << h << '\t' << r << '\t' << t << '\n';
}

}  // namespace

SyntheticSplit make_rule_kg(const SyntheticConfig& cfg) {
    RandomStream rng(cfg.seed, {0x5157});
    SyntheticSplit out;
    auto train = make_half(cfg, "t", cfg.valid_queries, rng);
    out.train = std::move(train.facts);
    out.valid = std::move(train.held_out);
    auto ind = make_half(cfg, "u", cfg.test_queries, rng);
    out.ind_train = std::move(ind.facts);
    out.ind_test = std::move(ind.held_out);
    return out;
}

InductiveSplit SyntheticSplit::build() const { return build_inductive_split(train, valid, ind_train, ind_valid, ind_test); }

void SyntheticSplit::write(const std::filesystem::path& train_dir, const std::filesystem::path& ind_dir) const {
    std::filesystem::create_directories(train_dir);
    std::filesystem::create_directories(ind_dir);
    write_tsv(train_dir / "train.txt", train);
    write_tsv(train_dir / "valid.txt", valid);
    write_tsv(train_dir / "test.txt", {});
    write_tsv(ind_dir / "train.txt", ind_train);
    write_tsv(ind_dir / "valid.txt", ind_valid);
    write_tsv(ind_dir / "test.txt", ind_test);
}

}  // namespace qaspr
