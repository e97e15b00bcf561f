#pragma once
// Single-rule confidences C(r => r_q): the fraction of r-facts whose endpoint
// pair also carries r_q.

#include <cstddef>
#include <iosfwd>
#include <set>
#include <span>
#include <utility>
#include <vector>

#include "qaspr/kg.hpp"

namespace qaspr {

class ConfidenceTable {
   public:
    ConfidenceTable() = default;
    ConfidenceTable(std::size_t relation_count, std::vector<double> conf, std::vector<std::size_t> support);

    std::size_t relation_count() const { return relation_count_; }
    // C(body => head).
    double conf(RelationId body, RelationId head) const { return conf_[body * relation_count_ + head]; }
    std::size_t support(RelationId r) const { return support_[r]; }

   private:
    std::size_t relation_count_ = 0;
    std::vector<double> conf_;
    std::vector<std::size_t> support_;
};

ConfidenceTable mine_confidence(const KnowledgeGraph& g);

// (candidate, C(candidate => r_q)) for each candidate, ascending by relation id.
std::vector<std::pair<RelationId, double>> confidence_row(const ConfidenceTable& table,
                                                          std::span<const RelationId> candidates,
                                                          RelationId r_q);

// CSV "body,head,confidence,support", one row per pair whose body has support.
void write_confidence_csv(std::ostream& out, const ConfidenceTable& table, const RelationVocab& relations);

}  // namespace qaspr
