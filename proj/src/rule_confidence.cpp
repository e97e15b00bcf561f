#include "qaspr/rule_confidence.hpp"

#include <algorithm>
#include <ostream>

namespace qaspr {

ConfidenceTable::ConfidenceTable(std::size_t relation_count, std::vector<double> conf,
                                 std::vector<std::size_t> support)
    : relation_count_(relation_count), conf_(std::move(conf)), support_(std::move(support)) {
    if (conf_.size() != relation_count_ * relation_count_ || support_.size() != relation_count_) {
        throw std::invalid_argument("confidence table dimensions do not match relation count");
    }
}

ConfidenceTable mine_confidence(const KnowledgeGraph& g) {
    const std::size_t n = g.relation_count();
    std::vector<std::size_t> hits(n * n, 0);
    std::vector<std::size_t> support(n, 0);
    for (const auto& t : g.triples()) {
        ++support[t.rel];
        for (RelationId head : g.relations_between(t.head, t.tail)) ++hits[t.rel * n + head];
    }
    std::vector<double> conf(n * n, 0.0);
    for (std::size_t body = 0; body < n; ++body) {
        if (support[body] == 0) continue;  // 0/0 -> 0
        for (std::size_t head = 0; head < n; ++head) {
            conf[body * n + head] = static_cast<double>(hits[body * n + head]) / static_cast<double>(support[body]);
        }
    }
    return ConfidenceTable(n, std::move(conf), std::move(support));
}

std::vector<std::pair<RelationId, double>> confidence_row(const ConfidenceTable& table,
                                                          std::span<const RelationId> candidates,
                                                          RelationId r_q) {
    std::vector<std::pair<RelationId, double>> row;
    row.reserve(candidates.size());
    for (RelationId r : candidates) row.emplace_back(r, table.conf(r, r_q));
    std::sort(row.begin(), row.end());
    return row;
}

void write_confidence_csv(std::ostream& out, const ConfidenceTable& table, const RelationVocab& relations) {
    out << "body,head,confidence,support\n";
    auto old_precision = out.precision(17);
    for (RelationId body = 0; body < table.relation_count(); ++body) {
        if (table.support(body) == 0) continue;
        for (RelationId head = 0; head < table.relation_count(); ++head) {
            out << relations.name(body) << ',' << relations.name(head) << ',' << table.conf(body, head) << ','
                << table.support(body) << '\n';
        }
    }
    out.precision(old_precision);
}

}  // namespace qaspr
