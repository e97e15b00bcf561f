#include "qaspr/training.hpp"

#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "qaspr/log.hpp"
#include "qaspr/parallel.hpp"

namespace qaspr {

void TrainConfig::validate() const {
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (!(lr > 0.0)) throw std::invalid_argument("lr must be > 0");
    if (max_epochs < 0) throw std::invalid_argument("max_epochs must be >= 0");
    if (patience < 1) throw std::invalid_argument("patience must be >= 1");
    if (eval_every < 1) throw std::invalid_argument("eval_every must be >= 1");
    if (threads < 1) throw std::invalid_argument("threads must be >= 1");
}

nn::Tape::Ref multiclass_logloss(nn::Tape& tape, nn::Tape::Ref scores, EntityId target) {
    return tape.neg_logsoftmax_pick(scores, target);
}

double multiclass_logloss(std::span<const double> scores, EntityId target) {
    if (target >= scores.size()) throw std::out_of_range("multiclass_logloss: target out of range");
    double m = scores[0];
    for (double s : scores) m = std::max(m, s);
    double sum = 0.0;
    for (double s : scores) sum += std::exp(s - m);
    return m + std::log(sum) - scores[target];
}

std::pair<TrainingQuery, TrainingQuery> directed_queries(const Triple& fact, std::size_t raw_relation_count) {
    const auto n = static_cast<RelationId>(raw_relation_count);
    const RelationId inv = fact.rel < n ? fact.rel + n : fact.rel - n;
    return {TrainingQuery{fact, Query{fact.head, fact.rel}, fact.tail},
            TrainingQuery{fact, Query{fact.tail, inv}, fact.head}};
}

namespace {

std::string describe_failure(const TrainingQuery& q, const ForwardResult& fwd) {
    std::ostringstream os;
    os << "non-finite loss for query (" << q.query.source << ", " << q.query.rel << ", ?) target " << q.target;
    for (const auto& m : fwd.state.hop_masks) {
        os << "; hop " << m.hop << " retained {";
        for (std::size_t i = 0; i < m.retained.size(); ++i) os << (i ? "," : "") << m.retained[i];
        os << "} of " << m.candidates.size() << " candidates";
    }
    return os.str();
}

}  // namespace

double query_loss(const TrainingQuery& q, const KnowledgeGraph& g, const ConfidenceTable& table,
                  const ModelParams& params, const ReasonerConfig& rcfg, const MaskConfig& mcfg,
                  std::uint64_t mask_stream, nn::GradBuffer* grads) {
    ForwardOptions opts;
    opts.excluded_edge = q.fact;
    auto fwd = forward(q.query, g, table, params, rcfg, mcfg, mask_stream, opts);
    auto loss_ref = multiclass_logloss(fwd.tape, fwd.scores, q.target);
    const double loss = fwd.tape.scalar(loss_ref);
    if (!std::isfinite(loss)) throw std::runtime_error(describe_failure(q, fwd));
    if (grads) fwd.tape.backward(loss_ref, *grads);
    return loss;
}

EpochStats train_epoch(const InductiveSplit& split, const ConfidenceTable& table, ModelParams& params,
                       const ReasonerConfig& rcfg, const MaskConfig& mcfg, const TrainConfig& tcfg, int epoch_index) {
    tcfg.validate();
    const auto& facts = split.train_queries;
    std::vector<std::size_t> order(facts.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    RandomStream shuffle_rng(tcfg.seed, {0x5348, static_cast<std::uint64_t>(epoch_index)});
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle_rng.below(i)]);

    const std::size_t raw = split.train_vocab.relations.raw_count();
    const nn::AdamConfig adam{.lr = tcfg.lr};
    EpochStats stats;
    stats.epoch = epoch_index;
    double loss_sum = 0.0;
    const auto batch = static_cast<std::size_t>(tcfg.batch_size);
    for (std::size_t start = 0; start < order.size(); start += batch) {
        const std::size_t stop = std::min(order.size(), start + batch);
        const std::size_t nq = 2 * (stop - start);
        std::vector<double> losses(nq);
        std::vector<nn::GradBuffer> grads(nq);
        parallel_for(nq, tcfg.threads, [&](std::size_t k) {
            const std::size_t position = start + k / 2;
            auto [fwd_q, inv_q] = directed_queries(facts[order[position]], raw);
            const auto& q = k % 2 == 0 ? fwd_q : inv_q;
            const auto stream = query_mask_stream(mcfg.seed, static_cast<std::uint64_t>(epoch_index) + 1,
                                                  2 * position + k % 2);
            losses[k] = query_loss(q, split.train_graph, table, params, rcfg, mcfg, stream, &grads[k]);
        });
        for (std::size_t k = 0; k < nq; ++k) {
            grads[k].apply(params.store(), 1.0 / static_cast<double>(nq));
            loss_sum += losses[k];
        }
        nn::adam_step(params.store(), adam);
        stats.n_queries += nq;
    }
    stats.mean_loss = stats.n_queries ? loss_sum / static_cast<double>(stats.n_queries) : 0.0;
    return stats;
}

FitResult fit(const InductiveSplit& split, const ConfidenceTable& table, const ReasonerConfig& rcfg,
              const MaskConfig& mcfg, const TrainConfig& tcfg, const EvalConfig& ecfg, const CurveCallback& on_point) {
    tcfg.validate();
    mcfg.validate();
    auto params = ModelParams::init(rcfg, split.train_graph.relation_count(), tcfg.seed);
    auto valid = [&] { return evaluate_valid(split, table, params, rcfg, mcfg, ecfg); };

    auto initial = valid();
    FitResult result{params, 0, initial, {}};
    auto emit = [&](CurvePoint p) {
        if (on_point) on_point(p);
        result.curve.push_back(p);
    };
    emit({0, std::nan(""), initial.mrr});
    log().info("epoch 0: valid mrr {:.4f}", initial.mrr);

    int stale = 0;
    for (int epoch = 1; epoch <= tcfg.max_epochs; ++epoch) {
        auto stats = train_epoch(split, table, params, rcfg, mcfg, tcfg, epoch);
        CurvePoint point{epoch, stats.mean_loss, std::nullopt};
        const bool do_eval = epoch % tcfg.eval_every == 0 || epoch == tcfg.max_epochs;
        if (!do_eval) {
            log().info("epoch {}: loss {:.6f}", epoch, stats.mean_loss);
            emit(point);
            continue;
        }
        auto report = valid();
        point.valid_mrr = report.mrr;
        log().info("epoch {}: loss {:.6f} valid mrr {:.4f}", epoch, stats.mean_loss, report.mrr);
        emit(point);
        if (report.mrr > result.best_valid.mrr) {
            result.best = params;
            result.best_epoch = epoch;
            result.best_valid = report;
            stale = 0;
        } else if (++stale >= tcfg.patience) {
            log().info("early stop after epoch {} (best epoch {})", epoch, result.best_epoch);
            break;
        }
    }
    return result;
}

nlohmann::json curve_json(const CurvePoint& p) {
    nlohmann::json j{{"epoch", p.epoch}};
    j["loss"] = std::isfinite(p.loss) ? nlohmann::json(p.loss) : nlohmann::json(nullptr);
    j["valid_mrr"] = p.valid_mrr ? nlohmann::json(*p.valid_mrr) : nlohmann::json(nullptr);
    return j;
}

nn::GradCheckReport model_grad_check(std::uint64_t seed, double tolerance, const ReasonerConfig& rcfg) {
    const std::vector<RawTriple> raw = {
        {"a", "p", "b"}, {"b", "q", "c"}, {"a", "q", "c"}, {"c", "p", "d"}, {"b", "s", "d"},
        {"d", "q", "e"}, {"a", "s", "e"}, {"e", "p", "b"}, {"c", "s", "a"}, {"d", "p", "a"},
    };
    auto [g, vocab] = build_graph(raw);
    auto table = mine_confidence(g);
    auto params = ModelParams::init(rcfg, g.relation_count(), seed);
    const MaskConfig mcfg{.p_e = 0.5, .p_tau = 0.5, .eps = 1e-12, .seed = seed};
    const Query q{*vocab.entities.find("a"), *vocab.relations.find("q")};
    const EntityId target = *vocab.entities.find("c");
    const Triple fact{q.source, q.rel, target};

    ForwardOptions base;
    base.excluded_edge = fact;
    const auto stream = query_mask_stream(seed, 1, 0);
    const auto realized = forward(q, g, table, params, rcfg, mcfg, stream, base).state;
    ForwardOptions replay = base;
    replay.forced_frontiers = &realized.frontiers;
    replay.forced_masks = &realized.hop_masks;

    nn::LossClosure closure = [&](const nn::ParamStore& store, nn::GradBuffer* grads) {
        auto p = ModelParams::from_store(store, rcfg, g.relation_count());
        auto fwd = forward(q, g, table, p, rcfg, mcfg, stream, replay);
        auto loss = multiclass_logloss(fwd.tape, fwd.scores, target);
        if (grads) fwd.tape.backward(loss, *grads);
        return fwd.tape.scalar(loss);
    };
    return nn::grad_check(closure, params.store(), tolerance);
}

}  // namespace qaspr
