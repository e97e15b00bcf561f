#include "qaspr/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace qaspr::nn {

std::size_t shape_size(std::span<const std::size_t> shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(std::span<const std::size_t> shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
    os << ']';
    return os.str();
}

Tensor::Tensor(std::vector<std::size_t> shape_, double fill)
    : shape(std::move(shape_)), data(shape_size(shape), fill) {}

Tensor::Tensor(std::vector<std::size_t> shape_, std::vector<double> data_)
    : shape(std::move(shape_)), data(std::move(data_)) {
    if (shape_size(shape) != data.size()) {
        throw std::invalid_argument("tensor shape " + shape_string(shape) + " does not match " +
                                    std::to_string(data.size()) + " values");
    }
}

bool Tensor::all_finite() const {
    return std::all_of(data.begin(), data.end(), [](double x) { return std::isfinite(x); });
}

ParamId ParamStore::add(std::string name, Tensor init, bool trainable) {
    if (find(name)) throw std::invalid_argument("duplicate parameter '" + name + "'");
    Entry e;
    e.name = std::move(name);
    e.grad = Tensor(init.shape);
    e.m = Tensor(init.shape);
    e.v = Tensor(init.shape);
    e.value = std::move(init);
    e.trainable = trainable;
    entries_.push_back(std::move(e));
    return entries_.size() - 1;
}

std::optional<ParamId> ParamStore::find(std::string_view name) const {
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        if (entries_[i].name == name) return i;
    }
    return std::nullopt;
}

ParamId ParamStore::id(std::string_view name) const {
    if (auto p = find(name)) return *p;
    throw std::out_of_range("unknown parameter '" + std::string(name) + "'");
}

void ParamStore::zero_grad() {
    for (auto& e : entries_) std::fill(e.grad.data.begin(), e.grad.data.end(), 0.0);
}

struct AdamAccess {
    static void step(ParamStore& store, const AdamConfig& cfg) {
        for (const auto& e : store.entries_) {
            if (!e.grad.all_finite()) throw std::runtime_error("adam_step: non-finite gradient in '" + e.name + "'");
        }
        const auto t = static_cast<double>(++store.step_);
        const double bc1 = 1.0 - std::pow(cfg.beta1, t);
        const double bc2 = 1.0 - std::pow(cfg.beta2, t);
        for (auto& e : store.entries_) {
            if (e.trainable) {
                for (std::size_t i = 0; i < e.value.size(); ++i) {
                    const double g = e.grad.data[i];
                    double& m = e.m.data[i];
                    double& v = e.v.data[i];
                    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
                    v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g;
                    const double m_hat = m / bc1;
                    const double v_hat = v / bc2;
                    e.value.data[i] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
                }
            }
            std::fill(e.grad.data.begin(), e.grad.data.end(), 0.0);
        }
    }
};

void adam_step(ParamStore& store, const AdamConfig& cfg) { AdamAccess::step(store, cfg); }

void GradBuffer::add(ParamId param, std::size_t offset, std::span<const double> values) {
    slices_.push_back({param, offset, {values.begin(), values.end()}});
}

void GradBuffer::apply(ParamStore& store, double scale) const {
    for (const auto& s : slices_) {
        auto& g = store.grad(s.param).data;
        if (s.offset + s.values.size() > g.size()) throw std::out_of_range("gradient slice outside parameter");
        for (std::size_t i = 0; i < s.values.size(); ++i) g[s.offset + i] += scale * s.values[i];
    }
}

const char* op_name(Op op) {
    switch (op) {
        case Op::Constant: return "constant";
        case Op::Param: return "param";
        case Op::Linear: return "linear";
        case Op::Concat: return "concat";
        case Op::Add: return "add";
        case Op::Scale: return "scale";
        case Op::Dot: return "dot";
        case Op::SumList: return "sum_list";
        case Op::Relu: return "relu";
        case Op::Scatter: return "scatter";
        case Op::LogSumExp: return "logsumexp";
        case Op::NegLogSoftmaxPick: return "neg_logsoftmax_pick";
    }
    return "?";
}

Tape::Tape(const ParamStore& store) : store_(&store) {
    nodes_.reserve(256);
    values_.reserve(4096);
}

const Tape::Node& Tape::node(Ref r) const {
    if (r >= nodes_.size()) throw std::out_of_range("tape reference " + std::to_string(r) + " out of range");
    return nodes_[r];
}

std::span<const double> Tape::value(Ref r) const {
    const auto& n = node(r);
    return {values_.data() + n.value_offset, std::size_t{n.rows} * n.cols};
}

std::span<double> Tape::mut_value(Ref r) {
    const auto& n = nodes_[r];
    return {values_.data() + n.value_offset, std::size_t{n.rows} * n.cols};
}

double Tape::scalar(Ref r) const {
    const auto& n = node(r);
    if (n.rows != 1 || n.cols != 1) throw std::invalid_argument("tape value is not a scalar");
    return values_[n.value_offset];
}

Tape::Ref Tape::push_uninit(Node n) {
    if (differentiated_) throw std::logic_error("tape already differentiated");
    n.value_offset = values_.size();
    values_.resize(values_.size() + std::size_t{n.rows} * n.cols, 0.0);
    nodes_.push_back(n);
    return static_cast<Ref>(nodes_.size() - 1);
}

Tape::Ref Tape::push(Node n, std::span<const double> values) {
    Ref r = push_uninit(n);
    std::copy(values.begin(), values.end(), mut_value(r).begin());
    return r;
}

void Tape::shape_error(const char* op, Ref x, Ref y) const {
    const auto& a = node(x);
    const auto& b = node(y);
    throw std::invalid_argument(std::string(op) + ": incompatible shapes [" + std::to_string(a.rows) + "x" +
                                std::to_string(a.cols) + "] and [" + std::to_string(b.rows) + "x" +
                                std::to_string(b.cols) + "]");
}

Tape::Ref Tape::constant(std::span<const double> values, std::size_t rows, std::size_t cols) {
    if (values.size() != rows * cols) throw std::invalid_argument("constant: value count does not match shape");
    Node n{};
    n.op = Op::Constant;
    n.rows = static_cast<std::uint32_t>(rows);
    n.cols = static_cast<std::uint32_t>(cols);
    return push(n, values);
}

Tape::Ref Tape::param(ParamId p) {
    const auto& t = store_->value(p);
    std::size_t rows = t.shape.empty() ? 1 : t.shape[0];
    return param_slice(p, 0, rows, t.size() / std::max<std::size_t>(rows, 1));
}

Tape::Ref Tape::param_slice(ParamId p, std::size_t offset, std::size_t rows, std::size_t cols) {
    const auto& data = store_->value(p).data;
    if (offset + rows * cols > data.size()) {
        throw std::out_of_range("param_slice: block outside parameter '" + store_->name(p) + "'");
    }
    Node n{};
    n.op = Op::Param;
    n.rows = static_cast<std::uint32_t>(rows);
    n.cols = static_cast<std::uint32_t>(cols);
    n.param = p;
    n.index = offset;
    return push(n, std::span<const double>(data).subspan(offset, rows * cols));
}

Tape::Ref Tape::linear(Ref w, Ref x) {
    const auto& W = node(w);
    const auto& X = node(x);
    if (X.cols != 1 || W.cols != X.rows) shape_error("linear", w, x);
    Node n{};
    n.op = Op::Linear;
    n.rows = W.rows;
    n.cols = 1;
    n.a = w;
    n.b = x;
    const std::size_t m = W.rows, k = W.cols;
    Ref r = push_uninit(n);
    auto out = mut_value(r);
    auto wv = value(w);
    auto xv = value(x);
    for (std::size_t i = 0; i < m; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < k; ++j) s += wv[i * k + j] * xv[j];
        out[i] = s;
    }
    return r;
}

Tape::Ref Tape::concat(Ref x, Ref y) {
    const auto& X = node(x);
    const auto& Y = node(y);
    if (X.cols != 1 || Y.cols != 1) shape_error("concat", x, y);
    Node n{};
    n.op = Op::Concat;
    n.rows = X.rows + Y.rows;
    n.cols = 1;
    n.a = x;
    n.b = y;
    Ref r = push_uninit(n);
    auto out = mut_value(r);
    auto xv = value(x);
    auto yv = value(y);
    std::copy(xv.begin(), xv.end(), out.begin());
    std::copy(yv.begin(), yv.end(), out.begin() + static_cast<std::ptrdiff_t>(xv.size()));
    return r;
}

Tape::Ref Tape::add(Ref x, Ref y) {
    const auto& X = node(x);
    const auto& Y = node(y);
    if (X.rows != Y.rows || X.cols != Y.cols) shape_error("add", x, y);
    Node n{};
    n.op = Op::Add;
    n.rows = X.rows;
    n.cols = X.cols;
    n.a = x;
    n.b = y;
    Ref r = push_uninit(n);
    auto out = mut_value(r);
    auto xv = value(x);
    auto yv = value(y);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] + yv[i];
    return r;
}

Tape::Ref Tape::scale(double c, Ref x) {
    const auto& X = node(x);
    Node n{};
    n.op = Op::Scale;
    n.rows = X.rows;
    n.cols = X.cols;
    n.a = x;
    n.c = c;
    Ref r = push_uninit(n);
    auto out = mut_value(r);
    auto xv = value(x);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = c * xv[i];
    return r;
}

Tape::Ref Tape::dot(Ref w, Ref x) {
    const auto& W = node(w);
    const auto& X = node(x);
    if (W.rows != X.rows || W.cols != 1 || X.cols != 1) shape_error("dot", w, x);
    Node n{};
    n.op = Op::Dot;
    n.rows = 1;
    n.cols = 1;
    n.a = w;
    n.b = x;
    Ref r = push_uninit(n);
    auto wv = value(w);
    auto xv = value(x);
    double s = 0.0;
    for (std::size_t i = 0; i < wv.size(); ++i) s += wv[i] * xv[i];
    mut_value(r)[0] = s;
    return r;
}

Tape::Ref Tape::sum_list(std::span<const Ref> xs) {
    if (xs.empty()) throw std::invalid_argument("sum_list: empty list");
    const auto& first = node(xs[0]);
    for (Ref x : xs) {
        const auto& X = node(x);
        if (X.rows != first.rows || X.cols != first.cols) shape_error("sum_list", xs[0], x);
    }
    Node n{};
    n.op = Op::SumList;
    n.rows = first.rows;
    n.cols = first.cols;
    n.list_offset = list_.size();
    n.list_size = xs.size();
    list_.insert(list_.end(), xs.begin(), xs.end());
    Ref r = push_uninit(n);
    auto out = mut_value(r);
    for (Ref x : xs) {
        auto xv = value(x);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += xv[i];
    }
    return r;
}

Tape::Ref Tape::relu(Ref x) {
    const auto& X = node(x);
    Node n{};
    n.op = Op::Relu;
    n.rows = X.rows;
    n.cols = X.cols;
    n.a = x;
    Ref r = push_uninit(n);
    auto out = mut_value(r);
    auto xv = value(x);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] > 0.0 ? xv[i] : 0.0;
    return r;
}

Tape::Ref Tape::scatter(std::span<const Ref> scalars, std::span<const std::size_t> indices, std::size_t n_out) {
    if (scalars.size() != indices.size()) throw std::invalid_argument("scatter: scalar and index counts differ");
    std::vector<char> used(n_out, 0);
    for (std::size_t k = 0; k < scalars.size(); ++k) {
        const auto& s = node(scalars[k]);
        if (s.rows != 1 || s.cols != 1) throw std::invalid_argument("scatter: inputs must be scalars");
        if (indices[k] >= n_out) throw std::out_of_range("scatter: index out of range");
        if (used[indices[k]]) throw std::invalid_argument("scatter: duplicate index");
        used[indices[k]] = 1;
    }
    Node n{};
    n.op = Op::Scatter;
    n.rows = static_cast<std::uint32_t>(n_out);
    n.cols = 1;
    n.list_offset = list_.size();
    n.list_size = scalars.size();
    for (std::size_t k = 0; k < scalars.size(); ++k) {
        list_.push_back(scalars[k]);
        list_.push_back(indices[k]);
    }
    Ref r = push_uninit(n);
    auto out = mut_value(r);
    for (std::size_t k = 0; k < scalars.size(); ++k) out[indices[k]] = value(scalars[k])[0];
    return r;
}

namespace {

double lse(std::span<const double> v) {
    double m = -std::numeric_limits<double>::infinity();
    for (double x : v) m = std::max(m, x);
    if (!std::isfinite(m)) return m;
    double s = 0.0;
    for (double x : v) s += std::exp(x - m);
    return m + std::log(s);
}

}  // namespace

Tape::Ref Tape::logsumexp(Ref scores) {
    const auto& S = node(scores);
    if (S.cols != 1 || S.rows == 0) throw std::invalid_argument("logsumexp: expected a non-empty vector");
    Node n{};
    n.op = Op::LogSumExp;
    n.rows = 1;
    n.cols = 1;
    n.a = scores;
    Ref r = push_uninit(n);
    mut_value(r)[0] = lse(value(scores));
    return r;
}

Tape::Ref Tape::neg_logsoftmax_pick(Ref scores, std::size_t index) {
    const auto& S = node(scores);
    if (S.cols != 1 || S.rows == 0) throw std::invalid_argument("neg_logsoftmax_pick: expected a non-empty vector");
    if (index >= S.rows) throw std::out_of_range("neg_logsoftmax_pick: index out of range");
    Node n{};
    n.op = Op::NegLogSoftmaxPick;
    n.rows = 1;
    n.cols = 1;
    n.a = scores;
    n.index = index;
    Ref r = push_uninit(n);
    auto sv = value(scores);
    mut_value(r)[0] = lse(sv) - sv[index];
    return r;
}

void Tape::backward(Ref loss, GradBuffer& out) {
    if (differentiated_) throw std::logic_error("backward: tape already differentiated");
    const auto& L = node(loss);
    if (L.rows != 1 || L.cols != 1) throw std::invalid_argument("backward: loss must be a scalar");
    differentiated_ = true;

    std::vector<double> grads(values_.size(), 0.0);
    std::vector<char> live(nodes_.size(), 0);
    grads[L.value_offset] = 1.0;
    live[loss] = 1;
    auto g = [&](Ref r) {
        const auto& n = nodes_[r];
        return std::span<double>(grads.data() + n.value_offset, std::size_t{n.rows} * n.cols);
    };

    for (Ref r = loss + 1; r-- > 0;) {
        if (!live[r]) continue;
        const Node& n = nodes_[r];
        auto gr = g(r);
        const double f = fault(n.op);
        switch (n.op) {
            case Op::Constant: break;
            case Op::Param: out.add(n.param, n.index, gr); break;
            case Op::Linear: {
                const std::size_t m = n.rows, k = nodes_[n.a].cols;
                auto wv = value(n.a);
                auto xv = value(n.b);
                auto gw = g(n.a);
                auto gx = g(n.b);
                for (std::size_t i = 0; i < m; ++i) {
                    const double gi = f * gr[i];
                    if (gi == 0.0) continue;
                    for (std::size_t j = 0; j < k; ++j) {
                        gw[i * k + j] += gi * xv[j];
                        gx[j] += gi * wv[i * k + j];
                    }
                }
                live[n.a] = live[n.b] = 1;
                break;
            }
            case Op::Concat: {
                auto gx = g(n.a);
                auto gy = g(n.b);
                for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += f * gr[i];
                for (std::size_t i = 0; i < gy.size(); ++i) gy[i] += f * gr[gx.size() + i];
                live[n.a] = live[n.b] = 1;
                break;
            }
            case Op::Add: {
                auto gx = g(n.a);
                auto gy = g(n.b);
                for (std::size_t i = 0; i < gr.size(); ++i) {
                    gx[i] += f * gr[i];
                    gy[i] += f * gr[i];
                }
                live[n.a] = live[n.b] = 1;
                break;
            }
            case Op::Scale: {
                auto gx = g(n.a);
                for (std::size_t i = 0; i < gr.size(); ++i) gx[i] += f * n.c * gr[i];
                live[n.a] = 1;
                break;
            }
            case Op::Dot: {
                auto wv = value(n.a);
                auto xv = value(n.b);
                auto gw = g(n.a);
                auto gx = g(n.b);
                const double g0 = f * gr[0];
                for (std::size_t i = 0; i < wv.size(); ++i) {
                    gw[i] += g0 * xv[i];
                    gx[i] += g0 * wv[i];
                }
                live[n.a] = live[n.b] = 1;
                break;
            }
            case Op::SumList: {
                for (std::size_t k = 0; k < n.list_size; ++k) {
                    auto x = static_cast<Ref>(list_[n.list_offset + k]);
                    auto gx = g(x);
                    for (std::size_t i = 0; i < gr.size(); ++i) gx[i] += f * gr[i];
                    live[x] = 1;
                }
                break;
            }
            case Op::Relu: {
                auto xv = value(n.a);
                auto gx = g(n.a);
                for (std::size_t i = 0; i < gr.size(); ++i) {
                    if (xv[i] > 0.0) gx[i] += f * gr[i];
                }
                live[n.a] = 1;
                break;
            }
            case Op::Scatter: {
                for (std::size_t k = 0; k < n.list_size; ++k) {
                    auto s = static_cast<Ref>(list_[n.list_offset + 2 * k]);
                    std::size_t idx = list_[n.list_offset + 2 * k + 1];
                    g(s)[0] += f * gr[idx];
                    live[s] = 1;
                }
                break;
            }
            case Op::LogSumExp:
            case Op::NegLogSoftmaxPick: {
                auto sv = value(n.a);
                auto gs = g(n.a);
                const double m = lse(sv);
                const double g0 = f * gr[0];
                for (std::size_t i = 0; i < sv.size(); ++i) gs[i] += g0 * std::exp(sv[i] - m);
                if (n.op == Op::NegLogSoftmaxPick) gs[n.index] -= g0;
                live[n.a] = 1;
                break;
            }
        }
    }
}

double GradCheckReport::max_rel_error() const {
    double m = 0.0;
    for (const auto& e : entries) m = std::max(m, e.max_rel_error);
    return m;
}

GradCheckReport grad_check(const LossClosure& closure, ParamStore& store, double tolerance, double step,
                           double abs_floor) {
    GradCheckReport report;
    report.tolerance = tolerance;

    GradBuffer analytic_buf;
    closure(store, &analytic_buf);
    std::vector<Tensor> analytic;
    for (ParamId p = 0; p < store.size(); ++p) analytic.emplace_back(store.value(p).shape);
    for (const auto& s : analytic_buf.slices()) {
        auto& a = analytic[s.param].data;
        for (std::size_t i = 0; i < s.values.size(); ++i) a[s.offset + i] += s.values[i];
    }

    for (ParamId p = 0; p < store.size(); ++p) {
        GradCheckEntry entry;
        entry.name = store.name(p);
        auto& data = store.value(p).data;
        entry.coords = data.size();
        for (std::size_t i = 0; i < data.size(); ++i) {
            const double saved = data[i];
            data[i] = saved + step;
            const double up = closure(store, nullptr);
            data[i] = saved - step;
            const double down = closure(store, nullptr);
            data[i] = saved;
            const double numeric = (up - down) / (2.0 * step);
            const double a = analytic[p].data[i];
            const double abs_err = std::abs(a - numeric);
            const double rel = abs_err / std::max({std::abs(a), std::abs(numeric), abs_floor});
            entry.max_abs_error = std::max(entry.max_abs_error, abs_err);
            entry.max_rel_error = std::max(entry.max_rel_error, rel);
        }
        report.entries.push_back(std::move(entry));
    }
    return report;
}

}  // namespace qaspr::nn
