#pragma once
// Dense 64-bit tensors, a parameter store with Adam state, and a
// reverse-mode tape covering exactly the operations the reasoner and loss use.
//
// Every tape value is a (rows x cols) row-major block; vectors have cols = 1
// and scalars are 1 x 1. Tapes are single-use: build, backward once, discard.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace qaspr::nn {

struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> shape_, double fill = 0.0);
    Tensor(std::vector<std::size_t> shape_, std::vector<double> data_);

    std::size_t size() const { return data.size(); }
    bool all_finite() const;
};

std::size_t shape_size(std::span<const std::size_t> shape);
std::string shape_string(std::span<const std::size_t> shape);

using ParamId = std::size_t;

class ParamStore {
   public:
    ParamId add(std::string name, Tensor init, bool trainable = true);
    ParamId id(std::string_view name) const;
    std::optional<ParamId> find(std::string_view name) const;

    std::size_t size() const { return entries_.size(); }
    const std::string& name(ParamId p) const { return entries_.at(p).name; }
    const Tensor& value(ParamId p) const { return entries_.at(p).value; }
    Tensor& value(ParamId p) { return entries_.at(p).value; }
    const Tensor& grad(ParamId p) const { return entries_.at(p).grad; }
    Tensor& grad(ParamId p) { return entries_.at(p).grad; }
    bool trainable(ParamId p) const { return entries_.at(p).trainable; }
    std::int64_t step() const { return step_; }

    void zero_grad();

   private:
    friend struct AdamAccess;
    struct Entry {
        std::string name;
        Tensor value;
        Tensor grad;
        Tensor m;
        Tensor v;
        bool trainable = true;
    };
    std::vector<Entry> entries_;
    std::int64_t step_ = 0;
};

struct AdamConfig {
    double lr = 5e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

// Bias-corrected Adam over every trainable parameter, then zeroes all
// gradients. Throws std::runtime_error on a non-finite gradient, leaving the
// parameters untouched.
void adam_step(ParamStore& store, const AdamConfig& cfg);

// Sparse gradient contributions from one tape, keyed by parameter slice.
class GradBuffer {
   public:
    struct Slice {
        ParamId param;
        std::size_t offset;
        std::vector<double> values;
    };

    void add(ParamId param, std::size_t offset, std::span<const double> values);
    // store.grad += scale * buffer, slices in insertion order.
    void apply(ParamStore& store, double scale = 1.0) const;
    const std::vector<Slice>& slices() const { return slices_; }
    void clear() { slices_.clear(); }

   private:
    std::vector<Slice> slices_;
};

enum class Op : std::uint8_t {
    Constant,
    Param,
    Linear,
    Concat,
    Add,
    Scale,
    Dot,
    SumList,
    Relu,
    Scatter,
    LogSumExp,
    NegLogSoftmaxPick,
};

const char* op_name(Op op);

class Tape {
   public:
    using Ref = std::uint32_t;

    // Test hook: scales the input gradients produced by one op's backward rule.
    struct FaultInjection {
        Op op = Op::Constant;
        double factor = 1.0;
    };

    explicit Tape(const ParamStore& store);

    Ref constant(std::span<const double> values, std::size_t rows, std::size_t cols = 1);
    Ref param(ParamId p);
    // rows x cols block of a parameter's flat data starting at offset.
    Ref param_slice(ParamId p, std::size_t offset, std::size_t rows, std::size_t cols = 1);

    Ref linear(Ref w, Ref x);  // (m x n) * (n x 1)
    Ref concat(Ref x, Ref y);  // vertical stack of two vectors
    Ref add(Ref x, Ref y);
    Ref scale(double c, Ref x);
    Ref dot(Ref w, Ref x);
    Ref sum_list(std::span<const Ref> xs);  // repeats allowed
    Ref relu(Ref x);
    // Vector of length n with scalars placed at distinct indices, zero elsewhere.
    Ref scatter(std::span<const Ref> scalars, std::span<const std::size_t> indices, std::size_t n);
    Ref logsumexp(Ref scores);
    Ref neg_logsoftmax_pick(Ref scores, std::size_t index);

    std::span<const double> value(Ref r) const;
    double scalar(Ref r) const;
    std::size_t rows(Ref r) const { return nodes_.at(r).rows; }
    std::size_t size() const { return nodes_.size(); }

    // Accumulates d(loss)/d(param) into out. loss must be 1 x 1; a tape can be
    // differentiated once.
    void backward(Ref loss, GradBuffer& out);

    void inject_fault(FaultInjection f) { fault_ = f; }

   private:
    struct Node {
        Op op;
        std::uint32_t rows;
        std::uint32_t cols;
        std::size_t value_offset;
        Ref a = 0;
        Ref b = 0;
        std::size_t list_offset = 0;  // into list_ for SumList / Scatter
        std::size_t list_size = 0;
        std::size_t index = 0;  // param offset, pick index
        ParamId param = 0;
        double c = 0.0;
    };

    Ref push(Node n, std::span<const double> values);
    Ref push_uninit(Node n);
    std::span<double> mut_value(Ref r);
    const Node& node(Ref r) const;
    double fault(Op op) const { return fault_.op == op ? fault_.factor : 1.0; }
    [[noreturn]] void shape_error(const char* op, Ref x, Ref y) const;

    const ParamStore* store_;
    std::vector<Node> nodes_;
    std::vector<double> values_;
    std::vector<std::size_t> list_;
    bool differentiated_ = false;
    FaultInjection fault_{};
};

struct GradCheckEntry {
    std::string name;
    double max_rel_error = 0.0;
    double max_abs_error = 0.0;
    std::size_t coords = 0;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> entries;
    double tolerance = 0.0;

    double max_rel_error() const;
    bool passed() const { return max_rel_error() < tolerance; }
};

// Returns the loss; when grads is non-null also accumulates analytic gradients.
using LossClosure = std::function<double(const ParamStore&, GradBuffer* grads)>;

// Central differences over every coordinate of every parameter. Relative error
// is |analytic - numeric| / max(|analytic|, |numeric|, abs_floor).
GradCheckReport grad_check(const LossClosure& closure, ParamStore& store, double tolerance, double step = 1e-5,
                           double abs_floor = 1e-6);

}  // namespace qaspr::nn
