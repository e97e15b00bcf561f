#include <cmath>
#include <sstream>

#include "doctest.h"
#include "qaspr/checkpoint.hpp"
#include "qaspr/numerics.hpp"
#include "qaspr/rng.hpp"

using namespace qaspr;
using namespace qaspr::nn;

namespace {

Tensor random_tensor(std::vector<std::size_t> shape, RandomStream& rng) {
    Tensor t(std::move(shape));
    for (auto& x : t.data) x = rng.uniform(-1.0, 1.0);
    return t;
}

}  // namespace

TEST_CASE("dot and its gradient") {
    ParamStore store;
    auto w = store.add("w", Tensor({3}, {0.5, -1.0, 2.0}));
    Tape tape(store);
    std::vector<double> x{1, 2, 3};
    auto f = tape.dot(tape.param(w), tape.constant(x, 3));
    CHECK(tape.scalar(f) == doctest::Approx(0.5 - 2.0 + 6.0));
    GradBuffer gb;
    tape.backward(f, gb);
    gb.apply(store);
    CHECK(store.grad(w).data == x);
}

TEST_CASE("logsumexp and the picked log-softmax") {
    ParamStore store;
    Tape tape(store);
    std::vector<double> zeros(4, 0.0);
    auto s = tape.constant(zeros, 4);
    CHECK(tape.scalar(tape.logsumexp(s)) == doctest::Approx(std::log(4.0)).epsilon(1e-15));

    std::vector<double> big{1000.0, 0.0};
    auto b = tape.constant(big, 2);
    CHECK(std::isfinite(tape.scalar(tape.logsumexp(b))));
    CHECK(tape.scalar(tape.neg_logsoftmax_pick(b, 0)) == doctest::Approx(0.0));
}

TEST_CASE("unused parameter gets zero gradient") {
    ParamStore store;
    auto used = store.add("used", Tensor({2}, {1.0, 2.0}));
    auto unused = store.add("unused", Tensor({2}, {3.0, 4.0}));
    Tape tape(store);
    std::vector<double> x{1, 1};
    auto f = tape.dot(tape.param(used), tape.constant(x, 2));
    GradBuffer gb;
    tape.backward(f, gb);
    gb.apply(store);
    CHECK(store.grad(unused).data == std::vector<double>{0.0, 0.0});
}

TEST_CASE("backward preconditions") {
    ParamStore store;
    auto w = store.add("w", Tensor({2}, {1.0, 2.0}));
    Tape tape(store);
    auto v = tape.param(w);
    GradBuffer gb;
    CHECK_THROWS(tape.backward(v, gb));  // not a scalar
    auto s = tape.dot(v, v);
    tape.backward(s, gb);
    CHECK_THROWS(tape.backward(s, gb));  // single use
}

TEST_CASE("shape mismatches are rejected") {
    ParamStore store;
    Tape tape(store);
    std::vector<double> a{1, 2}, b{1, 2, 3};
    auto x = tape.constant(a, 2), y = tape.constant(b, 3);
    CHECK_THROWS(tape.add(x, y));
    CHECK_THROWS(tape.dot(x, y));
    auto m = tape.constant(b, 1, 3);
    CHECK_THROWS(tape.linear(m, x));
}

TEST_CASE("linear layer passes a finite-difference check") {
    RandomStream rng(17);
    ParamStore store;
    auto W = store.add("W", random_tensor({3, 5}, rng));
    auto x = store.add("x", random_tensor({5}, rng));
    auto w = store.add("w", random_tensor({3}, rng));
    LossClosure loss = [&](const ParamStore& s, GradBuffer* g) {
        Tape tape(s);
        auto y = tape.linear(tape.param(W), tape.param(x));
        auto f = tape.dot(tape.param(w), y);
        if (g) tape.backward(f, *g);
        return tape.scalar(f);
    };
    auto report = grad_check(loss, store, 1e-6);
    CHECK(report.passed());
    CHECK(report.entries.size() == 3);
}

TEST_CASE("a model linear in its parameters is checked almost exactly") {
    ParamStore store;
    auto w = store.add("w", Tensor({3}, {0.2, -0.4, 0.9}));
    std::vector<double> x{1.0, 2.0, 3.0};
    LossClosure loss = [&](const ParamStore& s, GradBuffer* g) {
        Tape tape(s);
        auto f = tape.dot(tape.param(w), tape.constant(x, 3));
        if (g) tape.backward(f, *g);
        return tape.scalar(f);
    };
    CHECK(grad_check(loss, store, 1e-9).passed());
}

TEST_CASE("every op survives a gradient check; a corrupted rule does not") {
    RandomStream rng(23);
    ParamStore store;
    auto W = store.add("W", random_tensor({2, 4}, rng));
    auto a = store.add("a", random_tensor({2}, rng));
    auto b = store.add("b", random_tensor({2}, rng));
    auto w = store.add("w", random_tensor({2}, rng));
    auto build = [&](Tape& tape) {
        auto cat = tape.concat(tape.param(a), tape.param(b));
        auto h = tape.add(tape.linear(tape.param(W), cat), tape.scale(0.7, tape.param(a)));
        auto r = tape.relu(h);
        std::vector<Tape::Ref> parts{r, h, h};
        auto sum = tape.sum_list(parts);
        std::vector<Tape::Ref> scalars{tape.dot(tape.param(w), sum), tape.dot(tape.param(b), h)};
        std::vector<std::size_t> idx{3, 1};
        auto scores = tape.scatter(scalars, idx, 5);
        return tape.add(tape.neg_logsoftmax_pick(scores, 3), tape.scale(0.1, tape.logsumexp(scores)));
    };
    auto closure = [&](std::optional<Tape::FaultInjection> fault) {
        return LossClosure([&, fault](const ParamStore& s, GradBuffer* g) {
            Tape tape(s);
            if (fault) tape.inject_fault(*fault);
            auto f = build(tape);
            if (g) tape.backward(f, *g);
            return tape.scalar(f);
        });
    };
    auto clean = grad_check(closure(std::nullopt), store, 1e-6);
    CHECK(clean.max_rel_error() < 1e-6);

    for (Op op : {Op::Linear, Op::Concat, Op::Dot, Op::SumList, Op::Scatter, Op::LogSumExp}) {
        CAPTURE(op_name(op));
        auto bad = grad_check(closure(Tape::FaultInjection{op, 1.5}), store, 1e-4);
        CHECK(bad.max_rel_error() > 1e-2);
        CHECK_FALSE(bad.passed());
    }
}

TEST_CASE("adam: closed-form first step") {
    ParamStore store;
    auto p = store.add("theta", Tensor({1}, {0.0}));
    store.grad(p).data[0] = 1.0;
    adam_step(store, AdamConfig{.lr = 0.1});
    // m_hat = v_hat = 1 after bias correction.
    CHECK(store.value(p).data[0] == doctest::Approx(-0.1 / (1.0 + 1e-8)).epsilon(1e-14));
    CHECK(store.grad(p).data[0] == 0.0);
    CHECK(store.step() == 1);
}

TEST_CASE("adam: zero gradients, symmetry, frozen tensors, non-finite guard") {
    ParamStore store;
    auto a = store.add("a", Tensor({2}, {0.3, 0.3}));
    auto frozen = store.add("f", Tensor({1}, {2.0}), false);
    for (int i = 0; i < 5; ++i) adam_step(store, {});
    CHECK(store.value(a).data == std::vector<double>{0.3, 0.3});

    for (int i = 0; i < 5; ++i) {
        store.grad(a).data = {0.7, 0.7};
        store.grad(frozen).data = {1.0};
        adam_step(store, {});
    }
    CHECK(store.value(a).data[0] == store.value(a).data[1]);
    CHECK(store.value(a).data[0] < 0.3);
    CHECK(store.value(frozen).data[0] == 2.0);

    const auto before = store.value(a).data;
    store.grad(a).data = {NAN, 0.0};
    CHECK_THROWS(adam_step(store, {}));
    CHECK(store.value(a).data == before);
}

TEST_CASE("checkpoint round trip") {
    RandomStream rng(5);
    ParamStore store;
    store.add("rel_emb", random_tensor({4, 3}, rng));
    store.add("score_vec", random_tensor({3}, rng), false);
    nlohmann::json meta{{"d", 3}, {"note", "x"}};
    std::stringstream buf;
    write_checkpoint(buf, meta, store);
    auto ck = read_checkpoint(buf);
    CHECK(ck.metadata == meta);
    REQUIRE(ck.params.size() == 2);
    for (ParamId p = 0; p < 2; ++p) {
        CHECK(ck.params.name(p) == store.name(p));
        CHECK(ck.params.value(p).shape == store.value(p).shape);
        CHECK(ck.params.value(p).data == store.value(p).data);
    }

    std::stringstream bad("NOTACHECKPOINT");
    CHECK_THROWS(read_checkpoint(bad));
    auto bytes = buf.str();
    std::stringstream truncated(bytes.substr(0, bytes.size() - 4));
    CHECK_THROWS(read_checkpoint(truncated));
}
