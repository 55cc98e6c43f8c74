#include <doctest.h>

#include <cmath>

#include "gradcheck.h"
#include "mwdlp/rng.h"
#include "mwdlp/tape.h"

using namespace mwdlp;
using namespace mwdlp::testutil;

TEST_SUITE_BEGIN("tape");

TEST_CASE("linear matches manual matmul and its gradients") {
    CounterRng rng(1);
    Tensor x = random_tensor(3, 4, rng);
    Tensor w = random_tensor(5, 4, rng);
    Tensor b = random_tensor(1, 5, rng);

    Tape tape;
    Var vx = tape.leaf(x, true);
    Var vw = tape.leaf(w, true);
    Var vb = tape.leaf(b, true);
    Var y = tape.linear(vx, vw, vb);
    for (int r = 0; r < 3; ++r)
        for (int o = 0; o < 5; ++o) {
            double acc = b.at(0, o);
            for (int i = 0; i < 4; ++i) acc += x.at(r, i) * w.at(o, i);
            CHECK(tape.val(y).at(r, o) == doctest::Approx(acc).epsilon(1e-12));
        }

    auto fn = [](Tape& t, const std::vector<Var>& vs) {
        return t.mean_all(t.square(t.linear(vs[0], vs[1], vs[2])));
    };
    CHECK(max_grad_error(fn, {x, w, b}) < 1e-6);
}

TEST_CASE("elementwise and activation gradients") {
    CounterRng rng(2);
    const Tensor a = random_tensor(4, 6, rng);
    const Tensor b = random_tensor(4, 6, rng);

    auto check1 = [&](const char* name, std::function<Var(Tape&, Var)> op, double shift = 0.0) {
        Tensor in = a;
        for (double& v : in.v) v = std::abs(v) + shift + 0.2;  // keep positive domains safe
        auto fn = [&op](Tape& t, const std::vector<Var>& vs) { return t.mean_all(op(t, vs[0])); };
        INFO(name);
        CHECK(max_grad_error(fn, {in}) < 1e-6);
    };
    check1("sigmoid", [](Tape& t, Var v) { return t.sigmoid(v); });
    check1("tanh", [](Tape& t, Var v) { return t.tanh_op(v); });
    check1("exp", [](Tape& t, Var v) { return t.exp_op(v); });
    check1("log", [](Tape& t, Var v) { return t.log_op(v); });
    check1("sqrt", [](Tape& t, Var v) { return t.sqrt_op(v); });
    check1("square", [](Tape& t, Var v) { return t.square(v); });
    check1("tanhshrink", [](Tape& t, Var v) { return t.tanhshrink(v); });
    check1("scale", [](Tape& t, Var v) { return t.scale(v, -2.5); });
    check1("relu-positive", [](Tape& t, Var v) { return t.relu(v); });

    auto fn2 = [](Tape& t, const std::vector<Var>& vs) {
        Var m = t.mul(vs[0], vs[1]);
        Var s = t.sub(t.add(m, vs[0]), vs[1]);
        return t.mean_all(t.square(s));
    };
    CHECK(max_grad_error(fn2, {a, b}) < 1e-6);
}

TEST_CASE("abs and clamp_min gradients away from kinks") {
    CounterRng rng(3);
    Tensor a = random_tensor(3, 5, rng);
    for (double& v : a.v)
        if (std::abs(v) < 0.1) v += 0.5;  // keep clear of the kink
    auto fn = [](Tape& t, const std::vector<Var>& vs) {
        return t.mean_all(t.add(t.abs_op(vs[0]), t.clamp_min(vs[0], 0.05)));
    };
    CHECK(max_grad_error(fn, {a}) < 1e-6);
}

TEST_CASE("shape ops round trip and gradients") {
    CounterRng rng(4);
    const Tensor a = random_tensor(2, 12, rng);

    Tape tape;
    Var v = tape.leaf(a, false);
    Var split = tape.split_cols_to_rows(v, 3);
    CHECK(tape.val(split).rows == 6);
    CHECK(tape.val(split).cols == 4);
    CHECK(tape.val(split).at(1, 2) == a.at(0, 6));
    Var merged = tape.merge_rows_to_cols(split, 3);
    CHECK(tape.val(merged).v == a.v);

    auto fn = [](Tape& t, const std::vector<Var>& vs) {
        Var s = t.split_cols_to_rows(vs[0], 3);
        Var c = t.concat_cols({s, t.square(s)});
        Var sl = t.slice_cols(c, 2, 6);
        return t.mean_all(t.square(t.merge_rows_to_cols(sl, 3)));
    };
    CHECK(max_grad_error(fn, {a}) < 1e-6);
}

TEST_CASE("reductions and mul_rowvec gradients") {
    CounterRng rng(5);
    const Tensor a = random_tensor(4, 7, rng);
    const Tensor v = random_tensor(1, 7, rng);
    auto fn = [](Tape& t, const std::vector<Var>& vs) {
        Var scaled = t.mul_rowvec(vs[0], vs[1]);
        return t.add(t.mean_all(t.square(scaled)), t.scale(t.sum_all(t.sum_cols(scaled)), 0.1));
    };
    CHECK(max_grad_error(fn, {a, v}) < 1e-6);
}

TEST_CASE("gather_rows accumulates into repeated rows") {
    CounterRng rng(6);
    const Tensor table = random_tensor(10, 3, rng);
    auto fn = [](Tape& t, const std::vector<Var>& vs) {
        Var g = t.gather_rows(vs[0], {1, 4, 1, 9});
        return t.mean_all(t.square(g));
    };
    CHECK(max_grad_error(fn, {table}) < 1e-6);
}

TEST_CASE("softmax rows sum to one, shift-invariant, gradient ok") {
    CounterRng rng(7);
    const Tensor logits = random_tensor(5, 32, rng, 2.0);
    Tape tape;
    Var v = tape.leaf(logits, false);
    Var p = tape.softmax(v);
    for (int r = 0; r < 5; ++r) {
        double s = 0.0;
        for (int c = 0; c < 32; ++c) {
            CHECK(tape.val(p).at(r, c) > 0.0);
            s += tape.val(p).at(r, c);
        }
        CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
    }

    Tensor shifted = logits;
    for (int r = 0; r < 5; ++r)
        for (int c = 0; c < 32; ++c) shifted.at(r, c) += 7.5;
    Var p2 = tape.softmax(tape.leaf(shifted, false));
    for (size_t i = 0; i < tape.val(p).size(); ++i)
        CHECK(tape.val(p2).v[i] == doctest::Approx(tape.val(p).v[i]).epsilon(1e-12));

    auto fn = [](Tape& t, const std::vector<Var>& vs) {
        return t.mean_all(t.square(t.softmax(vs[0])));
    };
    CHECK(max_grad_error(fn, {logits}) < 1e-6);

    Tensor bad = logits;
    bad.v[3] = std::nan("");
    Tape t3;
    CHECK_THROWS(t3.softmax(t3.leaf(bad, false)));
}

TEST_CASE("softmax_ce value and gradient") {
    CounterRng rng(8);
    const Tensor logits = random_tensor(6, 32, rng, 1.5);
    const std::vector<int> targets = {3, 31, 0, 7, 7, 15};

    Tape tape;
    Var nll = tape.softmax_ce(tape.leaf(logits, false), targets);
    // Long-double oracle.
    long double acc = 0.0L;
    for (int r = 0; r < 6; ++r) {
        long double mx = -1e300L, z = 0.0L;
        for (int c = 0; c < 32; ++c) mx = std::max(mx, (long double)logits.at(r, c));
        for (int c = 0; c < 32; ++c) z += std::exp((long double)logits.at(r, c) - mx);
        acc -= ((long double)logits.at(r, targets[size_t(r)]) - mx) - std::log(z);
    }
    CHECK(tape.val(nll).v[0] == doctest::Approx(double(acc / 6.0L)).epsilon(1e-12));

    auto fn = [&targets](Tape& t, const std::vector<Var>& vs) {
        return t.softmax_ce(vs[0], targets);
    };
    CHECK(max_grad_error(fn, {logits}) < 1e-6);

    CHECK_THROWS(tape.softmax_ce(tape.leaf(logits, false), {3, 31, 0, 7, 7, 32}));
}

TEST_CASE("lp_combine adds coefficients on one-hot positions") {
    CounterRng rng(9);
    const Tensor o = random_tensor(4, 32, rng);
    const Tensor a = random_tensor(4, 3, rng);
    std::vector<std::vector<int>> hist = {{3, 3, -1}, {0, 31, 2}, {-1, -1, -1}, {5, 5, 5}};

    Tape tape;
    Var out = tape.lp_combine(tape.leaf(o, false), tape.leaf(a, false), hist);
    // Naive oracle.
    Tensor expect = o;
    for (int r = 0; r < 4; ++r)
        for (int k = 0; k < 3; ++k)
            if (hist[size_t(r)][size_t(k)] >= 0) expect.at(r, hist[size_t(r)][size_t(k)]) += a.at(r, k);
    for (size_t i = 0; i < expect.size(); ++i)
        CHECK(tape.val(out).v[i] == doctest::Approx(expect.v[i]).epsilon(1e-12));

    auto fn = [&hist](Tape& t, const std::vector<Var>& vs) {
        return t.mean_all(t.square(t.lp_combine(vs[0], vs[1], hist)));
    };
    CHECK(max_grad_error(fn, {o, a}) < 1e-6);
}

TEST_CASE("backward requires scalar and grad mode") {
    Tape tape;
    Var v = tape.leaf(Tensor(2, 2, 1.0), true);
    CHECK_THROWS(tape.backward(v));
    Tape t2;
    t2.set_grad_enabled(false);
    Var s = t2.sum_all(t2.leaf(Tensor(2, 2, 1.0), true));
    CHECK_THROWS(t2.backward(s));
}

TEST_SUITE_END();
