#include <doctest.h>

#include <cmath>

#include "gradcheck.h"
#include "mwdlp/rng.h"
#include "mwdlp/sparsify.h"

using namespace mwdlp;
using namespace mwdlp::testutil;

TEST_SUITE_BEGIN("sparsify");

TEST_CASE("density schedule: flat, cubic, pinned target") {
    SparsitySchedule s;
    s.start_step = 100;
    s.end_step = 500;
    s.validate();

    CHECK(density_at(0, 0.09, s) == 1.0);
    CHECK(density_at(99, 0.09, s) == 1.0);
    CHECK(density_at(500, 0.09, s) == 0.09);
    CHECK(density_at(10000, 0.12, s) == 0.12);
    const double mid = density_at(300, 0.09, s);
    CHECK(mid > 0.09);
    CHECK(mid < 1.0);
    // Monotone non-increasing across the anneal.
    double prev = 1.0;
    for (long t = 100; t <= 500; t += 20) {
        const double d = density_at(t, 0.09, s);
        CHECK(d <= prev);
        prev = d;
    }
    CHECK(s.average_target() == doctest::Approx(0.1));
}

TEST_CASE("density 1.0 keeps everything") {
    CounterRng rng(1);
    const Tensor w = random_tensor(32, 32, rng);
    const Tensor mask = prune(w, 1.0);
    for (double v : mask.v) CHECK(v == 1.0);
}

TEST_CASE("zero blocks are dropped first") {
    CounterRng rng(2);
    Tensor w = random_tensor(64, 64, rng);
    // Zero out exactly half of the off-diagonal blocks; the diagonal stays
    // nonzero so the exemption does not interact with the budget.
    int idx = 0;
    for (int rb = 0; rb < 4; ++rb)
        for (int c = 0; c < 64; ++c) {
            const bool diag = c >= rb * 16 && c < (rb + 1) * 16;
            if (diag) continue;
            if (idx++ % 2 == 0)
                for (int i = 0; i < 16; ++i) w.at(rb * 16 + i, c) = 0.0;
        }
    // 256 blocks, 96 zeroed off-diagonal ones; keep the nonzero 160.
    const Tensor mask = prune(w, 160.0 / 256.0);
    for (int rb = 0; rb < 4; ++rb)
        for (int c = 0; c < 64; ++c) {
            double norm = 0.0;
            for (int i = 0; i < 16; ++i) norm += w.at(rb * 16 + i, c) * w.at(rb * 16 + i, c);
            if (norm > 0.0) CHECK(mask.at(rb * 16, c) != 0.0);
        }
}

TEST_CASE("kept fraction hits the requested density within one block") {
    CounterRng rng(3);
    const Tensor w = random_tensor(1184, 1184, rng);
    for (double d : {0.09, 0.12, 0.5}) {
        const Tensor mask = prune(w, d);
        const double got = mask_density(mask);
        const double quantum = 16.0 / (1184.0 * 1184.0);
        CHECK(std::abs(got - d) <= quantum + 1e-12);
    }
}

TEST_CASE("masks nest monotonically across decreasing densities") {
    CounterRng rng(4);
    const Tensor w = random_tensor(128, 128, rng);
    const Tensor loose = prune(w, 0.5);
    const Tensor tight = prune(w, 0.2);
    for (size_t i = 0; i < loose.size(); ++i)
        if (tight.v[i] != 0.0) CHECK(loose.v[i] != 0.0);
}

TEST_CASE("diagonal blocks are exempt from pruning") {
    CounterRng rng(5);
    Tensor w = random_tensor(128, 128, rng, 1.0);
    // Make diagonal blocks tiny so ranking alone would drop them.
    for (int rb = 0; rb < 8; ++rb)
        for (int c = rb * 16; c < (rb + 1) * 16; ++c)
            for (int i = 0; i < 16; ++i) w.at(rb * 16 + i, c) *= 1e-8;
    const Tensor mask = prune(w, 0.3);
    for (int i = 0; i < 128; ++i) CHECK(mask.at(i, i) == 1.0);
}

TEST_CASE("rows not divisible by the block height are rejected") {
    CounterRng rng(6);
    const Tensor w = random_tensor(24, 24, rng);
    CHECK_THROWS(prune(w, 0.5));
    CHECK_THROWS(prune(random_tensor(32, 32, rng), 0.0));
    SparsitySchedule bad;
    bad.target_density = {0.0, 0.09, 0.12};
    CHECK_THROWS(bad.validate());
}

TEST_SUITE_END();
