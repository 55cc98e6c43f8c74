#include <doctest.h>

#include <cmath>
#include <initializer_list>

#include "mwdlp/codec.h"

using namespace mwdlp;

TEST_SUITE_BEGIN("codec");

namespace {

// Independent high-precision companding, long double throughout.
int encode_oracle(long double x) {
    const long double mu = 1023.0L;
    if (x > 1.0L) x = 1.0L;
    if (x < -1.0L) x = -1.0L;
    const long double c =
        (x < 0 ? -1.0L : 1.0L) * std::log(1.0L + mu * std::abs(x)) / std::log(1.0L + mu);
    long double idx = std::floor((c + 1.0L) / 2.0L * 1024.0L);
    if (idx < 0) idx = 0;
    if (idx > 1023) idx = 1023;
    return int(idx);
}

}  // namespace

TEST_CASE("zero is a fixed point up to one quantization step") {
    const int idx = mulaw_encode(0.0);
    const double back = mulaw_decode(idx);
    // Width of the zero bin in amplitude terms.
    const double width = mulaw_decode(idx + 1) - mulaw_decode(idx);
    CHECK(std::abs(back) <= width);
}

TEST_CASE("range endpoints") {
    CHECK(mulaw_encode(1.0) == 1023);
    CHECK(mulaw_encode(-1.0) == 0);
    CHECK(mulaw_encode(2.0) == 1023);   // saturating
    CHECK(mulaw_encode(-5.0) == 0);
    CHECK(mulaw_decode(0) < -0.99);
    CHECK(mulaw_decode(1023) > 0.99);
}

TEST_CASE("encode(0.1) matches the high-precision oracle") {
    CHECK(mulaw_encode(0.1) == 854);
    CHECK(encode_oracle(0.1L) == 854);
    CHECK(mulaw_decode(854) == doctest::Approx(0.09991301475584712).epsilon(1e-12));
}

TEST_CASE("encode matches oracle on a dense grid") {
    for (int i = -2000; i <= 2000; ++i) {
        const double x = i / 2000.0;
        CHECK(mulaw_encode(x) == encode_oracle((long double)x));
    }
}

TEST_CASE("decode strictly increasing over all 1024 bins") {
    for (int i = 1; i < 1024; ++i) CHECK(mulaw_decode(i) > mulaw_decode(i - 1));
}

TEST_CASE("encode monotone non-decreasing") {
    int prev = 0;
    for (int i = 0; i <= 4000; ++i) {
        const int idx = mulaw_encode(-1.0 + 2.0 * i / 4000.0);
        CHECK(idx >= prev);
        prev = idx;
    }
}

TEST_CASE("round trip bounded by the containing bin width, all bins") {
    // Exhaustive: for each bin, probe amplitudes across the bin and check
    // the round-trip error never exceeds that bin's width.
    for (int bin = 0; bin < 1024; ++bin) {
        const double lo = bin == 0 ? -1.0 : 0.5 * (mulaw_decode(bin - 1) + mulaw_decode(bin));
        const double hi = bin == 1023 ? 1.0 : 0.5 * (mulaw_decode(bin) + mulaw_decode(bin + 1));
        const double width = (bin == 1023 ? 1.0 : mulaw_decode(bin + 1)) -
                             (bin == 0 ? -1.0 : mulaw_decode(bin - 1));
        for (int j = 1; j < 4; ++j) {
            const double x = lo + (hi - lo) * j / 4.0;
            const double err = std::abs(mulaw_decode(mulaw_encode(x)) - x);
            CHECK(err <= width);
        }
    }
}

TEST_CASE("split and merge are mutually inverse over all values") {
    CHECK(split_coarse(0) == 0);
    CHECK(split_fine(0) == 0);
    CHECK(split_coarse(1023) == 31);
    CHECK(split_fine(1023) == 31);
    CHECK(split_coarse(33) == 1);
    CHECK(split_fine(33) == 1);
    for (int i = 0; i < 1024; ++i) {
        const int c = split_coarse(i), f = split_fine(i);
        CHECK(c >= 0);
        CHECK(c < 32);
        CHECK(f >= 0);
        CHECK(f < 32);
        CHECK(merge_coarse_fine(c, f) == i);
    }
}

TEST_CASE("continuous decode matches integer decode and its derivative") {
    for (int i : {0, 1, 17, 511, 512, 854, 1023})
        CHECK(mulaw_decode_real(double(i)) == mulaw_decode(i));
    // Central differences on the continuous extension.
    for (double x : {3.7, 200.2, 511.9, 700.0, 1020.5}) {
        const double h = 1e-5;
        const double fd = (mulaw_decode_real(x + h) - mulaw_decode_real(x - h)) / (2 * h);
        CHECK(mulaw_decode_real_deriv(x) == doctest::Approx(fd).epsilon(1e-6));
    }
}

TEST_SUITE_END();
