#include <doctest.h>

#include <cmath>

#include "mwdlp/complexity.h"
#include "toyutil.h"

using namespace mwdlp;
using namespace mwdlp::testutil;

TEST_SUITE_BEGIN("complexity");

TEST_CASE("paper configurations land within ten percent") {
    const auto r24 = complexity_gflops(NetworkConfig::paper_24k());
    CHECK(r24.band_rate_hz == 4000.0);
    CHECK(std::abs(r24.total_gflops - 4.53) / 4.53 < 0.10);

    const auto r16 = complexity_gflops(NetworkConfig::paper_16k());
    CHECK(r16.band_rate_hz == 4000.0);
    CHECK(std::abs(r16.total_gflops - 4.24) / 4.24 < 0.10);
}

TEST_CASE("zero densities remove exactly the sparse recurrent share") {
    const NetworkConfig cfg = NetworkConfig::paper_24k();
    const auto full = complexity_gflops(cfg);
    const auto none = complexity_gflops(cfg, {0.0, 0.0, 0.0});
    CHECK(none.sparse_recurrent == 0.0);
    CHECK(none.total_gflops ==
          doctest::Approx(full.total_gflops - full.sparse_recurrent).epsilon(1e-12));
}

TEST_CASE("estimate is monotone in model size") {
    const auto toy = complexity_gflops(toy_train_config());
    const auto full = complexity_gflops(NetworkConfig::paper_24k());
    CHECK(toy.total_gflops < full.total_gflops);
}

TEST_CASE("breakdown adds up and reports side costs") {
    const auto r = complexity_gflops(NetworkConfig::paper_24k());
    CHECK(r.total_gflops ==
          doctest::Approx(r.sparse_recurrent + r.dense_grus + r.dualfc + r.residual_fc +
                          r.lp_combination));
    CHECK(r.embed_lookup_gflops > 0.0);
    CHECK(r.frame_rate_gflops > 0.0);
}

TEST_SUITE_END();
