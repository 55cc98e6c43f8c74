#include <doctest.h>

#include <cmath>
#include <vector>

#include "gradcheck.h"
#include "mwdlp/loss.h"
#include "mwdlp/rng.h"

using namespace mwdlp;
using namespace mwdlp::testutil;

TEST_SUITE_BEGIN("loss");

TEST_CASE("loss stft tables match the stated resolutions") {
    const auto f24 = StftLossConfig::fullband_24k();
    REQUIRE(f24.resolutions.size() == 5);
    CHECK(f24.resolutions[0].fft_length == 2048);
    CHECK(f24.resolutions[0].shift_length == 480);
    CHECK(f24.resolutions[0].window_length == 1200);  // 2.5 * shift
    const auto f16 = StftLossConfig::fullband_16k();
    CHECK(f16.resolutions[4].fft_length == 128);
    CHECK(f16.resolutions[4].shift_length == 32);
    const auto band = StftLossConfig::band_rate();
    CHECK(band.resolutions[3].fft_length == 32);
    CHECK(band.resolutions[3].shift_length == 10);
    CHECK(band.resolutions[3].window_length == 25);
    for (const auto& set : {f24, f16, band})
        for (const auto& r : set.resolutions) CHECK(r.window_length == r.shift_length * 5 / 2);
}

TEST_CASE("ce loss: uniform, saturated, oracle") {
    Tape tape;
    Var uniform = ce_loss(tape, tape.constant(Tensor(4, 32, 0.25)), {1, 2, 3, 4});
    CHECK(tape.val(uniform).v[0] == doctest::Approx(std::log(32.0)).epsilon(1e-12));

    Tensor sat(2, 32, 0.0);
    sat.at(0, 5) = 1e6;
    sat.at(1, 9) = 1e6;
    Var zero = ce_loss(tape, tape.constant(sat), {5, 9});
    CHECK(tape.val(zero).v[0] == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("stft_loss_pair: identical, zero estimate, scaled estimate") {
    CounterRng rng(3);
    Waveform x;
    x.sample_rate = 16000;
    x.samples.resize(1600);
    for (auto& v : x.samples) v = 0.4 * rng.next_normal();

    StftConfig cfg{256, 80, 200};
    const auto same = stft_loss_pair(x, x, cfg);
    CHECK(same.spectral_convergence == 0.0);
    CHECK(same.log_magnitude == 0.0);
    CHECK(same.total() == 0.0);

    Waveform zero = x;
    for (auto& v : zero.samples) v = 0.0;
    const auto z = stft_loss_pair(zero, x, cfg);
    CHECK(z.spectral_convergence == doctest::Approx(1.0).epsilon(1e-12));

    Waveform twice = x;
    for (auto& v : twice.samples) v *= 2.0;
    const auto t2 = stft_loss_pair(twice, x, cfg);
    CHECK(t2.log_magnitude == doctest::Approx(std::log(2.0)).epsilon(1e-9));
}

TEST_CASE("mwdlp_stft_loss: perfect match is zero, interpolation decreases monotonically") {
    CounterRng rng(5);
    const int m_bands = 2;
    const int t_band = 400;
    SubbandTensor target;
    target.bands.assign(m_bands, std::vector<double>(size_t(t_band)));
    for (auto& band : target.bands)
        for (auto& v : band) v = 0.3 * rng.next_normal();

    PqmfBank bank(PqmfConfig{2, 48, 9.0, 0.25});
    const Waveform target_full = bank.synthesize(target, 8000);

    const auto band_cfg = StftLossConfig::custom({64, 32}, {20, 8});
    const auto full_cfg = StftLossConfig::custom({128, 64}, {40, 16});

    CHECK(mwdlp_stft_loss(target, target, target_full, target_full, band_cfg, full_cfg) ==
          doctest::Approx(0.0).epsilon(1e-12));

    SubbandTensor noise = target;
    CounterRng nrng(6);
    for (auto& band : noise.bands)
        for (auto& v : band) v = 0.3 * nrng.next_normal();

    double prev = 1e300;
    for (int i = 0; i <= 4; ++i) {
        const double alpha = i / 4.0;  // 0 = noise, 1 = target
        SubbandTensor mix = target;
        for (int m = 0; m < m_bands; ++m)
            for (int t = 0; t < t_band; ++t)
                mix.bands[size_t(m)][size_t(t)] = alpha * target.bands[size_t(m)][size_t(t)] +
                                                  (1 - alpha) * noise.bands[size_t(m)][size_t(t)];
        const Waveform mix_full = bank.synthesize(mix, 8000);
        const double loss = mwdlp_stft_loss(mix, target, mix_full, target_full, band_cfg, full_cfg);
        CHECK(loss < prev);
        prev = loss;
    }
}

TEST_CASE("total_loss weighting") {
    CHECK(total_loss(2.0, 3.0, 1.0, 0.0) == 2.0);
    CHECK(total_loss(2.0, 3.0, 0.0, 1.0) == 3.0);
    CHECK(total_loss(2.0, 3.0, 1.0, 1.0) == 5.0);
    CHECK_THROWS(total_loss(1.0, 1.0, -0.5, 1.0));
}

TEST_CASE("stft_magnitude op matches plain stft and its gradient checks") {
    CounterRng rng(7);
    const Tensor x = random_tensor(2, 64, rng, 0.5);
    StftConfig cfg{32, 8, 20};

    Tape tape;
    Var mag = stft_magnitude(tape, tape.constant(x), cfg);
    Waveform w;
    w.sample_rate = 8000;
    w.samples.assign(x.row(1), x.row(1) + 64);
    const Spectrogram ref = stft(w, cfg);
    REQUIRE(tape.val(mag).cols == ref.frames * ref.bins);
    for (int f = 0; f < ref.frames; ++f)
        for (int b = 0; b < ref.bins; ++b)
            CHECK(tape.val(mag).at(1, f * ref.bins + b) ==
                  doctest::Approx(ref.mag(f, b)).epsilon(1e-10));

    auto fn = [cfg](Tape& t, const std::vector<Var>& vs) {
        return t.mean_all(t.square(stft_magnitude(t, vs[0], cfg)));
    };
    CHECK(max_grad_error(fn, {x}, 1e-6) < 1e-5);
}

TEST_CASE("stft_loss_rows gradient checks") {
    CounterRng rng(8);
    const Tensor x = random_tensor(2, 80, rng, 0.5);
    const Tensor target = random_tensor(2, 80, rng, 0.5);
    StftConfig cfg{32, 10, 25};
    auto fn = [&](Tape& t, const std::vector<Var>& vs) {
        return stft_loss_rows(t, vs[0], target, cfg);
    };
    CHECK(max_grad_error(fn, {x}, 1e-6) < 1e-4);
}

TEST_CASE("pqmf_synthesize_op matches the bank and is a faithful adjoint") {
    PqmfBank bank(PqmfConfig{2, 32, 9.0, 0.25});
    CounterRng rng(9);
    const Tensor bands = random_tensor(4, 60, rng);  // two batch entries x two bands

    Tape tape;
    Var out = tape.constant(Tensor(0, 0));
    out = pqmf_synthesize_op(tape, tape.constant(bands), bank);
    REQUIRE(tape.val(out).rows == 2);
    REQUIRE(tape.val(out).cols == 120);
    for (int n = 0; n < 2; ++n) {
        SubbandTensor sub;
        sub.bands.assign(2, std::vector<double>(60));
        for (int m = 0; m < 2; ++m)
            for (int t = 0; t < 60; ++t) sub.bands[size_t(m)][size_t(t)] = bands.at(n * 2 + m, t);
        const Waveform ref = bank.synthesize(sub, 8000);
        for (int i = 0; i < 120; ++i)
            CHECK(tape.val(out).at(n, i) == doctest::Approx(ref.samples[size_t(i)]).epsilon(1e-12));
    }

    auto fn = [&bank](Tape& t, const std::vector<Var>& vs) {
        return t.mean_all(t.square(pqmf_synthesize_op(t, vs[0], bank)));
    };
    CHECK(max_grad_error(fn, {bands}, 1e-6) < 1e-5);
}

TEST_SUITE_END();
