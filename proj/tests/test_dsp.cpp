#include <doctest.h>

#include <cmath>
#include <complex>

#include "mwdlp/dsp.h"
#include "mwdlp/rng.h"

using namespace mwdlp;

TEST_SUITE_BEGIN("dsp");

namespace {
constexpr double kTau = 6.283185307179586;

Waveform make_wave(int sr, size_t n, double (*f)(size_t)) {
    Waveform w;
    w.sample_rate = sr;
    w.samples.resize(n);
    for (size_t i = 0; i < n; ++i) w.samples[i] = f(i);
    return w;
}

// Naive O(N^2) DFT of one windowed frame, the independent oracle.
std::vector<std::complex<double>> dft_oracle(const std::vector<double>& frame, int nfft) {
    std::vector<std::complex<double>> out(size_t(nfft / 2 + 1));
    for (int k = 0; k <= nfft / 2; ++k) {
        std::complex<double> acc = 0.0;
        for (int n = 0; n < int(frame.size()); ++n)
            acc += frame[size_t(n)] * std::exp(std::complex<double>(0, -kTau * k * n / nfft));
        out[size_t(k)] = acc;
    }
    return out;
}
}  // namespace

TEST_CASE("fft round trip and adjoint identity") {
    Fft fft(64);
    CounterRng rng(5);
    std::vector<double> x(64), y_reim(66), xin(64);
    for (auto& v : x) v = rng.next_normal();
    fft.rfft(x.data(), y_reim.data());

    // inverse via adjoint relation: un-normalized inverse of full FFT
    std::vector<double> reim(128);
    for (int i = 0; i < 64; ++i) {
        reim[2 * size_t(i)] = x[size_t(i)];
        reim[2 * size_t(i) + 1] = 0.0;
    }
    fft.forward(reim.data());
    fft.inverse(reim.data());
    for (int i = 0; i < 64; ++i) CHECK(reim[2 * size_t(i)] / 64.0 == doctest::Approx(x[size_t(i)]).epsilon(1e-12));

    // <F x, y> == <x, F^T y>
    std::vector<double> yb(66), xadj(64);
    for (auto& v : yb) v = rng.next_normal();
    fft.rfft_adjoint(yb.data(), xadj.data());
    double lhs = 0.0, rhs = 0.0;
    for (int i = 0; i < 66; ++i) lhs += y_reim[size_t(i)] * yb[size_t(i)];
    for (int i = 0; i < 64; ++i) rhs += x[size_t(i)] * xadj[size_t(i)];
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
    (void)xin;
}

TEST_CASE("fft rejects non power of two") {
    CHECK_THROWS(Fft(48));
    StftConfig bad;
    bad.fft_length = 300;
    bad.window_length = 200;
    bad.shift_length = 100;
    Waveform w = make_wave(16000, 1000, [](size_t) { return 0.1; });
    CHECK_THROWS(stft(w, bad));
}

TEST_CASE("stft of zero input is zero") {
    StftConfig cfg{256, 64, 160};
    auto w = make_wave(16000, 1000, [](size_t) { return 0.0; });
    const Spectrogram s = stft(w, cfg);
    CHECK(s.frames == 1000 / 64 + 1);
    CHECK(s.bins == 129);
    for (double v : s.reim) CHECK(v == 0.0);
}

TEST_CASE("stft of a bin-centered sinusoid matches the direct DFT oracle") {
    StftConfig cfg{256, 64, 160};
    const double freq_bin = 32.0;  // cycles per fft length
    auto w = make_wave(16000, 2048, [](size_t i) { return std::sin(kTau * 32.0 * double(i) / 256.0); });
    const Spectrogram s = stft(w, cfg);

    // Rebuild one interior frame exactly as the implementation defines it.
    const int f = 5;
    const auto win = hann_window(cfg.window_length);
    std::vector<double> frame(size_t(cfg.fft_length), 0.0);
    const long start = long(f) * cfg.shift_length - cfg.window_length / 2;
    for (int j = 0; j < cfg.window_length; ++j)
        frame[size_t(j)] =
            w.samples[size_t(stft_source_index(start + j, long(w.samples.size())))] * win[size_t(j)];
    const auto oracle = dft_oracle(frame, cfg.fft_length);
    double peak = 0.0;
    int peak_bin = 0;
    for (int b = 0; b < s.bins; ++b) {
        CHECK(s.re(f, b) == doctest::Approx(oracle[size_t(b)].real()).epsilon(1e-9));
        CHECK(s.im(f, b) == doctest::Approx(oracle[size_t(b)].imag()).epsilon(1e-9));
        if (s.mag(f, b) > peak) {
            peak = s.mag(f, b);
            peak_bin = b;
        }
    }
    // Energy concentrated at the sinusoid bin (the window spreads it a little).
    CHECK(peak_bin == int(freq_bin * cfg.fft_length / 256.0));
}

TEST_CASE("parseval per frame") {
    StftConfig cfg{128, 32, 80};
    CounterRng rng(11);
    Waveform w;
    w.sample_rate = 8000;
    w.samples.resize(640);
    for (auto& v : w.samples) v = rng.next_normal() * 0.3;
    const Spectrogram s = stft(w, cfg);

    const auto win = hann_window(cfg.window_length);
    for (int f = 0; f < s.frames; ++f) {
        double time_e = 0.0;
        const long start = long(f) * cfg.shift_length - cfg.window_length / 2;
        for (int j = 0; j < cfg.window_length; ++j) {
            const double v =
                w.samples[size_t(stft_source_index(start + j, long(w.samples.size())))] * win[size_t(j)];
            time_e += v * v;
        }
        // Full-spectrum energy from the half spectrum (conjugate symmetry).
        double spec_e = 0.0;
        for (int b = 0; b < s.bins; ++b) {
            const double m2 = s.re(f, b) * s.re(f, b) + s.im(f, b) * s.im(f, b);
            const bool shared = b == 0 || b == cfg.fft_length / 2;
            spec_e += shared ? m2 : 2.0 * m2;
        }
        CHECK(time_e == doctest::Approx(spec_e / cfg.fft_length).epsilon(1e-9));
    }
}

TEST_CASE("mel spectrogram floor, positivity, and concentration") {
    MelConfig mc;
    mc.n_mels = 80;
    mc.sample_rate = 16000;
    mc.stft = {1024, 160, 440};

    auto zero = make_wave(16000, 8000, [](size_t) { return 0.0; });
    auto mel0 = mel_spectrogram(zero, mc);
    for (const auto& f : mel0)
        for (double v : f) CHECK(v == doctest::Approx(std::log(1e-9)));

    CounterRng rng(3);
    Waveform noise;
    noise.sample_rate = 16000;
    noise.samples.resize(8000);
    for (auto& v : noise.samples) v = rng.next_open01() - 0.5;
    for (const auto& f : mel_spectrogram(noise, mc))
        for (double v : f) CHECK(v > std::log(1e-9));

    // Sinusoid: peak channel must contain the tone, per the filterbank
    // applied to oracle DFT magnitudes.
    const double tone_hz = 2000.0;
    auto tone = make_wave(16000, 8000,
                          [](size_t i) { return std::sin(kTau * 2000.0 * double(i) / 16000.0); });
    auto mel = mel_spectrogram(tone, mc);
    const auto fb = mel_filterbank(mc);
    const int frame = int(mel.size()) / 2;
    int peak_m = 0;
    for (int m = 1; m < 80; ++m)
        if (mel[size_t(frame)][size_t(m)] > mel[size_t(frame)][size_t(peak_m)]) peak_m = m;

    // Oracle: channel energies from the naive DFT of the same frame.
    const auto win = hann_window(mc.stft.window_length);
    std::vector<double> fr(size_t(mc.stft.fft_length), 0.0);
    const long start = long(frame) * mc.stft.shift_length - mc.stft.window_length / 2;
    for (int j = 0; j < mc.stft.window_length; ++j)
        fr[size_t(j)] =
            tone.samples[size_t(stft_source_index(start + j, long(tone.samples.size())))] * win[size_t(j)];
    const auto spec = dft_oracle(fr, mc.stft.fft_length);
    int oracle_peak = 0;
    double best = -1.0;
    for (int m = 0; m < 80; ++m) {
        double acc = 0.0;
        for (int b = 0; b < int(spec.size()); ++b) acc += fb[size_t(m)][size_t(b)] * std::abs(spec[size_t(b)]);
        if (acc > best) {
            best = acc;
            oracle_peak = m;
        }
    }
    CHECK(peak_m == oracle_peak);
    // And that channel's triangle actually covers the tone frequency.
    const double bin_hz = double(mc.sample_rate) / mc.stft.fft_length;
    const int tone_bin = int(std::round(tone_hz / bin_hz));
    CHECK(fb[size_t(peak_m)][size_t(tone_bin)] > 0.0);
}

TEST_CASE("mel filterbank rows are non-negative with positive sums") {
    MelConfig mc;
    mc.n_mels = 80;
    mc.sample_rate = 24000;
    mc.stft = {2048, 240, 660};
    for (const auto& row : mel_filterbank(mc)) {
        double s = 0.0;
        for (double v : row) {
            CHECK(v >= 0.0);
            s += v;
        }
        CHECK(s > 0.0);
    }
}

TEST_CASE("preemphasis examples and exact inverse") {
    Waveform imp;
    imp.sample_rate = 16000;
    imp.samples = {1.0, 0.0, 0.0};
    auto pe = preemphasis(imp, 0.85);
    CHECK(pe.samples[0] == doctest::Approx(1.0));
    CHECK(pe.samples[1] == doctest::Approx(-0.85));
    CHECK(pe.samples[2] == doctest::Approx(0.0));

    Waveform dc;
    dc.sample_rate = 16000;
    dc.samples = {1.0, 1.0, 1.0, 1.0};
    auto pdc = preemphasis(dc, 0.85);
    CHECK(pdc.samples[0] == doctest::Approx(1.0));
    for (size_t i = 1; i < pdc.samples.size(); ++i) CHECK(pdc.samples[i] == doctest::Approx(0.15));

    CounterRng rng(9);
    Waveform x;
    x.sample_rate = 16000;
    x.samples.resize(500);
    for (auto& v : x.samples) v = rng.next_normal();
    auto rt = deemphasis(preemphasis(x, 0.85), 0.85);
    for (size_t i = 0; i < x.samples.size(); ++i)
        CHECK(rt.samples[i] == doctest::Approx(x.samples[i]).epsilon(1e-12));
}

TEST_CASE("stft determinism") {
    CounterRng rng(21);
    Waveform w;
    w.sample_rate = 16000;
    w.samples.resize(3000);
    for (auto& v : w.samples) v = rng.next_normal();
    StftConfig cfg{512, 160, 400};
    const Spectrogram a = stft(w, cfg);
    const Spectrogram b = stft(w, cfg);
    CHECK(a.reim == b.reim);
}

TEST_CASE("lsd of identical signals is zero") {
    CounterRng rng(2);
    Waveform w;
    w.sample_rate = 16000;
    w.samples.resize(16000);
    for (auto& v : w.samples) v = 0.5 * rng.next_normal();
    MelConfig mc;
    mc.sample_rate = 16000;
    mc.stft = {1024, 160, 440};
    CHECK(lsd_db(w, w, mc) == 0.0);

    Waveform scaled = w;
    for (auto& v : scaled.samples) v *= 2.0;
    CHECK(lsd_db(w, scaled, mc) > 0.0);
}

TEST_SUITE_END();
