#include <doctest.h>

#include <cmath>

#include "mwdlp/pqmf.h"
#include "mwdlp/rng.h"

using namespace mwdlp;

TEST_SUITE_BEGIN("pqmf");

namespace {

Waveform white_noise(int sr, double seconds, uint64_t seed) {
    Waveform w;
    w.sample_rate = sr;
    w.samples.resize(size_t(sr * seconds));
    CounterRng rng(seed);
    for (auto& v : w.samples) v = rng.next_open01() * 2.0 - 1.0;
    return w;
}

// White noise shaped by a crude vocal-tract-ish filter: -6 dB/oct tilt with
// a resonance, enough spectral slope to resemble speech energy.
Waveform speech_shaped_noise(int sr, double seconds, uint64_t seed) {
    Waveform w = white_noise(sr, seconds, seed);
    double lp = 0.0, bp1 = 0.0, bp2 = 0.0;
    for (auto& v : w.samples) {
        lp = 0.97 * lp + 0.03 * v;
        const double res = 1.6 * bp1 - 0.72 * bp2 + v * 0.2;
        bp2 = bp1;
        bp1 = res;
        v = 6.0 * lp + 0.8 * res;
    }
    double peak = 0.0;
    for (double v : w.samples) peak = std::max(peak, std::abs(v));
    for (auto& v : w.samples) v *= 0.7 / peak;
    return w;
}

// Delay-compensated SNR, alignment searched around the nominal delay.
double roundtrip_snr_db(const PqmfBank& bank, const Waveform& x) {
    const SubbandTensor sub = bank.analyze(x);
    const Waveform rec = bank.synthesize(sub, x.sample_rate);
    double best = -1e300;
    for (int d = 0; d <= 2 * bank.delay(); ++d) {
        double num = 0.0, den = 0.0;
        const size_t n = std::min(x.samples.size(), rec.samples.size() - size_t(d));
        for (size_t i = 0; i + 1000 < n; ++i) {
            const double e = x.samples[i] - rec.samples[i + size_t(d)];
            num += x.samples[i] * x.samples[i];
            den += e * e;
        }
        best = std::max(best, 10.0 * std::log10(num / (den + 1e-300)));
    }
    return best;
}

}  // namespace

TEST_CASE("prototype is symmetric and unity at DC") {
    for (auto cfg : {PqmfConfig::for_24k(), PqmfConfig::for_16k()}) {
        PqmfBank bank(cfg);
        const auto& p = bank.prototype();
        REQUIRE(int(p.size()) == cfg.prototype_order + 1);
        for (int n = 0; n <= cfg.prototype_order; ++n)
            CHECK(p[size_t(n)] == doctest::Approx(p[size_t(cfg.prototype_order - n)]).epsilon(1e-12));
        // DFT at DC of the designed filter.
        double dc = 0.0;
        for (double v : p) dc += v;
        CHECK(dc == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("zero in, zero bands, zero reconstruction") {
    PqmfBank bank(PqmfConfig::for_16k());
    Waveform z;
    z.sample_rate = 16000;
    z.samples.assign(4000, 0.0);
    const SubbandTensor sub = bank.analyze(z);
    CHECK(sub.band_count() == 4);
    CHECK(sub.band_length() == 1000);
    for (const auto& b : sub.bands)
        for (double v : b) CHECK(v == 0.0);
    const Waveform rec = bank.synthesize(sub, 16000);
    CHECK(rec.samples.size() == 4000);
    for (double v : rec.samples) CHECK(v == 0.0);
}

TEST_CASE("band length invariant with padding") {
    PqmfBank bank(PqmfConfig::for_16k());
    Waveform w = white_noise(16000, 0.1, 3);
    w.samples.resize(1601);  // not divisible by M
    const SubbandTensor sub = bank.analyze(w);
    CHECK(sub.band_length() == 401);  // padded up
}

TEST_CASE("sinusoid concentrates in its band by 20 dB") {
    for (auto cfg : {PqmfConfig::for_24k(), PqmfConfig::for_16k()}) {
        const int sr = cfg.bands == 6 ? 24000 : 16000;
        PqmfBank bank(cfg);
        for (int target = 0; target < cfg.bands; ++target) {
            Waveform tone;
            tone.sample_rate = sr;
            tone.samples.resize(size_t(sr) / 2);
            const double f = (target + 0.5) * (sr / 2.0) / cfg.bands;
            for (size_t i = 0; i < tone.samples.size(); ++i)
                tone.samples[i] = std::sin(2.0 * 3.14159265358979 * f * double(i) / sr);
            const SubbandTensor sub = bank.analyze(tone);
            std::vector<double> energy(size_t(cfg.bands), 0.0);
            for (int m = 0; m < cfg.bands; ++m)
                for (double v : sub.bands[size_t(m)]) energy[size_t(m)] += v * v;
            for (int m = 0; m < cfg.bands; ++m) {
                if (m == target) continue;
                CHECK(10.0 * std::log10(energy[size_t(target)] / (energy[size_t(m)] + 1e-300)) >=
                      20.0);
            }
        }
    }
}

TEST_CASE("round-trip snr at least 35 dB for both paper configs") {
    for (auto cfg : {PqmfConfig::for_24k(), PqmfConfig::for_16k()}) {
        const int sr = cfg.bands == 6 ? 24000 : 16000;
        PqmfBank bank(cfg);
        CHECK(roundtrip_snr_db(bank, white_noise(sr, 0.5, 7)) >= 35.0);
        CHECK(roundtrip_snr_db(bank, speech_shaped_noise(sr, 0.5, 8)) >= 35.0);
    }
}

TEST_CASE("band count mismatch is rejected") {
    PqmfBank bank(PqmfConfig::for_16k());
    SubbandTensor wrong;
    wrong.bands.assign(3, std::vector<double>(100, 0.0));
    CHECK_THROWS(bank.synthesize(wrong, 16000));
}

TEST_SUITE_END();
