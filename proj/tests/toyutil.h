#pragma once

#include <cmath>

#include "mwdlp/dataset.h"
#include "mwdlp/model.h"
#include "mwdlp/pqmf.h"
#include "mwdlp/rng.h"
#include "mwdlp/wav.h"

namespace mwdlp::testutil {

// Small model over 8 kHz audio with 2 bands; cheap enough for gradient
// checks and short training runs.
inline NetworkConfig toy_train_config(int bands = 2, int lp = 2, int sparse = 16, int dense = 8) {
    NetworkConfig cfg;
    cfg.bands = bands;
    cfg.lp_order = lp;
    cfg.cond_dim = 8;
    cfg.cond_proj = 12;
    cfg.embed_dim = 4;
    cfg.sparse_units = sparse;
    cfg.dense_units = dense;
    cfg.logit_latent = 4;
    cfg.residual_hidden = 8;
    cfg.sample_rate = 8000;
    cfg.frame_shift = 80;  // 10 ms
    cfg.mel_fft = 256;
    cfg.mel_win = 220;
    cfg.pqmf_order = 48;
    cfg.pqmf_beta = 9.0;
    cfg.pqmf_cutoff = 1.0 / (2.0 * bands);
    return cfg;
}

// Voiced-speech-like signal: harmonic source with a moving formant filter
// plus breath noise.
inline Waveform toy_speech(int sample_rate, double seconds, uint64_t seed) {
    Waveform w;
    w.sample_rate = sample_rate;
    const size_t n = size_t(seconds * sample_rate);
    w.samples.resize(n);
    CounterRng rng(seed);
    double phase = 0.0, bp1 = 0.0, bp2 = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double t = double(i) / sample_rate;
        const double f0 = 120.0 + 30.0 * std::sin(2 * 3.14159265 * 1.3 * t);
        phase += 2 * 3.14159265 * f0 / sample_rate;
        double src = 0.0;
        for (int h = 1; h <= 8; ++h) src += std::sin(phase * h) / double(h);
        src += 0.05 * (rng.next_open01() * 2.0 - 1.0);
        // slowly moving resonance
        const double fc = 600.0 + 300.0 * std::sin(2 * 3.14159265 * 0.5 * t);
        const double r = 0.95;
        const double w0 = 2 * 3.14159265 * fc / sample_rate;
        const double a1 = 2 * r * std::cos(w0), a2 = -r * r;
        const double y = src * 0.15 + a1 * bp1 + a2 * bp2;
        bp2 = bp1;
        bp1 = y;
        w.samples[i] = 0.35 * y + 0.25 * src * 0.3;
    }
    double peak = 0.0;
    for (double v : w.samples) peak = std::max(peak, std::abs(v));
    for (double& v : w.samples) v *= 0.8 / peak;
    return w;
}

}  // namespace mwdlp::testutil
