#pragma once

#include <vector>

#include "mwdlp/fft.h"
#include "mwdlp/wav.h"

namespace mwdlp {

struct StftConfig {
    int fft_length = 2048;
    int shift_length = 240;
    int window_length = 660;  // Hann

    bool valid() const {
        return Fft::is_pow2(size_t(fft_length)) && window_length <= fft_length &&
               shift_length <= window_length && shift_length > 0;
    }
    int bins() const { return fft_length / 2 + 1; }
};

struct MelConfig {
    int n_mels = 80;
    double fmin = 0.0;
    double fmax = 0.0;  // 0 -> Nyquist
    int sample_rate = 24000;
    StftConfig stft;
};

// Complex spectra, frames-major: frames() x bins() interleaved (re, im).
struct Spectrogram {
    std::vector<double> reim;
    int frames = 0;
    int bins = 0;

    double re(int f, int b) const { return reim[2 * (size_t(f) * bins + b)]; }
    double im(int f, int b) const { return reim[2 * (size_t(f) * bins + b) + 1]; }
    double mag(int f, int b) const;
};

// Index map realizing reflect padding of window_length/2 on each side;
// frame count is floor(T / shift) + 1. Entry j of frame f maps to
// source sample stft_source_index(...), shared by the plain STFT here and
// the differentiable STFT op in the training graph.
long stft_source_index(long pos, long t_samples);

std::vector<double> hann_window(int length);  // periodic

Spectrogram stft(const Waveform& wave, const StftConfig& cfg);

// Triangular mel filterbank on HTK mel scale, rows: n_mels x (fft/2+1).
// Every row is non-negative with positive sum.
std::vector<std::vector<double>> mel_filterbank(const MelConfig& cfg);

// 80-dim log mel-magnitude features, one row per frame. Floor 1e-9 before log.
std::vector<std::vector<double>> mel_spectrogram(const Waveform& wave, const MelConfig& cfg);

// y[t] = x[t] - alpha * x[t-1]
Waveform preemphasis(const Waveform& wave, double alpha = 0.85);
// Exact IIR inverse of preemphasis.
Waveform deemphasis(const Waveform& wave, double alpha = 0.85);

// Log spectral distortion in dB between two signals, on log mel-magnitudes,
// frames aligned by trimming to the shorter sequence (no DTW).
double lsd_db(const Waveform& a, const Waveform& b, const MelConfig& cfg);

}  // namespace mwdlp
