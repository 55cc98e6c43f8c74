#include "mwdlp/dsp.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mwdlp {

namespace {
constexpr double kTau = 6.283185307179586476925286766559;

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }
}  // namespace

double Spectrogram::mag(int f, int b) const {
    const double r = re(f, b), i = im(f, b);
    return std::sqrt(r * r + i * i);
}

long stft_source_index(long pos, long t_samples) {
    // Reflect without repeating the edge sample: ... x2 x1 | x0 x1 x2 ...
    if (t_samples == 1) return 0;
    const long period = 2 * (t_samples - 1);
    long p = pos % period;
    if (p < 0) p += period;
    return p < t_samples ? p : period - p;
}

std::vector<double> hann_window(int length) {
    std::vector<double> w(static_cast<size_t>(length));
    for (int i = 0; i < length; ++i) w[size_t(i)] = 0.5 * (1.0 - std::cos(kTau * i / length));
    return w;
}

Spectrogram stft(const Waveform& wave, const StftConfig& cfg) {
    if (!cfg.valid()) throw std::invalid_argument("invalid stft config");
    if (wave.samples.empty()) throw std::invalid_argument("stft input is empty");

    const long t = static_cast<long>(wave.samples.size());
    const int frames = static_cast<int>(t / cfg.shift_length) + 1;
    const int half_win = cfg.window_length / 2;
    const std::vector<double> win = hann_window(cfg.window_length);

    Spectrogram spec;
    spec.frames = frames;
    spec.bins = cfg.bins();
    spec.reim.assign(2 * size_t(frames) * spec.bins, 0.0);

    Fft fft(size_t(cfg.fft_length));
    std::vector<double> frame(size_t(cfg.fft_length));
    std::vector<double> out(2 * size_t(spec.bins));
    for (int f = 0; f < frames; ++f) {
        std::fill(frame.begin(), frame.end(), 0.0);
        const long start = long(f) * cfg.shift_length - half_win;
        for (int j = 0; j < cfg.window_length; ++j) {
            const long src = stft_source_index(start + j, t);
            frame[size_t(j)] = wave.samples[size_t(src)] * win[size_t(j)];
        }
        fft.rfft(frame.data(), out.data());
        std::copy(out.begin(), out.end(), spec.reim.begin() + 2 * size_t(f) * spec.bins);
    }
    return spec;
}

std::vector<std::vector<double>> mel_filterbank(const MelConfig& cfg) {
    const double fmax = cfg.fmax > 0.0 ? cfg.fmax : cfg.sample_rate / 2.0;
    const int bins = cfg.stft.bins();
    const double mel_lo = hz_to_mel(cfg.fmin);
    const double mel_hi = hz_to_mel(fmax);

    std::vector<double> edges(size_t(cfg.n_mels) + 2);
    for (int i = 0; i < cfg.n_mels + 2; ++i)
        edges[size_t(i)] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / (cfg.n_mels + 1));

    std::vector<std::vector<double>> fb(size_t(cfg.n_mels), std::vector<double>(size_t(bins), 0.0));
    for (int m = 0; m < cfg.n_mels; ++m) {
        const double lo = edges[size_t(m)], mid = edges[size_t(m) + 1], hi = edges[size_t(m) + 2];
        for (int b = 0; b < bins; ++b) {
            const double hz = double(b) * cfg.sample_rate / cfg.stft.fft_length;
            double w = 0.0;
            if (hz > lo && hz < mid) w = (hz - lo) / (mid - lo);
            else if (hz >= mid && hz < hi) w = (hi - hz) / (hi - mid);
            fb[size_t(m)][size_t(b)] = w;
        }
        // A row can end up all-zero when triangles are narrower than a bin;
        // put its peak bin at 1 so every row has positive sum.
        double s = 0.0;
        for (double v : fb[size_t(m)]) s += v;
        if (s <= 0.0) {
            const int b = std::clamp(int(std::round(mid * cfg.stft.fft_length / cfg.sample_rate)), 0, bins - 1);
            fb[size_t(m)][size_t(b)] = 1.0;
        }
    }
    return fb;
}

std::vector<std::vector<double>> mel_spectrogram(const Waveform& wave, const MelConfig& cfg) {
    if (cfg.sample_rate != wave.sample_rate)
        throw std::invalid_argument("mel config sample rate does not match waveform");
    const Spectrogram spec = stft(wave, cfg.stft);
    const auto fb = mel_filterbank(cfg);

    std::vector<std::vector<double>> mel(size_t(spec.frames), std::vector<double>(size_t(cfg.n_mels)));
    for (int f = 0; f < spec.frames; ++f) {
        for (int m = 0; m < cfg.n_mels; ++m) {
            double acc = 0.0;
            const auto& row = fb[size_t(m)];
            for (int b = 0; b < spec.bins; ++b) acc += row[size_t(b)] * spec.mag(f, b);
            mel[size_t(f)][size_t(m)] = std::log(std::max(acc, 1e-9));
        }
    }
    return mel;
}

Waveform preemphasis(const Waveform& wave, double alpha) {
    Waveform out;
    out.sample_rate = wave.sample_rate;
    out.samples.resize(wave.samples.size());
    double prev = 0.0;
    for (size_t i = 0; i < wave.samples.size(); ++i) {
        out.samples[i] = wave.samples[i] - alpha * prev;
        prev = wave.samples[i];
    }
    return out;
}

Waveform deemphasis(const Waveform& wave, double alpha) {
    Waveform out;
    out.sample_rate = wave.sample_rate;
    out.samples.resize(wave.samples.size());
    double prev = 0.0;
    for (size_t i = 0; i < wave.samples.size(); ++i) {
        prev = wave.samples[i] + alpha * prev;
        out.samples[i] = prev;
    }
    return out;
}

double lsd_db(const Waveform& a, const Waveform& b, const MelConfig& cfg) {
    const auto ma = mel_spectrogram(a, cfg);
    const auto mb = mel_spectrogram(b, cfg);
    const size_t frames = std::min(ma.size(), mb.size());
    if (frames == 0) throw std::invalid_argument("lsd: no frames");

    // Features are ln(mel); LSD is defined on 20*log10.
    const double scale = 20.0 / std::log(10.0);
    double acc = 0.0;
    for (size_t f = 0; f < frames; ++f) {
        double sq = 0.0;
        for (size_t m = 0; m < ma[f].size(); ++m) {
            const double d = scale * (ma[f][m] - mb[f][m]);
            sq += d * d;
        }
        acc += std::sqrt(sq / double(ma[f].size()));
    }
    return acc / double(frames);
}

}  // namespace mwdlp
