#include "mwdlp/loss.h"

#include <cmath>
#include <stdexcept>

namespace mwdlp {

namespace {
constexpr double kLogFloor = 1e-7;

StftLossConfig from_tables(const std::vector<int>& fft, const std::vector<int>& shift) {
    if (fft.size() != shift.size()) throw std::invalid_argument("stft loss tables length mismatch");
    StftLossConfig cfg;
    for (size_t i = 0; i < fft.size(); ++i) {
        StftConfig c;
        c.fft_length = fft[i];
        c.shift_length = shift[i];
        c.window_length = shift[i] * 5 / 2;  // 2.5 * shift
        if (!c.valid()) throw std::invalid_argument("invalid stft loss resolution");
        cfg.resolutions.push_back(c);
    }
    return cfg;
}
}  // namespace

StftLossConfig StftLossConfig::fullband_24k() {
    return from_tables({2048, 1024, 512, 256, 128}, {480, 240, 120, 60, 48});
}
StftLossConfig StftLossConfig::fullband_16k() {
    return from_tables({1024, 512, 256, 128, 128}, {320, 160, 80, 40, 32});
}
StftLossConfig StftLossConfig::band_rate() {
    return from_tables({256, 128, 64, 32, 32}, {80, 40, 20, 10, 8});
}
StftLossConfig StftLossConfig::custom(const std::vector<int>& fft, const std::vector<int>& shift) {
    return from_tables(fft, shift);
}

Var ce_loss(Tape& tape, Var logits, const std::vector<int>& targets) {
    return tape.softmax_ce(logits, targets);
}

StftLossTerms stft_loss_pair(const Waveform& x_hat, const Waveform& x, const StftConfig& cfg) {
    if (x_hat.samples.size() != x.samples.size())
        throw std::invalid_argument("stft_loss_pair: length mismatch");
    const Spectrogram sh = stft(x_hat, cfg);
    const Spectrogram sx = stft(x, cfg);

    double diff_sq = 0.0, ref_sq = 0.0, l1 = 0.0;
    const size_t n = size_t(sx.frames) * size_t(sx.bins);
    for (int f = 0; f < sx.frames; ++f) {
        for (int b = 0; b < sx.bins; ++b) {
            const double mh = sh.mag(f, b);
            const double mx = sx.mag(f, b);
            diff_sq += (mx - mh) * (mx - mh);
            ref_sq += mx * mx;
            l1 += std::abs(std::log(std::max(mx, kLogFloor)) - std::log(std::max(mh, kLogFloor)));
        }
    }
    StftLossTerms t;
    t.spectral_convergence = std::sqrt(diff_sq) / std::sqrt(std::max(ref_sq, 1e-300));
    t.log_magnitude = l1 / double(n);
    return t;
}

double mwdlp_stft_loss(const SubbandTensor& sampled_bands, const SubbandTensor& target_bands,
                       const Waveform& sampled_full, const Waveform& target_full,
                       const StftLossConfig& band_cfg, const StftLossConfig& full_cfg) {
    if (sampled_bands.band_count() != target_bands.band_count())
        throw std::invalid_argument("mwdlp_stft_loss: band count mismatch");
    const int m_bands = sampled_bands.band_count();

    double band_sum = 0.0;
    for (int m = 0; m < m_bands; ++m) {
        Waveform sh{sampled_bands.bands[size_t(m)], 1};
        Waveform tg{target_bands.bands[size_t(m)], 1};
        double res_sum = 0.0;
        for (const auto& cfg : band_cfg.resolutions) res_sum += stft_loss_pair(sh, tg, cfg).total();
        band_sum += res_sum / double(band_cfg.resolutions.size());
    }
    double full_sum = 0.0;
    for (const auto& cfg : full_cfg.resolutions)
        full_sum += stft_loss_pair(sampled_full, target_full, cfg).total();

    return band_sum / double(m_bands) + full_sum / double(full_cfg.resolutions.size());
}

double total_loss(double ce, double stft, double w_ce, double w_stft) {
    if (w_ce < 0.0 || w_stft < 0.0) throw std::invalid_argument("loss weights must be non-negative");
    return w_ce * ce + w_stft * stft;
}

Var stft_magnitude(Tape& tape, Var x, const StftConfig& cfg) {
    if (!cfg.valid()) throw std::invalid_argument("stft_magnitude: invalid config");
    const Tensor& xv = tape.val(x);
    const long t = xv.cols;
    const int frames = int(t / cfg.shift_length) + 1;
    const int bins = cfg.bins();
    const int half_win = cfg.window_length / 2;
    const std::vector<double> win = hann_window(cfg.window_length);

    Fft fft(size_t(cfg.fft_length));
    Tensor out(xv.rows, frames * bins);
    // Saved spectra for the backward pass: re/im interleaved per row/frame.
    Tensor reim(xv.rows, frames * bins * 2);
    std::vector<double> frame(size_t(cfg.fft_length));
    std::vector<double> spec(2 * size_t(bins));
    for (int r = 0; r < xv.rows; ++r) {
        const double* sig = xv.row(r);
        for (int f = 0; f < frames; ++f) {
            std::fill(frame.begin(), frame.end(), 0.0);
            const long start = long(f) * cfg.shift_length - half_win;
            for (int j = 0; j < cfg.window_length; ++j) {
                const long src = stft_source_index(start + j, t);
                frame[size_t(j)] = sig[src] * win[size_t(j)];
            }
            fft.rfft(frame.data(), spec.data());
            for (int b = 0; b < bins; ++b) {
                const double re = spec[2 * size_t(b)], im = spec[2 * size_t(b) + 1];
                out.at(r, f * bins + b) = std::sqrt(re * re + im * im);
                reim.at(r, 2 * (f * bins + b)) = re;
                reim.at(r, 2 * (f * bins + b) + 1) = im;
            }
        }
    }

    if (!tape.grad_enabled() || !tape.requires_grad(x)) return tape.push(std::move(out), false, nullptr);

    Var y{int(tape.node_count())};
    auto bw = [&tape, x, y, cfg, frames, bins, half_win, t, win, reim = std::move(reim)]() {
        const Tensor& dy = tape.grad(y);
        const Tensor& mag = tape.val(y);
        tape.ensure_grad(x);
        Tensor& dx = tape.grad_ref(x);
        Fft fft2(size_t(cfg.fft_length));
        std::vector<double> dspec(2 * size_t(cfg.fft_length / 2 + 1));
        std::vector<double> dframe(size_t(cfg.fft_length));
        for (int r = 0; r < dy.rows; ++r) {
            for (int f = 0; f < frames; ++f) {
                bool any = false;
                for (int b = 0; b < bins; ++b) {
                    const double g = dy.at(r, f * bins + b);
                    if (g == 0.0) {
                        dspec[2 * size_t(b)] = dspec[2 * size_t(b) + 1] = 0.0;
                        continue;
                    }
                    any = true;
                    const double m = std::max(mag.at(r, f * bins + b), 1e-30);
                    dspec[2 * size_t(b)] = g * reim.at(r, 2 * (f * bins + b)) / m;
                    dspec[2 * size_t(b) + 1] = g * reim.at(r, 2 * (f * bins + b) + 1) / m;
                }
                if (!any) continue;
                fft2.rfft_adjoint(dspec.data(), dframe.data());
                const long start = long(f) * cfg.shift_length - half_win;
                for (int j = 0; j < cfg.window_length; ++j) {
                    const long src = stft_source_index(start + j, t);
                    dx.at(r, int(src)) += dframe[size_t(j)] * win[size_t(j)];
                }
            }
        }
    };
    return tape.push(std::move(out), true, std::move(bw));
}

Var stft_loss_rows(Tape& tape, Var x, const Tensor& target_rows, const StftConfig& cfg) {
    const Tensor& xv = tape.val(x);
    if (xv.rows != target_rows.rows || xv.cols != target_rows.cols)
        throw std::invalid_argument("stft_loss_rows: target shape mismatch");

    // Fixed target magnitudes and the derived constants.
    Tape ref_tape;
    ref_tape.set_grad_enabled(false);
    Var tvar = ref_tape.constant(target_rows);
    const Tensor ref_mag = ref_tape.val(stft_magnitude(ref_tape, tvar, cfg));

    Tensor recip_norm(ref_mag.rows, 1);
    Tensor ref_log(ref_mag.rows, ref_mag.cols);
    for (int r = 0; r < ref_mag.rows; ++r) {
        double sq = 0.0;
        for (int c = 0; c < ref_mag.cols; ++c) {
            const double m = ref_mag.at(r, c);
            sq += m * m;
            ref_log.at(r, c) = std::log(std::max(m, kLogFloor));
        }
        recip_norm.at(r, 0) = 1.0 / std::sqrt(std::max(sq, 1e-300));
    }

    Var mag = stft_magnitude(tape, x, cfg);
    Var diff = tape.sub(mag, tape.constant(ref_mag));
    Var sc_rows = tape.mul(tape.sqrt_op(tape.sum_cols(tape.square(diff))), tape.constant(recip_norm));
    Var sc = tape.mean_all(sc_rows);
    Var lg = tape.sub(tape.log_op(tape.clamp_min(mag, kLogFloor)), tape.constant(ref_log));
    Var l1 = tape.mean_all(tape.abs_op(lg));
    return tape.add(sc, l1);
}

Var pqmf_synthesize_op(Tape& tape, Var bands, const PqmfBank& bank) {
    const Tensor& bv = tape.val(bands);
    const int m_bands = bank.config().bands;
    if (bv.rows % m_bands != 0) throw std::invalid_argument("pqmf_synthesize_op: rows % bands != 0");
    const int batch = bv.rows / m_bands;
    const long t_band = bv.cols;
    const int len = bank.config().prototype_order + 1;
    const auto& filters = bank.synthesis_filters();

    Tensor out(batch, int(t_band) * m_bands, 0.0);
    for (int n = 0; n < batch; ++n) {
        double* dst = out.row(n);
        for (int k = 0; k < m_bands; ++k) {
            const double* band = bv.row(n * m_bands + k);
            const auto& filt = filters[size_t(k)];
            for (long tt = 0; tt < t_band; ++tt) {
                for (int j = 0; j < m_bands; ++j) {
                    double acc = 0.0;
                    for (int i = j, rr = 0; i < len; i += m_bands, ++rr) {
                        const long src = tt - rr;
                        if (src < 0) break;
                        acc += filt[size_t(i)] * band[src];
                    }
                    dst[tt * m_bands + j] += m_bands * acc;
                }
            }
        }
    }

    if (!tape.grad_enabled() || !tape.requires_grad(bands))
        return tape.push(std::move(out), false, nullptr);

    Var y{int(tape.node_count())};
    auto bw = [&tape, bands, y, &bank, m_bands, batch, t_band, len]() {
        const Tensor& dy = tape.grad(y);
        tape.ensure_grad(bands);
        Tensor& db = tape.grad_ref(bands);
        const auto& filters2 = bank.synthesis_filters();
        for (int n = 0; n < batch; ++n) {
            const double* g = dy.row(n);
            for (int k = 0; k < m_bands; ++k) {
                double* dband = db.row(n * m_bands + k);
                const auto& filt = filters2[size_t(k)];
                for (long s = 0; s < t_band; ++s) {
                    double acc = 0.0;
                    for (int j = 0; j < m_bands; ++j) {
                        for (int i = j, rr = 0; i < len; i += m_bands, ++rr) {
                            const long dst = s + rr;
                            if (dst >= t_band) break;
                            acc += filt[size_t(i)] * g[dst * m_bands + j];
                        }
                    }
                    dband[s] += m_bands * acc;
                }
            }
        }
    };
    return tape.push(std::move(out), true, std::move(bw));
}

}  // namespace mwdlp
