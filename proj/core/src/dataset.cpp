#include "mwdlp/dataset.h"

#include <stdexcept>

namespace mwdlp {

MelConfig mel_config_for(const NetworkConfig& cfg) {
    MelConfig mc;
    mc.n_mels = cfg.cond_dim;
    mc.fmin = cfg.mel_fmin;
    mc.fmax = cfg.mel_fmax;
    mc.sample_rate = cfg.sample_rate;
    mc.stft.fft_length = cfg.mel_fft;
    mc.stft.shift_length = cfg.frame_shift;
    mc.stft.window_length = cfg.mel_win;
    return mc;
}

Utterance prepare_utterance(const Waveform& wave, const NetworkConfig& cfg, const PqmfBank& bank) {
    if (wave.sample_rate != cfg.sample_rate)
        throw std::invalid_argument("utterance sample rate does not match model config");
    if (bank.config().bands != cfg.bands)
        throw std::invalid_argument("pqmf bank band count does not match model config");

    Utterance utt;
    // Features from the raw waveform; pre-emphasis applies only to the
    // modeling target path (the engine de-emphasizes after synthesis).
    utt.mel = mel_spectrogram(wave, mel_config_for(cfg));

    const int spf = cfg.steps_per_frame();
    const int frames = int(wave.samples.size()) / cfg.frame_shift;
    if (frames < 1) throw std::invalid_argument("utterance shorter than one frame");
    utt.frames = frames;
    utt.band_steps = frames * spf;
    utt.mel.resize(size_t(frames) + size_t(cfg.segconv_next), utt.mel.back());

    Waveform emph = preemphasis(wave, cfg.preemph_alpha);
    emph.samples.resize(size_t(frames) * cfg.frame_shift);
    const SubbandTensor sub = bank.analyze(emph);

    utt.coarse_bins.assign(size_t(cfg.bands), std::vector<int>(size_t(utt.band_steps)));
    utt.fine_bins.assign(size_t(cfg.bands), std::vector<int>(size_t(utt.band_steps)));
    utt.band_amps.bands.assign(size_t(cfg.bands), std::vector<double>(size_t(utt.band_steps)));
    for (int m = 0; m < cfg.bands; ++m) {
        for (int t = 0; t < utt.band_steps; ++t) {
            const int bin = mulaw_encode(sub.bands[size_t(m)][size_t(t)]);
            utt.coarse_bins[size_t(m)][size_t(t)] = split_coarse(bin);
            utt.fine_bins[size_t(m)][size_t(t)] = split_fine(bin);
            utt.band_amps.bands[size_t(m)][size_t(t)] = mulaw_decode(bin);
        }
    }
    return utt;
}

std::vector<double> cond_window(const Utterance& utt, const NetworkConfig& cfg, int frame) {
    std::vector<double> out(size_t(cfg.window_frames()) * cfg.cond_dim, 0.0);
    for (int j = 0; j < cfg.window_frames(); ++j) {
        const int src = frame - cfg.segconv_prev + j;
        if (src < 0 || src >= int(utt.mel.size())) continue;  // zero-pad at edges
        const auto& row = utt.mel[size_t(src)];
        for (int d = 0; d < cfg.cond_dim; ++d) out[size_t(j) * cfg.cond_dim + d] = row[size_t(d)];
    }
    return out;
}

}  // namespace mwdlp
