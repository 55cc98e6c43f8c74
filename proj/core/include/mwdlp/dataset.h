#pragma once

#include <vector>

#include "mwdlp/codec.h"
#include "mwdlp/dsp.h"
#include "mwdlp/model.h"
#include "mwdlp/pqmf.h"

namespace mwdlp {

// One utterance prepared for teacher forcing: mel conditioning frames plus
// mu-law bin targets of the pre-emphasized PQMF subbands. Amplitude targets
// are the decoded (quantized) bin values, so a perfect model scores exactly
// zero spectral loss.
struct Utterance {
    std::vector<std::vector<double>> mel;        // [frames][cond_dim]
    std::vector<std::vector<int>> coarse_bins;   // [bands][band_steps]
    std::vector<std::vector<int>> fine_bins;
    SubbandTensor band_amps;                     // quantized amplitudes
    int frames = 0;
    int band_steps = 0;  // frames * (frame_shift / bands)
};

MelConfig mel_config_for(const NetworkConfig& cfg);

Utterance prepare_utterance(const Waveform& wave, const NetworkConfig& cfg, const PqmfBank& bank);

// Conditioning window for frame f (zero vectors outside [0, frames)).
// Returns window_frames * cond_dim values.
std::vector<double> cond_window(const Utterance& utt, const NetworkConfig& cfg, int frame);

}  // namespace mwdlp
