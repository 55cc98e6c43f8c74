#pragma once

#include <vector>

#include "mwdlp/dsp.h"
#include "mwdlp/pqmf.h"
#include "mwdlp/tape.h"

namespace mwdlp {

// Five-resolution STFT loss windowing per signal class; window = 2.5 * shift.
struct StftLossConfig {
    std::vector<StftConfig> resolutions;

    static StftLossConfig fullband_24k();
    static StftLossConfig fullband_16k();
    static StftLossConfig band_rate();
    // Scaled-down sets for toy sample rates (same 2.5x window rule).
    static StftLossConfig custom(const std::vector<int>& fft, const std::vector<int>& shift);
};

// Mean over rows of -log softmax(logits)[target], in nats.
Var ce_loss(Tape& tape, Var logits, const std::vector<int>& targets);

// --- plain (tape-free) losses for evaluation and oracles ---

struct StftLossTerms {
    double spectral_convergence = 0.0;
    double log_magnitude = 0.0;
    double total() const { return spectral_convergence + log_magnitude; }
};

StftLossTerms stft_loss_pair(const Waveform& x_hat, const Waveform& x, const StftConfig& cfg);

// Mean over bands of the band-rate 5-resolution loss, plus the full-band
// 5-resolution loss; every resolution's pair loss is averaged within its set.
double mwdlp_stft_loss(const SubbandTensor& sampled_bands, const SubbandTensor& target_bands,
                       const Waveform& sampled_full, const Waveform& target_full,
                       const StftLossConfig& band_cfg, const StftLossConfig& full_cfg);

// Weighted CE + STFT combination; weights must be non-negative.
double total_loss(double ce, double stft, double w_ce = 1.0, double w_stft = 1.0);

// --- differentiable pieces used by the trainer ---

// |STFT| of each row of x [n, t] -> [n, frames*bins]. Same padding and
// window conventions as dsp::stft.
Var stft_magnitude(Tape& tape, Var x, const StftConfig& cfg);

// Spectral convergence + log-magnitude L1 of x rows against fixed targets,
// each term averaged over rows; target is the raw signal rows.
Var stft_loss_rows(Tape& tape, Var x, const Tensor& target_rows, const StftConfig& cfg);

// Per-batch PQMF synthesis: rows of `bands` are grouped M-at-a-time per
// batch entry, output row b is the full-band signal of group b.
Var pqmf_synthesize_op(Tape& tape, Var bands, const PqmfBank& bank);

}  // namespace mwdlp
