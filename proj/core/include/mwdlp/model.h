#pragma once

#include <array>
#include <string>
#include <vector>

#include "mwdlp/rng.h"
#include "mwdlp/tape.h"

namespace mwdlp {

// Architecture and audio-pipeline constants carried with a model.
// head_bins is pinned to 32 by the 5-bit coarse / 5-bit fine split.
struct NetworkConfig {
    int bands = 6;
    int lp_order = 8;
    int cond_dim = 80;
    int segconv_prev = 5;   // r
    int segconv_next = 1;   // n, lookahead frames
    int cond_proj = 320;
    int embed_dim = 64;
    int sparse_units = 1184;
    int dense_units = 32;
    int head_bins = 32;
    int logit_latent = 16;
    int residual_hidden = 32;

    // Audio pipeline, stored with the model so the engine is self-contained.
    int sample_rate = 24000;
    int frame_shift = 240;   // samples per conditioning frame
    int mel_fft = 2048;
    int mel_win = 660;
    double mel_fmin = 0.0;
    double mel_fmax = 0.0;   // 0 -> Nyquist
    double preemph_alpha = 0.85;
    int pqmf_order = 410;
    double pqmf_beta = 43.12126;
    double pqmf_cutoff = 0.1;

    int window_frames() const { return segconv_prev + 1 + segconv_next; }
    int sparse_input() const { return cond_proj + 2 * bands * embed_dim; }
    int coarse_input() const { return sparse_units + cond_proj; }
    // Fine branch rides on the coarse dense GRU state plus the current-step
    // coarse embeddings; see complexity.h for the cost accounting this buys.
    int fine_input() const { return dense_units + cond_proj + bands * embed_dim; }
    int head_out() const { return bands * (2 * lp_order + logit_latent); }
    int steps_per_frame() const { return frame_shift / bands; }

    void validate() const;

    static NetworkConfig paper_24k();
    static NetworkConfig paper_16k();
};

struct GruParams {
    Tensor w_ih;  // [3h, in], gate order: update, reset, new
    Tensor b_ih;  // [1, 3h]
    Tensor w_hh;  // [3h, h]
    Tensor b_hh;  // [1, 3h]
};

// Recurrent kernels split per gate so each carries its own sparsity mask.
struct SparseGruParams {
    Tensor w_ih;  // [3h, in]
    Tensor b_ih;  // [1, 3h]
    Tensor w_hh_update, w_hh_reset, w_hh_new;    // [h, h] each
    Tensor mask_update, mask_reset, mask_new;    // 0/1, [h, h]
    Tensor b_hh;  // [1, 3h]
};

struct DualFcParams {
    Tensor w1, w2;          // [head_out, dense_units]
    Tensor b1, b2;          // [1, head_out]
    Tensor lambda1, lambda2;  // [1, head_out], exp-activated channel weights
};

struct ResidualParams {
    Tensor w1;  // [residual_hidden, logit_latent]
    Tensor b1;  // [1, residual_hidden]
    Tensor w2;  // [head_bins, residual_hidden]
    Tensor b2;  // [1, head_bins]
};

struct ModelParams {
    NetworkConfig cfg;
    Tensor conv_w;  // [cond_proj, window_frames * cond_dim]
    Tensor conv_b;  // [1, cond_proj]
    Tensor embed_coarse, embed_fine;  // [head_bins, embed_dim], shared across bands
    SparseGruParams gru_sparse;
    GruParams gru_coarse, gru_fine;
    DualFcParams fc_coarse, fc_fine;
    ResidualParams res_coarse, res_fine;
};

struct NamedTensor {
    std::string name;
    Tensor* tensor;
};

// Every trainable tensor with its canonical (model file) name. Masks are not
// trainable and not listed.
std::vector<NamedTensor> named_tensors(ModelParams& params);

ModelParams init_params(const NetworkConfig& cfg, uint64_t seed);

// Zero out masked recurrent weights in place (mask convention: 1 keeps).
void apply_sparse_masks(ModelParams& params);

// Fraction of nonzero mask entries per gate: {update, reset, new}.
std::array<double, 3> measured_densities(const ModelParams& params);

// --- tape-bound forward graph ---

struct GruVars {
    Var w_ih, b_ih, w_hh, b_hh;
};

struct DualFcVars {
    Var w1, w2, b1, b2, lambda1, lambda2;
};

struct ResidualVars {
    Var w1, b1, w2, b2;
};

// All parameters bound to a tape. With trainable=true each tensor becomes a
// gradient leaf; the sparse recurrent kernels are multiplied by their masks
// on the tape, so masked entries contribute nothing forward and collect no
// gradient.
struct BoundParams {
    const NetworkConfig* cfg = nullptr;
    Var conv_w, conv_b;
    Var embed_coarse, embed_fine;
    Var sp_w_ih, sp_b_ih, sp_w_update, sp_w_reset, sp_w_new, sp_b_hh;
    GruVars coarse, fine;
    DualFcVars fc_coarse, fc_fine;
    ResidualVars res_coarse, res_fine;
    // Leaves registered for gradient extraction, aligned with named_tensors().
    std::vector<Var> leaves;
};

BoundParams bind_params(Tape& tape, ModelParams& params, bool trainable);

// Flattened conditioning window -> 320-dim ReLU feature. window is
// [n, window_frames * cond_dim].
Var segmental_conv(Tape& tape, Var window, const BoundParams& bp);

// One dense GRU step; x [n, in], h [n, units] -> new hidden [n, units].
Var gru_step(Tape& tape, Var x, Var h, const GruVars& g);

// Sparse GRU step with per-gate (pre-masked) recurrent kernels.
Var sparse_gru_step(Tape& tape, Var x, Var h, const BoundParams& bp);

// DualFC head: dense GRU hidden [n, dense_units] -> activated, blended
// [n, head_out]; layout [signs by band | mags by band | latents by band].
Var dual_fc_head(Tape& tape, Var h, const DualFcVars& fc, const NetworkConfig& cfg);

struct HeadOut {
    Var lp_coeff;  // [n*bands, lp_order], sign * magnitude
    Var latent;    // [n*bands, logit_latent]
};
HeadOut split_head(Tape& tape, Var head, const NetworkConfig& cfg);

// Shared-over-bands residual FC: latents [m, logit_latent] -> logits [m, 32].
Var residual_logits(Tape& tape, Var latent, const ResidualVars& rv);

// One band-rate step, teacher-forced variant (current coarse bins known).
// prev_* / cur_coarse are [n*bands] bin indices; histories are [n*bands]
// rows of lp_order previous bins (-1 = absent).
struct StepVars {
    Var h_sparse, h_coarse, h_fine;
};

struct StepLogits {
    Var coarse;  // [n*bands, head_bins]
    Var fine;
    StepVars state;
};

Var embed_bins(Tape& tape, Var table, const std::vector<int>& bins, int batch, int bands);

StepLogits full_step(Tape& tape, const BoundParams& bp, const StepVars& state, Var cond,
                     const std::vector<int>& prev_coarse, const std::vector<int>& prev_fine,
                     const std::vector<int>& cur_coarse,
                     const std::vector<std::vector<int>>& hist_coarse,
                     const std::vector<std::vector<int>>& hist_fine);

// Coarse-only half of full_step, for autoregressive synthesis where the
// fine branch must wait for the sampled coarse bins.
struct CoarseStep {
    Var logits;  // [n*bands, head_bins]
    Var h_sparse, h_coarse;
};
CoarseStep coarse_step(Tape& tape, const BoundParams& bp, const StepVars& state, Var cond,
                       const std::vector<int>& prev_coarse, const std::vector<int>& prev_fine,
                       const std::vector<std::vector<int>>& hist_coarse);

struct FineStep {
    Var logits;
    Var h_fine;
};
FineStep fine_step(Tape& tape, const BoundParams& bp, const StepVars& state, Var cond,
                   Var h_coarse_new, const std::vector<int>& cur_coarse,
                   const std::vector<std::vector<int>>& hist_fine);

}  // namespace mwdlp
