#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mwdlp/dataset.h"
#include "mwdlp/loss.h"
#include "mwdlp/model.h"
#include "mwdlp/sampler.h"
#include "mwdlp/sparsify.h"

namespace mwdlp {

struct TrainConfig {
    double learning_rate = 1e-4;
    int batch_seq_frames = 6;
    int batch_size = 8;
    double dropout = 0.5;  // applied to the upsampled conditioning
    long max_steps = 1000;
    uint64_t seed = 1;
    double ce_weight = 1.0;
    double stft_weight = 1.0;
    bool use_stft_loss = true;
    SparsitySchedule sparsity;
    long eval_interval = 200;
    int patience = 10;

    void validate() const;
};

// Rectified Adam. Falls back to the unadapted momentum step while the
// variance rectification term is undefined (rho_t <= 4).
class RAdam {
public:
    RAdam(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(std::vector<Tensor*> params, const std::vector<const Tensor*>& grads, double lr);
    long t() const { return t_; }

private:
    double beta1_, beta2_, eps_;
    long t_ = 0;
    std::vector<Tensor> m_, v_;
};

// One teacher-forced batch segment, rows lane-major: row (b * bands + m).
struct SegmentData {
    int batch = 0;
    int steps = 0;            // band-rate steps in the segment
    int steps_per_frame = 0;
    std::vector<Tensor> cond_windows;                    // per frame [batch, wf*d]
    std::vector<std::vector<int>> target_coarse;         // [steps][batch*bands]
    std::vector<std::vector<int>> target_fine;
    std::vector<std::vector<int>> prev_coarse;           // bins at t-1
    std::vector<std::vector<int>> prev_fine;
    std::vector<std::vector<std::vector<int>>> hist_coarse;  // [steps][batch*bands][K]
    std::vector<std::vector<std::vector<int>>> hist_fine;
    Tensor band_targets;   // [batch*bands, steps] quantized amplitudes
    Tensor full_targets;   // [batch, steps*bands] PQMF synthesis of targets
};

// Frozen soft-discretize context for finite-difference oracles: argmaxes
// and max-prob denominators captured from a base run.
struct FrozenDiscretize {
    std::vector<std::vector<int>> jc, jf;        // [steps][batch*bands]
    std::vector<std::vector<double>> dc, df;
};

struct ForwardOptions {
    double dropout = 0.0;
    uint64_t noise_seed = 0;   // dropout + gumbel stream
    bool use_stft = true;
    double ce_weight = 1.0;
    double stft_weight = 1.0;
    const PqmfBank* bank = nullptr;                  // required when use_stft
    const StftLossConfig* band_cfg = nullptr;
    const StftLossConfig* full_cfg = nullptr;
    const FrozenDiscretize* frozen = nullptr;        // FD-oracle mode
    FrozenDiscretize* capture = nullptr;             // live mode: record
};

struct ForwardOut {
    Var total, ce, stft;
    StepVars final_state;
};

// Assemble a teacher-forced batch; positions are (utterance index, start
// frame) per lane. Exposed for tests and standalone evaluation.
SegmentData build_segment_batch(const std::vector<Utterance>& data, const NetworkConfig& cfg,
                                const PqmfBank& bank,
                                const std::vector<std::pair<int, int>>& positions, int seg_frames);

// Builds the full teacher-forced loss graph for one segment batch. Initial
// GRU states are bound as constants from `state_*` tensors ([batch, units]).
ForwardOut forward_segment(Tape& tape, const BoundParams& bp, const SegmentData& seg,
                           const Tensor& state_sparse, const Tensor& state_coarse,
                           const Tensor& state_fine, const ForwardOptions& opt);

struct StepMetrics {
    long step = 0;
    double ce = 0.0;
    double stft = 0.0;
    double total = 0.0;
    double density = 1.0;  // average measured recurrent density
    double lr = 0.0;
};

using StepCallback = std::function<bool(const StepMetrics&)>;  // false stops training

struct TrainResult {
    std::vector<StepMetrics> log;
    long steps_run = 0;
    double best_heldout = 0.0;
    bool early_stopped = false;
};

void write_metrics_csv(const std::string& path, const std::vector<StepMetrics>& log);

// Desk-scale training loop: truncated BPTT over stripes of consecutive
// segments, dropout on the upsampled conditioning, CE + STFT losses,
// progressive sparsification, RAdam, optional held-out early stopping.
TrainResult train_loop(ModelParams& params, const std::vector<Utterance>& train_set,
                       const std::vector<Utterance>& heldout_set, const TrainConfig& cfg,
                       const PqmfBank& bank, const StftLossConfig& band_cfg,
                       const StftLossConfig& full_cfg, const StepCallback& on_step = nullptr);

// Teacher-forced evaluation (no dropout, fixed noise stream).
StepMetrics evaluate(ModelParams& params, const std::vector<Utterance>& eval_set,
                     const TrainConfig& cfg, const PqmfBank& bank,
                     const StftLossConfig& band_cfg, const StftLossConfig& full_cfg);

}  // namespace mwdlp
