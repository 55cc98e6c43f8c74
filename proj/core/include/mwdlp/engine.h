#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mwdlp/model.h"
#include "mwdlp/pqmf.h"
#include "mwdlp/rng.h"
#include "mwdlp/wav.h"

namespace mwdlp {

// Inference-time weights in f32 with the layouts the hot loop wants:
// embedding contributions merged into per-bin gate tables, conditioning
// slices separated for per-frame amortization, recurrent kernels in 16x1
// block-sparse CSR.
struct BlockSparseMatrix {
    int out_rows = 0;
    int in_cols = 0;
    std::vector<int> row_ptr;      // per 16-row block, offsets into cols
    std::vector<int> cols;
    std::vector<float> vals;       // 16 per block, contiguous
};

struct EngineModel {
    NetworkConfig cfg;

    std::vector<float> conv_w, conv_b;          // [proj, wf*d], [proj]

    // Sparse GRU input: per-frame conditioning kernel and per-bin tables.
    std::vector<float> sp_cond_w;               // [3H, proj]
    std::vector<float> sp_b_ih;                 // [3H]
    std::vector<std::vector<float>> sp_table_coarse;  // [bands][bins * 3H]
    std::vector<std::vector<float>> sp_table_fine;
    BlockSparseMatrix sp_update, sp_reset, sp_new;
    std::vector<float> sp_b_hh;                 // [3H]

    // Dense GRUs: per-step kernel slice, conditioning slice, tables.
    std::vector<float> co_state_w;              // [3h, H] (sparse GRU output)
    std::vector<float> co_cond_w;               // [3h, proj]
    std::vector<float> co_b_ih, co_whh, co_b_hh;  // [3h], [3h, h], [3h]
    std::vector<float> fi_state_w;              // [3h, h] (coarse GRU output)
    std::vector<float> fi_cond_w;               // [3h, proj]
    std::vector<std::vector<float>> fi_table_coarse;  // [bands][bins * 3h]
    std::vector<float> fi_b_ih, fi_whh, fi_b_hh;

    struct Head {
        std::vector<float> w1, w2;     // [head_out, h]
        std::vector<float> b1, b2;     // [head_out]
        std::vector<float> c1, c2;     // 0.5 * exp(lambda), [head_out]
        std::vector<float> res_w1, res_b1, res_w2, res_b2;
    };
    Head coarse, fine;

    std::vector<std::vector<float>> pqmf_synthesis;  // [bands][order+1]
    std::vector<float> decode_table;                 // [1024] mu-law amplitudes
};

EngineModel build_engine_model(const ModelParams& params);

// Per-step logits and sampled bins, for parity tests against the f64 graph.
struct SynthTrace {
    std::vector<Tensor> coarse_logits;  // per band-rate step, [bands, 32]
    std::vector<Tensor> fine_logits;
    std::vector<std::vector<int>> coarse_bins, fine_bins;
};

// Streaming synthesizer: push conditioning frames, pull full-band samples.
// Each pushed frame eventually yields exactly frame_shift samples; the first
// frame's samples appear once the lookahead (segconv_next frames) is
// satisfied, and finish() flushes the tail by replicating the last frame.
// Output includes the PQMF synthesis transient and is de-emphasized.
class SynthEngine {
public:
    SynthEngine(const EngineModel& model, uint64_t seed);

    void set_trace(SynthTrace* trace) { trace_ = trace; }

    void push_frame(const std::vector<double>& mel);
    void finish();
    // Moves all ready samples out of the engine.
    std::vector<float> pull_samples();

    long frames_pushed() const { return frames_pushed_; }
    long samples_emitted() const { return samples_emitted_; }

    // Wall seconds spent inside the band-rate network and the PQMF
    // synthesis, for RTF breakdowns.
    double network_seconds() const { return network_s_; }
    double pqmf_seconds() const { return pqmf_s_; }

private:
    void process_frame(const float* window);  // window [wf * d]
    void band_step(const float* cond_gates_sp, const float* cond_gates_co,
                   const float* cond_gates_fi);

    const EngineModel& m_;
    CounterRng rng_;

    std::vector<float> frame_ring_;  // raw mel frames, wf slots
    long frames_pushed_ = 0;
    long frames_processed_ = 0;
    bool finished_ = false;
    std::vector<double> last_frame_;

    std::vector<float> h_sparse_, h_coarse_, h_fine_;
    std::vector<int> prev_c_, prev_f_;
    std::vector<std::vector<int>> hist_c_, hist_f_;  // [bands][K], most recent first

    std::vector<std::vector<float>> band_ring_;  // PQMF history per band
    long band_steps_ = 0;
    float deemph_state_ = 0.0f;

    std::vector<float> out_;
    long samples_emitted_ = 0;
    SynthTrace* trace_ = nullptr;

    // scratch
    std::vector<float> xg_sp_, xg_co_, xg_fi_, gates_;
    std::vector<float> head_buf_, latent_buf_, logits_;

    double network_s_ = 0.0, pqmf_s_ = 0.0;
};

// File-to-file synthesis: features -> waveform, identical to a streaming
// run with the same seed.
Waveform synthesize_offline(const EngineModel& model,
                            const std::vector<std::vector<double>>& mel, uint64_t seed);

struct RtfReport {
    double audio_seconds = 0.0;
    double wall_seconds = 0.0;   // everything below plus overhead
    double feature_seconds = 0.0;
    double network_seconds = 0.0;
    double pqmf_seconds = 0.0;
    double io_seconds = 0.0;
    double rtf = 0.0;
};

// End-to-end single-threaded RTF over `duration_s` of internally generated
// audio (or `input`, when given): WAV I/O + feature extraction + synthesis.
RtfReport bench_rtf(const EngineModel& model, double duration_s, uint64_t seed,
                    const Waveform* input = nullptr, const std::string& out_wav_path = "");

}  // namespace mwdlp
