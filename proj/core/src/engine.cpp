#include "mwdlp/engine.h"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstring>
#include <stdexcept>

#include "mwdlp/codec.h"
#include "mwdlp/dataset.h"
#include "mwdlp/dsp.h"
#include "mwdlp/sampler.h"

namespace mwdlp {

namespace {

// Interpolated tanh table; max error ~6e-6 over the clamp range, which the
// f32 parity tolerance absorbs.
constexpr int kTanhN = 4096;
constexpr float kTanhRange = 9.0f;

const float* tanh_table() {
    static const std::vector<float> table = [] {
        std::vector<float> t(kTanhN + 1);
        for (int i = 0; i <= kTanhN; ++i) {
            const double x = -kTanhRange + 2.0 * kTanhRange * i / kTanhN;
            t[size_t(i)] = float(std::tanh(x));
        }
        return t;
    }();
    return table.data();
}

inline float fast_tanh(float x) {
    if (x >= kTanhRange) return 1.0f;
    if (x <= -kTanhRange) return -1.0f;
    const float pos = (x + kTanhRange) * (kTanhN / (2.0f * kTanhRange));
    const int idx = int(pos);
    const float frac = pos - float(idx);
    const float* t = tanh_table();
    return t[idx] + frac * (t[idx + 1] - t[idx]);
}

inline float fast_sigmoid(float x) { return 0.5f + 0.5f * fast_tanh(0.5f * x); }

void matvec(const float* w, const float* x, const float* b, float* y, int out, int in) {
    for (int o = 0; o < out; ++o) {
        const float* row = w + size_t(o) * size_t(in);
        float acc = b ? b[o] : 0.0f;
        for (int i = 0; i < in; ++i) acc += row[i] * x[i];
        y[o] = acc;
    }
}

void matvec_add(const float* w, const float* x, float* y, int out, int in) {
    for (int o = 0; o < out; ++o) {
        const float* row = w + size_t(o) * size_t(in);
        float acc = 0.0f;
        for (int i = 0; i < in; ++i) acc += row[i] * x[i];
        y[o] += acc;
    }
}

// y = W h + b over 16-row output blocks.
void block_sparse_matvec(const BlockSparseMatrix& m, const float* h, const float* b, float* y) {
    const int nblocks = m.out_rows / 16;
    for (int rb = 0; rb < nblocks; ++rb) {
        float acc[16];
        std::memcpy(acc, b + rb * 16, sizeof(acc));
        const int lo = m.row_ptr[size_t(rb)], hi = m.row_ptr[size_t(rb) + 1];
        for (int e = lo; e < hi; ++e) {
            const float hv = h[m.cols[size_t(e)]];
            const float* v = m.vals.data() + size_t(e) * 16;
            for (int i = 0; i < 16; ++i) acc[i] += v[i] * hv;
        }
        std::memcpy(y + rb * 16, acc, sizeof(acc));
    }
}

std::vector<float> to_f32(const Tensor& t) {
    std::vector<float> out(t.size());
    for (size_t i = 0; i < t.size(); ++i) out[i] = float(t.v[i]);
    return out;
}

// Columns [c0, c1) of a [rows, cols] tensor, flattened row-major.
std::vector<float> slice_cols_f32(const Tensor& t, int c0, int c1) {
    std::vector<float> out(size_t(t.rows) * size_t(c1 - c0));
    for (int r = 0; r < t.rows; ++r)
        for (int c = c0; c < c1; ++c) out[size_t(r) * size_t(c1 - c0) + size_t(c - c0)] = float(t.at(r, c));
    return out;
}

// Merged per-bin gate tables: table[bin] = W[:, col0 + e] * embed[bin][e].
std::vector<std::vector<float>> merge_embed_tables(const Tensor& w_ih, const Tensor& embed,
                                                   int col0, int bands, int embed_dim) {
    std::vector<std::vector<float>> tables(static_cast<size_t>(bands));
    const int rows = w_ih.rows;
    const int bins = embed.rows;
    for (int m = 0; m < bands; ++m) {
        tables[size_t(m)].assign(size_t(bins) * size_t(rows), 0.0f);
        for (int bin = 0; bin < bins; ++bin) {
            float* dst = tables[size_t(m)].data() + size_t(bin) * size_t(rows);
            for (int r = 0; r < rows; ++r) {
                double acc = 0.0;
                for (int e = 0; e < embed_dim; ++e)
                    acc += w_ih.at(r, col0 + m * embed_dim + e) * embed.at(bin, e);
                dst[r] = float(acc);
            }
        }
    }
    return tables;
}

BlockSparseMatrix build_block_sparse(const Tensor& w, const Tensor& mask) {
    if (w.rows % 16 != 0) throw std::invalid_argument("recurrent rows not divisible by 16");
    BlockSparseMatrix m;
    m.out_rows = w.rows;
    m.in_cols = w.cols;
    const int nblocks = w.rows / 16;
    m.row_ptr.assign(size_t(nblocks) + 1, 0);
    for (int rb = 0; rb < nblocks; ++rb) {
        m.row_ptr[size_t(rb)] = int(m.cols.size());
        for (int c = 0; c < w.cols; ++c) {
            bool any = false;
            for (int i = 0; i < 16 && !any; ++i)
                any = mask.at(rb * 16 + i, c) != 0.0;
            if (!any) continue;
            m.cols.push_back(c);
            for (int i = 0; i < 16; ++i) m.vals.push_back(float(w.at(rb * 16 + i, c)));
        }
    }
    m.row_ptr[size_t(nblocks)] = int(m.cols.size());
    return m;
}

struct Timer {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double lap() {
        const auto t1 = std::chrono::steady_clock::now();
        const double s = std::chrono::duration<double>(t1 - t0).count();
        t0 = t1;
        return s;
    }
};

}  // namespace

EngineModel build_engine_model(const ModelParams& params) {
    params.cfg.validate();
    const NetworkConfig& cfg = params.cfg;
    EngineModel em;
    em.cfg = cfg;

    em.conv_w = to_f32(params.conv_w);
    em.conv_b = to_f32(params.conv_b);

    const int hs = cfg.sparse_units;
    const int hd = cfg.dense_units;
    const int mm = cfg.bands;
    const int ee = cfg.embed_dim;

    em.sp_cond_w = slice_cols_f32(params.gru_sparse.w_ih, 0, cfg.cond_proj);
    em.sp_b_ih = to_f32(params.gru_sparse.b_ih);
    em.sp_table_coarse =
        merge_embed_tables(params.gru_sparse.w_ih, params.embed_coarse, cfg.cond_proj, mm, ee);
    em.sp_table_fine = merge_embed_tables(params.gru_sparse.w_ih, params.embed_fine,
                                          cfg.cond_proj + mm * ee, mm, ee);
    em.sp_update = build_block_sparse(params.gru_sparse.w_hh_update, params.gru_sparse.mask_update);
    em.sp_reset = build_block_sparse(params.gru_sparse.w_hh_reset, params.gru_sparse.mask_reset);
    em.sp_new = build_block_sparse(params.gru_sparse.w_hh_new, params.gru_sparse.mask_new);
    em.sp_b_hh = to_f32(params.gru_sparse.b_hh);
    (void)hs;

    em.co_state_w = slice_cols_f32(params.gru_coarse.w_ih, 0, cfg.sparse_units);
    em.co_cond_w =
        slice_cols_f32(params.gru_coarse.w_ih, cfg.sparse_units, cfg.sparse_units + cfg.cond_proj);
    em.co_b_ih = to_f32(params.gru_coarse.b_ih);
    em.co_whh = to_f32(params.gru_coarse.w_hh);
    em.co_b_hh = to_f32(params.gru_coarse.b_hh);

    em.fi_state_w = slice_cols_f32(params.gru_fine.w_ih, 0, hd);
    em.fi_cond_w = slice_cols_f32(params.gru_fine.w_ih, hd, hd + cfg.cond_proj);
    em.fi_table_coarse =
        merge_embed_tables(params.gru_fine.w_ih, params.embed_coarse, hd + cfg.cond_proj, mm, ee);
    em.fi_b_ih = to_f32(params.gru_fine.b_ih);
    em.fi_whh = to_f32(params.gru_fine.w_hh);
    em.fi_b_hh = to_f32(params.gru_fine.b_hh);

    auto build_head = [&](const DualFcParams& fc, const ResidualParams& res) {
        EngineModel::Head h;
        h.w1 = to_f32(fc.w1);
        h.w2 = to_f32(fc.w2);
        h.b1 = to_f32(fc.b1);
        h.b2 = to_f32(fc.b2);
        h.c1.resize(fc.lambda1.size());
        h.c2.resize(fc.lambda2.size());
        for (size_t i = 0; i < fc.lambda1.size(); ++i) {
            h.c1[i] = float(0.5 * std::exp(fc.lambda1.v[i]));
            h.c2[i] = float(0.5 * std::exp(fc.lambda2.v[i]));
        }
        h.res_w1 = to_f32(res.w1);
        h.res_b1 = to_f32(res.b1);
        h.res_w2 = to_f32(res.w2);
        h.res_b2 = to_f32(res.b2);
        return h;
    };
    em.coarse = build_head(params.fc_coarse, params.res_coarse);
    em.fine = build_head(params.fc_fine, params.res_fine);

    PqmfBank bank(PqmfConfig{cfg.bands, cfg.pqmf_order, cfg.pqmf_beta, cfg.pqmf_cutoff});
    em.pqmf_synthesis.resize(size_t(mm));
    for (int k = 0; k < mm; ++k) {
        const auto& g = bank.synthesis_filters()[size_t(k)];
        em.pqmf_synthesis[size_t(k)].assign(g.begin(), g.end());
    }

    em.decode_table.resize(1024);
    for (int i = 0; i < 1024; ++i) em.decode_table[size_t(i)] = float(mulaw_decode(i));
    return em;
}

SynthEngine::SynthEngine(const EngineModel& model, uint64_t seed)
    : m_(model), rng_(CounterRng(seed).fork(0x5a)) {
    const NetworkConfig& cfg = m_.cfg;
    frame_ring_.assign(size_t(cfg.window_frames()) * size_t(cfg.cond_dim), 0.0f);
    h_sparse_.assign(size_t(cfg.sparse_units), 0.0f);
    h_coarse_.assign(size_t(cfg.dense_units), 0.0f);
    h_fine_.assign(size_t(cfg.dense_units), 0.0f);
    prev_c_.assign(size_t(cfg.bands), split_coarse(mulaw_encode(0.0)));
    prev_f_.assign(size_t(cfg.bands), split_fine(mulaw_encode(0.0)));
    hist_c_.assign(size_t(cfg.bands), std::vector<int>(size_t(cfg.lp_order), -1));
    hist_f_ = hist_c_;
    const int ring_len = (cfg.pqmf_order + 1 + cfg.bands - 1) / cfg.bands + 1;
    band_ring_.assign(size_t(cfg.bands), std::vector<float>(size_t(ring_len), 0.0f));

    xg_sp_.assign(size_t(3 * cfg.sparse_units), 0.0f);
    xg_co_.assign(size_t(3 * cfg.dense_units), 0.0f);
    xg_fi_.assign(size_t(3 * cfg.dense_units), 0.0f);
    gates_.assign(size_t(3 * std::max(cfg.sparse_units, cfg.dense_units)), 0.0f);
    head_buf_.assign(size_t(cfg.head_out()) * 2, 0.0f);
    latent_buf_.assign(size_t(std::max(cfg.residual_hidden, cfg.logit_latent)), 0.0f);
    logits_.assign(size_t(cfg.head_bins), 0.0f);
}

void SynthEngine::push_frame(const std::vector<double>& mel) {
    const NetworkConfig& cfg = m_.cfg;
    if (int(mel.size()) != cfg.cond_dim) throw std::invalid_argument("push_frame: wrong feature dim");
    if (finished_) throw std::logic_error("push_frame after finish");
    last_frame_ = mel;

    const int wf = cfg.window_frames();
    const int slot = int(frames_pushed_ % wf);
    for (int d = 0; d < cfg.cond_dim; ++d)
        frame_ring_[size_t(slot) * size_t(cfg.cond_dim) + size_t(d)] = float(mel[size_t(d)]);
    ++frames_pushed_;

    // Frame f is computable once f + lookahead has arrived.
    while (frames_processed_ + cfg.segconv_next < frames_pushed_) {
        std::vector<float> window(size_t(wf) * size_t(cfg.cond_dim), 0.0f);
        for (int j = 0; j < wf; ++j) {
            const long src = frames_processed_ - cfg.segconv_prev + j;
            if (src < 0) continue;  // zero-pad at stream start
            const int sslot = int(src % wf);
            std::copy_n(frame_ring_.data() + size_t(sslot) * size_t(cfg.cond_dim), cfg.cond_dim,
                        window.data() + size_t(j) * size_t(cfg.cond_dim));
        }
        process_frame(window.data());
        ++frames_processed_;
    }
}

void SynthEngine::finish() {
    if (finished_) return;
    const NetworkConfig& cfg = m_.cfg;
    if (frames_pushed_ == 0) {
        finished_ = true;
        return;
    }
    // Flush: satisfy the lookahead by replicating the final frame.
    const std::vector<double> last = last_frame_;
    for (int i = 0; i < cfg.segconv_next; ++i) push_frame(last);
    finished_ = true;
}

std::vector<float> SynthEngine::pull_samples() {
    std::vector<float> out;
    out.swap(out_);
    return out;
}

void SynthEngine::process_frame(const float* window) {
    Timer timer;
    const NetworkConfig& cfg = m_.cfg;
    const int proj = cfg.cond_proj;
    const int hs = cfg.sparse_units;
    const int hd = cfg.dense_units;

    std::vector<float> cond(static_cast<size_t>(proj));
    matvec(m_.conv_w.data(), window, m_.conv_b.data(), cond.data(),
           proj, cfg.window_frames() * cfg.cond_dim);
    for (float& v : cond) v = v > 0.0f ? v : 0.0f;

    // Frame-constant gate contributions.
    std::vector<float> cg_sp(size_t(3 * hs)), cg_co(size_t(3 * hd)), cg_fi(size_t(3 * hd));
    matvec(m_.sp_cond_w.data(), cond.data(), m_.sp_b_ih.data(), cg_sp.data(), 3 * hs, proj);
    matvec(m_.co_cond_w.data(), cond.data(), m_.co_b_ih.data(), cg_co.data(), 3 * hd, proj);
    matvec(m_.fi_cond_w.data(), cond.data(), m_.fi_b_ih.data(), cg_fi.data(), 3 * hd, proj);
    network_s_ += timer.lap();

    for (int s = 0; s < cfg.steps_per_frame(); ++s)
        band_step(cg_sp.data(), cg_co.data(), cg_fi.data());
}

void SynthEngine::band_step(const float* cond_gates_sp, const float* cond_gates_co,
                            const float* cond_gates_fi) {
    Timer timer;
    const NetworkConfig& cfg = m_.cfg;
    const int hs = cfg.sparse_units;
    const int hd = cfg.dense_units;
    const int mm = cfg.bands;
    const int kk = cfg.lp_order;
    const int bins = cfg.head_bins;
    const int mk = mm * kk;
    const int head_out = cfg.head_out();

    // --- sparse GRU ---
    std::copy_n(cond_gates_sp, 3 * hs, xg_sp_.data());
    for (int m = 0; m < mm; ++m) {
        const float* row_c =
            m_.sp_table_coarse[size_t(m)].data() + size_t(prev_c_[size_t(m)]) * size_t(3 * hs);
        const float* row_f =
            m_.sp_table_fine[size_t(m)].data() + size_t(prev_f_[size_t(m)]) * size_t(3 * hs);
        for (int i = 0; i < 3 * hs; ++i) xg_sp_[size_t(i)] += row_c[i] + row_f[i];
    }
    float* hz = gates_.data();
    float* hr = gates_.data() + hs;
    float* hn = gates_.data() + 2 * hs;
    block_sparse_matvec(m_.sp_update, h_sparse_.data(), m_.sp_b_hh.data(), hz);
    block_sparse_matvec(m_.sp_reset, h_sparse_.data(), m_.sp_b_hh.data() + hs, hr);
    block_sparse_matvec(m_.sp_new, h_sparse_.data(), m_.sp_b_hh.data() + 2 * hs, hn);
    for (int i = 0; i < hs; ++i) {
        const float z = fast_sigmoid(xg_sp_[size_t(i)] + hz[i]);
        const float r = fast_sigmoid(xg_sp_[size_t(hs + i)] + hr[i]);
        const float n = fast_tanh(xg_sp_[size_t(2 * hs + i)] + r * hn[i]);
        h_sparse_[size_t(i)] = n + z * (h_sparse_[size_t(i)] - n);
    }

    auto dense_gru = [&](std::vector<float>& h, const float* xg, const float* whh, const float* bhh) {
        float* hg = gates_.data();
        matvec(whh, h.data(), bhh, hg, 3 * hd, hd);
        for (int i = 0; i < hd; ++i) {
            const float z = fast_sigmoid(xg[i] + hg[i]);
            const float r = fast_sigmoid(xg[hd + i] + hg[hd + i]);
            const float n = fast_tanh(xg[2 * hd + i] + r * hg[2 * hd + i]);
            h[size_t(i)] = n + z * (h[size_t(i)] - n);
        }
    };

    // --- coarse branch ---
    std::copy_n(cond_gates_co, 3 * hd, xg_co_.data());
    matvec_add(m_.co_state_w.data(), h_sparse_.data(), xg_co_.data(), 3 * hd, hs);
    dense_gru(h_coarse_, xg_co_.data(), m_.co_whh.data(), m_.co_b_hh.data());

    auto run_head = [&](const EngineModel::Head& head, const std::vector<float>& h,
                        std::vector<std::vector<int>>& hist, int* bins_out,
                        Tensor* trace_logits) {
        float* raw1 = head_buf_.data();
        float* raw2 = head_buf_.data() + head_out;
        matvec(head.w1.data(), h.data(), head.b1.data(), raw1, head_out, hd);
        matvec(head.w2.data(), h.data(), head.b2.data(), raw2, head_out, hd);
        // Blend with per-slice activations: tanh signs, exp mags, raw latent.
        for (int i = 0; i < mk; ++i)
            raw1[i] = head.c1[size_t(i)] * fast_tanh(raw1[i]) + head.c2[size_t(i)] * fast_tanh(raw2[i]);
        for (int i = mk; i < 2 * mk; ++i)
            raw1[i] = head.c1[size_t(i)] * std::exp(raw1[i]) + head.c2[size_t(i)] * std::exp(raw2[i]);
        for (int i = 2 * mk; i < head_out; ++i)
            raw1[i] = head.c1[size_t(i)] * raw1[i] + head.c2[size_t(i)] * raw2[i];

        for (int m = 0; m < mm; ++m) {
            const float* latent = raw1 + 2 * mk + m * cfg.logit_latent;
            float* hid = latent_buf_.data();
            matvec(head.res_w1.data(), latent, head.res_b1.data(), hid, cfg.residual_hidden,
                   cfg.logit_latent);
            for (int i = 0; i < cfg.residual_hidden; ++i) hid[i] = hid[i] > 0.0f ? hid[i] : 0.0f;
            matvec(head.res_w2.data(), hid, head.res_b2.data(), logits_.data(), bins,
                   cfg.residual_hidden);
            for (int i = 0; i < bins; ++i) logits_[size_t(i)] -= fast_tanh(logits_[size_t(i)]);

            for (int k2 = 0; k2 < kk; ++k2) {
                const int bin = hist[size_t(m)][size_t(k2)];
                if (bin < 0) continue;
                logits_[size_t(bin)] += raw1[m * kk + k2] * raw1[mk + m * kk + k2];
            }
            if (trace_logits)
                for (int b = 0; b < bins; ++b) trace_logits->at(m, b) = logits_[size_t(b)];
            // Gumbel-max sample.
            int best = 0;
            float best_v = -1e30f;
            for (int b = 0; b < bins; ++b) {
                const double u = std::clamp(rng_.next_open01(), 1e-12, 1.0 - 1e-12);
                const float g = logits_[size_t(b)] - float(std::log(-std::log(u)));
                if (g > best_v) {
                    best_v = g;
                    best = b;
                }
            }
            bins_out[m] = best;
        }
    };

    Tensor* tc = nullptr;
    Tensor* tf = nullptr;
    if (trace_) {
        trace_->coarse_logits.emplace_back(mm, bins);
        trace_->fine_logits.emplace_back(mm, bins);
        tc = &trace_->coarse_logits.back();
        tf = &trace_->fine_logits.back();
    }

    std::array<int, 64> coarse_bins{}, fine_bins{};
    run_head(m_.coarse, h_coarse_, hist_c_, coarse_bins.data(), tc);

    // --- fine branch ---
    std::copy_n(cond_gates_fi, 3 * hd, xg_fi_.data());
    matvec_add(m_.fi_state_w.data(), h_coarse_.data(), xg_fi_.data(), 3 * hd, hd);
    for (int m = 0; m < mm; ++m) {
        const float* row =
            m_.fi_table_coarse[size_t(m)].data() + size_t(coarse_bins[size_t(m)]) * size_t(3 * hd);
        for (int i = 0; i < 3 * hd; ++i) xg_fi_[size_t(i)] += row[i];
    }
    dense_gru(h_fine_, xg_fi_.data(), m_.fi_whh.data(), m_.fi_b_hh.data());
    run_head(m_.fine, h_fine_, hist_f_, fine_bins.data(), tf);
    if (trace_) {
        trace_->coarse_bins.emplace_back(coarse_bins.begin(), coarse_bins.begin() + mm);
        trace_->fine_bins.emplace_back(fine_bins.begin(), fine_bins.begin() + mm);
    }

    // --- histories and sample emission ---
    const int ring_len = int(band_ring_[0].size());
    const int pos = int(band_steps_ % ring_len);
    for (int m = 0; m < mm; ++m) {
        for (int k2 = kk - 1; k2 > 0; --k2) {
            hist_c_[size_t(m)][size_t(k2)] = hist_c_[size_t(m)][size_t(k2 - 1)];
            hist_f_[size_t(m)][size_t(k2)] = hist_f_[size_t(m)][size_t(k2 - 1)];
        }
        if (kk > 0) {
            hist_c_[size_t(m)][0] = coarse_bins[size_t(m)];
            hist_f_[size_t(m)][0] = fine_bins[size_t(m)];
        }
        prev_c_[size_t(m)] = coarse_bins[size_t(m)];
        prev_f_[size_t(m)] = fine_bins[size_t(m)];
        band_ring_[size_t(m)][size_t(pos)] =
            m_.decode_table[size_t(merge_coarse_fine(coarse_bins[size_t(m)], fine_bins[size_t(m)]))];
    }
    network_s_ += timer.lap();

    // --- PQMF synthesis: x[tM + j] = M * sum_m sum_r g_m[j + rM] y_m[t - r]
    const int len = cfg.pqmf_order + 1;
    const float alpha = float(cfg.preemph_alpha);
    for (int j = 0; j < mm; ++j) {
        float acc = 0.0f;
        for (int m = 0; m < mm; ++m) {
            const float* g = m_.pqmf_synthesis[size_t(m)].data();
            const auto& ring = band_ring_[size_t(m)];
            for (int i = j, r = 0; i < len; i += mm, ++r) {
                if (r > band_steps_) break;
                acc += g[i] * ring[size_t((pos - r + ring_len * 8) % ring_len)];
            }
        }
        // De-emphasis undoes the training-time pre-emphasis.
        deemph_state_ = float(mm) * acc + alpha * deemph_state_;
        out_.push_back(deemph_state_);
        ++samples_emitted_;
    }
    ++band_steps_;
    pqmf_s_ += timer.lap();
}

Waveform synthesize_offline(const EngineModel& model,
                            const std::vector<std::vector<double>>& mel, uint64_t seed) {
    SynthEngine engine(model, seed);
    Waveform out;
    out.sample_rate = model.cfg.sample_rate;
    for (const auto& frame : mel) {
        engine.push_frame(frame);
        const auto chunk = engine.pull_samples();
        out.samples.insert(out.samples.end(), chunk.begin(), chunk.end());
    }
    engine.finish();
    const auto tail = engine.pull_samples();
    out.samples.insert(out.samples.end(), tail.begin(), tail.end());
    return out;
}

RtfReport bench_rtf(const EngineModel& model, double duration_s, uint64_t seed,
                    const Waveform* input, const std::string& out_wav_path) {
    const NetworkConfig& cfg = model.cfg;
    RtfReport rep;

    Timer total;
    Timer stage;

    Waveform source;
    if (input) {
        source = *input;
    } else {
        // Harmonic sweep with noise, enough structure to exercise features.
        source.sample_rate = cfg.sample_rate;
        const size_t n = size_t(duration_s * cfg.sample_rate);
        source.samples.resize(n);
        CounterRng nrng(seed ^ 0xbe);
        double phase = 0.0;
        for (size_t i = 0; i < n; ++i) {
            const double f0 = 110.0 + 60.0 * std::sin(2.0 * 3.14159265 * 0.7 * double(i) / cfg.sample_rate);
            phase += 2.0 * 3.14159265 * f0 / cfg.sample_rate;
            double v = 0.0;
            for (int h = 1; h <= 6; ++h) v += std::sin(phase * h) / double(h * h + 1);
            source.samples[i] = 0.4 * v + 0.02 * (nrng.next_open01() * 2.0 - 1.0);
        }
    }
    rep.io_seconds += stage.lap();

    const auto mel = mel_spectrogram(source, mel_config_for(cfg));
    rep.feature_seconds = stage.lap();

    const int frames = int(source.samples.size()) / cfg.frame_shift;
    SynthEngine engine(model, seed);
    Waveform out;
    out.sample_rate = cfg.sample_rate;
    for (int f = 0; f < frames; ++f) {
        engine.push_frame(mel[size_t(f)]);
        const auto chunk = engine.pull_samples();
        out.samples.insert(out.samples.end(), chunk.begin(), chunk.end());
    }
    engine.finish();
    const auto tail = engine.pull_samples();
    out.samples.insert(out.samples.end(), tail.begin(), tail.end());
    stage.lap();

    rep.network_seconds = engine.network_seconds();
    rep.pqmf_seconds = engine.pqmf_seconds();

    stage = Timer{};
    if (!out_wav_path.empty()) wav_write(out_wav_path, out);
    rep.io_seconds += stage.lap();

    rep.audio_seconds = double(out.samples.size()) / cfg.sample_rate;
    rep.wall_seconds = total.lap();
    rep.rtf = rep.wall_seconds / std::max(rep.audio_seconds, 1e-9);
    return rep;
}

}  // namespace mwdlp
