#include "mwdlp/train.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace mwdlp {

void TrainConfig::validate() const {
    if (learning_rate <= 0.0) throw std::invalid_argument("learning rate must be positive");
    if (batch_seq_frames < 1 || batch_size < 1) throw std::invalid_argument("batch config invalid");
    if (dropout < 0.0 || dropout >= 1.0) throw std::invalid_argument("dropout must be in [0,1)");
    if (max_steps < 1) throw std::invalid_argument("max_steps must be positive");
    if (ce_weight < 0.0 || stft_weight < 0.0)
        throw std::invalid_argument("loss weights must be non-negative");
    sparsity.validate();
}

void RAdam::step(std::vector<Tensor*> params, const std::vector<const Tensor*>& grads, double lr) {
    if (params.size() != grads.size()) throw std::invalid_argument("radam: param/grad count");
    if (m_.empty()) {
        m_.resize(params.size());
        v_.resize(params.size());
        for (size_t i = 0; i < params.size(); ++i) {
            m_[i] = Tensor(params[i]->rows, params[i]->cols, 0.0);
            v_[i] = Tensor(params[i]->rows, params[i]->cols, 0.0);
        }
    }
    ++t_;
    const double b1t = std::pow(beta1_, double(t_));
    const double b2t = std::pow(beta2_, double(t_));
    const double rho_inf = 2.0 / (1.0 - beta2_) - 1.0;
    const double rho_t = rho_inf - 2.0 * double(t_) * b2t / (1.0 - b2t);

    double rect = 0.0;
    const bool rectified = rho_t > 4.0;
    if (rectified)
        rect = std::sqrt(((rho_t - 4.0) * (rho_t - 2.0) * rho_inf) /
                         ((rho_inf - 4.0) * (rho_inf - 2.0) * rho_t));

    for (size_t i = 0; i < params.size(); ++i) {
        Tensor& p = *params[i];
        const Tensor* g = grads[i];
        Tensor& m = m_[i];
        Tensor& v = v_[i];
        for (size_t j = 0; j < p.size(); ++j) {
            const double gj = (g && g->size() == p.size()) ? g->v[j] : 0.0;
            m.v[j] = beta1_ * m.v[j] + (1.0 - beta1_) * gj;
            v.v[j] = beta2_ * v.v[j] + (1.0 - beta2_) * gj * gj;
            const double m_hat = m.v[j] / (1.0 - b1t);
            if (rectified) {
                const double v_hat = std::sqrt(v.v[j] / (1.0 - b2t));
                p.v[j] -= lr * rect * m_hat / (v_hat + eps_);
            } else {
                p.v[j] -= lr * m_hat;
            }
        }
    }
}

namespace {

Tensor dropout_mask(CounterRng& rng, int rows, int cols, double p) {
    Tensor mask(rows, cols);
    const double keep_scale = 1.0 / (1.0 - p);
    for (double& v : mask.v) v = (rng.next_open01() < p) ? 0.0 : keep_scale;
    return mask;
}

double max_prob_of(const Tensor& gamma, int row, int bin) {
    std::vector<double> p(size_t(gamma.cols));
    softmax_row({gamma.row(row), size_t(gamma.cols)}, p);
    return p[size_t(bin)];
}

}  // namespace

ForwardOut forward_segment(Tape& tape, const BoundParams& bp, const SegmentData& seg,
                           const Tensor& state_sparse, const Tensor& state_coarse,
                           const Tensor& state_fine, const ForwardOptions& opt) {
    const NetworkConfig& cfg = *bp.cfg;
    const int batch = seg.batch;
    const int rows = batch * cfg.bands;
    if (opt.use_stft && (!opt.bank || !opt.band_cfg || !opt.full_cfg))
        throw std::invalid_argument("forward_segment: stft loss requires bank and configs");

    CounterRng rng = CounterRng(opt.noise_seed).fork(0xd0);

    StepVars state{tape.constant(state_sparse), tape.constant(state_coarse),
                   tape.constant(state_fine)};

    std::vector<Var> ce_terms;
    std::vector<Var> sampled_steps;
    ce_terms.reserve(size_t(seg.steps));
    if (opt.use_stft) sampled_steps.reserve(size_t(seg.steps));
    if (opt.capture) {
        opt.capture->jc.assign(size_t(seg.steps), {});
        opt.capture->jf.assign(size_t(seg.steps), {});
        opt.capture->dc.assign(size_t(seg.steps), {});
        opt.capture->df.assign(size_t(seg.steps), {});
    }

    const int frames = int(seg.cond_windows.size());
    for (int f = 0; f < frames; ++f) {
        Var cond = segmental_conv(tape, tape.constant(seg.cond_windows[size_t(f)]), bp);
        for (int s = 0; s < seg.steps_per_frame; ++s) {
            const int t = f * seg.steps_per_frame + s;
            if (t >= seg.steps) break;
            Var cond_t = cond;
            if (opt.dropout > 0.0)
                cond_t = tape.mul(cond, tape.constant(dropout_mask(rng, batch, cfg.cond_proj,
                                                                   opt.dropout)));

            StepLogits sl = full_step(tape, bp, state, cond_t, seg.prev_coarse[size_t(t)],
                                      seg.prev_fine[size_t(t)], seg.target_coarse[size_t(t)],
                                      seg.hist_coarse[size_t(t)], seg.hist_fine[size_t(t)]);
            state = sl.state;

            Var ce_c = tape.softmax_ce(sl.coarse, seg.target_coarse[size_t(t)]);
            Var ce_f = tape.softmax_ce(sl.fine, seg.target_fine[size_t(t)]);
            ce_terms.push_back(tape.add(ce_c, ce_f));

            if (!opt.use_stft) continue;

            // Draw order is fixed: coarse before fine at every step.
            GumbelDraw draw_c = draw_gumbel(rng, rows, cfg.head_bins);
            GumbelDraw draw_f = draw_gumbel(rng, rows, cfg.head_bins);
            Var gamma_c = gumbel_logits(tape, sl.coarse, draw_c);
            Var gamma_f = gumbel_logits(tape, sl.fine, draw_f);

            if (opt.frozen) {
                // FD-oracle mode: relaxed forward with frozen argmax and
                // denominators; value-only, no gradient path.
                const Tensor& gc = tape.val(gamma_c);
                const Tensor& gf = tape.val(gamma_f);
                Tensor s_vals(rows, 1);
                for (int r = 0; r < rows; ++r) {
                    s_vals.at(r, 0) = soft_discretize_relaxed(
                        {gc.row(r), size_t(gc.cols)}, {gf.row(r), size_t(gf.cols)},
                        opt.frozen->jc[size_t(t)][size_t(r)], opt.frozen->jf[size_t(t)][size_t(r)],
                        opt.frozen->dc[size_t(t)][size_t(r)], opt.frozen->df[size_t(t)][size_t(r)]);
                }
                sampled_steps.push_back(tape.constant(s_vals));
            } else {
                std::vector<int> jc = argmax_rows(tape.val(gamma_c));
                std::vector<int> jf = argmax_rows(tape.val(gamma_f));
                if (opt.capture) {
                    auto& cap = *opt.capture;
                    cap.jc[size_t(t)] = jc;
                    cap.jf[size_t(t)] = jf;
                    cap.dc[size_t(t)].resize(size_t(rows));
                    cap.df[size_t(t)].resize(size_t(rows));
                    for (int r = 0; r < rows; ++r) {
                        cap.dc[size_t(t)][size_t(r)] = max_prob_of(tape.val(gamma_c), r, jc[size_t(r)]);
                        cap.df[size_t(t)][size_t(r)] = max_prob_of(tape.val(gamma_f), r, jf[size_t(r)]);
                    }
                }
                sampled_steps.push_back(
                    soft_discretize(tape, gamma_c, gamma_f, std::move(jc), std::move(jf)));
            }
        }
    }

    ForwardOut out;
    out.final_state = state;

    Var ce_sum = ce_terms[0];
    for (size_t i = 1; i < ce_terms.size(); ++i) ce_sum = tape.add(ce_sum, ce_terms[i]);
    out.ce = tape.scale(ce_sum, 1.0 / double(ce_terms.size()));

    if (opt.use_stft) {
        Var sampled = tape.concat_cols(std::span<const Var>(sampled_steps.data(), sampled_steps.size()));
        std::vector<Var> res_terms;
        for (const auto& rc : opt.band_cfg->resolutions)
            res_terms.push_back(stft_loss_rows(tape, sampled, seg.band_targets, rc));
        Var band_sum = res_terms[0];
        for (size_t i = 1; i < res_terms.size(); ++i) band_sum = tape.add(band_sum, res_terms[i]);
        Var band_mean = tape.scale(band_sum, 1.0 / double(res_terms.size()));

        Var full = pqmf_synthesize_op(tape, sampled, *opt.bank);
        std::vector<Var> full_terms;
        for (const auto& rc : opt.full_cfg->resolutions)
            full_terms.push_back(stft_loss_rows(tape, full, seg.full_targets, rc));
        Var full_sum = full_terms[0];
        for (size_t i = 1; i < full_terms.size(); ++i) full_sum = tape.add(full_sum, full_terms[i]);
        Var full_mean = tape.scale(full_sum, 1.0 / double(full_terms.size()));

        out.stft = tape.add(band_mean, full_mean);
        out.total = tape.add(tape.scale(out.ce, opt.ce_weight), tape.scale(out.stft, opt.stft_weight));
    } else {
        out.stft = tape.constant(Tensor(1, 1, 0.0));
        out.total = tape.scale(out.ce, opt.ce_weight);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Batch assembly over stripes of consecutive segments.

namespace {

struct SegmentRef {
    int utt = 0;
    int frame0 = 0;
};

struct Lane {
    std::vector<SegmentRef> segs;
    size_t cursor = 0;
    Tensor h_sparse, h_coarse, h_fine;  // [1, units]
    bool fresh = true;
};

int silence_coarse() { return split_coarse(mulaw_encode(0.0)); }
int silence_fine() { return split_fine(mulaw_encode(0.0)); }

// Bin at band step t-offset, or the silence bin / -1 when before the start.
int bin_at(const std::vector<int>& bins, int t, int fallback) {
    return t >= 0 ? bins[size_t(t)] : fallback;
}

SegmentData build_segment(const std::vector<Utterance>& data, const NetworkConfig& cfg,
                          const PqmfBank& bank, const std::vector<Lane>& lanes, int seg_frames) {
    std::vector<std::pair<int, int>> positions;
    positions.reserve(lanes.size());
    for (const Lane& lane : lanes) {
        const SegmentRef ref = lane.segs[lane.cursor];
        positions.emplace_back(ref.utt, ref.frame0);
    }
    return build_segment_batch(data, cfg, bank, positions, seg_frames);
}

}  // namespace

SegmentData build_segment_batch(const std::vector<Utterance>& data, const NetworkConfig& cfg,
                                const PqmfBank& bank,
                                const std::vector<std::pair<int, int>>& positions, int seg_frames) {
    const int batch = int(positions.size());
    const int spf = cfg.steps_per_frame();
    const int steps = seg_frames * spf;
    const int rows = batch * cfg.bands;
    const int k = cfg.lp_order;

    SegmentData seg;
    seg.batch = batch;
    seg.steps = steps;
    seg.steps_per_frame = spf;
    seg.cond_windows.assign(size_t(seg_frames), Tensor(batch, cfg.window_frames() * cfg.cond_dim));
    seg.target_coarse.assign(size_t(steps), std::vector<int>(size_t(rows)));
    seg.target_fine.assign(size_t(steps), std::vector<int>(size_t(rows)));
    seg.prev_coarse.assign(size_t(steps), std::vector<int>(size_t(rows)));
    seg.prev_fine.assign(size_t(steps), std::vector<int>(size_t(rows)));
    seg.hist_coarse.assign(size_t(steps),
                           std::vector<std::vector<int>>(size_t(rows), std::vector<int>(size_t(k))));
    seg.hist_fine = seg.hist_coarse;
    seg.band_targets = Tensor(rows, steps);
    seg.full_targets = Tensor(batch, steps * cfg.bands);

    SubbandTensor batch_bands;
    batch_bands.bands.assign(size_t(cfg.bands), std::vector<double>(size_t(steps)));

    for (int b = 0; b < batch; ++b) {
        const auto [utt_idx, frame0] = positions[size_t(b)];
        const Utterance& utt = data[size_t(utt_idx)];
        if (frame0 + seg_frames > utt.frames)
            throw std::out_of_range("build_segment_batch: segment exceeds utterance");

        for (int f = 0; f < seg_frames; ++f) {
            const auto win = cond_window(utt, cfg, frame0 + f);
            std::copy(win.begin(), win.end(), seg.cond_windows[size_t(f)].row(b));
        }
        const int t0 = frame0 * spf;
        for (int t = 0; t < steps; ++t) {
            const int tg = t0 + t;
            for (int m = 0; m < cfg.bands; ++m) {
                const int r = b * cfg.bands + m;
                const auto& cb = utt.coarse_bins[size_t(m)];
                const auto& fb = utt.fine_bins[size_t(m)];
                seg.target_coarse[size_t(t)][size_t(r)] = cb[size_t(tg)];
                seg.target_fine[size_t(t)][size_t(r)] = fb[size_t(tg)];
                seg.prev_coarse[size_t(t)][size_t(r)] = bin_at(cb, tg - 1, silence_coarse());
                seg.prev_fine[size_t(t)][size_t(r)] = bin_at(fb, tg - 1, silence_fine());
                for (int kk = 0; kk < k; ++kk) {
                    seg.hist_coarse[size_t(t)][size_t(r)][size_t(kk)] = bin_at(cb, tg - 1 - kk, -1);
                    seg.hist_fine[size_t(t)][size_t(r)][size_t(kk)] = bin_at(fb, tg - 1 - kk, -1);
                }
                const double amp = utt.band_amps.bands[size_t(m)][size_t(tg)];
                seg.band_targets.at(r, t) = amp;
                batch_bands.bands[size_t(m)][size_t(t)] = amp;
            }
        }
        const Waveform full = bank.synthesize(batch_bands, cfg.sample_rate);
        std::copy(full.samples.begin(), full.samples.end(), seg.full_targets.row(b));
    }
    return seg;
}

namespace {

std::vector<Lane> make_lanes(const std::vector<Utterance>& data, const NetworkConfig& cfg,
                             int seg_frames, int batch_size) {
    std::vector<SegmentRef> all;
    for (int u = 0; u < int(data.size()); ++u)
        for (int f0 = 0; f0 + seg_frames <= data[size_t(u)].frames; f0 += seg_frames)
            all.push_back({u, f0});
    if (all.empty()) throw std::invalid_argument("dataset has no full segments");

    const int lanes_n = std::min<int>(batch_size, int(all.size()));
    const size_t per = (all.size() + size_t(lanes_n) - 1) / size_t(lanes_n);
    std::vector<Lane> lanes(static_cast<size_t>(lanes_n));
    for (int i = 0; i < lanes_n; ++i) {
        const size_t lo = size_t(i) * per;
        const size_t hi = std::min(all.size(), lo + per);
        lanes[size_t(i)].segs.assign(all.begin() + long(lo), all.begin() + long(hi));
        lanes[size_t(i)].h_sparse = Tensor(1, cfg.sparse_units);
        lanes[size_t(i)].h_coarse = Tensor(1, cfg.dense_units);
        lanes[size_t(i)].h_fine = Tensor(1, cfg.dense_units);
    }
    return lanes;
}

void advance_lane(Lane& lane, int seg_frames) {
    const SegmentRef cur = lane.segs[lane.cursor];
    lane.cursor = (lane.cursor + 1) % lane.segs.size();
    const SegmentRef next = lane.segs[lane.cursor];
    const bool contiguous = next.utt == cur.utt && next.frame0 == cur.frame0 + seg_frames;
    if (!contiguous) {
        // New utterance or wrap: reset the carried state.
        std::fill(lane.h_sparse.v.begin(), lane.h_sparse.v.end(), 0.0);
        std::fill(lane.h_coarse.v.begin(), lane.h_coarse.v.end(), 0.0);
        std::fill(lane.h_fine.v.begin(), lane.h_fine.v.end(), 0.0);
    }
}

Tensor gather_states(const std::vector<Lane>& lanes, const Tensor Lane::*field) {
    const int cols = (lanes[0].*field).cols;
    Tensor out(int(lanes.size()), cols);
    for (size_t i = 0; i < lanes.size(); ++i)
        std::copy((lanes[i].*field).v.begin(), (lanes[i].*field).v.end(), out.row(int(i)));
    return out;
}

void scatter_states(std::vector<Lane>& lanes, Tensor Lane::*field, const Tensor& batched) {
    for (size_t i = 0; i < lanes.size(); ++i)
        std::copy(batched.row(int(i)), batched.row(int(i)) + batched.cols,
                  (lanes[i].*field).v.begin());
}

void check_finite_grads(const Tape& tape, const BoundParams& bound) {
    for (Var leaf : bound.leaves) {
        const Tensor& g = tape.grad(leaf);
        for (double v : g.v)
            if (!std::isfinite(v)) throw std::runtime_error("training aborted: non-finite gradient");
    }
}

void update_masks(ModelParams& params, const SparsitySchedule& sched, long step) {
    const std::array<Tensor*, 3> weights = {&params.gru_sparse.w_hh_update,
                                            &params.gru_sparse.w_hh_reset,
                                            &params.gru_sparse.w_hh_new};
    const std::array<Tensor*, 3> masks = {&params.gru_sparse.mask_update,
                                          &params.gru_sparse.mask_reset,
                                          &params.gru_sparse.mask_new};
    for (int g = 0; g < 3; ++g) {
        const double d = density_at(step, sched.target_density[size_t(g)], sched);
        if (d >= 1.0) continue;
        *masks[size_t(g)] = prune(*weights[size_t(g)], d, sched.block_rows);
    }
    apply_sparse_masks(params);
}

bool sparsity_enabled(const SparsitySchedule& s) {
    return s.target_density[0] < 1.0 || s.target_density[1] < 1.0 || s.target_density[2] < 1.0;
}

}  // namespace

void write_metrics_csv(const std::string& path, const std::vector<StepMetrics>& log) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write metrics csv: " + path);
    out << "step,ce,stft,density,lr\n";
    for (const auto& m : log)
        out << m.step << ',' << m.ce << ',' << m.stft << ',' << m.density << ',' << m.lr << '\n';
}

StepMetrics evaluate(ModelParams& params, const std::vector<Utterance>& eval_set,
                     const TrainConfig& cfg, const PqmfBank& bank,
                     const StftLossConfig& band_cfg, const StftLossConfig& full_cfg) {
    const NetworkConfig& net = params.cfg;
    StepMetrics acc;
    long total_steps = 0;

    std::vector<Lane> lanes = make_lanes(eval_set, net, cfg.batch_seq_frames, 1);
    Lane& lane = lanes[0];
    for (size_t s = 0; s < lane.segs.size(); ++s) {
        std::vector<Lane> one = {lane};
        SegmentData seg = build_segment(eval_set, net, bank, one, cfg.batch_seq_frames);
        Tape tape;
        tape.set_grad_enabled(false);
        BoundParams bound = bind_params(tape, params, false);
        ForwardOptions opt;
        opt.dropout = 0.0;
        opt.noise_seed = 0x5eed;
        opt.use_stft = cfg.use_stft_loss;
        opt.ce_weight = cfg.ce_weight;
        opt.stft_weight = cfg.stft_weight;
        opt.bank = &bank;
        opt.band_cfg = &band_cfg;
        opt.full_cfg = &full_cfg;
        ForwardOut fw = forward_segment(tape, bound, seg, lane.h_sparse, lane.h_coarse,
                                        lane.h_fine, opt);
        acc.ce += tape.val(fw.ce).v[0] * seg.steps;
        acc.stft += tape.val(fw.stft).v[0] * seg.steps;
        acc.total += tape.val(fw.total).v[0] * seg.steps;
        total_steps += seg.steps;

        lane.h_sparse = tape.val(fw.final_state.h_sparse);
        lane.h_coarse = tape.val(fw.final_state.h_coarse);
        lane.h_fine = tape.val(fw.final_state.h_fine);
        advance_lane(lane, cfg.batch_seq_frames);
    }
    acc.ce /= double(total_steps);
    acc.stft /= double(total_steps);
    acc.total /= double(total_steps);
    acc.density = (measured_densities(params)[0] + measured_densities(params)[1] +
                   measured_densities(params)[2]) /
                  3.0;
    return acc;
}

TrainResult train_loop(ModelParams& params, const std::vector<Utterance>& train_set,
                       const std::vector<Utterance>& heldout_set, const TrainConfig& cfg,
                       const PqmfBank& bank, const StftLossConfig& band_cfg,
                       const StftLossConfig& full_cfg, const StepCallback& on_step) {
    cfg.validate();
    params.cfg.validate();
    if (train_set.empty()) throw std::invalid_argument("train_loop: empty dataset");

    const NetworkConfig& net = params.cfg;
    std::vector<Lane> lanes = make_lanes(train_set, net, cfg.batch_seq_frames, cfg.batch_size);

    RAdam opt;
    auto named = named_tensors(params);
    TrainResult result;
    result.best_heldout = 1e300;
    ModelParams best = params;
    int bad_evals = 0;
    const bool sparsify_on = sparsity_enabled(cfg.sparsity);

    for (long step = 0; step < cfg.max_steps; ++step) {
        if (sparsify_on && step >= cfg.sparsity.start_step) {
            const bool rerank_due = step <= cfg.sparsity.end_step &&
                                    (step - cfg.sparsity.start_step) % cfg.sparsity.rerank_interval == 0;
            if (rerank_due || step == cfg.sparsity.end_step) update_masks(params, cfg.sparsity, step);
        }

        SegmentData seg = build_segment(train_set, net, bank, lanes, cfg.batch_seq_frames);

        Tape tape;
        BoundParams bound = bind_params(tape, params, true);
        ForwardOptions fopt;
        fopt.dropout = cfg.dropout;
        fopt.noise_seed = cfg.seed + 0x9e37 * uint64_t(step + 1);
        fopt.use_stft = cfg.use_stft_loss;
        fopt.ce_weight = cfg.ce_weight;
        fopt.stft_weight = cfg.stft_weight;
        fopt.bank = &bank;
        fopt.band_cfg = &band_cfg;
        fopt.full_cfg = &full_cfg;

        ForwardOut fw = forward_segment(tape, bound, seg, gather_states(lanes, &Lane::h_sparse),
                                        gather_states(lanes, &Lane::h_coarse),
                                        gather_states(lanes, &Lane::h_fine), fopt);
        tape.backward(fw.total);
        check_finite_grads(tape, bound);

        std::vector<Tensor*> ptensors;
        std::vector<const Tensor*> pgrads;
        ptensors.reserve(named.size());
        pgrads.reserve(named.size());
        for (size_t i = 0; i < named.size(); ++i) {
            ptensors.push_back(named[i].tensor);
            pgrads.push_back(&tape.grad(bound.leaves[i]));
        }
        opt.step(std::move(ptensors), pgrads, cfg.learning_rate);
        apply_sparse_masks(params);

        // Truncated BPTT: states carry as values, detached between segments.
        scatter_states(lanes, &Lane::h_sparse, tape.val(fw.final_state.h_sparse));
        scatter_states(lanes, &Lane::h_coarse, tape.val(fw.final_state.h_coarse));
        scatter_states(lanes, &Lane::h_fine, tape.val(fw.final_state.h_fine));
        for (auto& lane : lanes) advance_lane(lane, cfg.batch_seq_frames);

        const auto dens = measured_densities(params);
        StepMetrics sm;
        sm.step = step;
        sm.ce = tape.val(fw.ce).v[0];
        sm.stft = tape.val(fw.stft).v[0];
        sm.total = tape.val(fw.total).v[0];
        sm.density = (dens[0] + dens[1] + dens[2]) / 3.0;
        sm.lr = cfg.learning_rate;
        result.log.push_back(sm);
        result.steps_run = step + 1;
        if (on_step && !on_step(sm)) break;

        if (!heldout_set.empty() && cfg.eval_interval > 0 && (step + 1) % cfg.eval_interval == 0) {
            const StepMetrics ev = evaluate(params, heldout_set, cfg, bank, band_cfg, full_cfg);
            if (ev.total < result.best_heldout) {
                result.best_heldout = ev.total;
                best = params;
                bad_evals = 0;
            } else if (++bad_evals >= cfg.patience) {
                result.early_stopped = true;
                break;
            }
        }
    }
    // Checkpoint selection: best held-out total loss.
    if (!heldout_set.empty() && result.best_heldout < 1e300) params = best;
    return result;
}

}  // namespace mwdlp
