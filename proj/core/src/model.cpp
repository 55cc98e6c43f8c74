#include "mwdlp/model.h"

#include <array>
#include <cmath>
#include <stdexcept>

namespace mwdlp {

void NetworkConfig::validate() const {
    if (bands < 1 || lp_order < 0 || cond_dim < 1 || cond_proj < 1 || embed_dim < 1 ||
        sparse_units < 1 || dense_units < 1 || logit_latent < 1 || residual_hidden < 1 ||
        segconv_prev < 0 || segconv_next < 0)
        throw std::invalid_argument("network config has non-positive field");
    if (head_bins != 32) throw std::invalid_argument("head_bins must be 32 (5-bit heads)");
    if (frame_shift % bands != 0)
        throw std::invalid_argument("frame_shift must be divisible by band count");
    if (sparse_units % 16 != 0)
        throw std::invalid_argument("sparse_units must be divisible by the 16-row block");
}

NetworkConfig NetworkConfig::paper_24k() { return NetworkConfig{}; }

NetworkConfig NetworkConfig::paper_16k() {
    NetworkConfig cfg;
    cfg.bands = 4;
    cfg.sample_rate = 16000;
    cfg.frame_shift = 160;
    cfg.mel_fft = 1024;
    cfg.mel_win = 440;
    cfg.pqmf_order = 274;
    cfg.pqmf_cutoff = 0.15;
    return cfg;
}

std::vector<NamedTensor> named_tensors(ModelParams& p) {
    return {
        {"cond.conv.w", &p.conv_w},
        {"cond.conv.b", &p.conv_b},
        {"embed.coarse", &p.embed_coarse},
        {"embed.fine", &p.embed_fine},
        {"gru_sparse.w_ih", &p.gru_sparse.w_ih},
        {"gru_sparse.b_ih", &p.gru_sparse.b_ih},
        {"gru_sparse.w_hh.update", &p.gru_sparse.w_hh_update},
        {"gru_sparse.w_hh.reset", &p.gru_sparse.w_hh_reset},
        {"gru_sparse.w_hh.new", &p.gru_sparse.w_hh_new},
        {"gru_sparse.b_hh", &p.gru_sparse.b_hh},
        {"gru_coarse.w_ih", &p.gru_coarse.w_ih},
        {"gru_coarse.b_ih", &p.gru_coarse.b_ih},
        {"gru_coarse.w_hh", &p.gru_coarse.w_hh},
        {"gru_coarse.b_hh", &p.gru_coarse.b_hh},
        {"gru_fine.w_ih", &p.gru_fine.w_ih},
        {"gru_fine.b_ih", &p.gru_fine.b_ih},
        {"gru_fine.w_hh", &p.gru_fine.w_hh},
        {"gru_fine.b_hh", &p.gru_fine.b_hh},
        {"dualfc_coarse.w1", &p.fc_coarse.w1},
        {"dualfc_coarse.b1", &p.fc_coarse.b1},
        {"dualfc_coarse.w2", &p.fc_coarse.w2},
        {"dualfc_coarse.b2", &p.fc_coarse.b2},
        {"dualfc_coarse.lambda1", &p.fc_coarse.lambda1},
        {"dualfc_coarse.lambda2", &p.fc_coarse.lambda2},
        {"dualfc_fine.w1", &p.fc_fine.w1},
        {"dualfc_fine.b1", &p.fc_fine.b1},
        {"dualfc_fine.w2", &p.fc_fine.w2},
        {"dualfc_fine.b2", &p.fc_fine.b2},
        {"dualfc_fine.lambda1", &p.fc_fine.lambda1},
        {"dualfc_fine.lambda2", &p.fc_fine.lambda2},
        {"residual_coarse.w1", &p.res_coarse.w1},
        {"residual_coarse.b1", &p.res_coarse.b1},
        {"residual_coarse.w2", &p.res_coarse.w2},
        {"residual_coarse.b2", &p.res_coarse.b2},
        {"residual_fine.w1", &p.res_fine.w1},
        {"residual_fine.b1", &p.res_fine.b1},
        {"residual_fine.w2", &p.res_fine.w2},
        {"residual_fine.b2", &p.res_fine.b2},
    };
}

namespace {

Tensor randn(int rows, int cols, double stddev, CounterRng& rng) {
    Tensor t(rows, cols);
    for (double& v : t.v) v = stddev * rng.next_normal();
    return t;
}

double glorot(int fan_in, int fan_out) { return std::sqrt(2.0 / double(fan_in + fan_out)); }

}  // namespace

ModelParams init_params(const NetworkConfig& cfg, uint64_t seed) {
    cfg.validate();
    CounterRng rng = CounterRng(seed).fork(0x1417);
    ModelParams p;
    p.cfg = cfg;

    const int wf = cfg.window_frames() * cfg.cond_dim;
    p.conv_w = randn(cfg.cond_proj, wf, glorot(wf, cfg.cond_proj), rng);
    p.conv_b = Tensor(1, cfg.cond_proj);
    p.embed_coarse = randn(cfg.head_bins, cfg.embed_dim, 0.1, rng);
    p.embed_fine = randn(cfg.head_bins, cfg.embed_dim, 0.1, rng);

    const int hs = cfg.sparse_units;
    p.gru_sparse.w_ih = randn(3 * hs, cfg.sparse_input(), glorot(cfg.sparse_input(), hs), rng);
    p.gru_sparse.b_ih = Tensor(1, 3 * hs);
    p.gru_sparse.w_hh_update = randn(hs, hs, glorot(hs, hs), rng);
    p.gru_sparse.w_hh_reset = randn(hs, hs, glorot(hs, hs), rng);
    p.gru_sparse.w_hh_new = randn(hs, hs, glorot(hs, hs), rng);
    p.gru_sparse.b_hh = Tensor(1, 3 * hs);
    p.gru_sparse.mask_update = Tensor(hs, hs, 1.0);
    p.gru_sparse.mask_reset = Tensor(hs, hs, 1.0);
    p.gru_sparse.mask_new = Tensor(hs, hs, 1.0);

    const int hd = cfg.dense_units;
    auto make_gru = [&](int in) {
        GruParams g;
        g.w_ih = randn(3 * hd, in, glorot(in, hd), rng);
        g.b_ih = Tensor(1, 3 * hd);
        g.w_hh = randn(3 * hd, hd, glorot(hd, hd), rng);
        g.b_hh = Tensor(1, 3 * hd);
        return g;
    };
    p.gru_coarse = make_gru(cfg.coarse_input());
    p.gru_fine = make_gru(cfg.fine_input());

    auto make_fc = [&]() {
        DualFcParams f;
        const int out = cfg.head_out();
        f.w1 = randn(out, hd, glorot(hd, out), rng);
        f.w2 = randn(out, hd, glorot(hd, out), rng);
        f.b1 = Tensor(1, out);
        f.b2 = Tensor(1, out);
        f.lambda1 = Tensor(1, out);
        f.lambda2 = Tensor(1, out);
        return f;
    };
    p.fc_coarse = make_fc();
    p.fc_fine = make_fc();

    auto make_res = [&]() {
        ResidualParams r;
        r.w1 = randn(cfg.residual_hidden, cfg.logit_latent, glorot(cfg.logit_latent, cfg.residual_hidden), rng);
        r.b1 = Tensor(1, cfg.residual_hidden);
        r.w2 = randn(cfg.head_bins, cfg.residual_hidden, glorot(cfg.residual_hidden, cfg.head_bins), rng);
        r.b2 = Tensor(1, cfg.head_bins);
        return r;
    };
    p.res_coarse = make_res();
    p.res_fine = make_res();
    return p;
}

void apply_sparse_masks(ModelParams& p) {
    auto mask_one = [](Tensor& w, const Tensor& m) {
        for (size_t i = 0; i < w.size(); ++i)
            if (m.v[i] == 0.0) w.v[i] = 0.0;
    };
    mask_one(p.gru_sparse.w_hh_update, p.gru_sparse.mask_update);
    mask_one(p.gru_sparse.w_hh_reset, p.gru_sparse.mask_reset);
    mask_one(p.gru_sparse.w_hh_new, p.gru_sparse.mask_new);
}

std::array<double, 3> measured_densities(const ModelParams& p) {
    auto density = [](const Tensor& m) {
        double nz = 0.0;
        for (double v : m.v) nz += (v != 0.0) ? 1.0 : 0.0;
        return nz / double(m.size());
    };
    return {density(p.gru_sparse.mask_update), density(p.gru_sparse.mask_reset),
            density(p.gru_sparse.mask_new)};
}

BoundParams bind_params(Tape& tape, ModelParams& p, bool trainable) {
    BoundParams bp;
    bp.cfg = &p.cfg;
    auto named = named_tensors(p);
    bp.leaves.reserve(named.size());
    for (auto& nt : named) bp.leaves.push_back(tape.leaf(*nt.tensor, trainable));

    // Same order as named_tensors().
    size_t i = 0;
    bp.conv_w = bp.leaves[i++];
    bp.conv_b = bp.leaves[i++];
    bp.embed_coarse = bp.leaves[i++];
    bp.embed_fine = bp.leaves[i++];
    bp.sp_w_ih = bp.leaves[i++];
    bp.sp_b_ih = bp.leaves[i++];
    Var wu = bp.leaves[i++];
    Var wr = bp.leaves[i++];
    Var wn = bp.leaves[i++];
    bp.sp_b_hh = bp.leaves[i++];
    bp.coarse = {bp.leaves[i], bp.leaves[i + 1], bp.leaves[i + 2], bp.leaves[i + 3]};
    i += 4;
    bp.fine = {bp.leaves[i], bp.leaves[i + 1], bp.leaves[i + 2], bp.leaves[i + 3]};
    i += 4;
    bp.fc_coarse = {bp.leaves[i], bp.leaves[i + 2], bp.leaves[i + 1], bp.leaves[i + 3],
                    bp.leaves[i + 4], bp.leaves[i + 5]};
    i += 6;
    bp.fc_fine = {bp.leaves[i], bp.leaves[i + 2], bp.leaves[i + 1], bp.leaves[i + 3],
                  bp.leaves[i + 4], bp.leaves[i + 5]};
    i += 6;
    bp.res_coarse = {bp.leaves[i], bp.leaves[i + 1], bp.leaves[i + 2], bp.leaves[i + 3]};
    i += 4;
    bp.res_fine = {bp.leaves[i], bp.leaves[i + 1], bp.leaves[i + 2], bp.leaves[i + 3]};
    i += 4;

    // Masked entries contribute nothing forward and receive no gradient.
    bp.sp_w_update = tape.mul(wu, tape.constant(p.gru_sparse.mask_update));
    bp.sp_w_reset = tape.mul(wr, tape.constant(p.gru_sparse.mask_reset));
    bp.sp_w_new = tape.mul(wn, tape.constant(p.gru_sparse.mask_new));
    return bp;
}

Var segmental_conv(Tape& tape, Var window, const BoundParams& bp) {
    const NetworkConfig& cfg = *bp.cfg;
    if (tape.val(window).cols != cfg.window_frames() * cfg.cond_dim)
        throw std::invalid_argument("segmental_conv: window width mismatch");
    return tape.relu(tape.linear(window, bp.conv_w, bp.conv_b));
}

Var gru_step(Tape& tape, Var x, Var h, const GruVars& g) {
    const int units = tape.val(h).cols;
    Var xg = tape.linear(x, g.w_ih, g.b_ih);
    Var hg = tape.linear(h, g.w_hh, g.b_hh);
    Var z = tape.sigmoid(tape.add(tape.slice_cols(xg, 0, units), tape.slice_cols(hg, 0, units)));
    Var r = tape.sigmoid(
        tape.add(tape.slice_cols(xg, units, 2 * units), tape.slice_cols(hg, units, 2 * units)));
    Var n = tape.tanh_op(tape.add(tape.slice_cols(xg, 2 * units, 3 * units),
                                  tape.mul(r, tape.slice_cols(hg, 2 * units, 3 * units))));
    // h' = (1 - z) * n + z * h
    return tape.add(n, tape.mul(z, tape.sub(h, n)));
}

Var sparse_gru_step(Tape& tape, Var x, Var h, const BoundParams& bp) {
    const int units = tape.val(h).cols;
    Var xg = tape.linear(x, bp.sp_w_ih, bp.sp_b_ih);
    Var hz = tape.linear(h, bp.sp_w_update, tape.slice_cols(bp.sp_b_hh, 0, units));
    Var hr = tape.linear(h, bp.sp_w_reset, tape.slice_cols(bp.sp_b_hh, units, 2 * units));
    Var hn = tape.linear(h, bp.sp_w_new, tape.slice_cols(bp.sp_b_hh, 2 * units, 3 * units));
    Var z = tape.sigmoid(tape.add(tape.slice_cols(xg, 0, units), hz));
    Var r = tape.sigmoid(tape.add(tape.slice_cols(xg, units, 2 * units), hr));
    Var n = tape.tanh_op(tape.add(tape.slice_cols(xg, 2 * units, 3 * units), tape.mul(r, hn)));
    return tape.add(n, tape.mul(z, tape.sub(h, n)));
}

Var dual_fc_head(Tape& tape, Var h, const DualFcVars& fc, const NetworkConfig& cfg) {
    const int mk = cfg.bands * cfg.lp_order;
    const int out = cfg.head_out();
    auto channel = [&](Var w, Var b) {
        Var raw = tape.linear(h, w, b);
        if (mk == 0) return raw;  // K = 0: the head is latent-only
        Var signs = tape.tanh_op(tape.slice_cols(raw, 0, mk));
        Var mags = tape.exp_op(tape.slice_cols(raw, mk, 2 * mk));
        Var lat = tape.slice_cols(raw, 2 * mk, out);
        return tape.concat_cols({signs, mags, lat});
    };
    Var c1 = tape.mul_rowvec(channel(fc.w1, fc.b1), tape.exp_op(fc.lambda1));
    Var c2 = tape.mul_rowvec(channel(fc.w2, fc.b2), tape.exp_op(fc.lambda2));
    return tape.scale(tape.add(c1, c2), 0.5);
}

HeadOut split_head(Tape& tape, Var head, const NetworkConfig& cfg) {
    const int mk = cfg.bands * cfg.lp_order;
    const int out = cfg.head_out();
    HeadOut ho;
    if (cfg.lp_order > 0) {
        Var signs = tape.split_cols_to_rows(tape.slice_cols(head, 0, mk), cfg.bands);
        Var mags = tape.split_cols_to_rows(tape.slice_cols(head, mk, 2 * mk), cfg.bands);
        ho.lp_coeff = tape.mul(signs, mags);
    }
    ho.latent = tape.split_cols_to_rows(tape.slice_cols(head, 2 * mk, out), cfg.bands);
    return ho;
}

Var residual_logits(Tape& tape, Var latent, const ResidualVars& rv) {
    Var hidden = tape.relu(tape.linear(latent, rv.w1, rv.b1));
    return tape.tanhshrink(tape.linear(hidden, rv.w2, rv.b2));
}

Var embed_bins(Tape& tape, Var table, const std::vector<int>& bins, int batch, int bands) {
    if (int(bins.size()) != batch * bands) throw std::invalid_argument("embed_bins: size mismatch");
    Var rows = tape.gather_rows(table, bins);
    return tape.merge_rows_to_cols(rows, bands);  // [batch, bands*embed]
}

namespace {

Var head_logits(Tape& tape, const BoundParams& bp, Var gru_hidden, const DualFcVars& fc,
                const ResidualVars& rv, const std::vector<std::vector<int>>& hist) {
    const NetworkConfig& cfg = *bp.cfg;
    Var head = dual_fc_head(tape, gru_hidden, fc, cfg);
    HeadOut ho = split_head(tape, head, cfg);
    Var logits = residual_logits(tape, ho.latent, rv);
    if (cfg.lp_order == 0) return logits;  // empty sum: pure residual
    return tape.lp_combine(logits, ho.lp_coeff, hist);
}

}  // namespace

CoarseStep coarse_step(Tape& tape, const BoundParams& bp, const StepVars& state, Var cond,
                       const std::vector<int>& prev_coarse, const std::vector<int>& prev_fine,
                       const std::vector<std::vector<int>>& hist_coarse) {
    const NetworkConfig& cfg = *bp.cfg;
    const int batch = tape.val(cond).rows;
    Var emb_c = embed_bins(tape, bp.embed_coarse, prev_coarse, batch, cfg.bands);
    Var emb_f = embed_bins(tape, bp.embed_fine, prev_fine, batch, cfg.bands);
    Var x_sparse = tape.concat_cols({cond, emb_c, emb_f});
    Var h_sparse = sparse_gru_step(tape, x_sparse, state.h_sparse, bp);

    Var x_coarse = tape.concat_cols({h_sparse, cond});
    Var h_coarse = gru_step(tape, x_coarse, state.h_coarse, bp.coarse);

    CoarseStep out;
    out.logits = head_logits(tape, bp, h_coarse, bp.fc_coarse, bp.res_coarse, hist_coarse);
    out.h_sparse = h_sparse;
    out.h_coarse = h_coarse;
    return out;
}

FineStep fine_step(Tape& tape, const BoundParams& bp, const StepVars& state, Var cond,
                   Var h_coarse_new, const std::vector<int>& cur_coarse,
                   const std::vector<std::vector<int>>& hist_fine) {
    const NetworkConfig& cfg = *bp.cfg;
    const int batch = tape.val(cond).rows;
    Var emb_cur = embed_bins(tape, bp.embed_coarse, cur_coarse, batch, cfg.bands);
    Var x_fine = tape.concat_cols({h_coarse_new, cond, emb_cur});
    FineStep out;
    out.h_fine = gru_step(tape, x_fine, state.h_fine, bp.fine);
    out.logits = head_logits(tape, bp, out.h_fine, bp.fc_fine, bp.res_fine, hist_fine);
    return out;
}

StepLogits full_step(Tape& tape, const BoundParams& bp, const StepVars& state, Var cond,
                     const std::vector<int>& prev_coarse, const std::vector<int>& prev_fine,
                     const std::vector<int>& cur_coarse,
                     const std::vector<std::vector<int>>& hist_coarse,
                     const std::vector<std::vector<int>>& hist_fine) {
    CoarseStep cs = coarse_step(tape, bp, state, cond, prev_coarse, prev_fine, hist_coarse);
    FineStep fs = fine_step(tape, bp, state, cond, cs.h_coarse, cur_coarse, hist_fine);

    StepLogits out;
    out.coarse = cs.logits;
    out.fine = fs.logits;
    out.state = {cs.h_sparse, cs.h_coarse, fs.h_fine};
    return out;
}

}  // namespace mwdlp
