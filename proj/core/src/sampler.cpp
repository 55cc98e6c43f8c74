#include "mwdlp/sampler.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mwdlp {

namespace {
constexpr double kEps = 1e-12;
}

GumbelDraw draw_gumbel(CounterRng& rng, int rows, int bins) {
    GumbelDraw d;
    d.noise = Tensor(rows, bins);
    for (double& g : d.noise.v) {
        const double u = std::clamp(rng.next_open01(), kEps, 1.0 - kEps);
        g = -std::log(-std::log(u));
    }
    return d;
}

Var gumbel_logits(Tape& tape, Var logits, const GumbelDraw& draw) {
    if (!tape.val(logits).same_shape(draw.noise))
        throw std::invalid_argument("gumbel_logits: draw shape mismatch");
    return tape.add(logits, tape.constant(draw.noise));
}

int sample_bin(std::span<const double> logits, CounterRng& rng) {
    int best = 0;
    double best_v = -1e300;
    for (size_t b = 0; b < logits.size(); ++b) {
        const double u = std::clamp(rng.next_open01(), kEps, 1.0 - kEps);
        const double g = logits[b] - std::log(-std::log(u));
        if (g > best_v) {
            best_v = g;
            best = int(b);
        }
    }
    return best;
}

std::vector<int> argmax_rows(const Tensor& t) {
    std::vector<int> idx(size_t(t.rows));
    for (int r = 0; r < t.rows; ++r) {
        const double* row = t.row(r);
        int best = 0;
        for (int c = 1; c < t.cols; ++c)
            if (row[c] > row[best]) best = c;
        idx[size_t(r)] = best;
    }
    return idx;
}

void softmax_row(std::span<const double> logits, std::span<double> out) {
    double mx = -1e300;
    for (double v : logits) mx = std::max(mx, v);
    double z = 0.0;
    for (size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - mx);
        z += out[i];
    }
    for (size_t i = 0; i < out.size(); ++i) out[i] /= z;
}

Var soft_discretize(Tape& tape, Var gamma_coarse, Var gamma_fine, std::vector<int> jc,
                    std::vector<int> jf, const MuLawSpec& spec) {
    const Tensor& gc = tape.val(gamma_coarse);
    const Tensor& gf = tape.val(gamma_fine);
    if (gc.rows != gf.rows || gc.cols != spec.coarse_bins || gf.cols != spec.fine_bins)
        throw std::invalid_argument("soft_discretize: shape mismatch");
    if (int(jc.size()) != gc.rows || int(jf.size()) != gc.rows)
        throw std::invalid_argument("soft_discretize: argmax count mismatch");

    const int rows = gc.rows;
    Tensor out(rows, 1);
    // Saved softmax rows for the backward pass.
    Tensor pc(rows, gc.cols), pf(rows, gf.cols);
    for (int r = 0; r < rows; ++r) {
        softmax_row({gc.row(r), size_t(gc.cols)}, {pc.row(r), size_t(pc.cols)});
        softmax_row({gf.row(r), size_t(gf.cols)}, {pf.row(r), size_t(pf.cols)});
        out.at(r, 0) = mulaw_decode(merge_coarse_fine(jc[size_t(r)], jf[size_t(r)]), spec);
    }

    if (!tape.grad_enabled() ||
        (!tape.requires_grad(gamma_coarse) && !tape.requires_grad(gamma_fine)))
        return tape.push(std::move(out), false, nullptr);

    Var y{int(tape.node_count())};
    auto bw = [&tape, gamma_coarse, gamma_fine, jc = std::move(jc), jf = std::move(jf),
               pc = std::move(pc), pf = std::move(pf), spec, y]() {
        const Tensor& dy = tape.grad(y);
        const int rows2 = dy.rows;
        for (int r = 0; r < rows2; ++r) {
            const double g = dy.at(r, 0);
            if (g == 0.0) continue;
            const int c_bin = jc[size_t(r)];
            const int f_bin = jf[size_t(r)];
            const double fprime =
                mulaw_decode_real_deriv(double(merge_coarse_fine(c_bin, f_bin)), spec);
            // d s / d gamma_c[b] = f' * B_fine * (jc+1) * (delta - pc[b]);
            // the pc[jc]/Dc factor is 1 with the denominator held constant.
            if (tape.requires_grad(gamma_coarse)) {
                tape.ensure_grad(gamma_coarse);
                Tensor& dgc = tape.grad_ref(gamma_coarse);
                const double w = g * fprime * double(spec.fine_bins) * double(c_bin + 1);
                for (int b = 0; b < pc.cols; ++b)
                    dgc.at(r, b) += w * ((b == c_bin ? 1.0 : 0.0) - pc.at(r, b));
            }
            if (tape.requires_grad(gamma_fine)) {
                tape.ensure_grad(gamma_fine);
                Tensor& dgf = tape.grad_ref(gamma_fine);
                const double w = g * fprime * double(f_bin + 1);
                for (int b = 0; b < pf.cols; ++b)
                    dgf.at(r, b) += w * ((b == f_bin ? 1.0 : 0.0) - pf.at(r, b));
            }
        }
    };
    return tape.push(std::move(out), true, std::move(bw));
}

double soft_discretize_relaxed(std::span<const double> gamma_c, std::span<const double> gamma_f,
                               int jc, int jf, double dc, double df, const MuLawSpec& spec) {
    std::vector<double> pc(gamma_c.size()), pf(gamma_f.size());
    softmax_row(gamma_c, pc);
    softmax_row(gamma_f, pf);
    const double c_rel = double(jc + 1) * pc[size_t(jc)] / dc;
    const double f_rel = double(jf + 1) * pf[size_t(jf)] / df;
    const double merged = double(spec.fine_bins) * (c_rel - 1.0) + (f_rel - 1.0);
    return mulaw_decode_real(merged, spec);
}

}  // namespace mwdlp
