#pragma once

#include <span>
#include <vector>

#include "mwdlp/codec.h"
#include "mwdlp/rng.h"
#include "mwdlp/tape.h"

namespace mwdlp {

// Standard Gumbel noise g = -log(-log(u)), u uniform in (0,1) clamped to
// [eps, 1-eps], eps = 1e-12.
struct GumbelDraw {
    Tensor noise;
};

GumbelDraw draw_gumbel(CounterRng& rng, int rows, int bins);

// gamma = logits + g. The draw is a constant on the tape.
Var gumbel_logits(Tape& tape, Var logits, const GumbelDraw& draw);

// Gumbel-max categorical sample: argmax(logits + g) ~ softmax(logits).
int sample_bin(std::span<const double> logits, CounterRng& rng);

// Argmax helper for rows of a perturbed-logit tensor.
std::vector<int> argmax_rows(const Tensor& t);

// Soft discretization across the coarse/fine pair. Forward emits exactly
// mulaw_decode(merge(jc, jf)) per row. Backward treats each head's
// max-probability denominator as a constant and flows through the relaxed
// merged index
//   x = 32*((jc+1) * pc[jc]/Dc - 1) + ((jf+1) * pf[jf]/Df - 1),
// which equals merge(jc, jf) in the forward pass. The 1-based bin weights
// keep bin 0 on the gradient path. jc/jf are the per-row argmaxes of the
// perturbed logits; live callers compute them with argmax_rows, test
// oracles may freeze them.
Var soft_discretize(Tape& tape, Var gamma_coarse, Var gamma_fine, std::vector<int> jc,
                    std::vector<int> jf, const MuLawSpec& spec = {});

// The relaxed forward expression with frozen (jc, jf, Dc, Df), used by
// finite-difference oracles. Evaluates one row.
double soft_discretize_relaxed(std::span<const double> gamma_c, std::span<const double> gamma_f,
                               int jc, int jf, double dc, double df, const MuLawSpec& spec = {});

// Row softmax into `out` (size = input size), numerically stable.
void softmax_row(std::span<const double> logits, std::span<double> out);

}  // namespace mwdlp
