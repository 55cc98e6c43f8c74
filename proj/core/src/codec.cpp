#include "mwdlp/codec.h"

#include <algorithm>
#include <cmath>

namespace mwdlp {

int mulaw_encode(double x, const MuLawSpec& spec) {
    x = std::clamp(x, -1.0, 1.0);
    const double mu = static_cast<double>(spec.mu);
    const double c = std::copysign(std::log1p(mu * std::abs(x)) / std::log1p(mu), x);
    const int idx = static_cast<int>(std::floor((c + 1.0) * 0.5 * spec.bins_total));
    return std::clamp(idx, 0, spec.bins_total - 1);
}

double mulaw_decode(int index, const MuLawSpec& spec) {
    return mulaw_decode_real(static_cast<double>(index), spec);
}

double mulaw_decode_real(double index, const MuLawSpec& spec) {
    const double mu = static_cast<double>(spec.mu);
    // Bin center of (possibly fractional) bin `index`.
    const double c = (2.0 * index + 1.0) / spec.bins_total - 1.0;
    return std::copysign((std::exp(std::abs(c) * std::log1p(mu)) - 1.0) / mu, c);
}

double mulaw_decode_real_deriv(double index, const MuLawSpec& spec) {
    const double mu = static_cast<double>(spec.mu);
    const double lm = std::log1p(mu);
    const double c = (2.0 * index + 1.0) / spec.bins_total - 1.0;
    // d amplitude / d index; the |c| kink at c=0 is interior to a bin and
    // never lands on a sample point.
    return (2.0 / spec.bins_total) * (lm / mu) * std::exp(std::abs(c) * lm);
}

}  // namespace mwdlp
