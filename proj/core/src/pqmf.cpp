#include "mwdlp/pqmf.h"

#include <cmath>
#include <stdexcept>

namespace mwdlp {

namespace {
constexpr double kPi = 3.14159265358979323846264338327950288;

double bessel_i0(double x) {
    // Series expansion; converges for the beta range used here.
    double sum = 1.0, term = 1.0;
    const double q = x * x / 4.0;
    for (int k = 1; k < 300; ++k) {
        term *= q / (double(k) * double(k));
        sum += term;
        if (term < 1e-18 * sum) break;
    }
    return sum;
}
}  // namespace

std::vector<double> kaiser_sinc_prototype(int order, double beta, double cutoff_ratio) {
    if (order < 2 || cutoff_ratio <= 0.0 || cutoff_ratio >= 1.0)
        throw std::invalid_argument("invalid pqmf prototype config");
    const int len = order + 1;
    const double wc = cutoff_ratio * kPi;
    const double center = order / 2.0;
    const double i0b = bessel_i0(beta);

    std::vector<double> p(static_cast<size_t>(len));
    double sum = 0.0;
    for (int n = 0; n < len; ++n) {
        const double t = n - center;
        const double sinc = t == 0.0 ? wc / kPi : std::sin(wc * t) / (kPi * t);
        const double r = 2.0 * n / order - 1.0;
        const double win = bessel_i0(beta * std::sqrt(std::max(0.0, 1.0 - r * r))) / i0b;
        p[size_t(n)] = sinc * win;
        sum += p[size_t(n)];
    }
    for (double& v : p) v /= sum;
    return p;
}

namespace {

// |P(omega)| of a prototype at a single frequency.
double response_at(const std::vector<double>& p, double omega) {
    double re = 0.0, im = 0.0;
    for (size_t n = 0; n < p.size(); ++n) {
        re += p[n] * std::cos(omega * double(n));
        im -= p[n] * std::sin(omega * double(n));
    }
    return std::sqrt(re * re + im * im);
}

// The cascade is near-allpass only if the prototype is power-complementary
// at the band crossover pi/(2M): |P| = 1/sqrt(2) there. The configured
// cutoff alone does not guarantee that for arbitrary (order, beta), so the
// operating cutoff is solved by bisection inside a bracket around the
// crossover; |P(edge)| grows monotonically with the cutoff.
double solve_complementary_cutoff(int order, double beta, int bands) {
    const double edge = kPi / (2.0 * bands);
    double lo = 0.5 / (2.0 * bands);
    double hi = 1.6 / (2.0 * bands);
    for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        const auto p = kaiser_sinc_prototype(order, beta, mid);
        if (response_at(p, edge) > 1.0 / std::sqrt(2.0)) hi = mid;
        else lo = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace

PqmfBank::PqmfBank(const PqmfConfig& cfg) : cfg_(cfg) {
    if (cfg.bands < 2) throw std::invalid_argument("pqmf needs at least 2 bands");
    if (cfg.cutoff_ratio <= 0.0 || cfg.cutoff_ratio >= 1.0)
        throw std::invalid_argument("pqmf cutoff must lie in (0, 1)");
    operating_cutoff_ = solve_complementary_cutoff(cfg.prototype_order, cfg.kaiser_beta, cfg.bands);
    proto_ = kaiser_sinc_prototype(cfg.prototype_order, cfg.kaiser_beta, operating_cutoff_);

    const int m_bands = cfg.bands;
    const int len = cfg.prototype_order + 1;
    const double center = cfg.prototype_order / 2.0;
    h_.assign(size_t(m_bands), std::vector<double>(size_t(len)));
    g_.assign(size_t(m_bands), std::vector<double>(size_t(len)));
    for (int k = 0; k < m_bands; ++k) {
        const double sign = (k % 2 == 0) ? 1.0 : -1.0;
        for (int n = 0; n < len; ++n) {
            const double arg = (2.0 * k + 1.0) * kPi / (2.0 * m_bands) * (n - center);
            h_[size_t(k)][size_t(n)] = 2.0 * proto_[size_t(n)] * std::cos(arg + sign * kPi / 4.0);
            g_[size_t(k)][size_t(n)] = 2.0 * proto_[size_t(n)] * std::cos(arg - sign * kPi / 4.0);
        }
    }

    // Rescale synthesis so the cascade has unity DC gain: push a long DC
    // segment through and measure the settled output level.
    const int probe = 8 * len;
    Waveform dc;
    dc.sample_rate = 1;
    dc.samples.assign(size_t(probe), 1.0);
    const SubbandTensor sub = analyze(dc);
    const Waveform rec = synthesize(sub, 1);
    const double settled = rec.samples[size_t(probe / 2 + cfg.prototype_order / 2)];
    if (std::abs(settled) < 1e-9) throw std::runtime_error("pqmf cascade has no DC gain");
    for (auto& filt : g_)
        for (double& v : filt) v /= settled;
}

SubbandTensor PqmfBank::analyze(const Waveform& wave) const {
    const int m_bands = cfg_.bands;
    const long t_in = static_cast<long>(wave.samples.size());
    const long t_pad = (t_in + m_bands - 1) / m_bands * m_bands;
    const long t_band = t_pad / m_bands;
    const int len = cfg_.prototype_order + 1;

    SubbandTensor out;
    out.bands.assign(size_t(m_bands), std::vector<double>(size_t(t_band), 0.0));
    for (int k = 0; k < m_bands; ++k) {
        const auto& filt = h_[size_t(k)];
        auto& band = out.bands[size_t(k)];
        for (long t = 0; t < t_band; ++t) {
            const long n = t * m_bands;
            double acc = 0.0;
            const int i_max = static_cast<int>(std::min<long>(len - 1, n));
            for (int i = 0; i <= i_max; ++i) {
                const long src = n - i;
                if (src < t_in) acc += filt[size_t(i)] * wave.samples[size_t(src)];
            }
            band[size_t(t)] = acc;
        }
    }
    return out;
}

Waveform PqmfBank::synthesize(const SubbandTensor& bands, int sample_rate) const {
    const int m_bands = cfg_.bands;
    if (bands.band_count() != m_bands)
        throw std::invalid_argument("pqmf band count mismatch");
    const long t_band = static_cast<long>(bands.band_length());
    const int len = cfg_.prototype_order + 1;

    Waveform out;
    out.sample_rate = sample_rate;
    out.samples.assign(size_t(t_band) * m_bands, 0.0);
    // x[tM + j] = M * sum_m sum_r g_m[j + rM] * y_m[t - r]
    for (int k = 0; k < m_bands; ++k) {
        const auto& filt = g_[size_t(k)];
        const auto& band = bands.bands[size_t(k)];
        for (long t = 0; t < t_band; ++t) {
            for (int j = 0; j < m_bands; ++j) {
                double acc = 0.0;
                for (int i = j, r = 0; i < len; i += m_bands, ++r) {
                    const long src = t - r;
                    if (src < 0) break;
                    acc += filt[size_t(i)] * band[size_t(src)];
                }
                out.samples[size_t(t * m_bands + j)] += m_bands * acc;
            }
        }
    }
    return out;
}

}  // namespace mwdlp
