#include "mwdlp/fft.h"

#include <cmath>
#include <stdexcept>

namespace mwdlp {

namespace {
constexpr double kTau = 6.283185307179586476925286766559;
}

Fft::Fft(size_t n) : n_(n) {
    if (!is_pow2(n)) throw std::invalid_argument("fft length must be a power of two");
    rev_.resize(n);
    size_t log2n = 0;
    while ((size_t(1) << log2n) < n) ++log2n;
    for (size_t i = 0; i < n; ++i) {
        size_t r = 0;
        for (size_t b = 0; b < log2n; ++b)
            if (i & (size_t(1) << b)) r |= size_t(1) << (log2n - 1 - b);
        rev_[i] = r;
    }
    // Twiddles for each stage, laid out stage by stage.
    tw_.clear();
    for (size_t len = 2; len <= n; len <<= 1) {
        for (size_t k = 0; k < len / 2; ++k) {
            const double ang = -kTau * double(k) / double(len);
            tw_.push_back(std::cos(ang));
            tw_.push_back(std::sin(ang));
        }
    }
}

void Fft::transform(double* x, bool inv) const {
    const size_t n = n_;
    for (size_t i = 0; i < n; ++i) {
        const size_t j = rev_[i];
        if (i < j) {
            std::swap(x[2 * i], x[2 * j]);
            std::swap(x[2 * i + 1], x[2 * j + 1]);
        }
    }
    size_t tw_off = 0;
    for (size_t len = 2; len <= n; len <<= 1) {
        const size_t half = len / 2;
        for (size_t base = 0; base < n; base += len) {
            for (size_t k = 0; k < half; ++k) {
                const double wr = tw_[tw_off + 2 * k];
                const double wi = inv ? -tw_[tw_off + 2 * k + 1] : tw_[tw_off + 2 * k + 1];
                double* a = x + 2 * (base + k);
                double* b = x + 2 * (base + k + half);
                const double br = b[0] * wr - b[1] * wi;
                const double bi = b[0] * wi + b[1] * wr;
                b[0] = a[0] - br;
                b[1] = a[1] - bi;
                a[0] += br;
                a[1] += bi;
            }
        }
        tw_off += len;  // half entries * 2 doubles
    }
}

void Fft::forward(double* reim) const { transform(reim, false); }
void Fft::inverse(double* reim) const { transform(reim, true); }

void Fft::rfft(const double* in, double* out) const {
    std::vector<double> buf(2 * n_);
    for (size_t i = 0; i < n_; ++i) {
        buf[2 * i] = in[i];
        buf[2 * i + 1] = 0.0;
    }
    transform(buf.data(), false);
    for (size_t k = 0; k <= n_ / 2; ++k) {
        out[2 * k] = buf[2 * k];
        out[2 * k + 1] = buf[2 * k + 1];
    }
}

void Fft::rfft_adjoint(const double* in, double* out) const {
    // Adjoint of the map real(n) -> complex(n/2+1): expand to the full
    // conjugate-symmetric spectrum's transpose and take the real part.
    std::vector<double> buf(2 * n_, 0.0);
    const size_t h = n_ / 2;
    for (size_t k = 0; k <= h; ++k) {
        buf[2 * k] = in[2 * k];
        buf[2 * k + 1] = in[2 * k + 1];
    }
    transform(buf.data(), true);  // conjugate-transpose of forward
    for (size_t i = 0; i < n_; ++i) out[i] = buf[2 * i];
}

}  // namespace mwdlp
