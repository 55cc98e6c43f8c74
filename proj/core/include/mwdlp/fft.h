#pragma once

#include <cstddef>
#include <vector>

namespace mwdlp {

// Iterative radix-2 DIT FFT. Lengths must be powers of two.
// One table per length is cached per instance, so reuse instances in loops.
class Fft {
public:
    explicit Fft(size_t n);

    size_t size() const { return n_; }

    // In-place complex transform on interleaved (re, im) pairs, length 2n.
    void forward(double* reim) const;
    void inverse(double* reim) const;  // unscaled adjoint: forward with conjugated twiddles

    // Real input of length n -> n/2+1 interleaved complex bins.
    void rfft(const double* in, double* out_reim) const;

    // Adjoint of rfft: n/2+1 interleaved complex bins -> real signal of length n.
    // This is the transpose map, not a normalized inverse; it is what the
    // backward pass of a spectral loss needs.
    void rfft_adjoint(const double* in_reim, double* out) const;

    static bool is_pow2(size_t n) { return n != 0 && (n & (n - 1)) == 0; }

private:
    void transform(double* reim, bool inv) const;

    size_t n_;
    std::vector<size_t> rev_;
    std::vector<double> tw_;  // twiddles per stage, interleaved re/im
};

}  // namespace mwdlp
