#pragma once

#include <cstdint>

namespace mwdlp {

// 10-bit mu-law companding with a 5-bit coarse / 5-bit fine split.
// The companded value c in [-1, 1] is quantized uniformly into 1024 bins
// and decoded at bin centers (centers minimize round-trip error; the bin
// convention is ours, not standardized for 10 bits).
struct MuLawSpec {
    int bits = 10;
    int mu = 1023;          // 2^bits - 1
    int bins_total = 1024;  // coarse_bins * fine_bins
    int coarse_bins = 32;
    int fine_bins = 32;

    bool valid() const {
        return bins_total == coarse_bins * fine_bins && mu == bins_total - 1;
    }
};

// Amplitude in [-1, 1] (clamped) -> bin index in [0, bins_total).
int mulaw_encode(double x, const MuLawSpec& spec = {});

// Bin index -> bin-center amplitude. Strictly increasing in index.
double mulaw_decode(int index, const MuLawSpec& spec = {});

// Continuous extension of mulaw_decode over real-valued bin positions.
// Used by the soft discretization path, which needs f and f' at the
// (relaxed) sampled bin.
double mulaw_decode_real(double index, const MuLawSpec& spec = {});
double mulaw_decode_real_deriv(double index, const MuLawSpec& spec = {});

inline int split_coarse(int index) { return index >> 5; }
inline int split_fine(int index) { return index & 31; }
inline int merge_coarse_fine(int coarse, int fine) { return (coarse << 5) | fine; }

}  // namespace mwdlp
