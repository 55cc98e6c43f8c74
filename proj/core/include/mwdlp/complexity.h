#pragma once

#include <array>

#include "mwdlp/model.h"

namespace mwdlp {

// Band-rate inference cost model, multiply-accumulates x2 flops at the
// band rate. Counted per band step: the sparse GRU recurrent kernels at
// their target densities, the dense GRUs' per-step matmuls (coarse reads
// the sparse GRU state; the fine branch reads the coarse GRU state, with
// embedding contributions via precomputed tables), both DualFC channels,
// the per-band residual FCs, and the LP coefficient products/adds.
// Embedding table row-adds and the frame-rate conditioning kernels carry
// no per-step multiplies; they are reported separately and excluded from
// the band-rate headline, matching how the engine amortizes them.
struct ComplexityReport {
    double band_rate_hz = 0.0;
    double sparse_recurrent = 0.0;  // GFLOPS
    double dense_grus = 0.0;
    double dualfc = 0.0;
    double residual_fc = 0.0;
    double lp_combination = 0.0;
    double total_gflops = 0.0;      // band-rate module headline

    double embed_lookup_gflops = 0.0;  // table adds at band rate (1 flop each)
    double frame_rate_gflops = 0.0;    // conditioning kernels at frame rate
};

ComplexityReport complexity_gflops(const NetworkConfig& cfg,
                                   std::array<double, 3> densities = {0.09, 0.09, 0.12});

}  // namespace mwdlp
