#include "mwdlp/complexity.h"

namespace mwdlp {

ComplexityReport complexity_gflops(const NetworkConfig& cfg, std::array<double, 3> densities) {
    cfg.validate();
    const double hs = cfg.sparse_units;
    const double hd = cfg.dense_units;
    const double mm = cfg.bands;
    const double kk = cfg.lp_order;
    const double band_rate = double(cfg.sample_rate) / mm;
    const double frame_rate = double(cfg.sample_rate) / cfg.frame_shift;

    ComplexityReport rep;
    rep.band_rate_hz = band_rate;

    const double to_gflops = 2.0 * band_rate / 1e9;  // MAC x2 at band rate

    rep.sparse_recurrent = (densities[0] + densities[1] + densities[2]) * hs * hs * to_gflops;
    // Coarse GRU consumes the sparse state per step; the fine GRU consumes
    // the coarse state. Conditioning slices are frame-rate, embedding
    // contributions are table adds; neither appears here.
    const double coarse_macs = 3.0 * hd * (hs + hd);
    const double fine_macs = 3.0 * hd * (hd + hd);
    rep.dense_grus = (coarse_macs + fine_macs) * to_gflops;
    rep.dualfc = 2.0 * 2.0 * hd * double(cfg.head_out()) * to_gflops;
    rep.residual_fc = 2.0 * mm *
                      (double(cfg.residual_hidden) * cfg.logit_latent +
                       double(cfg.head_bins) * cfg.residual_hidden) *
                      to_gflops;
    rep.lp_combination = 2.0 * mm * kk * to_gflops;
    rep.total_gflops = rep.sparse_recurrent + rep.dense_grus + rep.dualfc + rep.residual_fc +
                       rep.lp_combination;

    // 1-flop adds per table row element: 2M rows of 3H into the sparse GRU,
    // M rows of 3h into the fine GRU.
    rep.embed_lookup_gflops =
        (2.0 * mm * 3.0 * hs + mm * 3.0 * hd) * band_rate / 1e9;
    // Frame-rate kernels: segmental conv + the three conditioning slices.
    const double frame_macs = double(cfg.window_frames()) * cfg.cond_dim * cfg.cond_proj +
                              double(cfg.cond_proj) * 3.0 * hs +
                              2.0 * double(cfg.cond_proj) * 3.0 * hd;
    rep.frame_rate_gflops = 2.0 * frame_macs * frame_rate / 1e9;
    return rep;
}

}  // namespace mwdlp
