#pragma once

#include <vector>

#include "mwdlp/wav.h"

namespace mwdlp {

struct PqmfConfig {
    int bands = 6;
    int prototype_order = 410;    // filter length is order + 1
    double kaiser_beta = 43.12126;
    double cutoff_ratio = 0.1;    // fraction of Nyquist

    static PqmfConfig for_24k() { return {6, 410, 43.12126, 0.1}; }
    static PqmfConfig for_16k() { return {4, 274, 43.12126, 0.15}; }
};

// M band-rate streams; bands[m] has length T / M.
struct SubbandTensor {
    std::vector<std::vector<double>> bands;

    int band_count() const { return static_cast<int>(bands.size()); }
    size_t band_length() const { return bands.empty() ? 0 : bands[0].size(); }
};

// Cosine-modulated pseudo-QMF bank over a Kaiser-windowed sinc prototype.
// Modulation convention (phase +/- pi/4 alternating per band, as in the
// multiband neural-vocoder literature):
//   analysis:  h_k[n] = 2 p[n] cos((2k+1) pi/(2M) (n - N/2) + (-1)^k pi/4)
//   synthesis: g_k[n] = 2 p[n] cos((2k+1) pi/(2M) (n - N/2) - (-1)^k pi/4)
// The convention is validated by the round-trip SNR property, not by
// coefficient comparison. The operating cutoff is refined at design time so
// the prototype is power-complementary at the band crossover (the cascade
// distortion function is flat only under that condition; the configured
// ratio alone leaves an 11 dB round trip for the production orders).
// Synthesis filters are rescaled so the cascade has unity DC gain.
class PqmfBank {
public:
    explicit PqmfBank(const PqmfConfig& cfg);

    const PqmfConfig& config() const { return cfg_; }
    double operating_cutoff() const { return operating_cutoff_; }
    const std::vector<double>& prototype() const { return proto_; }
    const std::vector<std::vector<double>>& analysis_filters() const { return h_; }
    const std::vector<std::vector<double>>& synthesis_filters() const { return g_; }

    // Round-trip delay of analyze + synthesize, in full-band samples.
    int delay() const { return cfg_.prototype_order; }

    // Filter + decimate. Input is zero-padded at the tail to a multiple of M.
    SubbandTensor analyze(const Waveform& wave) const;

    // Upsample + filter + sum. Output length = band_length * M.
    Waveform synthesize(const SubbandTensor& bands, int sample_rate) const;

private:
    PqmfConfig cfg_;
    double operating_cutoff_ = 0.0;
    std::vector<double> proto_;
    std::vector<std::vector<double>> h_;
    std::vector<std::vector<double>> g_;
};

// Kaiser-windowed sinc lowpass, unity DC gain, length order+1 taps.
std::vector<double> kaiser_sinc_prototype(int order, double beta, double cutoff_ratio);

}  // namespace mwdlp
