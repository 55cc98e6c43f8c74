#pragma once

#include <string>
#include <vector>

namespace mwdlp {

// Mono waveform, samples normalized to [-1, 1].
struct Waveform {
    std::vector<double> samples;
    int sample_rate = 0;

    size_t size() const { return samples.size(); }
    double duration_s() const {
        return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
    }
};

// 16-bit PCM mono RIFF/WAVE. Anything else is rejected.
Waveform wav_read(const std::string& path);
void wav_write(const std::string& path, const Waveform& wave);

}  // namespace mwdlp
