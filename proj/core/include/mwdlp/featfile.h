#pragma once

#include <string>
#include <vector>

namespace mwdlp {

// Conditioning feature container: magic "MWFE", u32 frame count, u32 dim,
// f32 payload frame-major. Little-endian.
void feat_save(const std::string& path, const std::vector<std::vector<double>>& frames);
std::vector<std::vector<double>> feat_load(const std::string& path);

}  // namespace mwdlp
