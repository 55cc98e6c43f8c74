#include "mwdlp/featfile.h"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace mwdlp {

void feat_save(const std::string& path, const std::vector<std::vector<double>>& frames) {
    if (frames.empty()) throw std::invalid_argument("feat_save: no frames");
    const uint32_t count = uint32_t(frames.size());
    const uint32_t dim = uint32_t(frames[0].size());

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write feature file: " + path);
    out.write("MWFE", 4);
    auto u32 = [&](uint32_t v) {
        char b[4] = {char(v), char(v >> 8), char(v >> 16), char(v >> 24)};
        out.write(b, 4);
    };
    u32(count);
    u32(dim);
    for (const auto& f : frames) {
        if (f.size() != dim) throw std::invalid_argument("feat_save: ragged frames");
        for (double v : f) {
            const float x = float(v);
            uint32_t u;
            std::memcpy(&u, &x, 4);
            u32(u);
        }
    }
    if (!out) throw std::runtime_error("short write on feature file: " + path);
}

std::vector<std::vector<double>> feat_load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open feature file: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "MWFE", 4) != 0)
        throw std::runtime_error("bad feature file magic: " + path);
    auto u32 = [&]() {
        unsigned char b[4];
        in.read(reinterpret_cast<char*>(b), 4);
        return uint32_t(b[0]) | (uint32_t(b[1]) << 8) | (uint32_t(b[2]) << 16) | (uint32_t(b[3]) << 24);
    };
    const uint32_t count = u32();
    const uint32_t dim = u32();
    if (!in || count == 0 || dim == 0 || uint64_t(count) * dim > (uint64_t(1) << 31))
        throw std::runtime_error("feature file has absurd header: " + path);
    std::vector<std::vector<double>> frames(count, std::vector<double>(dim));
    for (auto& f : frames) {
        for (double& v : f) {
            const uint32_t u = u32();
            float x;
            std::memcpy(&x, &u, 4);
            v = double(x);
        }
    }
    if (!in) throw std::runtime_error("feature file truncated: " + path);
    return frames;
}

}  // namespace mwdlp
