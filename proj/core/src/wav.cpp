#include "mwdlp/wav.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace mwdlp {

namespace {

uint32_t read_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    return b[0] | (b[1] << 8) | (b[2] << 16) | (uint32_t(b[3]) << 24);
}

uint16_t read_u16(std::istream& in) {
    unsigned char b[2];
    in.read(reinterpret_cast<char*>(b), 2);
    return static_cast<uint16_t>(b[0] | (b[1] << 8));
}

void write_u32(std::ostream& out, uint32_t v) {
    char b[4] = {char(v & 0xff), char((v >> 8) & 0xff), char((v >> 16) & 0xff), char((v >> 24) & 0xff)};
    out.write(b, 4);
}

void write_u16(std::ostream& out, uint16_t v) {
    char b[2] = {char(v & 0xff), char((v >> 8) & 0xff)};
    out.write(b, 2);
}

}  // namespace

Waveform wav_read(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open wav file: " + path);

    char tag[4];
    in.read(tag, 4);
    if (std::memcmp(tag, "RIFF", 4) != 0) throw std::runtime_error("not a RIFF file: " + path);
    read_u32(in);  // riff size
    in.read(tag, 4);
    if (std::memcmp(tag, "WAVE", 4) != 0) throw std::runtime_error("not a WAVE file: " + path);

    uint16_t channels = 0, bits = 0, format = 0;
    uint32_t rate = 0;
    bool got_fmt = false;
    Waveform wave;

    while (in.read(tag, 4)) {
        uint32_t chunk_size = read_u32(in);
        if (std::memcmp(tag, "fmt ", 4) == 0) {
            format = read_u16(in);
            channels = read_u16(in);
            rate = read_u32(in);
            read_u32(in);  // byte rate
            read_u16(in);  // block align
            bits = read_u16(in);
            if (chunk_size > 16) in.seekg(chunk_size - 16, std::ios::cur);
            got_fmt = true;
        } else if (std::memcmp(tag, "data", 4) == 0) {
            if (!got_fmt) throw std::runtime_error("wav data before fmt chunk: " + path);
            if (format != 1 || bits != 16) throw std::runtime_error("wav must be 16-bit PCM: " + path);
            if (channels != 1) throw std::runtime_error("wav must be mono: " + path);
            const size_t n = chunk_size / 2;
            std::vector<int16_t> raw(n);
            in.read(reinterpret_cast<char*>(raw.data()), std::streamsize(chunk_size));
            wave.samples.resize(n);
            for (size_t i = 0; i < n; ++i) wave.samples[i] = raw[i] / 32768.0;
            wave.sample_rate = static_cast<int>(rate);
            return wave;
        } else {
            in.seekg(chunk_size + (chunk_size & 1), std::ios::cur);
        }
    }
    throw std::runtime_error("wav has no data chunk: " + path);
}

void wav_write(const std::string& path, const Waveform& wave) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write wav file: " + path);

    const uint32_t data_bytes = static_cast<uint32_t>(wave.samples.size() * 2);
    out.write("RIFF", 4);
    write_u32(out, 36 + data_bytes);
    out.write("WAVE", 4);
    out.write("fmt ", 4);
    write_u32(out, 16);
    write_u16(out, 1);  // PCM
    write_u16(out, 1);  // mono
    write_u32(out, static_cast<uint32_t>(wave.sample_rate));
    write_u32(out, static_cast<uint32_t>(wave.sample_rate * 2));
    write_u16(out, 2);
    write_u16(out, 16);
    out.write("data", 4);
    write_u32(out, data_bytes);
    for (double s : wave.samples) {
        const double v = std::clamp(s, -1.0, 1.0) * 32767.0;
        const int16_t q = static_cast<int16_t>(std::lrint(v));
        char b[2] = {char(q & 0xff), char((q >> 8) & 0xff)};
        out.write(b, 2);
    }
    if (!out) throw std::runtime_error("short write on wav file: " + path);
}

}  // namespace mwdlp
