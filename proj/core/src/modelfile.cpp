#include "mwdlp/modelfile.h"

#include <array>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace mwdlp {

namespace {

constexpr uint32_t kVersion = 1;
constexpr char kMagic[4] = {'M', 'W', 'D', 'L'};
constexpr int kBlockRows = 16;

std::array<uint32_t, 256>& crc_table() {
    static std::array<uint32_t, 256> table = [] {
        std::array<uint32_t, 256> t{};
        for (uint32_t i = 0; i < 256; ++i) {
            uint32_t c = i;
            for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
            t[i] = c;
        }
        return t;
    }();
    return table;
}

// Buffered writer that tracks the running checksum.
struct Writer {
    std::vector<uint8_t> buf;

    void bytes(const void* p, size_t n) {
        const auto* b = static_cast<const uint8_t*>(p);
        buf.insert(buf.end(), b, b + n);
    }
    void u8(uint8_t v) { bytes(&v, 1); }
    void u16(uint16_t v) {
        uint8_t b[2] = {uint8_t(v & 0xff), uint8_t(v >> 8)};
        bytes(b, 2);
    }
    void u32(uint32_t v) {
        uint8_t b[4] = {uint8_t(v), uint8_t(v >> 8), uint8_t(v >> 16), uint8_t(v >> 24)};
        bytes(b, 4);
    }
    void i32(int32_t v) { u32(uint32_t(v)); }
    void f32(float v) {
        uint32_t u;
        std::memcpy(&u, &v, 4);
        u32(u);
    }
    void f64(double v) {
        uint64_t u;
        std::memcpy(&u, &v, 8);
        u32(uint32_t(u));
        u32(uint32_t(u >> 32));
    }
};

struct Reader {
    std::vector<uint8_t> buf;
    size_t pos = 0;

    void need(size_t n) const {
        if (pos + n > buf.size()) throw std::runtime_error("model file truncated");
    }
    void bytes(void* p, size_t n) {
        need(n);
        std::memcpy(p, buf.data() + pos, n);
        pos += n;
    }
    uint8_t u8() {
        uint8_t v;
        bytes(&v, 1);
        return v;
    }
    uint16_t u16() {
        uint8_t b[2];
        bytes(b, 2);
        return uint16_t(b[0] | (b[1] << 8));
    }
    uint32_t u32() {
        uint8_t b[4];
        bytes(b, 4);
        return uint32_t(b[0]) | (uint32_t(b[1]) << 8) | (uint32_t(b[2]) << 16) | (uint32_t(b[3]) << 24);
    }
    int32_t i32() { return int32_t(u32()); }
    float f32() {
        uint32_t u = u32();
        float v;
        std::memcpy(&v, &u, 4);
        return v;
    }
    double f64() {
        uint64_t u = u32();
        u |= uint64_t(u32()) << 32;
        double v;
        std::memcpy(&v, &u, 8);
        return v;
    }
};

void write_config(Writer& w, const NetworkConfig& c) {
    Writer cb;
    cb.i32(c.bands);
    cb.i32(c.lp_order);
    cb.i32(c.cond_dim);
    cb.i32(c.segconv_prev);
    cb.i32(c.segconv_next);
    cb.i32(c.cond_proj);
    cb.i32(c.embed_dim);
    cb.i32(c.sparse_units);
    cb.i32(c.dense_units);
    cb.i32(c.head_bins);
    cb.i32(c.logit_latent);
    cb.i32(c.residual_hidden);
    cb.i32(c.sample_rate);
    cb.i32(c.frame_shift);
    cb.i32(c.mel_fft);
    cb.i32(c.mel_win);
    cb.i32(c.pqmf_order);
    cb.f64(c.mel_fmin);
    cb.f64(c.mel_fmax);
    cb.f64(c.preemph_alpha);
    cb.f64(c.pqmf_beta);
    cb.f64(c.pqmf_cutoff);
    w.u32(uint32_t(cb.buf.size()));
    w.bytes(cb.buf.data(), cb.buf.size());
}

NetworkConfig read_config(Reader& r) {
    const uint32_t size = r.u32();
    const size_t end = r.pos + size;
    NetworkConfig c;
    c.bands = r.i32();
    c.lp_order = r.i32();
    c.cond_dim = r.i32();
    c.segconv_prev = r.i32();
    c.segconv_next = r.i32();
    c.cond_proj = r.i32();
    c.embed_dim = r.i32();
    c.sparse_units = r.i32();
    c.dense_units = r.i32();
    c.head_bins = r.i32();
    c.logit_latent = r.i32();
    c.residual_hidden = r.i32();
    c.sample_rate = r.i32();
    c.frame_shift = r.i32();
    c.mel_fft = r.i32();
    c.mel_win = r.i32();
    c.pqmf_order = r.i32();
    c.mel_fmin = r.f64();
    c.mel_fmax = r.f64();
    c.preemph_alpha = r.f64();
    c.pqmf_beta = r.f64();
    c.pqmf_cutoff = r.f64();
    if (r.pos != end) throw std::runtime_error("model file config block size mismatch");
    return c;
}

void write_value(Writer& w, double v, TensorDtype dt) {
    if (dt == TensorDtype::F32) w.f32(float(v));
    else w.f64(v);
}

double read_value(Reader& r, TensorDtype dt) {
    return dt == TensorDtype::F32 ? double(r.f32()) : r.f64();
}

bool mask_is_all_ones(const Tensor& m) {
    for (double v : m.v)
        if (v == 0.0) return false;
    return true;
}

void write_tensor(Writer& w, const std::string& name, const Tensor& t, TensorDtype dt,
                  const Tensor* mask) {
    w.u16(uint16_t(name.size()));
    w.bytes(name.data(), name.size());
    w.u8(uint8_t(dt));
    const bool sparse = mask != nullptr && !mask_is_all_ones(*mask);
    w.u8(sparse ? 1 : 0);
    w.u8(2);
    w.u32(uint32_t(t.rows));
    w.u32(uint32_t(t.cols));
    if (!sparse) {
        for (double v : t.v) write_value(w, v, dt);
        return;
    }
    if (t.rows % kBlockRows != 0) throw std::runtime_error("sparse tensor rows not block aligned");
    const int rblocks = t.rows / kBlockRows;
    std::vector<std::pair<uint32_t, uint32_t>> blocks;
    for (int rb = 0; rb < rblocks; ++rb) {
        for (int c = 0; c < t.cols; ++c) {
            bool any = false, all = true;
            for (int i = 0; i < kBlockRows; ++i) {
                const bool on = mask->at(rb * kBlockRows + i, c) != 0.0;
                any = any || on;
                all = all && on;
            }
            if (any && !all) throw std::runtime_error("mask is not 16x1 block structured");
            if (any) blocks.emplace_back(uint32_t(rb), uint32_t(c));
        }
    }
    w.u32(uint32_t(blocks.size()));
    for (auto [rb, c] : blocks) {
        w.u32(rb);
        w.u32(c);
    }
    for (auto [rb, c] : blocks)
        for (int i = 0; i < kBlockRows; ++i) write_value(w, t.at(int(rb) * kBlockRows + i, int(c)), dt);
}

struct LoadedTensor {
    Tensor values;
    Tensor mask;  // empty unless block-sparse
};

LoadedTensor read_tensor(Reader& r, std::string& name_out) {
    const uint16_t name_len = r.u16();
    name_out.resize(name_len);
    r.bytes(name_out.data(), name_len);
    const auto dt = TensorDtype(r.u8());
    if (dt != TensorDtype::F32 && dt != TensorDtype::F64)
        throw std::runtime_error("model file has unknown dtype");
    const uint8_t layout = r.u8();
    const uint8_t ndim = r.u8();
    if (ndim != 2) throw std::runtime_error("model file tensor is not 2-D");
    const int rows = int(r.u32());
    const int cols = int(r.u32());
    if (rows <= 0 || cols <= 0 || int64_t(rows) * cols > (int64_t(1) << 31))
        throw std::runtime_error("model file tensor has absurd shape");

    LoadedTensor out;
    out.values = Tensor(rows, cols, 0.0);
    if (layout == 0) {
        for (double& v : out.values.v) v = read_value(r, dt);
        return out;
    }
    if (layout != 1) throw std::runtime_error("model file has unknown tensor layout");
    out.mask = Tensor(rows, cols, 0.0);
    const uint32_t bc = r.u32();
    std::vector<std::pair<uint32_t, uint32_t>> blocks(bc);
    for (auto& [rb, c] : blocks) {
        rb = r.u32();
        c = r.u32();
        if (int(rb) * kBlockRows + kBlockRows > rows || int(c) >= cols)
            throw std::runtime_error("model file sparse block out of range");
    }
    for (auto& [rb, c] : blocks) {
        for (int i = 0; i < kBlockRows; ++i) {
            out.values.at(int(rb) * kBlockRows + i, int(c)) = read_value(r, dt);
            out.mask.at(int(rb) * kBlockRows + i, int(c)) = 1.0;
        }
    }
    return out;
}

}  // namespace

uint32_t crc32_update(uint32_t crc, const void* data, size_t len) {
    const auto* p = static_cast<const uint8_t*>(data);
    crc ^= 0xFFFFFFFFu;
    for (size_t i = 0; i < len; ++i) crc = crc_table()[(crc ^ p[i]) & 0xff] ^ (crc >> 8);
    return crc ^ 0xFFFFFFFFu;
}

void model_save(const ModelParams& params, const std::string& path, TensorDtype dtype) {
    Writer w;
    w.bytes(kMagic, 4);
    w.u32(kVersion);
    write_config(w, params.cfg);

    auto& p = const_cast<ModelParams&>(params);
    auto named = named_tensors(p);
    w.u32(uint32_t(named.size()));
    for (auto& nt : named) {
        const Tensor* mask = nullptr;
        if (nt.name == "gru_sparse.w_hh.update") mask = &p.gru_sparse.mask_update;
        else if (nt.name == "gru_sparse.w_hh.reset") mask = &p.gru_sparse.mask_reset;
        else if (nt.name == "gru_sparse.w_hh.new") mask = &p.gru_sparse.mask_new;
        write_tensor(w, nt.name, *nt.tensor, dtype, mask);
    }

    const uint32_t crc = crc32_update(0, w.buf.data(), w.buf.size());
    w.u32(crc);

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write model file: " + path);
    out.write(reinterpret_cast<const char*>(w.buf.data()), std::streamsize(w.buf.size()));
    if (!out) throw std::runtime_error("short write on model file: " + path);
}

ModelParams model_load(const std::string& path) {
    Reader r;
    {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw std::runtime_error("cannot open model file: " + path);
        in.seekg(0, std::ios::end);
        const auto size = in.tellg();
        in.seekg(0);
        if (size < 12) throw std::runtime_error("model file truncated: " + path);
        r.buf.resize(size_t(size));
        in.read(reinterpret_cast<char*>(r.buf.data()), size);
        if (!in) throw std::runtime_error("cannot read model file: " + path);
    }

    // Verify the trailer before trusting anything else.
    const size_t body = r.buf.size() - 4;
    uint32_t stored = uint32_t(r.buf[body]) | (uint32_t(r.buf[body + 1]) << 8) |
                      (uint32_t(r.buf[body + 2]) << 16) | (uint32_t(r.buf[body + 3]) << 24);
    if (crc32_update(0, r.buf.data(), body) != stored)
        throw std::runtime_error("model file checksum failure: " + path);

    char magic[4];
    r.bytes(magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0) throw std::runtime_error("bad model file magic: " + path);
    const uint32_t version = r.u32();
    if (version != kVersion) throw std::runtime_error("unsupported model file version: " + path);

    ModelParams p;
    p.cfg = read_config(r);
    p.cfg.validate();
    // Allocate every tensor at its expected shape, then fill by name.
    p = [&] {
        ModelParams q = init_params(p.cfg, 0);
        q.cfg = p.cfg;
        return q;
    }();

    const uint32_t count = r.u32();
    auto named = named_tensors(p);
    if (count != named.size()) throw std::runtime_error("model file tensor count mismatch");
    for (uint32_t i = 0; i < count; ++i) {
        std::string name;
        LoadedTensor lt = read_tensor(r, name);
        bool found = false;
        for (auto& nt : named) {
            if (nt.name != name) continue;
            if (nt.tensor->rows != lt.values.rows || nt.tensor->cols != lt.values.cols)
                throw std::runtime_error("model file tensor shape mismatch: " + name);
            *nt.tensor = std::move(lt.values);
            found = true;
            break;
        }
        if (!found) throw std::runtime_error("model file has unknown tensor: " + name);
        if (lt.mask.size() > 0) {
            if (name == "gru_sparse.w_hh.update") p.gru_sparse.mask_update = std::move(lt.mask);
            else if (name == "gru_sparse.w_hh.reset") p.gru_sparse.mask_reset = std::move(lt.mask);
            else if (name == "gru_sparse.w_hh.new") p.gru_sparse.mask_new = std::move(lt.mask);
        }
    }
    if (r.pos != body) throw std::runtime_error("model file has trailing garbage");
    return p;
}

}  // namespace mwdlp
