#include "mwdlp/config.h"

#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace mwdlp {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    const auto b = s.find_last_not_of(" \t\r");
    return a == std::string::npos ? "" : s.substr(a, b - a + 1);
}

}  // namespace

FileConfig parse_config_text(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config line " + std::to_string(lineno) + ": missing '='");
        kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }

    FileConfig cfg;
    auto geti = [&](const char* key, int& out) {
        if (auto it = kv.find(key); it != kv.end()) {
            out = std::stoi(it->second);
            kv.erase(it);
        }
    };
    auto getl = [&](const char* key, long& out) {
        if (auto it = kv.find(key); it != kv.end()) {
            out = std::stol(it->second);
            kv.erase(it);
        }
    };
    auto getd = [&](const char* key, double& out) {
        if (auto it = kv.find(key); it != kv.end()) {
            out = std::stod(it->second);
            kv.erase(it);
        }
    };
    auto getu = [&](const char* key, uint64_t& out) {
        if (auto it = kv.find(key); it != kv.end()) {
            out = std::stoull(it->second);
            kv.erase(it);
        }
    };

    NetworkConfig& n = cfg.net;
    geti("bands", n.bands);
    geti("lp_order", n.lp_order);
    geti("cond_dim", n.cond_dim);
    geti("segconv_prev", n.segconv_prev);
    geti("segconv_next", n.segconv_next);
    geti("cond_proj", n.cond_proj);
    geti("embed_dim", n.embed_dim);
    geti("sparse_units", n.sparse_units);
    geti("dense_units", n.dense_units);
    geti("logit_latent", n.logit_latent);
    geti("residual_hidden", n.residual_hidden);
    geti("sample_rate", n.sample_rate);
    geti("frame_shift", n.frame_shift);
    geti("mel_fft", n.mel_fft);
    geti("mel_win", n.mel_win);
    getd("mel_fmin", n.mel_fmin);
    getd("mel_fmax", n.mel_fmax);
    getd("preemph_alpha", n.preemph_alpha);
    geti("pqmf_order", n.pqmf_order);
    getd("pqmf_beta", n.pqmf_beta);
    getd("pqmf_cutoff", n.pqmf_cutoff);

    TrainConfig& t = cfg.train;
    getd("learning_rate", t.learning_rate);
    geti("batch_seq_frames", t.batch_seq_frames);
    geti("batch_size", t.batch_size);
    getd("dropout", t.dropout);
    getl("max_steps", t.max_steps);
    getu("seed", t.seed);
    getd("ce_weight", t.ce_weight);
    getd("stft_weight", t.stft_weight);
    int use_stft = t.use_stft_loss ? 1 : 0;
    geti("use_stft_loss", use_stft);
    t.use_stft_loss = use_stft != 0;
    getl("sparsity_start", t.sparsity.start_step);
    getl("sparsity_end", t.sparsity.end_step);
    getl("sparsity_interval", t.sparsity.rerank_interval);
    getd("density_update", t.sparsity.target_density[0]);
    getd("density_reset", t.sparsity.target_density[1]);
    getd("density_new", t.sparsity.target_density[2]);
    getl("eval_interval", t.eval_interval);
    geti("patience", t.patience);

    if (!kv.empty()) throw std::invalid_argument("unknown config key: " + kv.begin()->first);
    n.validate();
    t.validate();
    return cfg;
}

FileConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

}  // namespace mwdlp
