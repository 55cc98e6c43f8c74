// mwdlp: multiband neural vocoder CLI.
//
//   features    WAV -> MWFE conditioning features
//   train       config + WAV dir -> model file + metrics CSV
//   synth       model + features (or WAV) -> WAV
//   bench       single-core RTF measurement with breakdown
//   complexity  band-rate GFLOPS accounting for a config
//   eval-lsd    log-spectral distortion between two WAVs
//   inspect     model file summary

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#ifdef __linux__
#include <sched.h>
#endif

#include "mwdlp/complexity.h"
#include "mwdlp/config.h"
#include "mwdlp/dataset.h"
#include "mwdlp/engine.h"
#include "mwdlp/featfile.h"
#include "mwdlp/modelfile.h"
#include "mwdlp/train.h"
#include "mwdlp/wav.h"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mwdlp;

namespace {

MelConfig mel_defaults_for_rate(int sample_rate) {
    if (sample_rate != 24000 && sample_rate != 16000)
        throw std::runtime_error("supported sample rates are 16000 and 24000 Hz");
    NetworkConfig net = sample_rate == 24000 ? NetworkConfig::paper_24k()
                                             : NetworkConfig::paper_16k();
    return mel_config_for(net);
}

void pin_to_one_core() {
#ifdef __linux__
    cpu_set_t set;
    CPU_ZERO(&set);
    CPU_SET(0, &set);
    if (sched_setaffinity(0, sizeof(set), &set) != 0)
        std::cerr << "mwdlp: warning: could not pin to core 0\n";
#endif
}

int cmd_features(const std::string& wav_path, const std::string& out_path) {
    const Waveform wave = wav_read(wav_path);
    const auto mel = mel_spectrogram(wave, mel_defaults_for_rate(wave.sample_rate));
    feat_save(out_path, mel);
    std::cout << "wrote " << mel.size() << " frames x " << mel[0].size() << " to " << out_path
              << "\n";
    return 0;
}

int cmd_train(const std::string& config_path, const std::string& data_dir,
              const std::string& model_out, const std::string& log_out) {
    const FileConfig cfg = parse_config_file(config_path);

    std::vector<std::string> wavs;
    for (const auto& e : fs::directory_iterator(data_dir))
        if (e.path().extension() == ".wav") wavs.push_back(e.path().string());
    std::sort(wavs.begin(), wavs.end());
    if (wavs.empty()) throw std::runtime_error("no .wav files in " + data_dir);

    PqmfBank bank(PqmfConfig{cfg.net.bands, cfg.net.pqmf_order, cfg.net.pqmf_beta,
                             cfg.net.pqmf_cutoff});
    std::vector<Utterance> train_set, heldout;
    for (size_t i = 0; i < wavs.size(); ++i) {
        Utterance utt = prepare_utterance(wav_read(wavs[i]), cfg.net, bank);
        // Last file is held out for early stopping when there is more than one.
        if (wavs.size() > 1 && i + 1 == wavs.size()) heldout.push_back(std::move(utt));
        else train_set.push_back(std::move(utt));
    }
    std::cout << "training on " << train_set.size() << " utterances, " << heldout.size()
              << " held out\n";

    ModelParams params = init_params(cfg.net, cfg.train.seed);
    const StftLossConfig band_cfg = StftLossConfig::band_rate();
    const StftLossConfig full_cfg = cfg.net.sample_rate == 24000 ? StftLossConfig::fullband_24k()
                                                                 : StftLossConfig::fullband_16k();
    const TrainResult res = train_loop(params, train_set, heldout, cfg.train, bank, band_cfg,
                                       full_cfg, [](const StepMetrics& m) {
                                           if (m.step % 50 == 0)
                                               std::cout << "step " << m.step << " ce " << m.ce
                                                         << " stft " << m.stft << " density "
                                                         << m.density << "\n";
                                           return true;
                                       });

    model_save(params, model_out, TensorDtype::F32);
    if (!log_out.empty()) write_metrics_csv(log_out, res.log);
    std::cout << "ran " << res.steps_run << " steps"
              << (res.early_stopped ? " (early stopped)" : "") << ", model -> " << model_out
              << "\n";
    return 0;
}

int cmd_synth(const std::string& model_path, const std::string& feat_path,
              const std::string& wav_in, const std::string& out_path, uint64_t seed,
              int sample_rate_flag) {
    const ModelParams params = model_load(model_path);
    if (sample_rate_flag > 0 && sample_rate_flag != params.cfg.sample_rate)
        throw std::runtime_error("--sample-rate does not match the model (" +
                                 std::to_string(params.cfg.sample_rate) + " Hz)");

    std::vector<std::vector<double>> mel;
    if (!feat_path.empty()) {
        mel = feat_load(feat_path);
    } else if (!wav_in.empty()) {
        const Waveform wave = wav_read(wav_in);
        if (wave.sample_rate != params.cfg.sample_rate)
            throw std::runtime_error("input wav rate does not match the model");
        mel = mel_spectrogram(wave, mel_config_for(params.cfg));
        mel.resize(size_t(int(wave.samples.size()) / params.cfg.frame_shift));
    } else {
        throw std::runtime_error("synth needs --features or --wav");
    }
    if (mel.empty() || int(mel[0].size()) != params.cfg.cond_dim)
        throw std::runtime_error("feature dimension does not match the model");

    const EngineModel em = build_engine_model(params);
    const Waveform out = synthesize_offline(em, mel, seed);
    wav_write(out_path, out);
    std::cout << "synthesized " << out.samples.size() << " samples (" << out.duration_s()
              << " s) -> " << out_path << "\n";
    return 0;
}

int cmd_bench(const std::string& model_path, double duration, const std::string& wav_in,
              uint64_t seed, const std::string& json_out, const std::string& wav_out) {
    pin_to_one_core();
    const ModelParams params = model_load(model_path);
    const EngineModel em = build_engine_model(params);

    Waveform input;
    const Waveform* input_ptr = nullptr;
    if (!wav_in.empty()) {
        input = wav_read(wav_in);
        input_ptr = &input;
    }
    const RtfReport rep = bench_rtf(em, duration, seed, input_ptr, wav_out);

    std::printf("audio      %8.3f s\n", rep.audio_seconds);
    std::printf("wall       %8.3f s\n", rep.wall_seconds);
    std::printf("  features %8.3f s\n", rep.feature_seconds);
    std::printf("  network  %8.3f s\n", rep.network_seconds);
    std::printf("  pqmf     %8.3f s\n", rep.pqmf_seconds);
    std::printf("  io       %8.3f s\n", rep.io_seconds);
    std::printf("RTF        %8.4f\n", rep.rtf);

    if (!json_out.empty()) {
        json j = {{"audio_seconds", rep.audio_seconds}, {"wall_seconds", rep.wall_seconds},
                  {"feature_seconds", rep.feature_seconds}, {"network_seconds", rep.network_seconds},
                  {"pqmf_seconds", rep.pqmf_seconds},       {"io_seconds", rep.io_seconds},
                  {"rtf", rep.rtf}};
        std::ofstream(json_out) << j.dump(2) << "\n";
    }
    return 0;
}

int cmd_complexity(const std::string& model_path, const std::string& preset,
                   const std::string& json_out) {
    NetworkConfig cfg;
    std::array<double, 3> densities = {0.09, 0.09, 0.12};
    if (!model_path.empty()) {
        ModelParams params = model_load(model_path);
        cfg = params.cfg;
        densities = measured_densities(params);
    } else if (preset == "24k") {
        cfg = NetworkConfig::paper_24k();
    } else if (preset == "16k") {
        cfg = NetworkConfig::paper_16k();
    } else {
        throw std::runtime_error("complexity needs --model or --preset 24k|16k");
    }

    const ComplexityReport rep = complexity_gflops(cfg, densities);
    std::printf("band rate        %8.0f Hz\n", rep.band_rate_hz);
    std::printf("sparse recurrent %8.3f GFLOPS\n", rep.sparse_recurrent);
    std::printf("dense GRUs       %8.3f GFLOPS\n", rep.dense_grus);
    std::printf("dual FC          %8.3f GFLOPS\n", rep.dualfc);
    std::printf("residual FC      %8.3f GFLOPS\n", rep.residual_fc);
    std::printf("LP combination   %8.3f GFLOPS\n", rep.lp_combination);
    std::printf("band-rate total  %8.2f GFLOPS\n", rep.total_gflops);
    std::printf("(embedding adds  %8.3f GFLOPS, frame-rate %8.3f GFLOPS, not in total)\n",
                rep.embed_lookup_gflops, rep.frame_rate_gflops);

    if (!json_out.empty()) {
        json j = {{"band_rate_hz", rep.band_rate_hz},
                  {"sparse_recurrent_gflops", rep.sparse_recurrent},
                  {"dense_grus_gflops", rep.dense_grus},
                  {"dualfc_gflops", rep.dualfc},
                  {"residual_fc_gflops", rep.residual_fc},
                  {"lp_combination_gflops", rep.lp_combination},
                  {"total_gflops", rep.total_gflops},
                  {"embed_lookup_gflops", rep.embed_lookup_gflops},
                  {"frame_rate_gflops", rep.frame_rate_gflops}};
        std::ofstream(json_out) << j.dump(2) << "\n";
    }
    return 0;
}

int cmd_eval_lsd(const std::string& ref_path, const std::string& test_path) {
    const Waveform ref = wav_read(ref_path);
    const Waveform test = wav_read(test_path);
    if (ref.sample_rate != test.sample_rate)
        throw std::runtime_error("eval-lsd: sample rates differ");
    // Alignment is by trimming to the shorter signal; no DTW.
    const double lsd = lsd_db(ref, test, mel_defaults_for_rate(ref.sample_rate));
    std::printf("LSD %.4f dB\n", lsd);
    return 0;
}

int cmd_inspect(const std::string& model_path) {
    const ModelParams params = model_load(model_path);
    auto& p = const_cast<ModelParams&>(params);
    const NetworkConfig& c = params.cfg;

    std::printf("config: %d bands, K=%d, cond %d->%d, embed %d, sparse %d, dense %d\n", c.bands,
                c.lp_order, c.cond_dim, c.cond_proj, c.embed_dim, c.sparse_units, c.dense_units);
    std::printf("audio: %d Hz, shift %d, mel fft %d win %d, preemph %.2f, pqmf order %d beta %.5f\n",
                c.sample_rate, c.frame_shift, c.mel_fft, c.mel_win, c.preemph_alpha, c.pqmf_order,
                c.pqmf_beta);
    size_t total = 0;
    for (auto& nt : named_tensors(p)) {
        std::printf("  %-26s [%5d x %5d]\n", nt.name.c_str(), nt.tensor->rows, nt.tensor->cols);
        total += nt.tensor->size();
    }
    const auto d = measured_densities(params);
    std::printf("parameters: %zu\n", total);
    std::printf("recurrent densities: update %.4f reset %.4f new %.4f (avg %.4f)\n", d[0], d[1],
                d[2], (d[0] + d[1] + d[2]) / 3.0);

    std::ifstream in(model_path, std::ios::binary);
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const uint32_t crc = crc32_update(0, bytes.data(), bytes.size() - 4);
    std::printf("file: %zu bytes, payload crc32 %08x (verified)\n", bytes.size(), crc);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"MWDLP multiband neural vocoder"};
    app.require_subcommand(1);

    std::string wav_path, out_path, config_path, data_dir, model_path, feat_path, json_out;
    std::string ref_path, test_path, log_out, preset, wav_out;
    uint64_t seed = 1;
    double duration = 10.0;
    int sample_rate_flag = 0;

    auto* features = app.add_subcommand("features", "extract mel conditioning features");
    features->add_option("--wav", wav_path, "input wav")->required();
    features->add_option("--out", out_path, "output feature file")->required();

    auto* train = app.add_subcommand("train", "train a model");
    train->add_option("--config", config_path, "training config file")->required();
    train->add_option("--data", data_dir, "directory of training wavs")->required();
    train->add_option("--out", model_path, "output model file")->required();
    train->add_option("--log", log_out, "metrics csv");

    auto* synth = app.add_subcommand("synth", "synthesize a waveform");
    synth->add_option("--model", model_path, "model file")->required();
    synth->add_option("--features", feat_path, "feature file");
    synth->add_option("--wav", wav_path, "input wav (features extracted internally)");
    synth->add_option("--out", out_path, "output wav")->required();
    synth->add_option("--seed", seed, "sampling seed");
    synth->add_option("--sample-rate", sample_rate_flag, "expected model sample rate");

    auto* bench = app.add_subcommand("bench", "measure single-core RTF");
    bench->add_option("--model", model_path, "model file")->required();
    bench->add_option("--duration", duration, "seconds of audio to synthesize");
    bench->add_option("--wav", wav_path, "optional input wav instead of the test signal");
    bench->add_option("--seed", seed, "sampling seed");
    bench->add_option("--json", json_out, "write the report as JSON");
    bench->add_option("--out", wav_out, "write the synthesized wav");

    auto* complexity = app.add_subcommand("complexity", "band-rate GFLOPS accounting");
    complexity->add_option("--model", model_path, "model file");
    complexity->add_option("--preset", preset, "24k or 16k paper config");
    complexity->add_option("--json", json_out, "write the report as JSON");

    auto* lsd = app.add_subcommand("eval-lsd", "log-spectral distortion between two wavs");
    lsd->add_option("--ref", ref_path, "reference wav")->required();
    lsd->add_option("--test", test_path, "wav under test")->required();

    auto* inspect = app.add_subcommand("inspect", "summarize a model file");
    inspect->add_option("--model", model_path, "model file")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (features->parsed()) return cmd_features(wav_path, out_path);
        if (train->parsed()) return cmd_train(config_path, data_dir, model_path, log_out);
        if (synth->parsed())
            return cmd_synth(model_path, feat_path, wav_path, out_path, seed, sample_rate_flag);
        if (bench->parsed()) return cmd_bench(model_path, duration, wav_path, seed, json_out, wav_out);
        if (complexity->parsed()) return cmd_complexity(model_path, preset, json_out);
        if (lsd->parsed()) return cmd_eval_lsd(ref_path, test_path);
        if (inspect->parsed()) return cmd_inspect(model_path);
    } catch (const std::exception& e) {
        std::cerr << "mwdlp: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
