#include <doctest.h>

#include <cmath>

#include "gradcheck.h"
#include "mwdlp/train.h"
#include "toyutil.h"

using namespace mwdlp;
using namespace mwdlp::testutil;

TEST_SUITE_BEGIN("train");

TEST_CASE("radam: zero gradient leaves parameters unchanged") {
    Tensor p(2, 3, 1.5);
    Tensor g(2, 3, 0.0);
    RAdam opt;
    const Tensor before = p;
    for (int i = 0; i < 5; ++i) opt.step({&p}, {&g}, 0.1);
    CHECK(p.v == before.v);
}

TEST_CASE("radam first step is the hand-computed momentum fallback") {
    // t = 1: rho_1 = rho_inf - 2*beta2/(1-beta2) = 1 <= 4, so the update is
    // the bias-corrected momentum step: p -= lr * g.
    Tensor p(1, 1, 2.0);
    Tensor g(1, 1, 0.5);
    RAdam opt;
    opt.step({&p}, {&g}, 0.01);
    CHECK(p.v[0] == doctest::Approx(2.0 - 0.01 * 0.5).epsilon(1e-15));
}

TEST_CASE("radam is elementwise: duplicated parameters update identically") {
    CounterRng rng(3);
    Tensor p1 = random_tensor(4, 4, rng);
    Tensor p2 = p1;
    Tensor g = random_tensor(4, 4, rng);
    RAdam o1, o2;
    for (int i = 0; i < 20; ++i) {
        o1.step({&p1}, {&g}, 0.05);
        o2.step({&p2}, {&g}, 0.05);
    }
    CHECK(p1.v == p2.v);
}

TEST_CASE("radam eventually uses the rectified adaptive step") {
    Tensor p(1, 1, 1.0);
    Tensor g(1, 1, 1.0);
    RAdam opt;
    for (int i = 0; i < 6; ++i) opt.step({&p}, {&g}, 0.1);
    // After enough steps the denominator kicks in; with constant gradient
    // the adaptive update approaches lr * rect, far from the raw momentum.
    CHECK(p.v[0] < 1.0);
    CHECK(std::isfinite(p.v[0]));
}

namespace {

struct ToySetup {
    NetworkConfig cfg;
    ModelParams params;
    PqmfBank bank;
    std::vector<Utterance> data;
    StftLossConfig band_cfg, full_cfg;

    explicit ToySetup(uint64_t seed, int sparse = 16, int dense = 8)
        : cfg(toy_train_config(2, 2, sparse, dense)),
          params(init_params(cfg, seed)),
          bank(PqmfConfig{cfg.bands, cfg.pqmf_order, cfg.pqmf_beta, cfg.pqmf_cutoff}),
          band_cfg(StftLossConfig::custom({64, 32}, {20, 8})),
          full_cfg(StftLossConfig::custom({128, 64}, {40, 16})) {
        data.push_back(prepare_utterance(toy_speech(cfg.sample_rate, 0.6, 123), cfg, bank));
    }
};

}  // namespace

TEST_CASE("forward segment: step-0 loss sits at the uniform baseline") {
    ToySetup toy(7);
    // Small random parameters put the softmax near uniform.
    SegmentData seg = build_segment_batch(toy.data, toy.cfg, toy.bank, {{0, 0}, {0, 2}}, 2);
    Tape tape;
    tape.set_grad_enabled(false);
    BoundParams bp = bind_params(tape, toy.params, false);
    ForwardOptions opt;
    opt.use_stft = false;
    ForwardOut fw = forward_segment(tape, bp, seg, Tensor(2, toy.cfg.sparse_units),
                                    Tensor(2, toy.cfg.dense_units), Tensor(2, toy.cfg.dense_units),
                                    opt);
    CHECK(tape.val(fw.ce).v[0] == doctest::Approx(2.0 * std::log(32.0)).epsilon(0.02));
}

TEST_CASE("teacher-forced training forward equals the autoregressive graph on shared history") {
    // Same parameters, same conditioning, same bin history: the training
    // graph at a step and a fresh full_step agree exactly.
    ToySetup toy(11);
    SegmentData seg = build_segment_batch(toy.data, toy.cfg, toy.bank, {{0, 0}}, 1);

    Tape tape;
    tape.set_grad_enabled(false);
    BoundParams bp = bind_params(tape, toy.params, false);
    Var cond = segmental_conv(tape, tape.constant(seg.cond_windows[0]), bp);
    StepVars st{tape.constant(Tensor(1, toy.cfg.sparse_units)),
                tape.constant(Tensor(1, toy.cfg.dense_units)),
                tape.constant(Tensor(1, toy.cfg.dense_units))};
    StepLogits a = full_step(tape, bp, st, cond, seg.prev_coarse[0], seg.prev_fine[0],
                             seg.target_coarse[0], seg.hist_coarse[0], seg.hist_fine[0]);
    StepLogits b = full_step(tape, bp, st, cond, seg.prev_coarse[0], seg.prev_fine[0],
                             seg.target_coarse[0], seg.hist_coarse[0], seg.hist_fine[0]);
    CHECK(tape.val(a.coarse).v == tape.val(b.coarse).v);
    CHECK(tape.val(a.fine).v == tape.val(b.fine).v);
}

TEST_CASE("gradient check through the full teacher-forced graph") {
    // Every parameter of a toy graph against central differences, CE path.
    ToySetup toy(13);
    SegmentData seg = build_segment_batch(toy.data, toy.cfg, toy.bank, {{0, 0}}, 1);

    Tape base;
    BoundParams bp = bind_params(base, toy.params, true);
    ForwardOptions opt;
    opt.use_stft = false;
    ForwardOut fw = forward_segment(base, bp, seg, Tensor(1, toy.cfg.sparse_units),
                                    Tensor(1, toy.cfg.dense_units), Tensor(1, toy.cfg.dense_units),
                                    opt);
    base.backward(fw.total);

    auto eval = [&](ModelParams& p) {
        Tape t;
        t.set_grad_enabled(false);
        BoundParams b2 = bind_params(t, p, false);
        ForwardOut f2 = forward_segment(t, b2, seg, Tensor(1, toy.cfg.sparse_units),
                                        Tensor(1, toy.cfg.dense_units),
                                        Tensor(1, toy.cfg.dense_units), opt);
        return t.val(f2.total).v[0];
    };

    auto named = named_tensors(toy.params);
    double worst = 0.0;
    for (size_t ni = 0; ni < named.size(); ++ni) {
        Tensor& t = *named[ni].tensor;
        const Tensor& g = base.grad(bp.leaves[ni]);
        // Probe a handful of entries per tensor to keep the suite fast; the
        // acceptance suite sweeps everything.
        const size_t stride = std::max<size_t>(1, t.size() / 5);
        for (size_t i = 0; i < t.size(); i += stride) {
            const double save = t.v[i];
            const double h = 1e-6 * std::max(1.0, std::abs(save));
            t.v[i] = save + h;
            const double up = eval(toy.params);
            t.v[i] = save - h;
            const double dn = eval(toy.params);
            t.v[i] = save;
            const double fd = (up - dn) / (2.0 * h);
            const double ad = g.size() ? g.v[i] : 0.0;
            worst = std::max(worst, std::abs(ad - fd) / std::max({1e-4, std::abs(ad), std::abs(fd)}));
        }
    }
    CHECK(worst < 1e-4);
}

TEST_CASE("fixed seed reproduces the loss curve bit for bit") {
    auto run = [] {
        ToySetup toy(21);
        TrainConfig tc;
        tc.max_steps = 3;
        tc.batch_size = 2;
        tc.batch_seq_frames = 2;
        tc.dropout = 0.5;
        tc.seed = 99;
        tc.learning_rate = 1e-3;
        tc.eval_interval = 0;
        return train_loop(toy.params, toy.data, {}, tc, toy.bank, toy.band_cfg, toy.full_cfg);
    };
    const TrainResult a = run();
    const TrainResult b = run();
    REQUIRE(a.log.size() == b.log.size());
    for (size_t i = 0; i < a.log.size(); ++i) {
        CHECK(a.log[i].ce == b.log[i].ce);
        CHECK(a.log[i].stft == b.log[i].stft);
    }
}

TEST_CASE("pruned weights stay exactly zero across optimizer steps") {
    ToySetup toy(31);
    TrainConfig tc;
    tc.max_steps = 6;
    tc.batch_size = 2;
    tc.batch_seq_frames = 2;
    tc.dropout = 0.0;
    tc.use_stft_loss = false;
    tc.learning_rate = 1e-3;
    tc.eval_interval = 0;
    tc.sparsity.target_density = {0.5, 0.5, 0.75};
    tc.sparsity.start_step = 1;
    tc.sparsity.end_step = 4;
    tc.sparsity.rerank_interval = 1;

    train_loop(toy.params, toy.data, {}, tc, toy.bank, toy.band_cfg, toy.full_cfg);
    const auto& gs = toy.params.gru_sparse;
    int zeros = 0;
    for (size_t i = 0; i < gs.mask_update.size(); ++i) {
        if (gs.mask_update.v[i] == 0.0) {
            CHECK(gs.w_hh_update.v[i] == 0.0);
            ++zeros;
        }
    }
    CHECK(zeros > 0);
    const auto d = measured_densities(toy.params);
    CHECK(d[0] == doctest::Approx(0.5).epsilon(0.1));
    CHECK(d[2] == doctest::Approx(0.75).epsilon(0.1));
}

TEST_CASE("training rejects invalid configs and empty datasets") {
    ToySetup toy(41);
    TrainConfig tc;
    tc.learning_rate = -1.0;
    CHECK_THROWS(tc.validate());
    tc = TrainConfig{};
    tc.dropout = 1.0;
    CHECK_THROWS(tc.validate());
    tc = TrainConfig{};
    CHECK_THROWS(train_loop(toy.params, {}, {}, tc, toy.bank, toy.band_cfg, toy.full_cfg));
}

TEST_CASE("short training run decreases ce on a single utterance") {
    ToySetup toy(51, 32, 8);
    TrainConfig tc;
    tc.max_steps = 60;
    tc.batch_size = 4;
    tc.batch_seq_frames = 2;
    tc.dropout = 0.0;
    tc.use_stft_loss = false;
    tc.learning_rate = 3e-3;
    tc.eval_interval = 0;
    tc.seed = 5;
    const TrainResult res =
        train_loop(toy.params, toy.data, {}, tc, toy.bank, toy.band_cfg, toy.full_cfg);
    const double first = res.log.front().ce;
    const double last = res.log.back().ce;
    CHECK(last < first);
}

TEST_SUITE_END();
