// Acceptance suite. Each criterion prints one [PASS]/[FAIL] line; the
// desk-scale adversarial runs (criteria 3, 4, 9) train real models and take
// a few minutes total.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sys/wait.h>

#include "checkpoint.hpp"
#include "eval.hpp"
#include "oracles.hpp"
#include "testutil.hpp"
#include "train.hpp"

using namespace mg;

namespace {

double now_seconds() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

void report(int criterion, bool ok, const std::string& detail) {
    std::printf("[%s] criterion %d: %s\n", ok ? "PASS" : "FAIL", criterion, detail.c_str());
    std::fflush(stdout);
}

// ---- shared desk-scale runs (criteria 3, 4, 9) -------------------------

constexpr uint64_t kDeskSeed = 1;

struct DeskRuns {
    PairedDataset train_ds, test_ds;
    Checkpoint cgan_ck, cyc_ck;
    double cgan_seconds = 0.0, cyc_seconds = 0.0;
    double cgan_iou = 0.0, cyc_iou = 0.0;
};

TrainConfig desk_config(Task task) {
    TrainConfig cfg;  // library defaults are the desk recipe
    cfg.task = task;
    cfg.seed = kDeskSeed;
    cfg.n_train = 56;
    cfg.n_test = 8;
    cfg.checkpoint_every = 0;
    return cfg;
}

const DeskRuns& desk() {
    static const DeskRuns runs = [] {
        DeskRuns r;
        PairedDataset full = synth_shapes(64, 32, kDeskSeed);
        auto [train, test] = split_dataset(full, {56, 8, kDeskSeed});
        r.train_ds = std::move(train);
        r.test_ds = std::move(test);

        std::printf("-- training desk CGAN (100 epochs, 56 samples)...\n");
        std::fflush(stdout);
        double t0 = now_seconds();
        r.cgan_ck = train_cgan(desk_config(Task::cgan), r.train_ds, "");
        r.cgan_seconds = now_seconds() - t0;
        r.cgan_iou = evaluate(r.cgan_ck.generator("gen"), r.test_ds).mean_iou;

        std::printf("-- training desk CycleGAN (100 epochs, unpaired)...\n");
        std::fflush(stdout);
        t0 = now_seconds();
        r.cyc_ck = train_cyclegan(desk_config(Task::cyclegan), to_unpaired(r.train_ds, kDeskSeed), "");
        r.cyc_seconds = now_seconds() - t0;
        r.cyc_iou = evaluate(r.cyc_ck.generator("genAB"), r.test_ds).mean_iou;
        return r;
    }();
    return runs;
}

// ---- criterion 1 helpers ------------------------------------------------

double max_op_fd_error(uint64_t seed) {
    Rng rng(seed);
    double worst = 0.0;
    const auto track = [&worst](const oracle::GradCheck& res) {
        worst = std::max(worst, res.max_rel_err);
    };
    {
        Tensor in = oracle::random_tensor({1, 2, 6, 6}, rng, true);
        Tensor w = oracle::random_tensor({3, 2, 3, 3}, rng, true);
        Tensor b = oracle::random_tensor({3}, rng, true);
        Tensor target = oracle::random_tensor({1, 3, 3, 3}, rng);
        track(oracle::check_gradients({in, w, b},
                                      [&] { return mse_loss(conv2d(in, w, b, 2, 1), target); }));
    }
    {
        Tensor in = oracle::random_tensor({1, 2, 3, 3}, rng, true);
        Tensor w = oracle::random_tensor({2, 3, 4, 4}, rng, true);
        Tensor b = oracle::random_tensor({3}, rng, true);
        Tensor target = oracle::random_tensor({1, 3, 6, 6}, rng);
        track(oracle::check_gradients(
            {in, w, b}, [&] { return mse_loss(conv_transpose2d(in, w, b, 2, 1), target); }));
    }
    {
        Tensor in = oracle::random_tensor({2, 3, 4, 4}, rng, true);
        Tensor sc = oracle::random_tensor({3}, rng, true, 0.5f, 1.5f);
        Tensor sh = oracle::random_tensor({3}, rng, true);
        Tensor target = oracle::random_tensor({2, 3, 4, 4}, rng);
        track(oracle::check_gradients({in, sc, sh},
                                      [&] { return mse_loss(instance_norm(in, sc, sh), target); }));
    }
    {
        Tensor in = oracle::random_tensor_no_kink({1, 2, 5, 5}, rng, true);
        Tensor target = oracle::random_tensor({1, 2, 5, 5}, rng);
        track(oracle::check_gradients({in}, [&] { return mse_loss(relu(in), target); }));
        track(oracle::check_gradients({in}, [&] { return mse_loss(leaky_relu(in, 0.2f), target); }));
        track(oracle::check_gradients({in}, [&] { return mse_loss(mg::tanh(in), target); }));
        track(oracle::check_gradients({in}, [&] { return mse_loss(sigmoid(in), target); }));
    }
    {
        Tensor a = oracle::random_tensor({1, 2, 4, 4}, rng, true);
        Tensor b = oracle::random_tensor({1, 3, 4, 4}, rng, true);
        Tensor target = oracle::random_tensor({1, 5, 4, 4}, rng);
        track(oracle::check_gradients({a, b},
                                      [&] { return mse_loss(concat_channels(a, b), target); }));
    }
    {
        Tensor in = oracle::random_tensor({1, 1, 8, 8}, rng, true);
        Tensor target = oracle::random_tensor({1, 1, 8, 8}, rng);
        track(oracle::check_gradients({in}, [&] {
            Rng drop_rng(seed + 1000);
            return mse_loss(dropout(in, 0.5f, true, drop_rng), target);
        }));
    }
    {
        Tensor logits = oracle::random_tensor({1, 1, 4, 4}, rng, true, -2.0f, 2.0f);
        Tensor target01 = oracle::random_tensor({1, 1, 4, 4}, rng, false, 0.0f, 1.0f);
        track(oracle::check_gradients(
            {logits}, [&] { return bce_with_logits_loss(logits, target01); }));
        Tensor pred = oracle::random_tensor_no_kink({1, 1, 4, 4}, rng, true);
        Tensor target = Tensor::zeros({1, 1, 4, 4});
        track(oracle::check_gradients({pred}, [&] { return l1_loss(pred, target); }));
        track(oracle::check_gradients({pred}, [&] { return mse_loss(pred, target); }));
    }
    {
        Tensor a = oracle::random_tensor({6}, rng, true);
        Tensor b = oracle::random_tensor({6}, rng, true);
        Tensor target = oracle::random_tensor({6}, rng);
        track(oracle::check_gradients({a, b}, [&] { return mse_loss(add(a, b), target); }));
        track(oracle::check_gradients({a, b}, [&] { return mse_loss(mul(a, b), target); }));
        track(oracle::check_gradients({a}, [&] { return mse_loss(scale(a, 2.5f), target); }));
        track(oracle::check_gradients({a}, [&] { return mean_all(a); }));
    }
    return worst;
}

double max_model_fd_error(uint64_t seed) {
    double worst = 0.0;
    {
        Rng rng(seed);
        Generator gen = build_unet({1, 1, 2, 1, 8}, rng);
        oracle::randomize_params(gen.params, rng);
        Tensor image = oracle::random_tensor({1, 1, 8, 8}, rng);
        std::vector<Tensor> leaves;
        for (auto& [name, t] : gen.params.entries) leaves.push_back(t);
        worst = std::max(worst, oracle::check_gradients(leaves, [&] {
                                    return mean_all(forward_generator(gen, image, false));
                                }).max_rel_err);
    }
    {
        Rng rng(seed + 500);
        Discriminator disc = build_discriminator({2, 2, 1}, rng);
        oracle::randomize_params(disc.params, rng);
        Tensor x = oracle::random_tensor({1, 2, 8, 8}, rng);
        std::vector<Tensor> leaves;
        for (auto& [name, t] : disc.params.entries) leaves.push_back(t);
        worst = std::max(worst, oracle::check_gradients(leaves, [&] {
                                    return mean_all(forward_discriminator(disc, x));
                                }).max_rel_err);
    }
    return worst;
}

std::string cli_binary() {
    const char* env = std::getenv("MASKGAN_CLI");
    return env ? env : "";
}

int run_shell(const std::string& cmd) {
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("criterion 1: gradient suite over 20 seeds in under a minute") {
    const double t0 = now_seconds();
    double worst = 0.0;
    for (uint64_t seed = 0; seed < 20; ++seed) {
        worst = std::max(worst, max_op_fd_error(seed));
        worst = std::max(worst, max_model_fd_error(seed));
    }
    const double elapsed = now_seconds() - t0;
    const bool ok = worst < 1e-2 && elapsed < 60.0;
    char detail[160];
    std::snprintf(detail, sizeof(detail),
                  "gradient suite: max rel err %.2e (< 1e-2), %.1fs (< 60s), 20 seeds", worst,
                  elapsed);
    report(1, ok, detail);
    CHECK(worst < 1e-2);
    CHECK(elapsed < 60.0);
}

TEST_CASE("criterion 2: convolutions match the loop oracle over the full grid") {
    Rng rng(2024);
    double worst = 0.0;
    long long cases = 0;
    for (int k = 1; k <= 5; ++k)
        for (int stride = 1; stride <= 3; ++stride)
            for (int pad = 0; pad <= 2; ++pad)
                for (int hw : {4, 5, 8, 11, 16}) {
                    oracle::ConvDims d{2, 2, hw, hw, 3, k, stride, pad};
                    Tensor in = oracle::random_tensor({2, 2, hw, hw}, rng);
                    Tensor bias = oracle::random_tensor({3}, rng);
                    int oh = 0, ow = 0;
                    if (hw + 2 * pad >= k) {
                        Tensor w = oracle::random_tensor({3, 2, k, k}, rng);
                        auto ref = oracle::ref_conv2d(in.values(), w.values(), bias.values(), d, oh, ow);
                        if (oh >= 1 && ow >= 1) {
                            Tensor out = conv2d(in, w, bias, stride, pad);
                            for (size_t i = 0; i < ref.size(); ++i)
                                worst = std::max(
                                    worst, static_cast<double>(std::fabs(out.values()[i] - ref[i])));
                            ++cases;
                        }
                    }
                    {
                        Tensor w = oracle::random_tensor({2, 3, k, k}, rng);
                        auto ref = oracle::ref_conv_transpose2d(in.values(), w.values(), bias.values(),
                                                                d, oh, ow);
                        if (oh >= 1 && ow >= 1) {
                            Tensor out = conv_transpose2d(in, w, bias, stride, pad);
                            for (size_t i = 0; i < ref.size(); ++i)
                                worst = std::max(
                                    worst, static_cast<double>(std::fabs(out.values()[i] - ref[i])));
                            ++cases;
                        }
                    }
                }
    const bool ok = worst <= 1e-5 && cases > 300;
    char detail[160];
    std::snprintf(detail, sizeof(detail),
                  "conv oracle: %lld grid cases, max abs diff %.2e (<= 1e-5)", cases, worst);
    report(2, ok, detail);
    CHECK(worst <= 1e-5);
    CHECK(cases > 300);
}

TEST_CASE("criterion 3: CGAN desk run reaches IoU >= 0.80 with falling L1") {
    const DeskRuns& runs = desk();
    double l1_first = 0.0, l1_last = 0.0;
    const auto& hist = runs.cgan_ck.history;
    for (int i = 0; i < 10; ++i) {
        l1_first += hist[static_cast<size_t>(i)].g_l1;
        l1_last += hist[hist.size() - 10 + static_cast<size_t>(i)].g_l1;
    }
    l1_first /= 10.0;
    l1_last /= 10.0;

    const bool iou_ok = runs.cgan_iou >= 0.80;
    const bool l1_ok = l1_last < l1_first;
    const bool time_ok = runs.cgan_seconds <= 15.0 * 60.0;
    char detail[200];
    std::snprintf(detail, sizeof(detail),
                  "CGAN desk run: test IoU %.4f (>= 0.80), L1 first-10 %.3f -> last-10 %.3f, %.0fs "
                  "(<= 900s)",
                  runs.cgan_iou, l1_first, l1_last, runs.cgan_seconds);
    report(3, iou_ok && l1_ok && time_ok, detail);
    CHECK(iou_ok);
    CHECK(l1_ok);
    CHECK(time_ok);
}

TEST_CASE("criterion 4: CycleGAN desk run reaches IoU >= 0.50 and trails the CGAN") {
    const DeskRuns& runs = desk();
    const bool iou_ok = runs.cyc_iou >= 0.50;
    const bool order_ok = runs.cgan_iou > runs.cyc_iou;
    const bool time_ok = runs.cyc_seconds <= 45.0 * 60.0;
    char detail[200];
    std::snprintf(detail, sizeof(detail),
                  "CycleGAN desk run: test IoU %.4f (>= 0.50), CGAN %.4f > CycleGAN %.4f, %.0fs "
                  "(<= 2700s)",
                  runs.cyc_iou, runs.cgan_iou, runs.cyc_iou, runs.cyc_seconds);
    report(4, iou_ok && order_ok && time_ok, detail);
    CHECK(iou_ok);
    CHECK(order_ok);
    CHECK(time_ok);
}

TEST_CASE("criterion 5: split reproduces the reference counts deterministically") {
    bool ok = true;
    {
        PairedDataset ds = synth_shapes(40, 16, 77);
        auto [tr1, te1] = split_dataset(ds, {35, 5, 99});
        auto [tr2, te2] = split_dataset(ds, {35, 5, 99});
        ok = ok && tr1.size() == 35 && te1.size() == 5;
        for (size_t i = 0; i < tr1.size(); ++i) ok = ok && tr1.samples[i].name == tr2.samples[i].name;
    }
    {
        PairedDataset ds = synth_shapes(366, 16, 78);
        auto [tr, te] = split_dataset(ds, {320, 46, 99});
        ok = ok && tr.size() == 320 && te.size() == 46;
    }
    report(5, ok, "split fidelity: 40 -> 35/5 and 366 -> 320/46, deterministic per seed");
    CHECK(ok);
}

TEST_CASE("criterion 6: identical cmd_train invocations are byte-identical") {
    const std::string cli = cli_binary();
    REQUIRE_MESSAGE(!cli.empty(), "MASKGAN_CLI must point at the CLI binary (set by ctest)");
    testutil::TempDir dir("accept_repro");
    const std::string log = " >> " + (dir / "log.txt").string() + " 2>&1";
    REQUIRE(run_shell(cli + " synth --n 12 --size 32 --seed 4 --out " + (dir / "data").string() +
                      log) == 0);
    const std::string train = cli + " train --task cgan --data " + (dir / "data").string() +
                              " --epochs 5 --train-count 10 --test-count 2 --seed 4 --out ";
    REQUIRE(run_shell(train + (dir / "r1").string() + log) == 0);
    REQUIRE(run_shell(train + (dir / "r2").string() + log) == 0);
    const bool ck_ok = testutil::same_bytes(dir / "r1" / "checkpoint.mgan",
                                            dir / "r2" / "checkpoint.mgan");
    const bool csv_ok = testutil::same_bytes(dir / "r1" / "loss_history.csv",
                                             dir / "r2" / "loss_history.csv");
    report(6, ck_ok && csv_ok,
           "reproducibility: two cmd_train runs, checkpoints and loss CSVs byte-identical");
    CHECK(ck_ok);
    CHECK(csv_ok);
}

TEST_CASE("criterion 7: metrics match brute-force counting on 1000 random pairs") {
    Rng rng(2025);
    bool ok = true;
    for (int trial = 0; trial < 1000; ++trial) {
        const int h = rng.uniform_int(1, 16);
        const int w = rng.uniform_int(1, 16);
        BinaryMask a{h, w, {}}, b{h, w, {}};
        a.v.resize(static_cast<size_t>(h) * w);
        b.v.resize(a.v.size());
        const double pa = rng.uniform01();
        const double pb = rng.uniform01();
        for (auto& v : a.v) v = rng.uniform01() < pa ? 1 : 0;
        for (auto& v : b.v) v = rng.uniform01() < pb ? 1 : 0;

        long long inter = 0, na = 0, nb = 0, match = 0;
        for (size_t i = 0; i < a.v.size(); ++i) {
            inter += (a.v[i] & b.v[i]);
            na += a.v[i];
            nb += b.v[i];
            match += (a.v[i] == b.v[i]);
        }
        const long long uni = na + nb - inter;
        const double ref_iou = uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
        const double ref_dice =
            (na + nb) == 0 ? 1.0 : 2.0 * static_cast<double>(inter) / static_cast<double>(na + nb);
        const double ref_acc = static_cast<double>(match) / static_cast<double>(a.v.size());
        ok = ok && iou(a, b) == ref_iou && dice(a, b) == ref_dice && pixel_accuracy(a, b) == ref_acc;
    }
    report(7, ok, "metric oracle: iou/dice/accuracy exact against pixel counting on 1000 pairs");
    CHECK(ok);
}

TEST_CASE("criterion 8: checkpoint round trip and corruption rejection") {
    const DeskRuns& runs = desk();
    testutil::TempDir dir("accept_ckpt");
    const auto p1 = dir / "a.mgan";
    const auto p2 = dir / "b.mgan";
    save_checkpoint(runs.cgan_ck, p1);
    save_checkpoint(load_checkpoint(p1), p2);
    const bool round_ok = testutil::same_bytes(p1, p2);

    bool reject_ok = true;
    const auto bytes = testutil::read_bytes(p1);
    for (size_t keep : {size_t{6}, bytes.size() / 3, bytes.size() - 2}) {
        std::vector<char> cut(bytes.begin(), bytes.begin() + static_cast<long>(keep));
        testutil::write_bytes(dir / "cut.mgan", cut);
        try {
            load_checkpoint(dir / "cut.mgan");
            reject_ok = false;
        } catch (const Error& e) {
            reject_ok = reject_ok && e.code() == ErrorCode::corrupt_file;
        }
    }
    for (size_t at : {size_t{0}, size_t{8}, bytes.size() / 2, bytes.size() - 1}) {
        auto flipped = bytes;
        flipped[at] = static_cast<char>(flipped[at] ^ 0x01);
        testutil::write_bytes(dir / "flip.mgan", flipped);
        try {
            load_checkpoint(dir / "flip.mgan");
            reject_ok = false;
        } catch (const Error& e) {
            reject_ok = reject_ok && e.code() == ErrorCode::corrupt_file;
        }
    }
    report(8, round_ok && reject_ok,
           "checkpoint: save/load/save byte-identical; truncations and bit-flips rejected cleanly");
    CHECK(round_ok);
    CHECK(reject_ok);
}

TEST_CASE("criterion 9: reverse direction and cycle reconstruction beat an untrained model") {
    const DeskRuns& runs = desk();
    NoGradGuard no_grad;
    const Generator gen_ab = runs.cyc_ck.generator("genAB");
    const Generator gen_ba = runs.cyc_ck.generator("genBA");

    bool shape_ok = true;
    for (const auto& s : runs.test_ds.samples) {
        Tensor image_like = forward_generator(gen_ba, s.mask, false);
        shape_ok = shape_ok && image_like.shape() == s.image.shape();
        for (float v : image_like.values()) shape_ok = shape_ok && v >= -1.0f && v <= 1.0f;
    }

    const auto cycle_l1 = [&](const Generator& ab, const Generator& ba) {
        double total = 0.0;
        for (const auto& s : runs.test_ds.samples) {
            Tensor rec = forward_generator(ba, forward_generator(ab, s.image, false), false);
            total += l1_loss(rec, s.image).item();
        }
        return total / static_cast<double>(runs.test_ds.size());
    };

    const double trained = cycle_l1(gen_ab, gen_ba);
    TrainConfig cfg = desk_config(Task::cyclegan);
    Rng u1 = Rng::derive(999, "untrained.ab");
    Rng u2 = Rng::derive(999, "untrained.ba");
    Generator raw_ab = build_unet(cfg.generator_a2b(), u1);
    Generator raw_ba = build_unet(cfg.generator_b2a(), u2);
    const double untrained = cycle_l1(raw_ab, raw_ba);

    const bool recon_ok = trained < untrained;
    char detail[200];
    std::snprintf(detail, sizeof(detail),
                  "reverse direction: mask->image in range; cycle L1 trained %.4f < untrained %.4f",
                  trained, untrained);
    report(9, shape_ok && recon_ok, detail);
    CHECK(shape_ok);
    CHECK(recon_ok);
}
