// Exercises the shared-library surface the way an external caller would:
// nothing here touches core headers, only maskgan.h.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>
#include <maskgan.h>

#include <cstring>
#include <string>
#include <vector>

#include "testutil.hpp"

namespace {

struct Dataset {
    mg_dataset* p = nullptr;
    ~Dataset() { mg_dataset_free(p); }
};

struct Ckpt {
    mg_checkpoint* p = nullptr;
    ~Ckpt() { mg_checkpoint_free(p); }
};

mg_train_config tiny_config(mg_task task) {
    mg_train_config cfg;
    mg_train_config_init(&cfg, task);
    cfg.epochs = 2;
    cfg.image_size = 16;
    cfg.gen_base = 2;
    cfg.gen_depth = 2;
    cfg.disc_base = 2;
    cfg.disc_layers = 1;
    cfg.seed = 3;
    cfg.checkpoint_every = 0;
    return cfg;
}

}  // namespace

TEST_CASE("version and status strings") {
    CHECK(std::string(mg_version()) == "1.0.0");
    CHECK(std::string(mg_status_name(MG_OK)) == "ok");
    CHECK(std::string(mg_status_name(MG_ERR_CORRUPT)) == "corrupt file");
}

TEST_CASE("defaults carry the standard recipe") {
    mg_train_config cfg;
    mg_train_config_init(&cfg, MG_TASK_CGAN);
    CHECK(cfg.epochs == 100);
    CHECK(cfg.batch_size == 1);
    CHECK(cfg.learning_rate == 2e-4f);
    CHECK(cfg.adam_beta1 == 0.5f);
    CHECK(cfg.adam_beta2 == 0.999f);
    CHECK(cfg.lambda_l1 == 100.0f);
    CHECK(cfg.lambda_cycle == 10.0f);
    CHECK(cfg.image_size == 32);
    CHECK(cfg.gen_base == 8);
    CHECK(cfg.gen_depth == 3);
    CHECK(cfg.disc_layers == 2);
    CHECK(cfg.checkpoint_every == 25);
}

TEST_CASE("null arguments are rejected with messages") {
    CHECK(mg_dataset_synth(4, 32, 1, nullptr) == MG_ERR_INVALID_ARGUMENT);
    CHECK(std::strlen(mg_last_error()) > 0);
    mg_dataset* ds = nullptr;
    CHECK(mg_dataset_load(nullptr, 32, &ds) == MG_ERR_INVALID_ARGUMENT);
    CHECK(mg_train(nullptr, nullptr, nullptr, nullptr, nullptr, nullptr) == MG_ERR_INVALID_ARGUMENT);
    CHECK(mg_checkpoint_load(nullptr, nullptr) == MG_ERR_INVALID_ARGUMENT);
    CHECK(mg_dataset_size(nullptr) == 0);
    CHECK(mg_dataset_sample_name(nullptr, 0) == nullptr);
}

TEST_CASE("dataset synth, write, load, split round trip") {
    testutil::TempDir dir("capi_ds");
    Dataset ds;
    REQUIRE(mg_dataset_synth(10, 16, 5, &ds.p) == MG_OK);
    CHECK(mg_dataset_size(ds.p) == 10);
    CHECK(mg_dataset_image_size(ds.p) == 16);
    CHECK(mg_dataset_channels(ds.p) == 1);
    CHECK(std::string(mg_dataset_sample_name(ds.p, 0)) == "sample_00000");
    CHECK(mg_dataset_sample_name(ds.p, 10) == nullptr);

    REQUIRE(mg_dataset_write(ds.p, (dir.path() / "data").string().c_str()) == MG_OK);
    Dataset loaded;
    REQUIRE(mg_dataset_load((dir.path() / "data").string().c_str(), 16, &loaded.p) == MG_OK);
    CHECK(mg_dataset_size(loaded.p) == 10);

    Dataset train, test;
    REQUIRE(mg_dataset_split(ds.p, 7, 3, 9, &train.p, &test.p) == MG_OK);
    CHECK(mg_dataset_size(train.p) == 7);
    CHECK(mg_dataset_size(test.p) == 3);
    CHECK(mg_dataset_split(ds.p, 5, 3, 9, &train.p, &test.p) == MG_ERR_INVALID_ARGUMENT);

    CHECK(mg_dataset_synth(0, 16, 1, &ds.p) == MG_ERR_INVALID_ARGUMENT);
    Dataset missing;
    CHECK(mg_dataset_load((dir.path() / "nope").string().c_str(), 16, &missing.p) == MG_ERR_IO);
}

TEST_CASE("cgan training through the C API with history callbacks") {
    testutil::TempDir dir("capi_train");
    Dataset ds;
    REQUIRE(mg_dataset_synth(4, 16, 5, &ds.p) == MG_OK);
    mg_train_config cfg = tiny_config(MG_TASK_CGAN);
    cfg.n_train = 4;

    int epochs_seen = 0;
    const auto cb = [](const mg_epoch_record* rec, void* user) {
        int* count = static_cast<int*>(user);
        ++*count;
        CHECK(rec->epoch == *count);
        CHECK(rec->has_l1 == 1);
        CHECK(rec->has_cycle == 0);
    };
    Ckpt ck;
    REQUIRE(mg_train(&cfg, ds.p, (dir.path() / "run").string().c_str(), cb, &epochs_seen, &ck.p) ==
            MG_OK);
    CHECK(epochs_seen == 2);
    CHECK(mg_checkpoint_task(ck.p) == MG_TASK_CGAN);
    CHECK(mg_checkpoint_image_size(ck.p) == 16);
    CHECK(mg_checkpoint_epochs(ck.p) == 2);

    int n_train = 0, n_test = 0;
    uint64_t seed = 0;
    mg_checkpoint_split(ck.p, &n_train, &n_test, &seed);
    CHECK(n_train == 4);
    CHECK(seed == 3);

    mg_epoch_record rec;
    REQUIRE(mg_checkpoint_history(ck.p, 1, &rec) == MG_OK);
    CHECK(rec.epoch == 2);
    CHECK(mg_checkpoint_history(ck.p, 2, &rec) == MG_ERR_INVALID_ARGUMENT);

    double g_std = -1.0, d_std = -1.0;
    REQUIRE(mg_checkpoint_stability(ck.p, 10, &g_std, &d_std) == MG_OK);
    CHECK(g_std >= 0.0);

    // Save -> load -> save is byte-identical through the C API too.
    const auto p1 = dir.path() / "a.mgan";
    const auto p2 = dir.path() / "b.mgan";
    REQUIRE(mg_checkpoint_save(ck.p, p1.string().c_str()) == MG_OK);
    Ckpt again;
    REQUIRE(mg_checkpoint_load(p1.string().c_str(), &again.p) == MG_OK);
    REQUIRE(mg_checkpoint_save(again.p, p2.string().c_str()) == MG_OK);
    CHECK(testutil::same_bytes(p1, p2));

    // Evaluation fills per-sample and mean metrics and writes triptychs.
    std::vector<mg_sample_metrics> per(static_cast<size_t>(mg_dataset_size(ds.p)));
    mg_sample_metrics mean{};
    REQUIRE(mg_evaluate(ck.p, ds.p, 0.0f, (dir.path() / "figs").string().c_str(), per.data(),
                        &mean) == MG_OK);
    double sum = 0.0;
    for (const auto& s : per) {
        CHECK(s.iou >= 0.0);
        CHECK(s.iou <= 1.0);
        CHECK(s.dice >= s.iou);
        sum += s.iou;
    }
    CHECK(mean.iou == doctest::Approx(sum / static_cast<double>(per.size())).epsilon(1e-12));
    CHECK(std::filesystem::exists(dir.path() / "figs" / "triptych_sample_00000.png"));

    // Inference from a file, to a file.
    const auto image_dir = dir.path() / "data";
    REQUIRE(mg_dataset_write(ds.p, image_dir.string().c_str()) == MG_OK);
    const auto in_png = image_dir / "images" / "sample_00000.png";
    const auto out_png = dir.path() / "mask.png";
    REQUIRE(mg_infer_file(ck.p, in_png.string().c_str(), out_png.string().c_str(), 0, MG_DIR_A2B,
                          0.0f) == MG_OK);
    CHECK(std::filesystem::exists(out_png));
    // B2A on a cgan checkpoint is a task mismatch.
    CHECK(mg_infer_file(ck.p, in_png.string().c_str(), out_png.string().c_str(), 0, MG_DIR_B2A,
                        0.0f) == MG_ERR_TASK_MISMATCH);
    CHECK(mg_generate_b2a(ck.p, ds.p, (dir.path() / "b2a").string().c_str()) ==
          MG_ERR_TASK_MISMATCH);
}

TEST_CASE("cyclegan training and the reverse direction through the C API") {
    testutil::TempDir dir("capi_cyc");
    Dataset ds;
    REQUIRE(mg_dataset_synth(4, 16, 6, &ds.p) == MG_OK);
    mg_train_config cfg = tiny_config(MG_TASK_CYCLEGAN);
    cfg.n_train = 4;

    Ckpt ck;
    REQUIRE(mg_train(&cfg, ds.p, nullptr, nullptr, nullptr, &ck.p) == MG_OK);
    CHECK(mg_checkpoint_task(ck.p) == MG_TASK_CYCLEGAN);
    mg_epoch_record rec;
    REQUIRE(mg_checkpoint_history(ck.p, 0, &rec) == MG_OK);
    CHECK(rec.has_cycle == 1);
    CHECK(rec.has_l1 == 0);

    REQUIRE(mg_generate_b2a(ck.p, ds.p, (dir.path() / "b2a").string().c_str()) == MG_OK);
    CHECK(std::filesystem::exists(dir.path() / "b2a" / "gen_sample_00000.png"));

    // a2b evaluation works on cyclegan checkpoints too (it uses genAB).
    mg_sample_metrics mean{};
    REQUIRE(mg_evaluate(ck.p, ds.p, 0.0f, nullptr, nullptr, &mean) == MG_OK);
    CHECK(mean.iou >= 0.0);

    // Single-file reverse inference: feed a mask file, get an image back.
    REQUIRE(mg_dataset_write(ds.p, (dir.path() / "data").string().c_str()) == MG_OK);
    const auto mask_png = dir.path() / "data" / "masks" / "sample_00001.png";
    const auto img_png = dir.path() / "from_mask.png";
    REQUIRE(mg_infer_file(ck.p, mask_png.string().c_str(), img_png.string().c_str(), 0, MG_DIR_B2A,
                          0.0f) == MG_OK);
    CHECK(std::filesystem::exists(img_png));
}

TEST_CASE("corrupt and truncated checkpoints come back as status codes") {
    testutil::TempDir dir("capi_corrupt");
    Dataset ds;
    REQUIRE(mg_dataset_synth(2, 16, 7, &ds.p) == MG_OK);
    mg_train_config cfg = tiny_config(MG_TASK_CGAN);
    cfg.epochs = 1;
    Ckpt ck;
    REQUIRE(mg_train(&cfg, ds.p, nullptr, nullptr, nullptr, &ck.p) == MG_OK);
    const auto path = dir.path() / "ck.mgan";
    REQUIRE(mg_checkpoint_save(ck.p, path.string().c_str()) == MG_OK);

    auto bytes = testutil::read_bytes(path);
    bytes.resize(bytes.size() / 2);
    testutil::write_bytes(dir.path() / "cut.mgan", bytes);
    Ckpt broken;
    CHECK(mg_checkpoint_load((dir.path() / "cut.mgan").string().c_str(), &broken.p) ==
          MG_ERR_CORRUPT);
    CHECK(std::strlen(mg_last_error()) > 0);

    auto flipped = testutil::read_bytes(path);
    flipped[flipped.size() / 3] ^= 0x10;
    testutil::write_bytes(dir.path() / "flip.mgan", flipped);
    CHECK(mg_checkpoint_load((dir.path() / "flip.mgan").string().c_str(), &broken.p) ==
          MG_ERR_CORRUPT);
}
