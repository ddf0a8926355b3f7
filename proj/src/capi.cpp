#include "maskgan.h"

#include <cstring>
#include <string>

#include "checkpoint.hpp"
#include "data.hpp"
#include "eval.hpp"
#include "train.hpp"

struct mg_dataset {
    mg::PairedDataset ds;
};

struct mg_checkpoint {
    mg::Checkpoint ck;
};

namespace {

thread_local std::string g_last_error;

mg_status map_code(mg::ErrorCode code) {
    switch (code) {
        case mg::ErrorCode::invalid_argument: return MG_ERR_INVALID_ARGUMENT;
        case mg::ErrorCode::shape_mismatch: return MG_ERR_SHAPE;
        case mg::ErrorCode::io: return MG_ERR_IO;
        case mg::ErrorCode::corrupt_file: return MG_ERR_CORRUPT;
        case mg::ErrorCode::version_mismatch: return MG_ERR_VERSION;
        case mg::ErrorCode::task_mismatch: return MG_ERR_TASK_MISMATCH;
        case mg::ErrorCode::numeric: return MG_ERR_NUMERIC;
    }
    return MG_ERR_UNKNOWN;
}

template <typename F>
mg_status wrap(F&& body) {
    try {
        g_last_error.clear();
        body();
        return MG_OK;
    } catch (const mg::Error& e) {
        g_last_error = e.what();
        return map_code(e.code());
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return MG_ERR_UNKNOWN;
    } catch (...) {
        g_last_error = "unknown failure";
        return MG_ERR_UNKNOWN;
    }
}

mg_status bad_argument(const char* message) {
    g_last_error = message;
    return MG_ERR_INVALID_ARGUMENT;
}

mg::TrainConfig to_core(const mg_train_config& c, const mg::PairedDataset& ds) {
    mg::TrainConfig cfg;
    cfg.task = c.task == MG_TASK_CGAN ? mg::Task::cgan : mg::Task::cyclegan;
    cfg.epochs = c.epochs;
    cfg.batch_size = c.batch_size;
    cfg.learning_rate = c.learning_rate;
    cfg.adam_beta1 = c.adam_beta1;
    cfg.adam_beta2 = c.adam_beta2;
    cfg.adam_eps = c.adam_eps;
    cfg.lambda_l1 = c.lambda_l1;
    cfg.lambda_cycle = c.lambda_cycle;
    cfg.seed = c.seed;
    cfg.image_size = c.image_size;
    cfg.image_channels = ds.channels;
    cfg.mask_channels = 1;
    cfg.gen_base = c.gen_base;
    cfg.gen_depth = c.gen_depth;
    cfg.disc_base = c.disc_base;
    cfg.disc_layers = c.disc_layers;
    cfg.checkpoint_every = c.checkpoint_every;
    cfg.n_train = c.n_train;
    cfg.n_test = c.n_test;
    return cfg;
}

mg_epoch_record to_c(const mg::EpochRecord& r) {
    mg_epoch_record out;
    out.epoch = r.epoch;
    out.g_loss = r.g_loss;
    out.d_loss = r.d_loss;
    out.g_adv = r.g_adv;
    out.g_l1 = r.g_l1;
    out.g_cycle = r.g_cycle;
    out.has_l1 = r.has_l1 ? 1 : 0;
    out.has_cycle = r.has_cycle ? 1 : 0;
    return out;
}

const char* a2b_model_name(const mg::Checkpoint& ck) {
    return ck.config.task == mg::Task::cgan ? "gen" : "genAB";
}

// Channel-adapt a decoded image to what the generator expects.
mg::Tensor image_tensor_for(const mg::ImageBuffer& raw, int channels, int size) {
    mg::ImageBuffer buf = raw;
    if (channels == 1 && buf.channels == 3) {
        buf = mg::to_gray(buf);
    } else if (channels == 3 && buf.channels == 1) {
        mg::ImageBuffer rgb{buf.width, buf.height, 3, {}};
        rgb.pixels.resize(buf.pixels.size() * 3);
        for (size_t i = 0; i < buf.pixels.size(); ++i)
            rgb.pixels[i * 3] = rgb.pixels[i * 3 + 1] = rgb.pixels[i * 3 + 2] = buf.pixels[i];
        buf = rgb;
    }
    return mg::tensor_from_image(buf, size);
}

}  // namespace

const char* mg_version(void) {
    return "1.0.0";
}

const char* mg_status_name(mg_status status) {
    switch (status) {
        case MG_OK: return "ok";
        case MG_ERR_INVALID_ARGUMENT: return "invalid argument";
        case MG_ERR_SHAPE: return "shape mismatch";
        case MG_ERR_IO: return "io error";
        case MG_ERR_CORRUPT: return "corrupt file";
        case MG_ERR_VERSION: return "version mismatch";
        case MG_ERR_TASK_MISMATCH: return "task mismatch";
        case MG_ERR_NUMERIC: return "non-finite loss";
        case MG_ERR_UNKNOWN: return "unknown error";
    }
    return "unknown error";
}

const char* mg_last_error(void) {
    return g_last_error.c_str();
}

mg_status mg_dataset_synth(int n, int image_size, uint64_t seed, mg_dataset** out) {
    if (!out) return bad_argument("out is NULL");
    return wrap([&] { *out = new mg_dataset{mg::synth_shapes(n, image_size, seed)}; });
}

mg_status mg_dataset_load(const char* dir, int image_size, mg_dataset** out) {
    if (!out || !dir) return bad_argument("dir/out is NULL");
    return wrap([&] { *out = new mg_dataset{mg::load_paired(dir, image_size)}; });
}

mg_status mg_dataset_write(const mg_dataset* ds, const char* dir) {
    if (!ds || !dir) return bad_argument("ds/dir is NULL");
    return wrap([&] { mg::write_dataset(ds->ds, dir); });
}

mg_status mg_dataset_split(const mg_dataset* ds, int n_train, int n_test, uint64_t seed,
                           mg_dataset** train_out, mg_dataset** test_out) {
    if (!ds || !train_out || !test_out) return bad_argument("ds/train_out/test_out is NULL");
    return wrap([&] {
        auto [train, test] = mg::split_dataset(ds->ds, {n_train, n_test, seed});
        *train_out = new mg_dataset{std::move(train)};
        *test_out = new mg_dataset{std::move(test)};
    });
}

int mg_dataset_size(const mg_dataset* ds) {
    return ds ? static_cast<int>(ds->ds.size()) : 0;
}

int mg_dataset_image_size(const mg_dataset* ds) {
    return ds ? ds->ds.image_size : 0;
}

int mg_dataset_channels(const mg_dataset* ds) {
    return ds ? ds->ds.channels : 0;
}

const char* mg_dataset_sample_name(const mg_dataset* ds, int index) {
    if (!ds || index < 0 || static_cast<size_t>(index) >= ds->ds.size()) return nullptr;
    return ds->ds.samples[static_cast<size_t>(index)].name.c_str();
}

void mg_dataset_free(mg_dataset* ds) {
    delete ds;
}

void mg_train_config_init(mg_train_config* cfg, mg_task task) {
    if (!cfg) return;
    mg::TrainConfig d;  // library defaults
    cfg->task = task;
    cfg->epochs = d.epochs;
    cfg->batch_size = d.batch_size;
    cfg->learning_rate = d.learning_rate;
    cfg->adam_beta1 = d.adam_beta1;
    cfg->adam_beta2 = d.adam_beta2;
    cfg->adam_eps = d.adam_eps;
    cfg->lambda_l1 = d.lambda_l1;
    cfg->lambda_cycle = d.lambda_cycle;
    cfg->seed = d.seed;
    cfg->image_size = d.image_size;
    cfg->gen_base = d.gen_base;
    cfg->gen_depth = d.gen_depth;
    cfg->disc_base = d.disc_base;
    cfg->disc_layers = d.disc_layers;
    cfg->checkpoint_every = d.checkpoint_every;
    cfg->n_train = 0;
    cfg->n_test = 0;
}

mg_status mg_train(const mg_train_config* cfg, const mg_dataset* train_ds, const char* out_dir,
                   mg_epoch_callback on_epoch, void* user, mg_checkpoint** out) {
    if (!cfg || !train_ds) return bad_argument("cfg/train_ds is NULL");
    return wrap([&] {
        const mg::TrainConfig core_cfg = to_core(*cfg, train_ds->ds);
        const std::filesystem::path dir = out_dir ? out_dir : "";
        mg::EpochCallback cb;
        if (on_epoch)
            cb = [&](const mg::EpochRecord& r) {
                const mg_epoch_record rec = to_c(r);
                on_epoch(&rec, user);
            };
        mg::Checkpoint ck;
        if (core_cfg.task == mg::Task::cgan) {
            ck = mg::train_cgan(core_cfg, train_ds->ds, dir, cb);
        } else {
            ck = mg::train_cyclegan(core_cfg, mg::to_unpaired(train_ds->ds, core_cfg.seed), dir, cb);
        }
        if (out) *out = new mg_checkpoint{std::move(ck)};
    });
}

mg_status mg_checkpoint_load(const char* path, mg_checkpoint** out) {
    if (!path || !out) return bad_argument("path/out is NULL");
    return wrap([&] { *out = new mg_checkpoint{mg::load_checkpoint(path)}; });
}

mg_status mg_checkpoint_save(const mg_checkpoint* ck, const char* path) {
    if (!ck || !path) return bad_argument("ck/path is NULL");
    return wrap([&] { mg::save_checkpoint(ck->ck, path); });
}

mg_task mg_checkpoint_task(const mg_checkpoint* ck) {
    return (ck && ck->ck.config.task == mg::Task::cyclegan) ? MG_TASK_CYCLEGAN : MG_TASK_CGAN;
}

int mg_checkpoint_image_size(const mg_checkpoint* ck) {
    return ck ? ck->ck.config.image_size : 0;
}

void mg_checkpoint_split(const mg_checkpoint* ck, int* n_train, int* n_test, uint64_t* seed) {
    if (!ck) return;
    if (n_train) *n_train = ck->ck.config.n_train;
    if (n_test) *n_test = ck->ck.config.n_test;
    if (seed) *seed = ck->ck.config.seed;
}

int mg_checkpoint_epochs(const mg_checkpoint* ck) {
    return ck ? static_cast<int>(ck->ck.history.size()) : 0;
}

mg_status mg_checkpoint_history(const mg_checkpoint* ck, int index, mg_epoch_record* out) {
    if (!ck || !out) return bad_argument("ck/out is NULL");
    if (index < 0 || static_cast<size_t>(index) >= ck->ck.history.size())
        return bad_argument("history index out of range");
    *out = to_c(ck->ck.history[static_cast<size_t>(index)]);
    return MG_OK;
}

mg_status mg_checkpoint_stability(const mg_checkpoint* ck, int window, double* g_stddev,
                                  double* d_stddev) {
    if (!ck) return bad_argument("ck is NULL");
    return wrap([&] {
        const mg::StabilityReport rep = mg::loss_stability(ck->ck.history, window);
        if (g_stddev) *g_stddev = rep.g_stddev;
        if (d_stddev) *d_stddev = rep.d_stddev;
    });
}

void mg_checkpoint_free(mg_checkpoint* ck) {
    delete ck;
}

mg_status mg_evaluate(const mg_checkpoint* ck, const mg_dataset* test_ds, float threshold,
                      const char* triptych_dir, mg_sample_metrics* per_sample,
                      mg_sample_metrics* mean_out) {
    if (!ck || !test_ds) return bad_argument("ck/test_ds is NULL");
    return wrap([&] {
        const mg::Generator gen = ck->ck.generator(a2b_model_name(ck->ck));
        const mg::MetricReport report = mg::evaluate(gen, test_ds->ds, threshold);
        if (triptych_dir && *triptych_dir) {
            std::filesystem::create_directories(triptych_dir);
            mg::NoGradGuard no_grad;
            for (const auto& s : test_ds->ds.samples) {
                mg::Tensor pred = mg::forward_generator(gen, s.image, false);
                std::vector<float> bin(pred.numel());
                const mg::BinaryMask m = mg::binarize(pred, threshold);
                for (size_t i = 0; i < bin.size(); ++i) bin[i] = m.v[i] ? 1.0f : -1.0f;
                mg::write_triptych(s.image, s.mask,
                                   mg::Tensor::from_data(pred.shape(), std::move(bin)),
                                   std::filesystem::path(triptych_dir) / ("triptych_" + s.name + ".png"));
            }
        }
        if (per_sample)
            for (size_t i = 0; i < report.per_sample.size(); ++i)
                per_sample[i] = {report.per_sample[i].iou, report.per_sample[i].dice,
                                 report.per_sample[i].accuracy};
        if (mean_out) *mean_out = {report.mean_iou, report.mean_dice, report.mean_accuracy};
    });
}

mg_status mg_generate_b2a(const mg_checkpoint* ck, const mg_dataset* test_ds, const char* out_dir) {
    if (!ck || !test_ds || !out_dir) return bad_argument("ck/test_ds/out_dir is NULL");
    return wrap([&] {
        const mg::Generator gen_ba = ck->ck.generator("genBA");
        std::filesystem::create_directories(out_dir);
        mg::NoGradGuard no_grad;
        for (const auto& s : test_ds->ds.samples) {
            mg::Tensor image_like = mg::forward_generator(gen_ba, s.mask, false);
            mg::write_image(image_like, std::filesystem::path(out_dir) / ("gen_" + s.name + ".png"));
        }
    });
}

mg_status mg_infer_file(const mg_checkpoint* ck, const char* image_path, const char* out_path, int raw,
                        mg_direction direction, float threshold) {
    if (!ck || !image_path || !out_path) return bad_argument("ck/image_path/out_path is NULL");
    return wrap([&] {
        const mg::Checkpoint& core = ck->ck;
        const int size = core.config.image_size;
        const mg::ImageBuffer input = mg::read_png(image_path);

        mg::NoGradGuard no_grad;
        mg::Tensor output;
        if (direction == MG_DIR_B2A) {
            const mg::Generator gen_ba = core.generator("genBA");
            output = mg::forward_generator(gen_ba, mg::read_mask(image_path, size), false);
        } else {
            const mg::Generator gen = core.generator(a2b_model_name(core));
            output = mg::forward_generator(
                gen, image_tensor_for(input, gen.cfg.in_channels, size), false);
        }

        mg::ImageBuffer out_img;
        if (direction == MG_DIR_A2B && !raw) {
            const mg::BinaryMask m = mg::binarize(output, threshold);
            out_img = mg::ImageBuffer{m.w, m.h, 1, {}};
            out_img.pixels.resize(m.v.size());
            for (size_t i = 0; i < m.v.size(); ++i) out_img.pixels[i] = m.v[i] ? 255 : 0;
        } else {
            out_img = mg::image_from_tensor(output);
        }
        // Back to the input's dimensions (nearest keeps masks binary).
        out_img = mg::resize_nearest(out_img, input.width, input.height);
        mg::write_png(out_img, out_path);
    });
}
