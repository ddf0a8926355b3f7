// Command-line front end. Everything goes through the C API in maskgan.h;
// this file owns only flag parsing, config files, manifests and report/CSV
// formatting.

#include <maskgan.h>

#include <CLI11.hpp>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RuntimeFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void check(mg_status st) {
    if (st == MG_OK) return;
    std::string msg = mg_status_name(st);
    if (*mg_last_error()) msg += std::string(": ") + mg_last_error();
    throw RuntimeFailure(msg);
}

std::string fmt_f32(float v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(v));
    return buf;
}

std::string fmt_f64(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// Seconds with a steady clock, for the manifest.
class Stopwatch {
public:
    Stopwatch() : start_(std::chrono::steady_clock::now()) {}
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

using Manifest = std::vector<std::pair<std::string, std::string>>;

void write_manifest(const Manifest& entries, const fs::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw RuntimeFailure("cannot write manifest: " + path.string());
    for (const auto& [k, v] : entries) out << k << "=" << v << "\n";
}

// key=value config file; '#' starts a comment line. Returns pairs in file
// order; informational manifest keys are dropped so a manifest re-runs as-is.
std::map<std::string, std::string> read_config_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw RuntimeFailure("cannot read config file: " + path.string());
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos) throw UsageError("malformed config line: " + line);
        const std::string key = line.substr(0, eq);
        if (key == "command" || key == "duration_seconds" || key.rfind("artifact.", 0) == 0) continue;
        kv[key] = line.substr(eq + 1);
    }
    return kv;
}

// One CLI option backed by a string slot, so config-file values can fill
// anything the command line left unset.
struct OptionTable {
    explicit OptionTable(CLI::App* app) : cmd(app) {}

    CLI::App* cmd = nullptr;
    std::map<std::string, std::pair<CLI::Option*, std::string*>> slots;

    CLI::Option* add(const std::string& name, std::string* slot, const std::string& help) {
        CLI::Option* opt = cmd->add_option("--" + name, *slot, help);
        slots[name] = {opt, slot};
        return opt;
    }

    void apply_config(const fs::path& path) {
        for (const auto& [key, value] : read_config_file(path)) {
            auto it = slots.find(key);
            if (it == slots.end()) throw UsageError("unknown config key: " + key);
            if (it->second.first->count() == 0) *it->second.second = value;
        }
    }
};

int parse_int(const std::string& v, const std::string& what) {
    try {
        size_t used = 0;
        const int out = std::stoi(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw UsageError("invalid integer for --" + what + ": '" + v + "'");
    }
}

float parse_float(const std::string& v, const std::string& what) {
    try {
        size_t used = 0;
        const float out = std::stof(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw UsageError("invalid number for --" + what + ": '" + v + "'");
    }
}

uint64_t parse_seed(const std::string& v) {
    try {
        size_t used = 0;
        const uint64_t out = std::stoull(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw UsageError("invalid seed: '" + v + "'");
    }
}

// Last-resort default comes from MASKGAN_SEED, then 1.
uint64_t resolve_seed(const std::string& slot) {
    if (!slot.empty()) return parse_seed(slot);
    if (const char* env = std::getenv("MASKGAN_SEED"); env && *env) return parse_seed(env);
    return 1;
}

mg_task parse_task(const std::string& v) {
    if (v == "cgan") return MG_TASK_CGAN;
    if (v == "cyclegan") return MG_TASK_CYCLEGAN;
    if (v.empty()) throw UsageError("missing --task (valid tasks: cgan, cyclegan)");
    throw UsageError("unknown task '" + v + "' (valid tasks: cgan, cyclegan)");
}

mg_direction parse_direction(const std::string& v) {
    if (v.empty() || v == "a2b") return MG_DIR_A2B;
    if (v == "b2a") return MG_DIR_B2A;
    throw UsageError("unknown direction '" + v + "' (valid: a2b, b2a)");
}

struct DatasetHandle {
    mg_dataset* ptr = nullptr;
    ~DatasetHandle() { mg_dataset_free(ptr); }
};

struct CheckpointHandle {
    mg_checkpoint* ptr = nullptr;
    ~CheckpointHandle() { mg_checkpoint_free(ptr); }
};

void require(bool ok, const std::string& message) {
    if (!ok) throw UsageError(message);
}

void write_loss_csv(const mg_checkpoint* ck, const fs::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw RuntimeFailure("cannot write loss CSV: " + path.string());
    out << "epoch,g_loss,d_loss,g_adv,g_l1,g_cycle\n";
    for (int i = 0; i < mg_checkpoint_epochs(ck); ++i) {
        mg_epoch_record r;
        check(mg_checkpoint_history(ck, i, &r));
        out << r.epoch << "," << fmt_f64(r.g_loss) << "," << fmt_f64(r.d_loss) << ","
            << fmt_f64(r.g_adv) << "," << (r.has_l1 ? fmt_f64(r.g_l1) : std::string()) << ","
            << (r.has_cycle ? fmt_f64(r.g_cycle) : std::string()) << "\n";
    }
}

// ---- synth ---------------------------------------------------------------

struct SynthArgs {
    std::string n, size, seed, out;
};

int run_synth(const SynthArgs& a) {
    Stopwatch timer;
    require(!a.out.empty(), "missing --out");
    const int n = a.n.empty() ? 0 : parse_int(a.n, "n");
    require(n >= 1, "--n must be >= 1");
    const int size = a.size.empty() ? 32 : parse_int(a.size, "size");
    require(size >= 16, "--size must be >= 16");
    const uint64_t seed = resolve_seed(a.seed);

    DatasetHandle ds;
    check(mg_dataset_synth(n, size, seed, &ds.ptr));
    check(mg_dataset_write(ds.ptr, a.out.c_str()));
    std::cout << "wrote " << n << " samples to " << a.out << "/images and " << a.out << "/masks\n";

    Manifest m{{"command", "synth"},
               {"n", std::to_string(n)},
               {"size", std::to_string(size)},
               {"seed", std::to_string(seed)},
               {"out", a.out},
               {"artifact.dataset_dir", a.out},
               {"duration_seconds", fmt_f64(timer.seconds())}};
    write_manifest(m, fs::path(a.out) / "manifest.txt");
    return 0;
}

// ---- train ---------------------------------------------------------------

struct TrainArgs {
    std::string task, data, out, epochs, batch_size, lr, beta1, beta2, adam_eps;
    std::string lambda_l1, lambda_cycle, seed, image_size;
    std::string gen_base, gen_depth, disc_base, disc_layers, checkpoint_every;
    std::string train_count, test_count;
};

int run_train(const TrainArgs& a) {
    Stopwatch timer;
    const mg_task task = parse_task(a.task);
    require(!a.data.empty(), "missing --data");
    require(!a.out.empty(), "missing --out");

    mg_train_config cfg;
    mg_train_config_init(&cfg, task);
    const auto set_int = [](int& dst, const std::string& v, const char* name) {
        if (!v.empty()) dst = parse_int(v, name);
    };
    const auto set_f32 = [](float& dst, const std::string& v, const char* name) {
        if (!v.empty()) dst = parse_float(v, name);
    };
    set_int(cfg.epochs, a.epochs, "epochs");
    set_int(cfg.batch_size, a.batch_size, "batch-size");
    set_f32(cfg.learning_rate, a.lr, "lr");
    set_f32(cfg.adam_beta1, a.beta1, "beta1");
    set_f32(cfg.adam_beta2, a.beta2, "beta2");
    set_f32(cfg.adam_eps, a.adam_eps, "adam-eps");
    set_f32(cfg.lambda_l1, a.lambda_l1, "lambda-l1");
    set_f32(cfg.lambda_cycle, a.lambda_cycle, "lambda-cycle");
    set_int(cfg.image_size, a.image_size, "image-size");
    set_int(cfg.gen_base, a.gen_base, "gen-base");
    set_int(cfg.gen_depth, a.gen_depth, "gen-depth");
    set_int(cfg.disc_base, a.disc_base, "disc-base");
    set_int(cfg.disc_layers, a.disc_layers, "disc-layers");
    set_int(cfg.checkpoint_every, a.checkpoint_every, "checkpoint-every");
    cfg.seed = resolve_seed(a.seed);
    require(cfg.epochs >= 1, "--epochs must be >= 1");
    require(cfg.batch_size >= 1, "--batch-size must be >= 1");

    DatasetHandle full;
    check(mg_dataset_load(a.data.c_str(), cfg.image_size, &full.ptr));
    const int total = mg_dataset_size(full.ptr);

    DatasetHandle train, test;
    const mg_dataset* train_ds = full.ptr;
    if (!a.train_count.empty() || !a.test_count.empty()) {
        require(!a.train_count.empty() && !a.test_count.empty(),
                "--train-count and --test-count must be given together");
        cfg.n_train = parse_int(a.train_count, "train-count");
        cfg.n_test = parse_int(a.test_count, "test-count");
        require(cfg.n_train >= 1 && cfg.n_test >= 1, "--train-count/--test-count must be >= 1");
        check(mg_dataset_split(full.ptr, cfg.n_train, cfg.n_test, cfg.seed, &train.ptr, &test.ptr));
        train_ds = train.ptr;
    } else {
        cfg.n_train = total;
        cfg.n_test = 0;
    }

    std::cout << "training " << (task == MG_TASK_CGAN ? "cgan" : "cyclegan") << " on " << cfg.n_train
              << " samples (" << total << " total) for " << cfg.epochs << " epochs, seed " << cfg.seed
              << "\n";
    const auto print_epoch = [](const mg_epoch_record* r, void*) {
        std::printf("epoch %d g_loss=%.4f d_loss=%.4f", r->epoch, r->g_loss, r->d_loss);
        if (r->has_l1) std::printf(" g_l1=%.4f", r->g_l1);
        if (r->has_cycle) std::printf(" g_cycle=%.4f", r->g_cycle);
        std::printf("\n");
        std::fflush(stdout);
    };

    CheckpointHandle ck;
    check(mg_train(&cfg, train_ds, a.out.c_str(), print_epoch, nullptr, &ck.ptr));

    const fs::path out_dir(a.out);
    write_loss_csv(ck.ptr, out_dir / "loss_history.csv");

    double g_std = 0.0, d_std = 0.0;
    check(mg_checkpoint_stability(ck.ptr, 10, &g_std, &d_std));
    std::printf("loss stability over final 10 epochs: g_stddev=%.6f d_stddev=%.6f\n", g_std, d_std);

    Manifest m{{"command", "train"},
               {"task", task == MG_TASK_CGAN ? "cgan" : "cyclegan"},
               {"data", a.data},
               {"out", a.out},
               {"epochs", std::to_string(cfg.epochs)},
               {"batch-size", std::to_string(cfg.batch_size)},
               {"lr", fmt_f32(cfg.learning_rate)},
               {"beta1", fmt_f32(cfg.adam_beta1)},
               {"beta2", fmt_f32(cfg.adam_beta2)},
               {"adam-eps", fmt_f32(cfg.adam_eps)},
               {"lambda-l1", fmt_f32(cfg.lambda_l1)},
               {"lambda-cycle", fmt_f32(cfg.lambda_cycle)},
               {"image-size", std::to_string(cfg.image_size)},
               {"gen-base", std::to_string(cfg.gen_base)},
               {"gen-depth", std::to_string(cfg.gen_depth)},
               {"disc-base", std::to_string(cfg.disc_base)},
               {"disc-layers", std::to_string(cfg.disc_layers)},
               {"checkpoint-every", std::to_string(cfg.checkpoint_every)},
               {"seed", std::to_string(cfg.seed)}};
    if (!a.train_count.empty()) {
        m.emplace_back("train-count", std::to_string(cfg.n_train));
        m.emplace_back("test-count", std::to_string(cfg.n_test));
    }
    m.emplace_back("artifact.checkpoint", (out_dir / "checkpoint.mgan").string());
    m.emplace_back("artifact.loss_csv", (out_dir / "loss_history.csv").string());
    m.emplace_back("duration_seconds", fmt_f64(timer.seconds()));
    write_manifest(m, out_dir / "manifest.txt");
    std::cout << "checkpoint: " << (out_dir / "checkpoint.mgan").string() << "\n";
    return 0;
}

// ---- eval ------------------------------------------------------------

struct EvalArgs {
    std::string checkpoint, data, out, threshold, direction, task;
    std::string train_count, test_count, seed;
    bool all = false;
};

int run_eval(const EvalArgs& a) {
    Stopwatch timer;
    require(!a.checkpoint.empty(), "missing --checkpoint");
    require(!a.data.empty(), "missing --data");
    require(!a.out.empty(), "missing --out");

    CheckpointHandle ck;
    check(mg_checkpoint_load(a.checkpoint.c_str(), &ck.ptr));
    if (!a.task.empty() && parse_task(a.task) != mg_checkpoint_task(ck.ptr))
        throw RuntimeFailure("task mismatch: checkpoint was trained as " +
                             std::string(mg_checkpoint_task(ck.ptr) == MG_TASK_CGAN ? "cgan" : "cyclegan"));

    const int image_size = mg_checkpoint_image_size(ck.ptr);
    DatasetHandle full;
    check(mg_dataset_load(a.data.c_str(), image_size, &full.ptr));

    // Rebuild the training-time test split unless told otherwise.
    int n_train = 0, n_test = 0;
    uint64_t seed = 0;
    mg_checkpoint_split(ck.ptr, &n_train, &n_test, &seed);
    if (!a.train_count.empty()) n_train = parse_int(a.train_count, "train-count");
    if (!a.test_count.empty()) n_test = parse_int(a.test_count, "test-count");
    if (!a.seed.empty()) seed = parse_seed(a.seed);

    DatasetHandle train, test;
    const mg_dataset* eval_ds = full.ptr;
    if (!a.all) {
        require(n_test >= 1,
                "checkpoint records no test split; pass --train-count/--test-count or --all");
        check(mg_dataset_split(full.ptr, n_train, n_test, seed, &train.ptr, &test.ptr));
        eval_ds = test.ptr;
    }

    const fs::path out_dir(a.out);
    fs::create_directories(out_dir);
    const mg_direction dir = parse_direction(a.direction);
    Manifest m{{"command", "eval"},       {"checkpoint", a.checkpoint},
               {"data", a.data},          {"out", a.out},
               {"direction", dir == MG_DIR_A2B ? "a2b" : "b2a"},
               {"train-count", std::to_string(n_train)},
               {"test-count", std::to_string(n_test)},
               {"seed", std::to_string(seed)}};

    if (dir == MG_DIR_B2A) {
        check(mg_generate_b2a(ck.ptr, eval_ds, a.out.c_str()));
        std::cout << "wrote " << mg_dataset_size(eval_ds) << " mask->image generations to " << a.out
                  << "\n";
        m.emplace_back("artifact.generations_dir", a.out);
    } else {
        const float threshold = a.threshold.empty() ? 0.0f : parse_float(a.threshold, "threshold");
        m.emplace_back("threshold", fmt_f32(threshold));
        const int n = mg_dataset_size(eval_ds);
        std::vector<mg_sample_metrics> per(static_cast<size_t>(n));
        mg_sample_metrics mean{};
        check(mg_evaluate(ck.ptr, eval_ds, threshold, a.out.c_str(), per.data(), &mean));

        const fs::path report_path = out_dir / "report.csv";
        std::ofstream report(report_path, std::ios::trunc);
        if (!report) throw RuntimeFailure("cannot write report: " + report_path.string());
        report << "name,iou,dice,accuracy\n";
        char buf[160];
        for (int i = 0; i < n; ++i) {
            std::snprintf(buf, sizeof(buf), "%s,%.6f,%.6f,%.6f\n", mg_dataset_sample_name(eval_ds, i),
                          per[static_cast<size_t>(i)].iou, per[static_cast<size_t>(i)].dice,
                          per[static_cast<size_t>(i)].accuracy);
            report << buf;
        }
        std::snprintf(buf, sizeof(buf), "mean,%.6f,%.6f,%.6f\n", mean.iou, mean.dice, mean.accuracy);
        report << buf;
        report.close();

        std::printf("evaluated %d samples: mean iou=%.4f dice=%.4f accuracy=%.4f\n", n, mean.iou,
                    mean.dice, mean.accuracy);
        std::cout << "report: " << report_path.string() << "\n";
        m.emplace_back("artifact.report", report_path.string());
        m.emplace_back("artifact.triptych_dir", a.out);
    }
    m.emplace_back("duration_seconds", fmt_f64(timer.seconds()));
    write_manifest(m, out_dir / "manifest.txt");
    return 0;
}

// ---- infer -----------------------------------------------------------

struct InferArgs {
    std::string checkpoint, image, out, threshold, direction, task;
    bool raw = false;
};

int run_infer(const InferArgs& a) {
    Stopwatch timer;
    require(!a.checkpoint.empty(), "missing --checkpoint");
    require(!a.image.empty(), "missing --image");
    require(!a.out.empty(), "missing --out");

    CheckpointHandle ck;
    check(mg_checkpoint_load(a.checkpoint.c_str(), &ck.ptr));
    if (!a.task.empty() && parse_task(a.task) != mg_checkpoint_task(ck.ptr))
        throw RuntimeFailure("task mismatch: checkpoint was trained as " +
                             std::string(mg_checkpoint_task(ck.ptr) == MG_TASK_CGAN ? "cgan" : "cyclegan"));

    const mg_direction dir = parse_direction(a.direction);
    const float threshold = a.threshold.empty() ? 0.0f : parse_float(a.threshold, "threshold");
    check(mg_infer_file(ck.ptr, a.image.c_str(), a.out.c_str(), a.raw ? 1 : 0, dir, threshold));
    std::cout << "wrote " << a.out << "\n";

    Manifest m{{"command", "infer"},
               {"checkpoint", a.checkpoint},
               {"image", a.image},
               {"out", a.out},
               {"direction", dir == MG_DIR_A2B ? "a2b" : "b2a"},
               {"raw", a.raw ? "1" : "0"},
               {"threshold", fmt_f32(threshold)},
               {"artifact.output", a.out},
               {"duration_seconds", fmt_f64(timer.seconds())}};
    write_manifest(m, fs::path(a.out + ".manifest.txt"));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"maskgan: adversarial image-to-mask translation (training, evaluation, inference)"};
    app.require_subcommand(1);

    SynthArgs synth_args;
    TrainArgs train_args;
    EvalArgs eval_args;
    InferArgs infer_args;
    std::string synth_config, train_config, eval_config, infer_config;

    CLI::App* synth = app.add_subcommand("synth", "Generate a synthetic shapes dataset");
    OptionTable synth_opts{synth};
    synth_opts.add("n", &synth_args.n, "number of samples");
    synth_opts.add("size", &synth_args.size, "square image size (default 32)");
    synth_opts.add("seed", &synth_args.seed, "rng seed");
    synth_opts.add("out", &synth_args.out, "output dataset directory");
    synth->add_option("--config", synth_config, "key=value config file");

    CLI::App* train = app.add_subcommand("train", "Train a model on a paired dataset directory");
    OptionTable train_opts{train};
    train_opts.add("task", &train_args.task, "cgan | cyclegan");
    train_opts.add("data", &train_args.data, "dataset directory (images/ + masks/)");
    train_opts.add("out", &train_args.out, "run output directory");
    train_opts.add("epochs", &train_args.epochs, "training epochs (default 100)");
    train_opts.add("batch-size", &train_args.batch_size, "batch size (default 1)");
    train_opts.add("lr", &train_args.lr, "learning rate (default 2e-4)");
    train_opts.add("beta1", &train_args.beta1, "adam beta1 (default 0.5)");
    train_opts.add("beta2", &train_args.beta2, "adam beta2 (default 0.999)");
    train_opts.add("adam-eps", &train_args.adam_eps, "adam epsilon (default 1e-8)");
    train_opts.add("lambda-l1", &train_args.lambda_l1, "CGAN L1 weight (default 100)");
    train_opts.add("lambda-cycle", &train_args.lambda_cycle, "cycle weight (default 10)");
    train_opts.add("seed", &train_args.seed, "run seed");
    train_opts.add("image-size", &train_args.image_size, "training resolution (default 32)");
    train_opts.add("gen-base", &train_args.gen_base, "generator base channels (default 8)");
    train_opts.add("gen-depth", &train_args.gen_depth, "generator depth (default 3)");
    train_opts.add("disc-base", &train_args.disc_base, "discriminator base channels (default 8)");
    train_opts.add("disc-layers", &train_args.disc_layers, "discriminator stride-2 layers (default 2)");
    train_opts.add("checkpoint-every", &train_args.checkpoint_every,
                   "periodic checkpoint interval (default 25)");
    train_opts.add("train-count", &train_args.train_count, "train split size");
    train_opts.add("test-count", &train_args.test_count, "test split size");
    train->add_option("--config", train_config, "key=value config file");

    CLI::App* eval = app.add_subcommand("eval", "Evaluate a checkpoint on the test split");
    OptionTable eval_opts{eval};
    eval_opts.add("checkpoint", &eval_args.checkpoint, "checkpoint file");
    eval_opts.add("data", &eval_args.data, "dataset directory");
    eval_opts.add("out", &eval_args.out, "output directory for report + triptychs");
    eval_opts.add("threshold", &eval_args.threshold, "binarization threshold in tanh space (default 0)");
    eval_opts.add("direction", &eval_args.direction, "a2b (default) or b2a (cyclegan reverse)");
    eval_opts.add("task", &eval_args.task, "assert the checkpoint task (cgan | cyclegan)");
    eval_opts.add("train-count", &eval_args.train_count, "override recorded split");
    eval_opts.add("test-count", &eval_args.test_count, "override recorded split");
    eval_opts.add("seed", &eval_args.seed, "override recorded split seed");
    eval->add_flag("--all", eval_args.all, "evaluate on the whole dataset, no split");
    eval->add_option("--config", eval_config, "key=value config file");

    CLI::App* infer = app.add_subcommand("infer", "Run a single image through a trained generator");
    OptionTable infer_opts{infer};
    infer_opts.add("checkpoint", &infer_args.checkpoint, "checkpoint file");
    infer_opts.add("image", &infer_args.image, "input image (PNG)");
    infer_opts.add("out", &infer_args.out, "output image path");
    infer_opts.add("threshold", &infer_args.threshold, "binarization threshold (default 0)");
    infer_opts.add("direction", &infer_args.direction, "a2b (default) or b2a (cyclegan reverse)");
    infer_opts.add("task", &infer_args.task, "assert the checkpoint task (cgan | cyclegan)");
    infer->add_flag("--raw", infer_args.raw, "write the linear tanh map instead of a binary mask");
    infer->add_option("--config", infer_config, "key=value config file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    }

    try {
        if (synth->parsed()) {
            if (!synth_config.empty()) synth_opts.apply_config(synth_config);
            return run_synth(synth_args);
        }
        if (train->parsed()) {
            if (!train_config.empty()) train_opts.apply_config(train_config);
            return run_train(train_args);
        }
        if (eval->parsed()) {
            if (!eval_config.empty()) eval_opts.apply_config(eval_config);
            return run_eval(eval_args);
        }
        if (infer->parsed()) {
            if (!infer_config.empty()) infer_opts.apply_config(infer_config);
            return run_infer(infer_args);
        }
        std::cerr << "usage error: no subcommand\n";
        return 2;
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const RuntimeFailure& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
