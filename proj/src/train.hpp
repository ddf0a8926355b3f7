#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "data.hpp"
#include "models.hpp"

namespace mg {

enum class Task { cgan, cyclegan };

std::string task_name(Task t);
std::optional<Task> task_from_name(std::string_view name);

struct TrainConfig {
    Task task = Task::cgan;
    int epochs = 100;
    int batch_size = 1;
    float learning_rate = 2e-4f;
    float adam_beta1 = 0.5f;
    float adam_beta2 = 0.999f;
    float adam_eps = 1e-8f;
    float lambda_l1 = 100.0f;     // CGAN reconstruction weight
    float lambda_cycle = 10.0f;   // CycleGAN cycle-consistency weight
    uint64_t seed = 1;
    int image_size = 32;
    int image_channels = 1;
    int mask_channels = 1;
    int gen_base = 8;
    int gen_depth = 3;
    int disc_base = 8;
    int disc_layers = 2;
    int checkpoint_every = 25;
    // Split bookkeeping so evaluation can rebuild the exact test set.
    int n_train = 0;
    int n_test = 0;

    void validate() const;
    GeneratorConfig generator_a2b() const;  // image -> mask
    GeneratorConfig generator_b2a() const;  // mask -> image
    DiscriminatorConfig discriminator_cond() const;  // sees image ++ mask
    DiscriminatorConfig discriminator_a() const;     // sees images
    DiscriminatorConfig discriminator_b() const;     // sees masks
};

struct AdamConfig {
    float lr;
    float beta1;
    float beta2;
    float eps;
};

// First/second moments parallel to a ModelParams entry list; t is shared.
struct AdamState {
    std::vector<std::vector<float>> m;
    std::vector<std::vector<float>> v;
    long long t = 0;
};

void adam_init(AdamState& state, const ModelParams& params);
void adam_step(ModelParams& params, AdamState& state, const AdamConfig& cfg);

struct StepLosses {
    double d_loss = 0.0;
    double g_loss = 0.0;
    double g_adv = 0.0;
    double g_l1 = 0.0;     // lambda-weighted, CGAN only
    double g_cycle = 0.0;  // lambda-weighted, CycleGAN only
    // CycleGAN detail: per-side adversarial and cycle terms.
    double g_adv_ab = 0.0, g_adv_ba = 0.0;
    double d_loss_a = 0.0, d_loss_b = 0.0;
    double cycle_a = 0.0, cycle_b = 0.0;
};

struct EpochRecord {
    int epoch = 0;  // 1-based
    double g_loss = 0.0;
    double d_loss = 0.0;
    double g_adv = 0.0;
    double g_l1 = 0.0;
    double g_cycle = 0.0;
    bool has_l1 = false;
    bool has_cycle = false;
};

using LossHistory = std::vector<EpochRecord>;

// Stability summary over the trailing window (losses flat <=> the adversarial
// game has settled).
struct StabilityReport {
    int window = 0;
    double g_stddev = 0.0;
    double d_stddev = 0.0;
};
StabilityReport loss_stability(const LossHistory& history, int window = 10);

struct CganModels {
    Generator gen;
    Discriminator disc;
};

struct CganOptim {
    AdamState gen;
    AdamState disc;
};

struct CycleModels {
    Generator gen_ab;
    Generator gen_ba;
    Discriminator disc_a;
    Discriminator disc_b;
};

struct CycleOptim {
    AdamState gen_ab;
    AdamState gen_ba;
    AdamState disc_a;
    AdamState disc_b;
};

// One paired adversarial step: discriminator update on real/fake pairs with
// the fake detached, then generator update on adversarial + L1 terms.
StepLosses cgan_step(CganModels& models, const Tensor& image, const Tensor& mask,
                     const TrainConfig& cfg, CganOptim& optim, Rng& dropout_rng);

// One unpaired step: joint generator update (two adversarial + two cycle
// terms), then per-domain discriminator updates on detached fakes.
StepLosses cyclegan_step(CycleModels& models, const Tensor& a, const Tensor& b,
                         const TrainConfig& cfg, CycleOptim& optim, Rng& dropout_rng);

struct Checkpoint {
    TrainConfig config;
    LossHistory history;
    // Fixed order: cgan -> {gen, disc}; cyclegan -> {genAB, genBA, discA, discB}.
    std::vector<std::pair<std::string, ModelParams>> models;
    std::vector<std::pair<std::string, AdamState>> optim;

    const ModelParams& model(std::string_view name) const;
    Generator generator(std::string_view name) const;
    Discriminator discriminator(std::string_view name) const;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// Full runs: epochs x shuffled samples, per-epoch mean losses, periodic +
// final checkpoints under out_dir (skipped when out_dir is empty).
Checkpoint train_cgan(const TrainConfig& cfg, const PairedDataset& train_ds,
                      const std::filesystem::path& out_dir, const EpochCallback& on_epoch = {});
Checkpoint train_cyclegan(const TrainConfig& cfg, const UnpairedDataset& train_ds,
                          const std::filesystem::path& out_dir, const EpochCallback& on_epoch = {});

}  // namespace mg
