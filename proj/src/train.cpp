#include "train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "checkpoint.hpp"

namespace mg {

namespace fs = std::filesystem;

std::string task_name(Task t) {
    return t == Task::cgan ? "cgan" : "cyclegan";
}

std::optional<Task> task_from_name(std::string_view name) {
    if (name == "cgan") return Task::cgan;
    if (name == "cyclegan") return Task::cyclegan;
    return std::nullopt;
}

void TrainConfig::validate() const {
    if (epochs < 1) fail(ErrorCode::invalid_argument, "epochs must be >= 1");
    if (batch_size < 1) fail(ErrorCode::invalid_argument, "batch_size must be >= 1");
    if (!(learning_rate > 0.0f)) fail(ErrorCode::invalid_argument, "learning_rate must be positive");
    if (!(adam_beta1 > 0.0f && adam_beta1 < 1.0f) || !(adam_beta2 > 0.0f && adam_beta2 < 1.0f))
        fail(ErrorCode::invalid_argument, "adam betas must lie in (0,1)");
    if (!(adam_eps > 0.0f)) fail(ErrorCode::invalid_argument, "adam_eps must be positive");
    if (!(lambda_l1 >= 0.0f) || !(lambda_cycle >= 0.0f))
        fail(ErrorCode::invalid_argument, "loss weights must be >= 0");
    if (checkpoint_every < 0) fail(ErrorCode::invalid_argument, "checkpoint_every must be >= 0");
    generator_a2b().validate();
    generator_b2a().validate();
    discriminator_cond().validate();
}

GeneratorConfig TrainConfig::generator_a2b() const {
    return GeneratorConfig{image_channels, mask_channels, gen_base, gen_depth, image_size};
}

GeneratorConfig TrainConfig::generator_b2a() const {
    return GeneratorConfig{mask_channels, image_channels, gen_base, gen_depth, image_size};
}

DiscriminatorConfig TrainConfig::discriminator_cond() const {
    return DiscriminatorConfig{image_channels + mask_channels, disc_base, disc_layers};
}

DiscriminatorConfig TrainConfig::discriminator_a() const {
    return DiscriminatorConfig{image_channels, disc_base, disc_layers};
}

DiscriminatorConfig TrainConfig::discriminator_b() const {
    return DiscriminatorConfig{mask_channels, disc_base, disc_layers};
}

void adam_init(AdamState& state, const ModelParams& params) {
    state.m.clear();
    state.v.clear();
    state.t = 0;
    state.m.reserve(params.entries.size());
    state.v.reserve(params.entries.size());
    for (const auto& [name, t] : params.entries) {
        state.m.emplace_back(t.numel(), 0.0f);
        state.v.emplace_back(t.numel(), 0.0f);
    }
}

void adam_step(ModelParams& params, AdamState& state, const AdamConfig& cfg) {
    if (state.m.size() != params.entries.size() || state.v.size() != params.entries.size())
        fail(ErrorCode::shape_mismatch, "optimizer state does not match parameter list");
    ++state.t;
    const double bc1 = 1.0 - std::pow(static_cast<double>(cfg.beta1), static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(static_cast<double>(cfg.beta2), static_cast<double>(state.t));
    for (size_t p = 0; p < params.entries.size(); ++p) {
        auto& tensor = params.entries[p].second;
        const auto& grad = tensor.grad();
        auto& m = state.m[p];
        auto& v = state.v[p];
        if (m.size() != grad.size())
            fail(ErrorCode::shape_mismatch, "optimizer state shape mismatch for " + params.entries[p].first);
        float* theta = tensor.mutable_data();
        for (size_t i = 0; i < grad.size(); ++i) {
            const float g = grad[i];
            m[i] = cfg.beta1 * m[i] + (1.0f - cfg.beta1) * g;
            v[i] = cfg.beta2 * v[i] + (1.0f - cfg.beta2) * g * g;
            const float m_hat = static_cast<float>(m[i] / bc1);
            const float v_hat = static_cast<float>(v[i] / bc2);
            theta[i] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
        }
    }
}

StabilityReport loss_stability(const LossHistory& history, int window) {
    StabilityReport rep;
    rep.window = std::min<int>(window, static_cast<int>(history.size()));
    if (rep.window < 1) return rep;
    const auto stddev = [&](auto field) {
        double sum = 0.0, sq = 0.0;
        for (size_t i = history.size() - static_cast<size_t>(rep.window); i < history.size(); ++i) {
            const double v = history[i].*field;
            sum += v;
            sq += v * v;
        }
        const double mean = sum / rep.window;
        return std::sqrt(std::max(0.0, sq / rep.window - mean * mean));
    };
    rep.g_stddev = stddev(&EpochRecord::g_loss);
    rep.d_stddev = stddev(&EpochRecord::d_loss);
    return rep;
}

namespace {

AdamConfig adam_config(const TrainConfig& cfg) {
    return AdamConfig{cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps};
}

void check_finite(double v, const std::string& term, int epoch) {
    if (!std::isfinite(v))
        fail(ErrorCode::numeric, "non-finite " + term + " at epoch " + std::to_string(epoch));
}

void check_step_finite(const StepLosses& sl, int epoch) {
    check_finite(sl.d_loss, "discriminator loss", epoch);
    check_finite(sl.g_adv, "generator adversarial loss", epoch);
    check_finite(sl.g_l1, "generator L1 loss", epoch);
    check_finite(sl.g_cycle, "cycle-consistency loss", epoch);
    check_finite(sl.g_loss, "generator loss", epoch);
}

std::string epoch_file_name(int epoch) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "checkpoint_epoch_%04d.mgan", epoch);
    return buf;
}

}  // namespace

StepLosses cgan_step(CganModels& models, const Tensor& image, const Tensor& mask,
                     const TrainConfig& cfg, CganOptim& optim, Rng& dropout_rng) {
    const AdamConfig ac = adam_config(cfg);
    StepLosses sl;

    Tensor fake = forward_generator(models.gen, image, true, &dropout_rng);

    // Discriminator: real pair vs detached fake pair, halved so D learns at
    // half the generator's rate.
    models.gen.params.zero_grad();
    models.disc.params.zero_grad();
    Tensor d_real = forward_discriminator(models.disc, concat_channels(image, mask));
    Tensor d_fake = forward_discriminator(models.disc, concat_channels(image, fake.detach()));
    Tensor d_loss = scale(add(bce_with_logits_loss(d_real, Tensor::full(d_real.shape(), 1.0f)),
                              bce_with_logits_loss(d_fake, Tensor::full(d_fake.shape(), 0.0f))),
                          0.5f);
    backward(d_loss);
    adam_step(models.disc.params, optim.disc, ac);

    // Generator: fool the updated discriminator and stay L1-close to the mask.
    models.gen.params.zero_grad();
    models.disc.params.zero_grad();
    Tensor g_logits = forward_discriminator(models.disc, concat_channels(image, fake));
    Tensor g_adv = bce_with_logits_loss(g_logits, Tensor::full(g_logits.shape(), 1.0f));
    Tensor g_l1 = scale(l1_loss(fake, mask), cfg.lambda_l1);
    Tensor g_loss = add(g_adv, g_l1);
    backward(g_loss);
    adam_step(models.gen.params, optim.gen, ac);

    sl.d_loss = d_loss.item();
    sl.g_adv = g_adv.item();
    sl.g_l1 = g_l1.item();
    sl.g_loss = g_loss.item();
    return sl;
}

StepLosses cyclegan_step(CycleModels& models, const Tensor& a, const Tensor& b,
                         const TrainConfig& cfg, CycleOptim& optim, Rng& dropout_rng) {
    const AdamConfig ac = adam_config(cfg);
    StepLosses sl;

    models.gen_ab.params.zero_grad();
    models.gen_ba.params.zero_grad();
    models.disc_a.params.zero_grad();
    models.disc_b.params.zero_grad();

    // Joint generator update.
    Tensor fake_b = forward_generator(models.gen_ab, a, true, &dropout_rng);
    Tensor fake_a = forward_generator(models.gen_ba, b, true, &dropout_rng);
    Tensor adv_ab_logits = forward_discriminator(models.disc_b, fake_b);
    Tensor adv_ba_logits = forward_discriminator(models.disc_a, fake_a);
    Tensor adv_ab = bce_with_logits_loss(adv_ab_logits, Tensor::full(adv_ab_logits.shape(), 1.0f));
    Tensor adv_ba = bce_with_logits_loss(adv_ba_logits, Tensor::full(adv_ba_logits.shape(), 1.0f));
    Tensor g_loss = add(adv_ab, adv_ba);
    if (cfg.lambda_cycle > 0.0f) {
        Tensor rec_a = forward_generator(models.gen_ba, fake_b, true, &dropout_rng);
        Tensor rec_b = forward_generator(models.gen_ab, fake_a, true, &dropout_rng);
        Tensor cyc_a = scale(l1_loss(rec_a, a), cfg.lambda_cycle);
        Tensor cyc_b = scale(l1_loss(rec_b, b), cfg.lambda_cycle);
        sl.cycle_a = cyc_a.item();
        sl.cycle_b = cyc_b.item();
        g_loss = add(g_loss, add(cyc_a, cyc_b));
    }
    backward(g_loss);
    adam_step(models.gen_ab.params, optim.gen_ab, ac);
    adam_step(models.gen_ba.params, optim.gen_ba, ac);

    // Domain-B discriminator (masks): real b vs detached fake_b.
    models.disc_b.params.zero_grad();
    Tensor db_real = forward_discriminator(models.disc_b, b);
    Tensor db_fake = forward_discriminator(models.disc_b, fake_b.detach());
    Tensor d_b = scale(add(bce_with_logits_loss(db_real, Tensor::full(db_real.shape(), 1.0f)),
                           bce_with_logits_loss(db_fake, Tensor::full(db_fake.shape(), 0.0f))),
                       0.5f);
    backward(d_b);
    adam_step(models.disc_b.params, optim.disc_b, ac);

    // Domain-A discriminator (images): real a vs detached fake_a.
    models.disc_a.params.zero_grad();
    Tensor da_real = forward_discriminator(models.disc_a, a);
    Tensor da_fake = forward_discriminator(models.disc_a, fake_a.detach());
    Tensor d_a = scale(add(bce_with_logits_loss(da_real, Tensor::full(da_real.shape(), 1.0f)),
                           bce_with_logits_loss(da_fake, Tensor::full(da_fake.shape(), 0.0f))),
                       0.5f);
    backward(d_a);
    adam_step(models.disc_a.params, optim.disc_a, ac);

    sl.g_adv_ab = adv_ab.item();
    sl.g_adv_ba = adv_ba.item();
    sl.g_adv = sl.g_adv_ab + sl.g_adv_ba;
    sl.g_cycle = sl.cycle_a + sl.cycle_b;
    sl.g_loss = g_loss.item();
    sl.d_loss_a = d_a.item();
    sl.d_loss_b = d_b.item();
    sl.d_loss = sl.d_loss_a + sl.d_loss_b;
    return sl;
}

const ModelParams& Checkpoint::model(std::string_view name) const {
    for (const auto& [n, p] : models)
        if (n == name) return p;
    fail(ErrorCode::task_mismatch, "checkpoint (task " + task_name(config.task) + ") has no model '" +
                                       std::string(name) + "'");
}

Generator Checkpoint::generator(std::string_view name) const {
    GeneratorConfig gcfg;
    if (name == "gen" || name == "genAB")
        gcfg = config.generator_a2b();
    else if (name == "genBA")
        gcfg = config.generator_b2a();
    else
        fail(ErrorCode::invalid_argument, "unknown generator name '" + std::string(name) + "'");
    return Generator{gcfg, model(name)};
}

Discriminator Checkpoint::discriminator(std::string_view name) const {
    DiscriminatorConfig dcfg;
    if (name == "disc")
        dcfg = config.discriminator_cond();
    else if (name == "discA")
        dcfg = config.discriminator_a();
    else if (name == "discB")
        dcfg = config.discriminator_b();
    else
        fail(ErrorCode::invalid_argument, "unknown discriminator name '" + std::string(name) + "'");
    return Discriminator{dcfg, model(name)};
}

namespace {

Checkpoint assemble_cgan(const TrainConfig& cfg, const LossHistory& history, const CganModels& models,
                         const CganOptim& optim) {
    Checkpoint ck;
    ck.config = cfg;
    ck.history = history;
    ck.models.emplace_back("gen", models.gen.params);
    ck.models.emplace_back("disc", models.disc.params);
    ck.optim.emplace_back("gen", optim.gen);
    ck.optim.emplace_back("disc", optim.disc);
    return ck;
}

Checkpoint assemble_cyclegan(const TrainConfig& cfg, const LossHistory& history,
                             const CycleModels& models, const CycleOptim& optim) {
    Checkpoint ck;
    ck.config = cfg;
    ck.history = history;
    ck.models.emplace_back("genAB", models.gen_ab.params);
    ck.models.emplace_back("genBA", models.gen_ba.params);
    ck.models.emplace_back("discA", models.disc_a.params);
    ck.models.emplace_back("discB", models.disc_b.params);
    ck.optim.emplace_back("genAB", optim.gen_ab);
    ck.optim.emplace_back("genBA", optim.gen_ba);
    ck.optim.emplace_back("discA", optim.disc_a);
    ck.optim.emplace_back("discB", optim.disc_b);
    return ck;
}

std::vector<size_t> epoch_permutation(size_t n, Rng& rng) {
    std::vector<size_t> perm(n);
    std::iota(perm.begin(), perm.end(), size_t{0});
    rng.shuffle(perm);
    return perm;
}

bool periodic_due(const TrainConfig& cfg, const fs::path& out_dir, int epoch) {
    return !out_dir.empty() && cfg.checkpoint_every > 0 && epoch % cfg.checkpoint_every == 0 &&
           epoch != cfg.epochs;
}

}  // namespace

Checkpoint train_cgan(const TrainConfig& cfg, const PairedDataset& train_ds, const fs::path& out_dir,
                      const EpochCallback& on_epoch) {
    cfg.validate();
    if (cfg.task != Task::cgan) fail(ErrorCode::invalid_argument, "train_cgan called with task=cyclegan");
    if (train_ds.empty()) fail(ErrorCode::invalid_argument, "training dataset is empty");
    if (train_ds.image_size != cfg.image_size)
        fail(ErrorCode::shape_mismatch, "dataset image_size " + std::to_string(train_ds.image_size) +
                                            " does not match config " + std::to_string(cfg.image_size));
    if (!out_dir.empty()) fs::create_directories(out_dir);

    Rng init_gen = Rng::derive(cfg.seed, "init.gen");
    Rng init_disc = Rng::derive(cfg.seed, "init.disc");
    CganModels models{build_unet(cfg.generator_a2b(), init_gen),
                      build_discriminator(cfg.discriminator_cond(), init_disc)};
    CganOptim optim;
    adam_init(optim.gen, models.gen.params);
    adam_init(optim.disc, models.disc.params);

    Rng shuffle_rng = Rng::derive(cfg.seed, "epoch.shuffle");
    Rng dropout_rng = Rng::derive(cfg.seed, "dropout");

    const size_t n = train_ds.size();
    LossHistory history;
    history.reserve(static_cast<size_t>(cfg.epochs));
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const auto perm = epoch_permutation(n, shuffle_rng);
        double sum_g = 0.0, sum_d = 0.0, sum_adv = 0.0, sum_l1 = 0.0;
        for (size_t start = 0; start < n; start += static_cast<size_t>(cfg.batch_size)) {
            const size_t bn = std::min(static_cast<size_t>(cfg.batch_size), n - start);
            std::vector<Tensor> images, masks;
            images.reserve(bn);
            masks.reserve(bn);
            for (size_t j = 0; j < bn; ++j) {
                const Sample& s = train_ds.samples[perm[start + j]];
                images.push_back(s.image);
                masks.push_back(s.mask);
            }
            const StepLosses sl =
                cgan_step(models, stack_batch(images), stack_batch(masks), cfg, optim, dropout_rng);
            check_step_finite(sl, epoch);
            sum_g += sl.g_loss * static_cast<double>(bn);
            sum_d += sl.d_loss * static_cast<double>(bn);
            sum_adv += sl.g_adv * static_cast<double>(bn);
            sum_l1 += sl.g_l1 * static_cast<double>(bn);
        }
        EpochRecord rec;
        rec.epoch = epoch;
        rec.g_loss = sum_g / static_cast<double>(n);
        rec.d_loss = sum_d / static_cast<double>(n);
        rec.g_adv = sum_adv / static_cast<double>(n);
        rec.g_l1 = sum_l1 / static_cast<double>(n);
        rec.has_l1 = true;
        history.push_back(rec);
        if (on_epoch) on_epoch(rec);
        if (periodic_due(cfg, out_dir, epoch))
            save_checkpoint(assemble_cgan(cfg, history, models, optim), out_dir / epoch_file_name(epoch));
    }

    Checkpoint ck = assemble_cgan(cfg, history, models, optim);
    if (!out_dir.empty()) save_checkpoint(ck, out_dir / "checkpoint.mgan");
    return ck;
}

Checkpoint train_cyclegan(const TrainConfig& cfg, const UnpairedDataset& train_ds, const fs::path& out_dir,
                          const EpochCallback& on_epoch) {
    cfg.validate();
    if (cfg.task != Task::cyclegan) fail(ErrorCode::invalid_argument, "train_cyclegan called with task=cgan");
    if (train_ds.domain_a.empty() || train_ds.domain_b.empty())
        fail(ErrorCode::invalid_argument, "training dataset is empty");
    if (train_ds.image_size != cfg.image_size)
        fail(ErrorCode::shape_mismatch, "dataset image_size " + std::to_string(train_ds.image_size) +
                                            " does not match config " + std::to_string(cfg.image_size));
    if (!out_dir.empty()) fs::create_directories(out_dir);

    Rng init_gen_ab = Rng::derive(cfg.seed, "init.genAB");
    Rng init_gen_ba = Rng::derive(cfg.seed, "init.genBA");
    Rng init_disc_a = Rng::derive(cfg.seed, "init.discA");
    Rng init_disc_b = Rng::derive(cfg.seed, "init.discB");
    CycleModels models{build_unet(cfg.generator_a2b(), init_gen_ab),
                       build_unet(cfg.generator_b2a(), init_gen_ba),
                       build_discriminator(cfg.discriminator_a(), init_disc_a),
                       build_discriminator(cfg.discriminator_b(), init_disc_b)};
    CycleOptim optim;
    adam_init(optim.gen_ab, models.gen_ab.params);
    adam_init(optim.gen_ba, models.gen_ba.params);
    adam_init(optim.disc_a, models.disc_a.params);
    adam_init(optim.disc_b, models.disc_b.params);

    Rng shuffle_rng = Rng::derive(cfg.seed, "epoch.shuffle");
    Rng dropout_rng = Rng::derive(cfg.seed, "dropout");

    const size_t na = train_ds.domain_a.size();
    const size_t nb = train_ds.domain_b.size();
    const size_t n_steps_per_epoch =
        (std::max(na, nb) + static_cast<size_t>(cfg.batch_size) - 1) / static_cast<size_t>(cfg.batch_size);
    LossHistory history;
    history.reserve(static_cast<size_t>(cfg.epochs));
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const auto perm_a = epoch_permutation(na, shuffle_rng);
        const auto perm_b = epoch_permutation(nb, shuffle_rng);
        double sum_g = 0.0, sum_d = 0.0, sum_adv = 0.0, sum_cyc = 0.0, denom = 0.0;
        for (size_t step = 0; step < n_steps_per_epoch; ++step) {
            const size_t start = step * static_cast<size_t>(cfg.batch_size);
            const size_t bn = std::min(static_cast<size_t>(cfg.batch_size), std::max(na, nb) - start);
            std::vector<Tensor> batch_a, batch_b;
            batch_a.reserve(bn);
            batch_b.reserve(bn);
            for (size_t j = 0; j < bn; ++j) {
                batch_a.push_back(train_ds.domain_a[perm_a[(start + j) % na]]);
                batch_b.push_back(train_ds.domain_b[perm_b[(start + j) % nb]]);
            }
            const StepLosses sl =
                cyclegan_step(models, stack_batch(batch_a), stack_batch(batch_b), cfg, optim, dropout_rng);
            check_step_finite(sl, epoch);
            sum_g += sl.g_loss * static_cast<double>(bn);
            sum_d += sl.d_loss * static_cast<double>(bn);
            sum_adv += sl.g_adv * static_cast<double>(bn);
            sum_cyc += sl.g_cycle * static_cast<double>(bn);
            denom += static_cast<double>(bn);
        }
        EpochRecord rec;
        rec.epoch = epoch;
        rec.g_loss = sum_g / denom;
        rec.d_loss = sum_d / denom;
        rec.g_adv = sum_adv / denom;
        rec.g_cycle = sum_cyc / denom;
        rec.has_cycle = true;
        history.push_back(rec);
        if (on_epoch) on_epoch(rec);
        if (periodic_due(cfg, out_dir, epoch))
            save_checkpoint(assemble_cyclegan(cfg, history, models, optim),
                            out_dir / epoch_file_name(epoch));
    }

    Checkpoint ck = assemble_cyclegan(cfg, history, models, optim);
    if (!out_dir.empty()) save_checkpoint(ck, out_dir / "checkpoint.mgan");
    return ck;
}

}  // namespace mg
