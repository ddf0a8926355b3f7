#include "models.hpp"

#include <algorithm>
#include <cmath>

namespace mg {

namespace {

constexpr float kInitStd = 0.02f;
constexpr float kLeakySlope = 0.2f;
constexpr float kDropoutP = 0.5f;
constexpr int kMaxDropoutBlocks = 3;

bool is_power_of_two(int v) {
    return v > 0 && (v & (v - 1)) == 0;
}

Tensor normal_tensor(const Shape& shape, Rng& rng) {
    std::vector<float> data(shape_numel(shape));
    for (auto& v : data) v = rng.normal(0.0f, kInitStd);
    return Tensor::from_data(shape, std::move(data), true);
}

void add_conv(ModelParams& p, const std::string& block, const Shape& wshape, int bias_n, Rng& rng) {
    p.add(block + ".conv.weight", normal_tensor(wshape, rng));
    p.add(block + ".conv.bias", Tensor::zeros({bias_n}, true));
}

void add_norm(ModelParams& p, const std::string& block, int channels) {
    p.add(block + ".norm.weight", Tensor::full({channels}, 1.0f, true));
    p.add(block + ".norm.bias", Tensor::zeros({channels}, true));
}

Tensor norm_block(const ModelParams& p, const std::string& block, const Tensor& x) {
    return instance_norm(x, p.at(block + ".norm.weight"), p.at(block + ".norm.bias"));
}

}  // namespace

void GeneratorConfig::validate() const {
    if (in_channels < 1 || out_channels < 1 || base_channels < 1 || depth < 1)
        fail(ErrorCode::invalid_argument, "generator config: channels and depth must be >= 1");
    if (!is_power_of_two(image_size))
        fail(ErrorCode::invalid_argument,
             "generator config: image_size must be a power of two, got " + std::to_string(image_size));
    if (image_size < (1 << depth))
        fail(ErrorCode::invalid_argument, "generator config: image_size " + std::to_string(image_size) +
                                              " too small for depth " + std::to_string(depth));
}

void DiscriminatorConfig::validate() const {
    if (in_channels < 1 || base_channels < 1 || n_stride2_layers < 1)
        fail(ErrorCode::invalid_argument, "discriminator config: all fields must be >= 1");
}

void ModelParams::add(const std::string& name, Tensor t) {
    if (has(name)) fail(ErrorCode::invalid_argument, "duplicate parameter name " + name);
    entries.emplace_back(name, std::move(t));
}

const Tensor& ModelParams::at(std::string_view name) const {
    for (const auto& [n, t] : entries)
        if (n == name) return t;
    fail(ErrorCode::invalid_argument, "unknown parameter " + std::string(name));
}

Tensor& ModelParams::at(std::string_view name) {
    for (auto& [n, t] : entries)
        if (n == name) return t;
    fail(ErrorCode::invalid_argument, "unknown parameter " + std::string(name));
}

bool ModelParams::has(std::string_view name) const {
    for (const auto& [n, t] : entries)
        if (n == name) return true;
    return false;
}

size_t ModelParams::total_scalars() const {
    size_t n = 0;
    for (const auto& [name, t] : entries) n += t.numel();
    return n;
}

void ModelParams::zero_grad() {
    for (auto& [name, t] : entries) t.zero_grad();
}

ModelParams ModelParams::clone() const {
    ModelParams out;
    for (const auto& [name, t] : entries)
        out.add(name, Tensor::from_data(t.shape(), t.values(), t.requires_grad()));
    return out;
}

std::vector<int> unet_channels(const GeneratorConfig& cfg) {
    std::vector<int> c(static_cast<size_t>(cfg.depth));
    for (int i = 0; i < cfg.depth; ++i)
        c[static_cast<size_t>(i)] = std::min(cfg.base_channels << i, 8 * cfg.base_channels);
    return c;
}

std::vector<int> discriminator_channels(const DiscriminatorConfig& cfg) {
    std::vector<int> c(static_cast<size_t>(cfg.n_stride2_layers) + 1);
    for (size_t i = 0; i < c.size(); ++i)
        c[i] = std::min(cfg.base_channels << i, 8 * cfg.base_channels);
    return c;
}

Generator build_unet(const GeneratorConfig& cfg, Rng& rng) {
    cfg.validate();
    const auto c = unet_channels(cfg);
    ModelParams p;
    int block = 0;
    // Encoder: stride-2 convs, no norm on the first block.
    for (int i = 0; i < cfg.depth; ++i, ++block) {
        const int cin = (i == 0) ? cfg.in_channels : c[static_cast<size_t>(i) - 1];
        const std::string name = "block" + std::to_string(block);
        add_conv(p, name, {c[static_cast<size_t>(i)], cin, 4, 4}, c[static_cast<size_t>(i)], rng);
        if (i > 0) add_norm(p, name, c[static_cast<size_t>(i)]);
    }
    // Decoder: transpose convs walking back up, each followed by a skip concat,
    // so the next block sees doubled channels.
    for (int i = cfg.depth - 1; i >= 1; --i, ++block) {
        const int cin = (i == cfg.depth - 1) ? c[static_cast<size_t>(i)] : 2 * c[static_cast<size_t>(i)];
        const int cout = c[static_cast<size_t>(i) - 1];
        const std::string name = "block" + std::to_string(block);
        add_conv(p, name, {cin, cout, 4, 4}, cout, rng);
        add_norm(p, name, cout);
    }
    // Output layer: transpose conv to out_channels, tanh head.
    {
        const int cin = (cfg.depth == 1) ? c[0] : 2 * c[0];
        add_conv(p, "block" + std::to_string(block), {cin, cfg.out_channels, 4, 4}, cfg.out_channels, rng);
    }
    return Generator{cfg, std::move(p)};
}

Tensor forward_generator(const Generator& gen, const Tensor& image, bool training, Rng* dropout_rng) {
    const auto& cfg = gen.cfg;
    const auto& p = gen.params;
    if (image.rank() != 4 || image.dim(1) != cfg.in_channels || image.dim(2) != cfg.image_size ||
        image.dim(3) != cfg.image_size)
        fail(ErrorCode::shape_mismatch, "generator expects [N," + std::to_string(cfg.in_channels) + "," +
                                            std::to_string(cfg.image_size) + "," +
                                            std::to_string(cfg.image_size) + "], got " +
                                            shape_str(image.shape()));
    const int n_dropout = std::min(kMaxDropoutBlocks, cfg.depth - 1);
    if (training && n_dropout > 0 && dropout_rng == nullptr)
        fail(ErrorCode::invalid_argument, "training-mode generator forward needs a dropout rng");

    std::vector<Tensor> enc(static_cast<size_t>(cfg.depth));
    Tensor x = image;
    int block = 0;
    for (int i = 0; i < cfg.depth; ++i, ++block) {
        const std::string name = "block" + std::to_string(block);
        x = conv2d(x, p.at(name + ".conv.weight"), p.at(name + ".conv.bias"), 2, 1);
        if (i > 0) x = norm_block(p, name, x);
        x = leaky_relu(x, kLeakySlope);
        enc[static_cast<size_t>(i)] = x;
    }
    int decoder_index = 0;
    for (int i = cfg.depth - 1; i >= 1; --i, ++block, ++decoder_index) {
        const std::string name = "block" + std::to_string(block);
        x = conv_transpose2d(x, p.at(name + ".conv.weight"), p.at(name + ".conv.bias"), 2, 1);
        x = norm_block(p, name, x);
        if (training && decoder_index < n_dropout) x = dropout(x, kDropoutP, true, *dropout_rng);
        x = relu(x);
        x = concat_channels(x, enc[static_cast<size_t>(i) - 1]);
    }
    const std::string name = "block" + std::to_string(block);
    x = conv_transpose2d(x, p.at(name + ".conv.weight"), p.at(name + ".conv.bias"), 2, 1);
    return mg::tanh(x);
}

Discriminator build_discriminator(const DiscriminatorConfig& cfg, Rng& rng) {
    cfg.validate();
    const auto c = discriminator_channels(cfg);
    ModelParams p;
    int block = 0;
    for (int i = 0; i < cfg.n_stride2_layers; ++i, ++block) {
        const int cin = (i == 0) ? cfg.in_channels : c[static_cast<size_t>(i) - 1];
        const std::string name = "block" + std::to_string(block);
        add_conv(p, name, {c[static_cast<size_t>(i)], cin, 4, 4}, c[static_cast<size_t>(i)], rng);
        if (i > 0) add_norm(p, name, c[static_cast<size_t>(i)]);
    }
    {
        // Stride-1 layer widening once more before the head.
        const int cin = c[static_cast<size_t>(cfg.n_stride2_layers) - 1];
        const int cout = c[static_cast<size_t>(cfg.n_stride2_layers)];
        const std::string name = "block" + std::to_string(block);
        add_conv(p, name, {cout, cin, 4, 4}, cout, rng);
        add_norm(p, name, cout);
        ++block;
    }
    add_conv(p, "block" + std::to_string(block), {1, c[static_cast<size_t>(cfg.n_stride2_layers)], 4, 4}, 1,
             rng);
    return Discriminator{cfg, std::move(p)};
}

Tensor forward_discriminator(const Discriminator& disc, const Tensor& x_in) {
    const auto& cfg = disc.cfg;
    const auto& p = disc.params;
    if (x_in.rank() != 4 || x_in.dim(1) != cfg.in_channels)
        fail(ErrorCode::shape_mismatch, "discriminator expects " + std::to_string(cfg.in_channels) +
                                            " input channels, got " + shape_str(x_in.shape()));
    if (x_in.dim(2) != x_in.dim(3))
        fail(ErrorCode::shape_mismatch, "discriminator expects square input, got " + shape_str(x_in.shape()));
    Tensor x = x_in;
    int block = 0;
    for (int i = 0; i < cfg.n_stride2_layers; ++i, ++block) {
        const std::string name = "block" + std::to_string(block);
        x = conv2d(x, p.at(name + ".conv.weight"), p.at(name + ".conv.bias"), 2, 1);
        if (i > 0) x = norm_block(p, name, x);
        x = leaky_relu(x, kLeakySlope);
    }
    {
        const std::string name = "block" + std::to_string(block);
        x = conv2d(x, p.at(name + ".conv.weight"), p.at(name + ".conv.bias"), 1, 1);
        x = norm_block(p, name, x);
        x = leaky_relu(x, kLeakySlope);
        ++block;
    }
    const std::string name = "block" + std::to_string(block);
    return conv2d(x, p.at(name + ".conv.weight"), p.at(name + ".conv.bias"), 1, 1);
}

}  // namespace mg
