#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tensor.hpp"

namespace mg {

struct GeneratorConfig {
    int in_channels = 1;
    int out_channels = 1;
    int base_channels = 8;
    int depth = 3;          // number of stride-2 downsampling stages
    int image_size = 32;    // square, power of two, >= 2^depth
    void validate() const;
};

struct DiscriminatorConfig {
    int in_channels = 2;    // image channels (+ mask channels when conditional)
    int base_channels = 8;
    int n_stride2_layers = 2;
    void validate() const;
};

// Named, ordered parameter collection. Insertion order is the forward order
// and is stable across runs; names follow "block{i}.{conv|norm}.{weight|bias}".
struct ModelParams {
    std::vector<std::pair<std::string, Tensor>> entries;

    void add(const std::string& name, Tensor t);
    const Tensor& at(std::string_view name) const;
    Tensor& at(std::string_view name);
    bool has(std::string_view name) const;
    size_t total_scalars() const;
    void zero_grad();
    ModelParams clone() const;
};

struct Generator {
    GeneratorConfig cfg;
    ModelParams params;
};

struct Discriminator {
    DiscriminatorConfig cfg;
    ModelParams params;
};

// Encoder feature widths: base*2^i capped at 8*base.
std::vector<int> unet_channels(const GeneratorConfig& cfg);
std::vector<int> discriminator_channels(const DiscriminatorConfig& cfg);

Generator build_unet(const GeneratorConfig& cfg, Rng& rng);
Discriminator build_discriminator(const DiscriminatorConfig& cfg, Rng& rng);

// U-Net forward. Dropout (p=0.5, three innermost decoder blocks) is active
// only in training mode and draws from `dropout_rng`.
Tensor forward_generator(const Generator& gen, const Tensor& image, bool training,
                         Rng* dropout_rng = nullptr);

// Patch discriminator forward: grid of per-patch realness logits, no head
// activation.
Tensor forward_discriminator(const Discriminator& disc, const Tensor& x);

}  // namespace mg
