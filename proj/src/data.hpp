#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "image_io.hpp"
#include "tensor.hpp"

namespace mg {

struct Sample {
    Tensor image;  // [1,C,H,W] in [-1,1]
    Tensor mask;   // [1,1,H,W] in {-1,+1}
    std::string name;
};

struct PairedDataset {
    std::vector<Sample> samples;
    int image_size = 0;
    int channels = 1;

    size_t size() const { return samples.size(); }
    bool empty() const { return samples.empty(); }
};

struct UnpairedDataset {
    std::vector<Tensor> domain_a;  // images
    std::vector<Tensor> domain_b;  // masks
    std::vector<std::string> names_a;
    std::vector<std::string> names_b;
    int image_size = 0;
    int channels_a = 1;
    int channels_b = 1;
};

struct SplitSpec {
    int n_train = 0;
    int n_test = 0;
    uint64_t seed = 0;
};

// Directory layout: <dir>/images/*.png and <dir>/masks/*.png with matching
// basenames, ordered lexicographically.
PairedDataset load_paired(const std::filesystem::path& dir, int image_size);

void write_dataset(const PairedDataset& ds, const std::filesystem::path& dir);

std::pair<PairedDataset, PairedDataset> split_dataset(const PairedDataset& ds, const SplitSpec& spec);

// Deterministic stand-in data: 1-3 bright ellipses/rectangles on a dark noisy
// background, mask exactly +1 on shape pixels.
PairedDataset synth_shapes(int n, int image_size, uint64_t seed);

// Keep images in order, shuffle masks (rejecting the identity permutation) so
// no pairing survives.
UnpairedDataset to_unpaired(const PairedDataset& ds, uint64_t seed);

}  // namespace mg
