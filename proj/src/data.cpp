#include "data.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mg {

namespace fs = std::filesystem;

namespace {

std::vector<std::string> png_basenames(const fs::path& dir) {
    std::vector<std::string> names;
    if (!fs::is_directory(dir)) fail(ErrorCode::io, "missing directory: " + dir.string());
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        if (entry.path().extension() == ".png") names.push_back(entry.path().filename().string());
    }
    std::sort(names.begin(), names.end());
    return names;
}

std::string sample_file_name(int index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "sample_%05d", index);
    return buf;
}

}  // namespace

PairedDataset load_paired(const fs::path& dir, int image_size) {
    if (image_size < 1) fail(ErrorCode::invalid_argument, "image_size must be positive");
    const fs::path images_dir = dir / "images";
    const fs::path masks_dir = dir / "masks";
    const auto image_files = png_basenames(images_dir);
    const auto mask_files = png_basenames(masks_dir);

    for (const auto& f : image_files)
        if (!std::binary_search(mask_files.begin(), mask_files.end(), f))
            fail(ErrorCode::io, "no mask counterpart for " + f);
    for (const auto& f : mask_files)
        if (!std::binary_search(image_files.begin(), image_files.end(), f))
            fail(ErrorCode::io, "no image counterpart for " + f);
    if (image_files.empty()) fail(ErrorCode::io, "empty dataset: no .png files under " + images_dir.string());

    PairedDataset ds;
    ds.image_size = image_size;
    ds.samples.reserve(image_files.size());
    for (const auto& f : image_files) {
        Sample s;
        s.image = read_image(images_dir / f, image_size);
        s.mask = read_mask(masks_dir / f, image_size);
        s.name = fs::path(f).stem().string();
        if (ds.samples.empty()) {
            ds.channels = s.image.dim(1);
        } else if (s.image.dim(1) != ds.channels) {
            fail(ErrorCode::io, "mixed channel counts in dataset (" + f + ")");
        }
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

void write_dataset(const PairedDataset& ds, const fs::path& dir) {
    fs::create_directories(dir / "images");
    fs::create_directories(dir / "masks");
    for (const auto& s : ds.samples) {
        write_image(s.image, dir / "images" / (s.name + ".png"));
        write_image(s.mask, dir / "masks" / (s.name + ".png"));
    }
}

std::pair<PairedDataset, PairedDataset> split_dataset(const PairedDataset& ds, const SplitSpec& spec) {
    if (spec.n_train < 1 || spec.n_test < 1)
        fail(ErrorCode::invalid_argument, "split requires n_train >= 1 and n_test >= 1");
    if (static_cast<size_t>(spec.n_train) + static_cast<size_t>(spec.n_test) != ds.size())
        fail(ErrorCode::invalid_argument,
             "split counts " + std::to_string(spec.n_train) + "+" + std::to_string(spec.n_test) +
                 " do not sum to dataset size " + std::to_string(ds.size()));

    std::vector<size_t> perm(ds.size());
    std::iota(perm.begin(), perm.end(), size_t{0});
    Rng rng = Rng::derive(spec.seed, "split");
    rng.shuffle(perm);

    PairedDataset train, test;
    train.image_size = test.image_size = ds.image_size;
    train.channels = test.channels = ds.channels;
    for (size_t i = 0; i < perm.size(); ++i) {
        auto& dst = (i < static_cast<size_t>(spec.n_train)) ? train : test;
        dst.samples.push_back(ds.samples[perm[i]]);
    }
    return {std::move(train), std::move(test)};
}

PairedDataset synth_shapes(int n, int image_size, uint64_t seed) {
    if (n < 1) fail(ErrorCode::invalid_argument, "synth_shapes needs n >= 1");
    if (image_size < 16) fail(ErrorCode::invalid_argument, "synth_shapes needs image_size >= 16");

    Rng rng = Rng::derive(seed, "synth");
    const int S = image_size;
    PairedDataset ds;
    ds.image_size = S;
    ds.channels = 1;
    ds.samples.reserve(static_cast<size_t>(n));

    for (int i = 0; i < n; ++i) {
        std::vector<float> image(static_cast<size_t>(S) * S);
        std::vector<float> mask(static_cast<size_t>(S) * S, -1.0f);
        for (auto& px : image) px = std::clamp(-0.8f + rng.normal(0.0f, 0.08f), -1.0f, 1.0f);

        const int n_shapes = rng.uniform_int(1, 3);
        for (int k = 0; k < n_shapes; ++k) {
            const bool ellipse = rng.uniform01() < 0.5;
            const float cx = rng.uniform(0.15f, 0.85f) * S;
            const float cy = rng.uniform(0.15f, 0.85f) * S;
            const float rx = std::max(2.0f, rng.uniform(0.10f, 0.26f) * S);
            const float ry = std::max(2.0f, rng.uniform(0.10f, 0.26f) * S);
            const float brightness = rng.uniform(0.55f, 0.95f);
            for (int y = 0; y < S; ++y) {
                for (int x = 0; x < S; ++x) {
                    const float dx = (x + 0.5f - cx) / rx;
                    const float dy = (y + 0.5f - cy) / ry;
                    const bool inside =
                        ellipse ? (dx * dx + dy * dy <= 1.0f)
                                : (std::fabs(dx) <= 1.0f && std::fabs(dy) <= 1.0f);
                    if (!inside) continue;
                    const size_t idx = static_cast<size_t>(y) * S + x;
                    mask[idx] = 1.0f;
                    image[idx] = std::clamp(brightness + rng.normal(0.0f, 0.05f), -1.0f, 1.0f);
                }
            }
        }

        Sample s;
        s.image = Tensor::from_data({1, 1, S, S}, std::move(image));
        s.mask = Tensor::from_data({1, 1, S, S}, std::move(mask));
        s.name = sample_file_name(i);
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

UnpairedDataset to_unpaired(const PairedDataset& ds, uint64_t seed) {
    UnpairedDataset out;
    out.image_size = ds.image_size;
    out.channels_a = ds.channels;
    out.channels_b = 1;

    std::vector<size_t> perm(ds.size());
    std::iota(perm.begin(), perm.end(), size_t{0});
    Rng rng = Rng::derive(seed, "unpair");
    const auto is_identity = [](const std::vector<size_t>& p) {
        for (size_t i = 0; i < p.size(); ++i)
            if (p[i] != i) return false;
        return true;
    };
    if (ds.size() > 1) {
        do {
            rng.shuffle(perm);
        } while (is_identity(perm));
    }

    out.domain_a.reserve(ds.size());
    out.domain_b.reserve(ds.size());
    for (const auto& s : ds.samples) {
        out.domain_a.push_back(s.image);
        out.names_a.push_back(s.name);
    }
    for (size_t i = 0; i < perm.size(); ++i) {
        out.domain_b.push_back(ds.samples[perm[i]].mask);
        out.names_b.push_back(ds.samples[perm[i]].name);
    }
    return out;
}

}  // namespace mg
