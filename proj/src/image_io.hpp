#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "tensor.hpp"

namespace mg {

// 8-bit interleaved pixel buffer, 1 (gray) or 3 (RGB) channels.
struct ImageBuffer {
    int width = 0;
    int height = 0;
    int channels = 1;
    std::vector<uint8_t> pixels;

    uint8_t at(int y, int x, int c) const {
        return pixels[(static_cast<size_t>(y) * width + x) * channels + c];
    }
};

ImageBuffer read_png(const std::filesystem::path& path);
void write_png(const ImageBuffer& img, const std::filesystem::path& path);

ImageBuffer to_gray(const ImageBuffer& img);
ImageBuffer resize_nearest(const ImageBuffer& img, int out_w, int out_h);

// [0,255] -> [-1,1] tensor of shape [1,C,H,W]; bilinear resample when the
// target size differs.
Tensor tensor_from_image(const ImageBuffer& img, int target_size);
// Inverse quantization; values on the 256-level grid round-trip bit-exactly.
ImageBuffer image_from_tensor(const Tensor& t);

Tensor read_image(const std::filesystem::path& path, int target_size);
// Grayscale + nearest resize + binarize at 127.5, so values are exactly {-1,+1}.
Tensor read_mask(const std::filesystem::path& path, int target_size);
void write_image(const Tensor& t, const std::filesystem::path& path);

}  // namespace mg
