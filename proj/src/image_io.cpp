#include "image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

namespace mg {

namespace {

struct FileCloser {
    void operator()(FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

[[noreturn]] void io_fail(const std::filesystem::path& path, const std::string& what) {
    fail(ErrorCode::io, what + ": " + path.string());
}

float pixel_to_unit(uint8_t v) {
    return static_cast<float>(v) / 127.5f - 1.0f;
}

uint8_t unit_to_pixel(float v) {
    const float q = std::round((std::clamp(v, -1.0f, 1.0f) + 1.0f) * 127.5f);
    return static_cast<uint8_t>(std::clamp(q, 0.0f, 255.0f));
}

}  // namespace

ImageBuffer read_png(const std::filesystem::path& path) {
    FilePtr file(std::fopen(path.string().c_str(), "rb"));
    if (!file) io_fail(path, "cannot open image");

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        io_fail(path, "libpng allocation failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        io_fail(path, "failed to decode PNG");
    }
    png_init_io(png, file.get());
    png_read_info(png, info);

    // Normalize everything to 8-bit gray or RGB.
    png_set_strip_16(png);
    png_set_strip_alpha(png);
    png_set_packing(png);
    const png_byte color = png_get_color_type(png, info);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8)
        png_set_expand_gray_1_2_4_to_8(png);
    png_set_interlace_handling(png);
    png_read_update_info(png, info);

    ImageBuffer img;
    img.width = static_cast<int>(png_get_image_width(png, info));
    img.height = static_cast<int>(png_get_image_height(png, info));
    img.channels = static_cast<int>(png_get_channels(png, info));
    if (img.channels != 1 && img.channels != 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        io_fail(path, "unsupported channel count " + std::to_string(img.channels));
    }
    img.pixels.resize(static_cast<size_t>(img.width) * img.height * img.channels);
    std::vector<png_bytep> rows(static_cast<size_t>(img.height));
    const size_t stride = static_cast<size_t>(img.width) * img.channels;
    for (int y = 0; y < img.height; ++y) rows[static_cast<size_t>(y)] = img.pixels.data() + y * stride;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

void write_png(const ImageBuffer& img, const std::filesystem::path& path) {
    if (img.channels != 1 && img.channels != 3)
        fail(ErrorCode::invalid_argument, "write_png supports 1 or 3 channels");
    FilePtr file(std::fopen(path.string().c_str(), "wb"));
    if (!file) io_fail(path, "cannot open for writing");

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        io_fail(path, "libpng allocation failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        io_fail(path, "failed to encode PNG");
    }
    png_init_io(png, file.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height), 8,
                 img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_bytep> rows(static_cast<size_t>(img.height));
    const size_t stride = static_cast<size_t>(img.width) * img.channels;
    for (int y = 0; y < img.height; ++y)
        rows[static_cast<size_t>(y)] = const_cast<png_bytep>(img.pixels.data() + y * stride);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

ImageBuffer to_gray(const ImageBuffer& img) {
    if (img.channels == 1) return img;
    ImageBuffer out{img.width, img.height, 1, {}};
    out.pixels.resize(static_cast<size_t>(img.width) * img.height);
    for (size_t i = 0; i < out.pixels.size(); ++i) {
        const uint8_t* px = &img.pixels[i * 3];
        // Rec.601 luma, integer rounding.
        out.pixels[i] = static_cast<uint8_t>((299 * px[0] + 587 * px[1] + 114 * px[2] + 500) / 1000);
    }
    return out;
}

ImageBuffer resize_nearest(const ImageBuffer& img, int out_w, int out_h) {
    if (out_w == img.width && out_h == img.height) return img;
    ImageBuffer out{out_w, out_h, img.channels, {}};
    out.pixels.resize(static_cast<size_t>(out_w) * out_h * img.channels);
    const double sx = static_cast<double>(img.width) / out_w;
    const double sy = static_cast<double>(img.height) / out_h;
    for (int y = 0; y < out_h; ++y) {
        const int iy = std::min(img.height - 1, static_cast<int>((y + 0.5) * sy));
        for (int x = 0; x < out_w; ++x) {
            const int ix = std::min(img.width - 1, static_cast<int>((x + 0.5) * sx));
            for (int c = 0; c < img.channels; ++c)
                out.pixels[(static_cast<size_t>(y) * out_w + x) * img.channels + c] = img.at(iy, ix, c);
        }
    }
    return out;
}

Tensor tensor_from_image(const ImageBuffer& img, int target_size) {
    const int C = img.channels;
    std::vector<float> data(static_cast<size_t>(C) * target_size * target_size);
    if (img.width == target_size && img.height == target_size) {
        for (int c = 0; c < C; ++c)
            for (int y = 0; y < target_size; ++y)
                for (int x = 0; x < target_size; ++x)
                    data[(static_cast<size_t>(c) * target_size + y) * target_size + x] =
                        pixel_to_unit(img.at(y, x, c));
    } else {
        // Bilinear, pixel-center convention.
        const double sx = static_cast<double>(img.width) / target_size;
        const double sy = static_cast<double>(img.height) / target_size;
        for (int y = 0; y < target_size; ++y) {
            const double fy = std::max(0.0, (y + 0.5) * sy - 0.5);
            const int y0 = std::min(img.height - 1, static_cast<int>(fy));
            const int y1 = std::min(img.height - 1, y0 + 1);
            const double wy = fy - y0;
            for (int x = 0; x < target_size; ++x) {
                const double fx = std::max(0.0, (x + 0.5) * sx - 0.5);
                const int x0 = std::min(img.width - 1, static_cast<int>(fx));
                const int x1 = std::min(img.width - 1, x0 + 1);
                const double wx = fx - x0;
                for (int c = 0; c < C; ++c) {
                    const double top = (1.0 - wx) * img.at(y0, x0, c) + wx * img.at(y0, x1, c);
                    const double bot = (1.0 - wx) * img.at(y1, x0, c) + wx * img.at(y1, x1, c);
                    const double v = (1.0 - wy) * top + wy * bot;
                    data[(static_cast<size_t>(c) * target_size + y) * target_size + x] =
                        static_cast<float>(v) / 127.5f - 1.0f;
                }
            }
        }
    }
    return Tensor::from_data({1, C, target_size, target_size}, std::move(data));
}

ImageBuffer image_from_tensor(const Tensor& t) {
    if (t.rank() != 4 || t.dim(0) != 1 || (t.dim(1) != 1 && t.dim(1) != 3))
        fail(ErrorCode::shape_mismatch, "expected [1,{1|3},H,W] tensor, got " + shape_str(t.shape()));
    const int C = t.dim(1), H = t.dim(2), W = t.dim(3);
    ImageBuffer img{W, H, C, {}};
    img.pixels.resize(static_cast<size_t>(W) * H * C);
    const float* d = t.data();
    for (int c = 0; c < C; ++c)
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x)
                img.pixels[(static_cast<size_t>(y) * W + x) * C + c] =
                    unit_to_pixel(d[(static_cast<size_t>(c) * H + y) * W + x]);
    return img;
}

Tensor read_image(const std::filesystem::path& path, int target_size) {
    return tensor_from_image(read_png(path), target_size);
}

Tensor read_mask(const std::filesystem::path& path, int target_size) {
    ImageBuffer gray = resize_nearest(to_gray(read_png(path)), target_size, target_size);
    std::vector<float> data(static_cast<size_t>(target_size) * target_size);
    for (size_t i = 0; i < data.size(); ++i) data[i] = gray.pixels[i] > 127.5f ? 1.0f : -1.0f;
    return Tensor::from_data({1, 1, target_size, target_size}, std::move(data));
}

void write_image(const Tensor& t, const std::filesystem::path& path) {
    write_png(image_from_tensor(t), path);
}

}  // namespace mg
