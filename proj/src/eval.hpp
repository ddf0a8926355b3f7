#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "data.hpp"
#include "models.hpp"

namespace mg {

// Row-major 0/1 mask.
struct BinaryMask {
    int h = 0;
    int w = 0;
    std::vector<uint8_t> v;
};

// 1 where value > threshold (strict), else 0. Input is a [1,1,H,W] map in
// tanh space.
BinaryMask binarize(const Tensor& t, float threshold = 0.0f);

// Empty-vs-empty scores 1.0 by convention.
double iou(const BinaryMask& a, const BinaryMask& b);
double dice(const BinaryMask& a, const BinaryMask& b);
double pixel_accuracy(const BinaryMask& a, const BinaryMask& b);

struct SampleMetrics {
    std::string name;
    double iou = 0.0;
    double dice = 0.0;
    double accuracy = 0.0;
};

struct MetricReport {
    std::vector<SampleMetrics> per_sample;
    double mean_iou = 0.0;
    double mean_dice = 0.0;
    double mean_accuracy = 0.0;

    size_t n() const { return per_sample.size(); }
};

// Runs `predict` on every test image and scores the binarized output against
// the ground-truth mask.
MetricReport evaluate_with(const std::function<Tensor(const Tensor&)>& predict,
                           const PairedDataset& test_ds, float threshold = 0.0f);

// Standard path: generator in eval mode, no graph recording.
MetricReport evaluate(const Generator& gen, const PairedDataset& test_ds, float threshold = 0.0f);

// One line per sample plus a final mean line; doubles rendered with fixed
// precision so the output is byte-stable.
std::string report_text(const MetricReport& report);

// Side-by-side figure: input | ground truth | prediction, separated by
// single mid-gray columns.
void write_triptych(const Tensor& image, const Tensor& gt_mask, const Tensor& pred_mask,
                    const std::filesystem::path& path);

}  // namespace mg
