#include "eval.hpp"

#include <cmath>
#include <cstdio>

#include "image_io.hpp"

namespace mg {

namespace {

void check_same_dims(const BinaryMask& a, const BinaryMask& b) {
    if (a.h != b.h || a.w != b.w)
        fail(ErrorCode::shape_mismatch, "mask sizes differ: " + std::to_string(a.h) + "x" +
                                            std::to_string(a.w) + " vs " + std::to_string(b.h) + "x" +
                                            std::to_string(b.w));
}

struct Counts {
    long long inter = 0;
    long long a_count = 0;
    long long b_count = 0;
    long long match = 0;
    long long total = 0;
};

Counts count(const BinaryMask& a, const BinaryMask& b) {
    check_same_dims(a, b);
    Counts c;
    c.total = static_cast<long long>(a.v.size());
    for (size_t i = 0; i < a.v.size(); ++i) {
        c.inter += (a.v[i] & b.v[i]);
        c.a_count += a.v[i];
        c.b_count += b.v[i];
        c.match += (a.v[i] == b.v[i]);
    }
    return c;
}

}  // namespace

BinaryMask binarize(const Tensor& t, float threshold) {
    if (t.rank() != 4 || t.dim(0) != 1 || t.dim(1) != 1)
        fail(ErrorCode::shape_mismatch, "binarize expects [1,1,H,W], got " + shape_str(t.shape()));
    BinaryMask m;
    m.h = t.dim(2);
    m.w = t.dim(3);
    m.v.resize(t.numel());
    const float* d = t.data();
    for (size_t i = 0; i < m.v.size(); ++i) m.v[i] = d[i] > threshold ? 1 : 0;
    return m;
}

double iou(const BinaryMask& a, const BinaryMask& b) {
    const Counts c = count(a, b);
    const long long uni = c.a_count + c.b_count - c.inter;
    if (uni == 0) return 1.0;
    return static_cast<double>(c.inter) / static_cast<double>(uni);
}

double dice(const BinaryMask& a, const BinaryMask& b) {
    const Counts c = count(a, b);
    if (c.a_count + c.b_count == 0) return 1.0;
    return 2.0 * static_cast<double>(c.inter) / static_cast<double>(c.a_count + c.b_count);
}

double pixel_accuracy(const BinaryMask& a, const BinaryMask& b) {
    const Counts c = count(a, b);
    return static_cast<double>(c.match) / static_cast<double>(c.total);
}

MetricReport evaluate_with(const std::function<Tensor(const Tensor&)>& predict,
                           const PairedDataset& test_ds, float threshold) {
    if (test_ds.empty()) fail(ErrorCode::invalid_argument, "evaluation dataset is empty");
    MetricReport report;
    report.per_sample.reserve(test_ds.size());
    double sum_iou = 0.0, sum_dice = 0.0, sum_acc = 0.0;
    for (const auto& s : test_ds.samples) {
        const BinaryMask pred = binarize(predict(s.image), threshold);
        const BinaryMask gt = binarize(s.mask, 0.0f);
        SampleMetrics m;
        m.name = s.name;
        m.iou = iou(pred, gt);
        m.dice = dice(pred, gt);
        m.accuracy = pixel_accuracy(pred, gt);
        sum_iou += m.iou;
        sum_dice += m.dice;
        sum_acc += m.accuracy;
        report.per_sample.push_back(std::move(m));
    }
    const double n = static_cast<double>(report.per_sample.size());
    report.mean_iou = sum_iou / n;
    report.mean_dice = sum_dice / n;
    report.mean_accuracy = sum_acc / n;
    return report;
}

MetricReport evaluate(const Generator& gen, const PairedDataset& test_ds, float threshold) {
    NoGradGuard no_grad;
    return evaluate_with(
        [&gen](const Tensor& image) { return forward_generator(gen, image, false); }, test_ds,
        threshold);
}

std::string report_text(const MetricReport& report) {
    std::string out = "name,iou,dice,accuracy\n";
    char buf[160];
    for (const auto& m : report.per_sample) {
        std::snprintf(buf, sizeof(buf), "%s,%.6f,%.6f,%.6f\n", m.name.c_str(), m.iou, m.dice,
                      m.accuracy);
        out += buf;
    }
    std::snprintf(buf, sizeof(buf), "mean,%.6f,%.6f,%.6f\n", report.mean_iou, report.mean_dice,
                  report.mean_accuracy);
    out += buf;
    return out;
}

void write_triptych(const Tensor& image, const Tensor& gt_mask, const Tensor& pred_mask,
                    const std::filesystem::path& path) {
    if (image.rank() != 4 || gt_mask.rank() != 4 || pred_mask.rank() != 4)
        fail(ErrorCode::shape_mismatch, "triptych expects [1,C,H,W] tensors");
    const int H = image.dim(2), W = image.dim(3);
    if (gt_mask.dim(2) != H || gt_mask.dim(3) != W || pred_mask.dim(2) != H || pred_mask.dim(3) != W)
        fail(ErrorCode::shape_mismatch, "triptych panels must share H,W");

    const ImageBuffer panels[3] = {image_from_tensor(image), image_from_tensor(gt_mask),
                                   image_from_tensor(pred_mask)};
    const int C = panels[0].channels;
    ImageBuffer out{3 * W + 2, H, C, {}};
    out.pixels.assign(static_cast<size_t>(out.width) * H * C, 128);  // separators stay mid-gray
    for (int p = 0; p < 3; ++p) {
        const int x_off = p * (W + 1);
        for (int y = 0; y < H; ++y) {
            for (int x = 0; x < W; ++x) {
                for (int c = 0; c < C; ++c) {
                    // Gray panels replicate into RGB when the image is color.
                    const uint8_t v = panels[p].channels == C ? panels[p].at(y, x, c)
                                                              : panels[p].at(y, x, 0);
                    out.pixels[(static_cast<size_t>(y) * out.width + x_off + x) * C + c] = v;
                }
            }
        }
    }
    write_png(out, path);
}

}  // namespace mg
