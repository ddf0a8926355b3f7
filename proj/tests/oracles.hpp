#pragma once

// Reference implementations used as test oracles. Kept deliberately naive and
// independent of the library's kernels: padded-buffer gather for conv2d,
// scatter-accumulate for conv_transpose2d, central finite differences for
// gradients, closed-form parameter counting for the model builders.

#include <cmath>
#include <functional>
#include <vector>

#include "models.hpp"
#include "rng.hpp"
#include "tensor.hpp"

namespace oracle {

struct ConvDims {
    int n, ci, h, w;
    int co, k;
    int stride, pad;
};

inline std::vector<float> ref_conv2d(const std::vector<float>& in, const std::vector<float>& weight,
                                     const std::vector<float>& bias, const ConvDims& d, int& out_h,
                                     int& out_w) {
    out_h = (d.h + 2 * d.pad - d.k) / d.stride + 1;
    out_w = (d.w + 2 * d.pad - d.k) / d.stride + 1;
    const int ph = d.h + 2 * d.pad, pw = d.w + 2 * d.pad;
    std::vector<float> out(static_cast<size_t>(d.n) * d.co * out_h * out_w);
    for (int n = 0; n < d.n; ++n) {
        // Materialize the zero-padded input for this sample.
        std::vector<float> padded(static_cast<size_t>(d.ci) * ph * pw, 0.0f);
        for (int c = 0; c < d.ci; ++c)
            for (int y = 0; y < d.h; ++y)
                for (int x = 0; x < d.w; ++x)
                    padded[(static_cast<size_t>(c) * ph + y + d.pad) * pw + x + d.pad] =
                        in[((static_cast<size_t>(n) * d.ci + c) * d.h + y) * d.w + x];
        for (int co = 0; co < d.co; ++co)
            for (int oy = 0; oy < out_h; ++oy)
                for (int ox = 0; ox < out_w; ++ox) {
                    double acc = bias[static_cast<size_t>(co)];
                    for (int c = 0; c < d.ci; ++c)
                        for (int ky = 0; ky < d.k; ++ky)
                            for (int kx = 0; kx < d.k; ++kx)
                                acc += static_cast<double>(
                                           padded[(static_cast<size_t>(c) * ph + oy * d.stride + ky) * pw +
                                                  ox * d.stride + kx]) *
                                       weight[((static_cast<size_t>(co) * d.ci + c) * d.k + ky) * d.k + kx];
                    out[((static_cast<size_t>(n) * d.co + co) * out_h + oy) * out_w + ox] =
                        static_cast<float>(acc);
                }
    }
    return out;
}

// weight layout [Cin, Cout, k, k]; every input pixel scatters a kernel patch.
inline std::vector<float> ref_conv_transpose2d(const std::vector<float>& in,
                                               const std::vector<float>& weight,
                                               const std::vector<float>& bias, const ConvDims& d,
                                               int& out_h, int& out_w) {
    out_h = (d.h - 1) * d.stride - 2 * d.pad + d.k;
    out_w = (d.w - 1) * d.stride - 2 * d.pad + d.k;
    std::vector<float> out(static_cast<size_t>(d.n) * d.co * out_h * out_w);
    for (int n = 0; n < d.n; ++n)
        for (int co = 0; co < d.co; ++co)
            for (int i = 0; i < out_h * out_w; ++i)
                out[(static_cast<size_t>(n) * d.co + co) * out_h * out_w + i] = bias[static_cast<size_t>(co)];
    for (int n = 0; n < d.n; ++n)
        for (int c = 0; c < d.ci; ++c)
            for (int y = 0; y < d.h; ++y)
                for (int x = 0; x < d.w; ++x) {
                    const float v = in[((static_cast<size_t>(n) * d.ci + c) * d.h + y) * d.w + x];
                    for (int co = 0; co < d.co; ++co)
                        for (int ky = 0; ky < d.k; ++ky)
                            for (int kx = 0; kx < d.k; ++kx) {
                                const int oy = y * d.stride - d.pad + ky;
                                const int ox = x * d.stride - d.pad + kx;
                                if (oy < 0 || oy >= out_h || ox < 0 || ox >= out_w) continue;
                                out[((static_cast<size_t>(n) * d.co + co) * out_h + oy) * out_w + ox] +=
                                    v * weight[((static_cast<size_t>(c) * d.co + co) * d.k + ky) * d.k + kx];
                            }
                }
    return out;
}

struct GradCheck {
    double max_rel_err = 0.0;
    size_t n_checked = 0;
    size_t n_kinks = 0;
};

// Central finite differences against reverse-mode gradients. The relative
// error uses a floor in the denominator so fp32 quantization noise around
// zero-gradient elements does not register as relative error. Where the two
// one-sided slopes disagree, a kink (relu/leaky-relu/|.|) sits inside the
// +-h bracket and the central difference is not a valid derivative estimate;
// there the analytic value must instead lie between the one-sided slopes.
inline GradCheck check_gradients(std::vector<mg::Tensor> leaves,
                                 const std::function<mg::Tensor()>& loss_fn, float h = 1e-3f,
                                 double floor = 0.1) {
    for (auto& leaf : leaves) leaf.zero_grad();
    mg::Tensor loss = loss_fn();
    mg::backward(loss);
    std::vector<std::vector<float>> analytic;
    analytic.reserve(leaves.size());
    for (const auto& leaf : leaves) analytic.push_back(leaf.grad());

    const double f0 = loss_fn().item();
    GradCheck result;
    for (size_t li = 0; li < leaves.size(); ++li) {
        float* data = leaves[li].mutable_data();
        for (size_t i = 0; i < leaves[li].numel(); ++i) {
            const float saved = data[i];
            data[i] = saved + h;
            const double f_plus = loss_fn().item();
            data[i] = saved - h;
            const double f_minus = loss_fn().item();
            data[i] = saved;
            const double a = analytic[li][i];
            const double slope_hi = (f_plus - f0) / static_cast<double>(h);
            const double slope_lo = (f0 - f_minus) / static_cast<double>(h);
            const double scale = std::max({std::fabs(slope_hi), std::fabs(slope_lo), floor});
            double rel;
            if (std::fabs(slope_hi - slope_lo) > 0.02 * scale) {
                ++result.n_kinks;
                const double lo = std::min(slope_lo, slope_hi) - 1e-2 * scale;
                const double hi = std::max(slope_lo, slope_hi) + 1e-2 * scale;
                rel = (a >= lo && a <= hi) ? 0.0 : 1.0;
            } else {
                const double fd = (f_plus - f_minus) / (2.0 * static_cast<double>(h));
                rel = std::fabs(a - fd) / std::max({std::fabs(a), std::fabs(fd), floor});
            }
            result.max_rel_err = std::max(result.max_rel_err, rel);
            ++result.n_checked;
        }
    }
    return result;
}

// Closed-form parameter counts from the documented layer recipe (kernel 4
// everywhere, channel cap 8*base, norm on all but the first encoder block).
inline size_t unet_param_count(int in_ch, int out_ch, int base, int depth) {
    const auto cap = [base](int i) { return std::min(base << i, 8 * base); };
    size_t total = 0;
    for (int i = 0; i < depth; ++i) {
        const int cin = (i == 0) ? in_ch : cap(i - 1);
        total += static_cast<size_t>(cap(i)) * cin * 16 + cap(i);
        if (i > 0) total += 2 * static_cast<size_t>(cap(i));
    }
    for (int i = depth - 1; i >= 1; --i) {
        const int cin = (i == depth - 1) ? cap(i) : 2 * cap(i);
        total += static_cast<size_t>(cin) * cap(i - 1) * 16 + cap(i - 1) + 2 * static_cast<size_t>(cap(i - 1));
    }
    const int cin = (depth == 1) ? cap(0) : 2 * cap(0);
    total += static_cast<size_t>(cin) * out_ch * 16 + out_ch;
    return total;
}

inline size_t discriminator_param_count(int in_ch, int base, int n_stride2) {
    const auto cap = [base](int i) { return std::min(base << i, 8 * base); };
    size_t total = 0;
    for (int i = 0; i < n_stride2; ++i) {
        const int cin = (i == 0) ? in_ch : cap(i - 1);
        total += static_cast<size_t>(cap(i)) * cin * 16 + cap(i);
        if (i > 0) total += 2 * static_cast<size_t>(cap(i));
    }
    total += static_cast<size_t>(cap(n_stride2)) * cap(n_stride2 - 1) * 16 + cap(n_stride2) +
             2 * static_cast<size_t>(cap(n_stride2));
    total += static_cast<size_t>(cap(n_stride2)) * 16 + 1;
    return total;
}

inline mg::Tensor random_tensor(const mg::Shape& shape, mg::Rng& rng, bool requires_grad = false,
                                float lo = -1.0f, float hi = 1.0f) {
    std::vector<float> data(mg::shape_numel(shape));
    for (auto& v : data) v = rng.uniform(lo, hi);
    return mg::Tensor::from_data(shape, std::move(data), requires_grad);
}

// Uniform values bounded away from zero, for checking kinked activations.
inline mg::Tensor random_tensor_no_kink(const mg::Shape& shape, mg::Rng& rng, bool requires_grad,
                                        float min_abs = 0.05f) {
    std::vector<float> data(mg::shape_numel(shape));
    for (auto& v : data) {
        float x = rng.uniform(min_abs, 1.0f);
        v = rng.uniform01() < 0.5 ? -x : x;
    }
    return mg::Tensor::from_data(shape, std::move(data), requires_grad);
}

// Re-draw model parameters at O(1) scale so finite differencing stays in the
// linear regime (the training init of 0.02 leaves instance-norm variances
// near eps, where h=1e-3 steps are far outside it).
inline void randomize_params(mg::ModelParams& params, mg::Rng& rng) {
    for (auto& [name, t] : params.entries) {
        float* d = t.mutable_data();
        const bool is_norm_weight = name.find(".norm.weight") != std::string::npos;
        for (size_t i = 0; i < t.numel(); ++i)
            d[i] = is_norm_weight ? rng.uniform(0.8f, 1.2f) : rng.uniform(-0.5f, 0.5f);
    }
}

}  // namespace oracle
