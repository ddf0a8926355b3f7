#include "tensor.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace mg {

namespace {

thread_local bool g_grad_enabled = true;

int div_floor(int a, int b) {
    int q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
}

int div_ceil(int a, int b) {
    return -div_floor(-a, b);
}

void check_rank(const Tensor& t, int rank, const char* what) {
    if (t.rank() != rank)
        fail(ErrorCode::shape_mismatch,
             std::string(what) + " must have rank " + std::to_string(rank) + ", got shape " +
                 shape_str(t.shape()));
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* what) {
    if (a.shape() != b.shape())
        fail(ErrorCode::shape_mismatch, std::string(what) + ": shapes " + shape_str(a.shape()) +
                                            " and " + shape_str(b.shape()) + " differ");
}

}  // namespace

size_t shape_numel(const Shape& s) {
    size_t n = 1;
    for (int d : s) n *= static_cast<size_t>(d);
    return n;
}

std::string shape_str(const Shape& s) {
    std::string out = "[";
    for (size_t i = 0; i < s.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

Tensor make_op_node(Shape shape, std::vector<float> data, std::vector<Tensor> inputs,
                    std::function<void(detail::Node&)> backward) {
    auto node = std::make_shared<detail::Node>();
    node->shape = std::move(shape);
    node->data = std::move(data);
    if (g_grad_enabled) {
        bool needs = false;
        for (const auto& in : inputs) needs = needs || in.requires_grad();
        if (needs) {
            node->requires_grad = true;
            node->inputs.reserve(inputs.size());
            for (const auto& in : inputs) node->inputs.push_back(in.node());
            node->backward = std::move(backward);
        }
    }
    return Tensor(std::move(node));
}

Tensor Tensor::zeros(const Shape& shape, bool requires_grad) {
    return full(shape, 0.0f, requires_grad);
}

Tensor Tensor::full(const Shape& shape, float value, bool requires_grad) {
    return from_data(shape, std::vector<float>(shape_numel(shape), value), requires_grad);
}

Tensor Tensor::from_data(const Shape& shape, std::vector<float> data, bool requires_grad) {
    for (int d : shape)
        if (d <= 0) fail(ErrorCode::invalid_argument, "shape dims must be positive, got " + shape_str(shape));
    if (shape_numel(shape) != data.size())
        fail(ErrorCode::shape_mismatch, "shape " + shape_str(shape) + " does not match data length " +
                                            std::to_string(data.size()));
    auto node = std::make_shared<detail::Node>();
    node->shape = shape;
    node->data = std::move(data);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

float Tensor::item() const {
    if (numel() != 1) fail(ErrorCode::shape_mismatch, "item() on non-scalar tensor " + shape_str(shape()));
    return node_->data[0];
}

float* Tensor::mutable_data() {
    if (node_->backward)
        fail(ErrorCode::invalid_argument, "mutable access is restricted to leaf tensors");
    return node_->data.data();
}

const std::vector<float>& Tensor::grad() const& {
    node_->ensure_grad();
    return node_->grad;
}

std::vector<float> Tensor::grad() && {
    node_->ensure_grad();
    return node_->grad;
}

void Tensor::zero_grad() {
    node_->grad.assign(node_->data.size(), 0.0f);
}

Tensor Tensor::detach() const {
    return from_data(node_->shape, node_->data, false);
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) {
    g_grad_enabled = false;
}

NoGradGuard::~NoGradGuard() {
    g_grad_enabled = previous_;
}

bool grad_enabled() {
    return g_grad_enabled;
}

int conv2d_out_dim(int in, int k, int stride, int pad) {
    return (in + 2 * pad - k) / stride + 1;
}

int conv_transpose2d_out_dim(int in, int k, int stride, int pad) {
    return (in - 1) * stride - 2 * pad + k;
}

namespace {

void check_conv_args(const Tensor& input, const Tensor& weight, const Tensor& bias, int stride,
                     int pad, bool transposed) {
    check_rank(input, 4, "conv input");
    check_rank(weight, 4, "conv weight");
    check_rank(bias, 1, "conv bias");
    if (weight.dim(2) != weight.dim(3))
        fail(ErrorCode::invalid_argument, "only square kernels supported, got " + shape_str(weight.shape()));
    if (weight.dim(2) < 1 || stride < 1 || pad < 0)
        fail(ErrorCode::invalid_argument, "conv requires k >= 1, stride >= 1, pad >= 0");
    const int ci_w = transposed ? weight.dim(0) : weight.dim(1);
    const int co_w = transposed ? weight.dim(1) : weight.dim(0);
    if (input.dim(1) != ci_w)
        fail(ErrorCode::shape_mismatch,
             "input channels " + std::to_string(input.dim(1)) + " do not match weight channels " +
                 std::to_string(ci_w));
    if (bias.dim(0) != co_w)
        fail(ErrorCode::shape_mismatch, "bias size " + std::to_string(bias.dim(0)) +
                                            " does not match output channels " + std::to_string(co_w));
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, int stride, int pad) {
    check_conv_args(input, weight, bias, stride, pad, false);
    const int N = input.dim(0), Ci = input.dim(1), H = input.dim(2), W = input.dim(3);
    const int Co = weight.dim(0), K = weight.dim(2);
    if (H + 2 * pad < K || W + 2 * pad < K)
        fail(ErrorCode::invalid_argument, "kernel " + std::to_string(K) + " larger than padded input " +
                                              shape_str(input.shape()));
    const int OH = conv2d_out_dim(H, K, stride, pad);
    const int OW = conv2d_out_dim(W, K, stride, pad);
    if (OH <= 0 || OW <= 0)
        fail(ErrorCode::invalid_argument, "conv2d output dims are non-positive for input " +
                                              shape_str(input.shape()));

    std::vector<float> out(static_cast<size_t>(N) * Co * OH * OW);
    const float* in = input.data();
    const float* w = weight.data();
    const float* b = bias.data();
    for (int n = 0; n < N; ++n) {
        for (int co = 0; co < Co; ++co) {
            float* op = &out[(static_cast<size_t>(n) * Co + co) * OH * OW];
            std::fill(op, op + static_cast<size_t>(OH) * OW, b[co]);
            for (int ci = 0; ci < Ci; ++ci) {
                const float* ip = &in[(static_cast<size_t>(n) * Ci + ci) * H * W];
                for (int kh = 0; kh < K; ++kh) {
                    for (int kw = 0; kw < K; ++kw) {
                        const float wv = w[((static_cast<size_t>(co) * Ci + ci) * K + kh) * K + kw];
                        const int ow_lo = std::max(0, div_ceil(pad - kw, stride));
                        const int ow_hi = std::min(OW - 1, div_floor(W - 1 + pad - kw, stride));
                        for (int oh = 0; oh < OH; ++oh) {
                            const int ih = oh * stride - pad + kh;
                            if (ih < 0 || ih >= H) continue;
                            const float* irow = ip + static_cast<size_t>(ih) * W;
                            float* orow = op + static_cast<size_t>(oh) * OW;
                            for (int ow = ow_lo; ow <= ow_hi; ++ow)
                                orow[ow] += wv * irow[ow * stride - pad + kw];
                        }
                    }
                }
            }
        }
    }

    auto backward = [N, Ci, H, W, Co, K, OH, OW, stride, pad](detail::Node& node) {
        auto& in_n = *node.inputs[0];
        auto& w_n = *node.inputs[1];
        auto& b_n = *node.inputs[2];
        const float* g = node.grad.data();
        const float* in = in_n.data.data();
        const float* w = w_n.data.data();
        const bool need_in = in_n.requires_grad;
        const bool need_w = w_n.requires_grad;
        const bool need_b = b_n.requires_grad;
        if (need_in) in_n.ensure_grad();
        if (need_w) w_n.ensure_grad();
        if (need_b) b_n.ensure_grad();
        for (int n = 0; n < N; ++n) {
            for (int co = 0; co < Co; ++co) {
                const float* gp = &g[(static_cast<size_t>(n) * Co + co) * OH * OW];
                if (need_b) {
                    double acc = 0.0;
                    for (int i = 0; i < OH * OW; ++i) acc += gp[i];
                    b_n.grad[co] += static_cast<float>(acc);
                }
                for (int ci = 0; ci < Ci; ++ci) {
                    const float* ip = &in[(static_cast<size_t>(n) * Ci + ci) * H * W];
                    float* gip = need_in ? &in_n.grad[(static_cast<size_t>(n) * Ci + ci) * H * W] : nullptr;
                    for (int kh = 0; kh < K; ++kh) {
                        for (int kw = 0; kw < K; ++kw) {
                            const size_t widx = ((static_cast<size_t>(co) * Ci + ci) * K + kh) * K + kw;
                            const float wv = w[widx];
                            const int ow_lo = std::max(0, div_ceil(pad - kw, stride));
                            const int ow_hi = std::min(OW - 1, div_floor(W - 1 + pad - kw, stride));
                            double wacc = 0.0;
                            for (int oh = 0; oh < OH; ++oh) {
                                const int ih = oh * stride - pad + kh;
                                if (ih < 0 || ih >= H) continue;
                                const float* grow = gp + static_cast<size_t>(oh) * OW;
                                const float* irow = ip + static_cast<size_t>(ih) * W;
                                float* girow = need_in ? gip + static_cast<size_t>(ih) * W : nullptr;
                                for (int ow = ow_lo; ow <= ow_hi; ++ow) {
                                    const int iw = ow * stride - pad + kw;
                                    const float gv = grow[ow];
                                    if (need_w) wacc += static_cast<double>(gv) * irow[iw];
                                    if (need_in) girow[iw] += wv * gv;
                                }
                            }
                            if (need_w) w_n.grad[widx] += static_cast<float>(wacc);
                        }
                    }
                }
            }
        }
    };
    return make_op_node({N, Co, OH, OW}, std::move(out), {input, weight, bias}, std::move(backward));
}

Tensor conv_transpose2d(const Tensor& input, const Tensor& weight, const Tensor& bias, int stride,
                        int pad) {
    check_conv_args(input, weight, bias, stride, pad, true);
    const int N = input.dim(0), Ci = input.dim(1), H = input.dim(2), W = input.dim(3);
    const int Co = weight.dim(1), K = weight.dim(2);
    const int OH = conv_transpose2d_out_dim(H, K, stride, pad);
    const int OW = conv_transpose2d_out_dim(W, K, stride, pad);
    if (OH <= 0 || OW <= 0)
        fail(ErrorCode::invalid_argument, "conv_transpose2d output dims are non-positive for input " +
                                              shape_str(input.shape()));

    std::vector<float> out(static_cast<size_t>(N) * Co * OH * OW);
    const float* in = input.data();
    const float* w = weight.data();
    const float* b = bias.data();
    for (int n = 0; n < N; ++n) {
        for (int co = 0; co < Co; ++co) {
            float* op = &out[(static_cast<size_t>(n) * Co + co) * OH * OW];
            std::fill(op, op + static_cast<size_t>(OH) * OW, b[co]);
        }
        for (int ci = 0; ci < Ci; ++ci) {
            const float* ip = &in[(static_cast<size_t>(n) * Ci + ci) * H * W];
            for (int co = 0; co < Co; ++co) {
                float* op = &out[(static_cast<size_t>(n) * Co + co) * OH * OW];
                for (int kh = 0; kh < K; ++kh) {
                    for (int kw = 0; kw < K; ++kw) {
                        const float wv = w[((static_cast<size_t>(ci) * Co + co) * K + kh) * K + kw];
                        const int iw_lo = std::max(0, div_ceil(pad - kw, stride));
                        const int iw_hi = std::min(W - 1, div_floor(OW - 1 + pad - kw, stride));
                        for (int ih = 0; ih < H; ++ih) {
                            const int oh = ih * stride - pad + kh;
                            if (oh < 0 || oh >= OH) continue;
                            const float* irow = ip + static_cast<size_t>(ih) * W;
                            float* orow = op + static_cast<size_t>(oh) * OW;
                            for (int iw = iw_lo; iw <= iw_hi; ++iw)
                                orow[iw * stride - pad + kw] += wv * irow[iw];
                        }
                    }
                }
            }
        }
    }

    auto backward = [N, Ci, H, W, Co, K, OH, OW, stride, pad](detail::Node& node) {
        auto& in_n = *node.inputs[0];
        auto& w_n = *node.inputs[1];
        auto& b_n = *node.inputs[2];
        const float* g = node.grad.data();
        const float* in = in_n.data.data();
        const float* w = w_n.data.data();
        const bool need_in = in_n.requires_grad;
        const bool need_w = w_n.requires_grad;
        const bool need_b = b_n.requires_grad;
        if (need_in) in_n.ensure_grad();
        if (need_w) w_n.ensure_grad();
        if (need_b) b_n.ensure_grad();
        if (need_b) {
            for (int n = 0; n < N; ++n)
                for (int co = 0; co < Co; ++co) {
                    const float* gp = &g[(static_cast<size_t>(n) * Co + co) * OH * OW];
                    double acc = 0.0;
                    for (int i = 0; i < OH * OW; ++i) acc += gp[i];
                    b_n.grad[co] += static_cast<float>(acc);
                }
        }
        for (int n = 0; n < N; ++n) {
            for (int ci = 0; ci < Ci; ++ci) {
                const float* ip = &in[(static_cast<size_t>(n) * Ci + ci) * H * W];
                float* gip = need_in ? &in_n.grad[(static_cast<size_t>(n) * Ci + ci) * H * W] : nullptr;
                for (int co = 0; co < Co; ++co) {
                    const float* gp = &g[(static_cast<size_t>(n) * Co + co) * OH * OW];
                    for (int kh = 0; kh < K; ++kh) {
                        for (int kw = 0; kw < K; ++kw) {
                            const size_t widx = ((static_cast<size_t>(ci) * Co + co) * K + kh) * K + kw;
                            const float wv = w[widx];
                            const int iw_lo = std::max(0, div_ceil(pad - kw, stride));
                            const int iw_hi = std::min(W - 1, div_floor(OW - 1 + pad - kw, stride));
                            double wacc = 0.0;
                            for (int ih = 0; ih < H; ++ih) {
                                const int oh = ih * stride - pad + kh;
                                if (oh < 0 || oh >= OH) continue;
                                const float* grow = gp + static_cast<size_t>(oh) * OW;
                                const float* irow = ip + static_cast<size_t>(ih) * W;
                                float* girow = need_in ? gip + static_cast<size_t>(ih) * W : nullptr;
                                for (int iw = iw_lo; iw <= iw_hi; ++iw) {
                                    const float gv = grow[iw * stride - pad + kw];
                                    if (need_w) wacc += static_cast<double>(gv) * irow[iw];
                                    if (need_in) girow[iw] += wv * gv;
                                }
                            }
                            if (need_w) w_n.grad[widx] += static_cast<float>(wacc);
                        }
                    }
                }
            }
        }
    };
    return make_op_node({N, Co, OH, OW}, std::move(out), {input, weight, bias}, std::move(backward));
}

Tensor instance_norm(const Tensor& input, const Tensor& scale, const Tensor& shift, float eps) {
    check_rank(input, 4, "instance_norm input");
    check_rank(scale, 1, "instance_norm scale");
    check_rank(shift, 1, "instance_norm shift");
    const int N = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
    if (scale.dim(0) != C || shift.dim(0) != C)
        fail(ErrorCode::shape_mismatch, "instance_norm scale/shift must have size " + std::to_string(C));
    if (eps <= 0.0f) fail(ErrorCode::invalid_argument, "instance_norm eps must be positive");

    const int M = H * W;
    std::vector<float> out(input.numel());
    // Saved per (sample, channel) for backward.
    std::vector<float> means(static_cast<size_t>(N) * C);
    std::vector<float> inv_stds(static_cast<size_t>(N) * C);
    const float* in = input.data();
    const float* ga = scale.data();
    const float* be = shift.data();
    for (int n = 0; n < N; ++n) {
        for (int c = 0; c < C; ++c) {
            const float* x = &in[(static_cast<size_t>(n) * C + c) * M];
            float* y = &out[(static_cast<size_t>(n) * C + c) * M];
            double sum = 0.0, sq = 0.0;
            for (int i = 0; i < M; ++i) {
                sum += x[i];
                sq += static_cast<double>(x[i]) * x[i];
            }
            const double mean = sum / M;
            const double var = std::max(0.0, sq / M - mean * mean);
            const float inv = static_cast<float>(1.0 / std::sqrt(var + eps));
            means[static_cast<size_t>(n) * C + c] = static_cast<float>(mean);
            inv_stds[static_cast<size_t>(n) * C + c] = inv;
            const float a = ga[c] * inv;
            const float b = be[c] - a * static_cast<float>(mean);
            for (int i = 0; i < M; ++i) y[i] = a * x[i] + b;
        }
    }

    auto backward = [N, C, M, means = std::move(means),
                     inv_stds = std::move(inv_stds)](detail::Node& node) {
        auto& in_n = *node.inputs[0];
        auto& sc_n = *node.inputs[1];
        auto& sh_n = *node.inputs[2];
        const float* g = node.grad.data();
        const float* in = in_n.data.data();
        const float* ga = sc_n.data.data();
        const bool need_in = in_n.requires_grad;
        const bool need_sc = sc_n.requires_grad;
        const bool need_sh = sh_n.requires_grad;
        if (need_in) in_n.ensure_grad();
        if (need_sc) sc_n.ensure_grad();
        if (need_sh) sh_n.ensure_grad();
        for (int n = 0; n < N; ++n) {
            for (int c = 0; c < C; ++c) {
                const size_t plane = (static_cast<size_t>(n) * C + c) * M;
                const float* x = &in[plane];
                const float* gy = &g[plane];
                const float mean = means[static_cast<size_t>(n) * C + c];
                const float inv = inv_stds[static_cast<size_t>(n) * C + c];
                double sum_gy = 0.0, sum_gy_xhat = 0.0;
                for (int i = 0; i < M; ++i) {
                    const double xhat = static_cast<double>(x[i] - mean) * inv;
                    sum_gy += gy[i];
                    sum_gy_xhat += gy[i] * xhat;
                }
                if (need_sh) sh_n.grad[c] += static_cast<float>(sum_gy);
                if (need_sc) sc_n.grad[c] += static_cast<float>(sum_gy_xhat);
                if (need_in) {
                    float* gx = &in_n.grad[plane];
                    const double mean_gy = sum_gy / M;
                    const double mean_gy_xhat = sum_gy_xhat / M;
                    const double a = static_cast<double>(ga[c]) * inv;
                    for (int i = 0; i < M; ++i) {
                        const double xhat = static_cast<double>(x[i] - mean) * inv;
                        gx[i] += static_cast<float>(a * (gy[i] - mean_gy - xhat * mean_gy_xhat));
                    }
                }
            }
        }
    };
    return make_op_node(input.shape(), std::move(out), {input, scale, shift}, std::move(backward));
}

namespace {

Tensor elementwise_unary(const Tensor& t, const std::function<float(float)>& fwd,
                         std::function<void(detail::Node&)> backward) {
    std::vector<float> out(t.numel());
    const float* in = t.data();
    for (size_t i = 0; i < out.size(); ++i) out[i] = fwd(in[i]);
    return make_op_node(t.shape(), std::move(out), {t}, std::move(backward));
}

}  // namespace

Tensor relu(const Tensor& t) {
    return elementwise_unary(
        t, [](float x) { return x > 0.0f ? x : 0.0f; },
        [](detail::Node& node) {
            auto& in = *node.inputs[0];
            if (!in.requires_grad) return;
            in.ensure_grad();
            for (size_t i = 0; i < node.grad.size(); ++i)
                if (in.data[i] > 0.0f) in.grad[i] += node.grad[i];
        });
}

Tensor leaky_relu(const Tensor& t, float slope) {
    if (!(slope > 0.0f && slope < 1.0f))
        fail(ErrorCode::invalid_argument, "leaky_relu slope must lie in (0,1)");
    return elementwise_unary(
        t, [slope](float x) { return x > 0.0f ? x : slope * x; },
        [slope](detail::Node& node) {
            auto& in = *node.inputs[0];
            if (!in.requires_grad) return;
            in.ensure_grad();
            for (size_t i = 0; i < node.grad.size(); ++i)
                in.grad[i] += node.grad[i] * (in.data[i] > 0.0f ? 1.0f : slope);
        });
}

Tensor tanh(const Tensor& t) {
    return elementwise_unary(
        t, [](float x) { return std::tanh(x); },
        [](detail::Node& node) {
            auto& in = *node.inputs[0];
            if (!in.requires_grad) return;
            in.ensure_grad();
            for (size_t i = 0; i < node.grad.size(); ++i) {
                const float y = node.data[i];
                in.grad[i] += node.grad[i] * (1.0f - y * y);
            }
        });
}

Tensor sigmoid(const Tensor& t) {
    return elementwise_unary(
        t, [](float x) { return 1.0f / (1.0f + std::exp(-x)); },
        [](detail::Node& node) {
            auto& in = *node.inputs[0];
            if (!in.requires_grad) return;
            in.ensure_grad();
            for (size_t i = 0; i < node.grad.size(); ++i) {
                const float y = node.data[i];
                in.grad[i] += node.grad[i] * y * (1.0f - y);
            }
        });
}

Tensor activation(const Tensor& t, Act kind, float slope) {
    switch (kind) {
        case Act::relu: return relu(t);
        case Act::leaky_relu: return leaky_relu(t, slope);
        case Act::tanh: return tanh(t);
        case Act::sigmoid: return sigmoid(t);
    }
    fail(ErrorCode::invalid_argument, "unknown activation kind");
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    check_rank(a, 4, "concat input");
    check_rank(b, 4, "concat input");
    if (a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2) || a.dim(3) != b.dim(3))
        fail(ErrorCode::shape_mismatch, "concat_channels: batch/spatial dims differ, " +
                                            shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    const int N = a.dim(0), Ca = a.dim(1), Cb = b.dim(1), H = a.dim(2), W = a.dim(3);
    const size_t plane = static_cast<size_t>(H) * W;
    std::vector<float> out(static_cast<size_t>(N) * (Ca + Cb) * plane);
    for (int n = 0; n < N; ++n) {
        std::copy_n(a.data() + static_cast<size_t>(n) * Ca * plane, Ca * plane,
                    out.begin() + static_cast<size_t>(n) * (Ca + Cb) * plane);
        std::copy_n(b.data() + static_cast<size_t>(n) * Cb * plane, Cb * plane,
                    out.begin() + (static_cast<size_t>(n) * (Ca + Cb) + Ca) * plane);
    }
    auto backward = [N, Ca, Cb, plane](detail::Node& node) {
        auto& an = *node.inputs[0];
        auto& bn = *node.inputs[1];
        if (an.requires_grad) an.ensure_grad();
        if (bn.requires_grad) bn.ensure_grad();
        for (int n = 0; n < N; ++n) {
            const float* g = &node.grad[static_cast<size_t>(n) * (Ca + Cb) * plane];
            if (an.requires_grad) {
                float* ga = &an.grad[static_cast<size_t>(n) * Ca * plane];
                for (size_t i = 0; i < Ca * plane; ++i) ga[i] += g[i];
            }
            if (bn.requires_grad) {
                float* gb = &bn.grad[static_cast<size_t>(n) * Cb * plane];
                for (size_t i = 0; i < Cb * plane; ++i) gb[i] += g[Ca * plane + i];
            }
        }
    };
    return make_op_node({N, Ca + Cb, H, W}, std::move(out), {a, b}, std::move(backward));
}

Tensor slice_channels(const Tensor& t, int begin, int count) {
    check_rank(t, 4, "slice input");
    const int N = t.dim(0), C = t.dim(1), H = t.dim(2), W = t.dim(3);
    if (begin < 0 || count < 1 || begin + count > C)
        fail(ErrorCode::invalid_argument, "slice_channels range [" + std::to_string(begin) + "," +
                                              std::to_string(begin + count) + ") out of bounds for C=" +
                                              std::to_string(C));
    const size_t plane = static_cast<size_t>(H) * W;
    std::vector<float> out(static_cast<size_t>(N) * count * plane);
    for (int n = 0; n < N; ++n)
        std::copy_n(t.data() + (static_cast<size_t>(n) * C + begin) * plane, count * plane,
                    out.begin() + static_cast<size_t>(n) * count * plane);
    auto backward = [N, C, begin, count, plane](detail::Node& node) {
        auto& in = *node.inputs[0];
        if (!in.requires_grad) return;
        in.ensure_grad();
        for (int n = 0; n < N; ++n) {
            float* gi = &in.grad[(static_cast<size_t>(n) * C + begin) * plane];
            const float* g = &node.grad[static_cast<size_t>(n) * count * plane];
            for (size_t i = 0; i < count * plane; ++i) gi[i] += g[i];
        }
    };
    return make_op_node({N, count, H, W}, std::move(out), {t}, std::move(backward));
}

Tensor dropout(const Tensor& t, float p, bool training, Rng& rng) {
    if (!(p >= 0.0f && p < 1.0f)) fail(ErrorCode::invalid_argument, "dropout p must lie in [0,1)");
    if (!training || p == 0.0f) return t;
    const float keep_scale = 1.0f / (1.0f - p);
    std::vector<float> mask(t.numel());
    for (auto& m : mask) m = (rng.uniform01() < p) ? 0.0f : keep_scale;
    std::vector<float> out(t.numel());
    const float* in = t.data();
    for (size_t i = 0; i < out.size(); ++i) out[i] = in[i] * mask[i];
    auto backward = [mask = std::move(mask)](detail::Node& node) {
        auto& in = *node.inputs[0];
        if (!in.requires_grad) return;
        in.ensure_grad();
        for (size_t i = 0; i < node.grad.size(); ++i) in.grad[i] += node.grad[i] * mask[i];
    };
    return make_op_node(t.shape(), std::move(out), {t}, std::move(backward));
}

Tensor add(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "add");
    std::vector<float> out(a.numel());
    for (size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
    auto backward = [](detail::Node& node) {
        for (auto& in : node.inputs) {
            if (!in->requires_grad) continue;
            in->ensure_grad();
            for (size_t i = 0; i < node.grad.size(); ++i) in->grad[i] += node.grad[i];
        }
    };
    return make_op_node(a.shape(), std::move(out), {a, b}, std::move(backward));
}

Tensor sub(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "sub");
    std::vector<float> out(a.numel());
    for (size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
    auto backward = [](detail::Node& node) {
        auto& an = *node.inputs[0];
        auto& bn = *node.inputs[1];
        if (an.requires_grad) {
            an.ensure_grad();
            for (size_t i = 0; i < node.grad.size(); ++i) an.grad[i] += node.grad[i];
        }
        if (bn.requires_grad) {
            bn.ensure_grad();
            for (size_t i = 0; i < node.grad.size(); ++i) bn.grad[i] -= node.grad[i];
        }
    };
    return make_op_node(a.shape(), std::move(out), {a, b}, std::move(backward));
}

Tensor mul(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "mul");
    std::vector<float> out(a.numel());
    for (size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
    auto backward = [](detail::Node& node) {
        auto& an = *node.inputs[0];
        auto& bn = *node.inputs[1];
        if (an.requires_grad) {
            an.ensure_grad();
            for (size_t i = 0; i < node.grad.size(); ++i) an.grad[i] += node.grad[i] * bn.data[i];
        }
        if (bn.requires_grad) {
            bn.ensure_grad();
            for (size_t i = 0; i < node.grad.size(); ++i) bn.grad[i] += node.grad[i] * an.data[i];
        }
    };
    return make_op_node(a.shape(), std::move(out), {a, b}, std::move(backward));
}

Tensor scale(const Tensor& t, float factor) {
    std::vector<float> out(t.numel());
    for (size_t i = 0; i < out.size(); ++i) out[i] = t.data()[i] * factor;
    auto backward = [factor](detail::Node& node) {
        auto& in = *node.inputs[0];
        if (!in.requires_grad) return;
        in.ensure_grad();
        for (size_t i = 0; i < node.grad.size(); ++i) in.grad[i] += node.grad[i] * factor;
    };
    return make_op_node(t.shape(), std::move(out), {t}, std::move(backward));
}

Tensor mean_all(const Tensor& t) {
    double acc = 0.0;
    for (size_t i = 0; i < t.numel(); ++i) acc += t.data()[i];
    const float inv_n = 1.0f / static_cast<float>(t.numel());
    auto backward = [inv_n](detail::Node& node) {
        auto& in = *node.inputs[0];
        if (!in.requires_grad) return;
        in.ensure_grad();
        const float g = node.grad[0] * inv_n;
        for (auto& gi : in.grad) gi += g;
    };
    return make_op_node({1}, {static_cast<float>(acc * inv_n)}, {t}, std::move(backward));
}

namespace {

// Reduction skeleton shared by the three losses: forward accumulates a mean in
// double, backward distributes d(loss)/d(element).
Tensor reduce_loss(const Tensor& pred, const Tensor& target,
                   const std::function<double(float, float)>& term,
                   std::function<void(detail::Node&, float)> backward_at) {
    check_same_shape(pred, target, "loss");
    const size_t n = pred.numel();
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) acc += term(pred.data()[i], target.data()[i]);
    const float inv_n = 1.0f / static_cast<float>(n);
    auto backward = [inv_n, backward_at = std::move(backward_at)](detail::Node& node) {
        backward_at(node, node.grad[0] * inv_n);
    };
    return make_op_node({1}, {static_cast<float>(acc / static_cast<double>(n))}, {pred, target},
                        std::move(backward));
}

}  // namespace

Tensor bce_with_logits_loss(const Tensor& logits, const Tensor& target) {
    // Stable form: max(z,0) - z*t + log(1 + exp(-|z|)).
    return reduce_loss(
        logits, target,
        [](float z, float t) {
            return std::max(z, 0.0f) - static_cast<double>(z) * t + std::log1p(std::exp(-std::fabs(z)));
        },
        [](detail::Node& node, float g) {
            auto& pn = *node.inputs[0];
            auto& tn = *node.inputs[1];
            if (pn.requires_grad) {
                pn.ensure_grad();
                for (size_t i = 0; i < pn.data.size(); ++i) {
                    const float s = 1.0f / (1.0f + std::exp(-pn.data[i]));
                    pn.grad[i] += g * (s - tn.data[i]);
                }
            }
            if (tn.requires_grad) {
                tn.ensure_grad();
                for (size_t i = 0; i < tn.data.size(); ++i) tn.grad[i] += g * (-pn.data[i]);
            }
        });
}

Tensor l1_loss(const Tensor& pred, const Tensor& target) {
    return reduce_loss(
        pred, target, [](float p, float t) { return std::fabs(static_cast<double>(p) - t); },
        [](detail::Node& node, float g) {
            auto& pn = *node.inputs[0];
            auto& tn = *node.inputs[1];
            for (size_t i = 0; i < pn.data.size(); ++i) {
                const float d = pn.data[i] - tn.data[i];
                const float s = (d > 0.0f) ? 1.0f : (d < 0.0f ? -1.0f : 0.0f);
                if (pn.requires_grad) {
                    pn.ensure_grad();
                    pn.grad[i] += g * s;
                }
                if (tn.requires_grad) {
                    tn.ensure_grad();
                    tn.grad[i] -= g * s;
                }
            }
        });
}

Tensor mse_loss(const Tensor& pred, const Tensor& target) {
    return reduce_loss(
        pred, target,
        [](float p, float t) {
            const double d = static_cast<double>(p) - t;
            return d * d;
        },
        [](detail::Node& node, float g) {
            auto& pn = *node.inputs[0];
            auto& tn = *node.inputs[1];
            for (size_t i = 0; i < pn.data.size(); ++i) {
                const float d = 2.0f * (pn.data[i] - tn.data[i]);
                if (pn.requires_grad) {
                    pn.ensure_grad();
                    pn.grad[i] += g * d;
                }
                if (tn.requires_grad) {
                    tn.ensure_grad();
                    tn.grad[i] -= g * d;
                }
            }
        });
}

Tensor loss(LossKind kind, const Tensor& pred, const Tensor& target) {
    switch (kind) {
        case LossKind::bce_with_logits: return bce_with_logits_loss(pred, target);
        case LossKind::l1: return l1_loss(pred, target);
        case LossKind::mse: return mse_loss(pred, target);
    }
    fail(ErrorCode::invalid_argument, "unknown loss kind");
}

Tensor stack_batch(const std::vector<Tensor>& samples) {
    if (samples.empty()) fail(ErrorCode::invalid_argument, "stack_batch on empty list");
    const Shape& s0 = samples[0].shape();
    if (s0.size() != 4 || s0[0] != 1)
        fail(ErrorCode::shape_mismatch, "stack_batch expects [1,C,H,W] samples");
    for (const auto& t : samples)
        if (t.shape() != s0)
            fail(ErrorCode::shape_mismatch, "stack_batch: sample shapes differ");
    const size_t per = samples[0].numel();
    const int n = static_cast<int>(samples.size());
    std::vector<float> out(per * samples.size());
    for (size_t i = 0; i < samples.size(); ++i)
        std::copy_n(samples[i].data(), per, out.begin() + i * per);
    auto backward = [per](detail::Node& node) {
        for (size_t i = 0; i < node.inputs.size(); ++i) {
            auto& in = *node.inputs[i];
            if (!in.requires_grad) continue;
            in.ensure_grad();
            const float* g = &node.grad[i * per];
            for (size_t j = 0; j < per; ++j) in.grad[j] += g[j];
        }
    };
    return make_op_node({n, s0[1], s0[2], s0[3]}, std::move(out), samples, std::move(backward));
}

void backward(const Tensor& loss) {
    if (loss.numel() != 1)
        fail(ErrorCode::invalid_argument, "backward requires a scalar loss, got " + shape_str(loss.shape()));
    auto root = loss.node();
    if (!root->requires_grad) return;  // constant: nothing depends on parameters

    // Iterative post-order DFS; reversing it yields a topological order with
    // every consumer ahead of its inputs.
    std::vector<detail::Node*> order;
    std::unordered_set<detail::Node*> visited;
    std::vector<std::pair<detail::Node*, size_t>> stack;
    stack.emplace_back(root.get(), 0);
    visited.insert(root.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->inputs.size()) {
            detail::Node* child = node->inputs[next++].get();
            if (child->requires_grad && visited.insert(child).second)
                stack.emplace_back(child, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    root->ensure_grad();
    root->grad[0] = 1.0f;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        detail::Node* node = *it;
        if (node->backward) {
            node->ensure_grad();
            node->backward(*node);
        }
    }
}

}  // namespace mg
