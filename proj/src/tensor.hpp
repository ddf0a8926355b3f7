#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "error.hpp"
#include "rng.hpp"

namespace mg {

using Shape = std::vector<int>;

size_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

namespace detail {

// One node of the dynamically recorded computation graph. Holds the forward
// value, the (lazily allocated) gradient accumulator, and a closure that
// scatters this node's gradient into its inputs. Inputs precede the node by
// construction, so a depth-first post-order from the loss is a valid
// topological order for the reverse sweep.
struct Node {
    Shape shape;
    std::vector<float> data;
    std::vector<float> grad;
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> inputs;
    std::function<void(Node&)> backward;

    size_t numel() const { return data.size(); }
    void ensure_grad() {
        if (grad.size() != data.size()) grad.assign(data.size(), 0.0f);
    }
};

}  // namespace detail

// Value handle over a graph node. Ops never mutate their inputs; the only
// in-place mutations are gradient accumulation during backward() and
// optimizer writes through mutable_data() between forward passes.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(const Shape& shape, bool requires_grad = false);
    static Tensor full(const Shape& shape, float value, bool requires_grad = false);
    static Tensor from_data(const Shape& shape, std::vector<float> data,
                            bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    int dim(int i) const { return node_->shape[static_cast<size_t>(i)]; }
    int rank() const { return static_cast<int>(node_->shape.size()); }
    size_t numel() const { return node_->numel(); }

    const float* data() const { return node_->data.data(); }
    // Ref-qualified so reading values off a temporary copies instead of
    // dangling.
    const std::vector<float>& values() const& { return node_->data; }
    std::vector<float> values() && { return node_->data; }
    float item() const;

    // Leaf-only write access (optimizer updates, test setup).
    float* mutable_data();

    bool requires_grad() const { return node_->requires_grad; }
    // Gradient accumulated by the last backward(); zeros if the tensor never
    // participated.
    const std::vector<float>& grad() const&;
    std::vector<float> grad() &&;
    void zero_grad();

    // Same values, fresh leaf, no history.
    Tensor detach() const;

    std::shared_ptr<detail::Node> node() const { return node_; }

private:
    explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
    std::shared_ptr<detail::Node> node_;

    friend Tensor make_op_node(Shape shape, std::vector<float> data,
                               std::vector<Tensor> inputs,
                               std::function<void(detail::Node&)> backward);
};

// While a guard is alive no graph is recorded; forwards run value-only.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

bool grad_enabled();

enum class Act { relu, leaky_relu, tanh, sigmoid };
enum class LossKind { bce_with_logits, l1, mse };

// Convolutions. conv2d weight is [Cout, Cin, k, k]; conv_transpose2d weight is
// [Cin, Cout, k, k], so the same buffer serves both sides of the adjoint pair.
Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias,
              int stride, int pad);
Tensor conv_transpose2d(const Tensor& input, const Tensor& weight, const Tensor& bias,
                        int stride, int pad);

int conv2d_out_dim(int in, int k, int stride, int pad);
int conv_transpose2d_out_dim(int in, int k, int stride, int pad);

Tensor instance_norm(const Tensor& input, const Tensor& scale, const Tensor& shift,
                     float eps = 1e-5f);

Tensor relu(const Tensor& t);
Tensor leaky_relu(const Tensor& t, float slope);
Tensor tanh(const Tensor& t);
Tensor sigmoid(const Tensor& t);
Tensor activation(const Tensor& t, Act kind, float slope = 0.2f);

Tensor concat_channels(const Tensor& a, const Tensor& b);
Tensor slice_channels(const Tensor& t, int begin, int count);

Tensor dropout(const Tensor& t, float p, bool training, Rng& rng);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& t, float factor);
Tensor mean_all(const Tensor& t);

// Mean losses reducing to a scalar (shape {1}).
Tensor bce_with_logits_loss(const Tensor& logits, const Tensor& target);
Tensor l1_loss(const Tensor& pred, const Tensor& target);
Tensor mse_loss(const Tensor& pred, const Tensor& target);
Tensor loss(LossKind kind, const Tensor& pred, const Tensor& target);

// Stack single-sample tensors [1,C,H,W] into one batch [N,C,H,W].
Tensor stack_batch(const std::vector<Tensor>& samples);

// Reverse sweep from a scalar loss. Each reachable node is visited exactly
// once; leaf gradients accumulate into Tensor::grad().
void backward(const Tensor& loss);

}  // namespace mg
