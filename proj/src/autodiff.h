#pragma once

// Minimal reverse-mode differentiation engine covering exactly the layers
// the MOS network needs: 1-D convolution (k3/s1/p1), 1-D batch norm, ReLU,
// k2/s2 pooling, fully connected layers and L1 loss. Values are doubles;
// the tape records one backward closure per op and replays them in reverse,
// accumulating gradients additively so tensors used on several paths
// receive the sum of all path gradients.

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

namespace salf::ad {

struct tensor;
using tensor_ptr = std::shared_ptr<tensor>;

struct tensor {
    std::vector<int64_t> shape; // (batch, features) or (batch, channels, length)
    std::vector<double> data;
    std::vector<double> grad; // same size as data iff requires_grad
    bool requires_grad = false;

    int64_t size() const { return static_cast<int64_t>(data.size()); }
    int64_t dim(size_t i) const { return shape[i]; }
    void zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }

    static tensor_ptr zeros(std::vector<int64_t> shape, bool requires_grad = false);
    static tensor_ptr from(std::vector<int64_t> shape, std::vector<double> values, bool requires_grad = false);
};

// running statistics of one batch-norm layer (not trainable)
struct bn_state {
    std::vector<double> running_mean;
    std::vector<double> running_var;

    bn_state() = default;
    explicit bn_state(int64_t channels) : running_mean(channels, 0.0), running_var(channels, 1.0) {}
    int64_t channels() const { return static_cast<int64_t>(running_mean.size()); }
};

constexpr double bn_epsilon = 1e-5;
constexpr double bn_momentum = 0.1;

class tape {
  public:
    // x:(B,Cin,L) w:(Cout,Cin,3) b:(Cout) -> (B,Cout,L); cross-correlation,
    // stride 1, zero padding 1
    tensor_ptr conv1d_k3(const tensor_ptr & x, const tensor_ptr & w, const tensor_ptr & b);

    // training mode normalizes per channel over batch*length with biased
    // variance and updates running stats (momentum 0.1); eval mode uses the
    // running stats and never mutates them
    tensor_ptr batchnorm1d(const tensor_ptr & x, const tensor_ptr & gamma, const tensor_ptr & beta,
                           bn_state & state, bool training);

    tensor_ptr relu(const tensor_ptr & x);

    // non-overlapping pairs, even length required; ties route the gradient to
    // the first element
    tensor_ptr maxpool1d_k2s2(const tensor_ptr & x);
    tensor_ptr avgpool1d_k2s2(const tensor_ptr & x);

    // x:(B,F) w:(O,F) b:(O) -> (B,O)
    tensor_ptr linear(const tensor_ptr & x, const tensor_ptr & w, const tensor_ptr & b);

    tensor_ptr flatten(const tensor_ptr & x);                        // (B,C,L) -> (B,C*L)
    tensor_ptr concat_cols(const std::vector<tensor_ptr> & parts);   // (B,Fi)... -> (B,sum Fi)
    tensor_ptr add(const tensor_ptr & a, const tensor_ptr & b);
    tensor_ptr sum(const tensor_ptr & x);                            // scalar

    // mean absolute error over all elements; d/dpred = sign(pred-target)/n
    // with sign(0) = 0
    tensor_ptr l1_loss(const tensor_ptr & pred, const tensor_ptr & target);

    // reverse replay from a scalar loss; gradients accumulate into .grad
    void backward(const tensor_ptr & loss);

    size_t recorded_ops() const { return steps_.size(); }

  private:
    std::vector<std::function<void()>> steps_;

    tensor_ptr make_result(std::vector<int64_t> shape, bool requires_grad);
    void record(std::function<void()> step) { steps_.push_back(std::move(step)); }
};

} // namespace salf::ad
