#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "leafnet/kernels.hpp"
#include "leafnet/tensor.hpp"

namespace leafnet {

enum class Mode { train, infer };

Tensor relu_forward(const Tensor& x);
// gate is 1 where x > 0; exactly-zero inputs gate to 0
Tensor relu_backward(const Tensor& x, const Tensor& dy);

// (N,K) logits -> row-stochastic probabilities, stable via max subtraction
Tensor softmax_forward(const Tensor& x);
Tensor softmax_backward(const Tensor& y, const Tensor& dy);

struct LossResult {
    double loss = 0.0;
    Tensor dlogits;  // fused softmax+CE gradient: (probs - targets)/N
};
LossResult cross_entropy(const Tensor& probs, const Tensor& targets_onehot);

Tensor global_avg_pool_forward(const Tensor& x);                      // (N,C,H,W)->(N,C)
Tensor global_avg_pool_backward(const Shape& x_shape, const Tensor& dy);

struct BatchNormCache {
    Tensor xhat;  // normalized input, same shape as x
    Tensor mean, var, inv_std;  // per channel
};
// x is (N,C,H,W) or (N,C); channel axis is 1. Train mode updates the
// running stats in place: running <- (1-momentum)*running + momentum*batch.
Tensor batchnorm_forward(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                         Tensor& run_mean, Tensor& run_var, bool& stats_ready,
                         double momentum, double eps, Mode mode, BatchNormCache* cache);
void batchnorm_backward(const Tensor& x, const Tensor& gamma, const BatchNormCache& cache,
                        const Tensor& dy, Tensor& dx, Tensor& dgamma, Tensor& dbeta);

Tensor dense_forward(const Tensor& x, const Tensor& w, const Tensor& b);
void dense_backward(const Tensor& x, const Tensor& w, const Tensor& dy, Tensor& dx,
                    Tensor& dw, Tensor& db);

// Inverted dropout: survivors scaled by 1/(1-p) in train mode, identity in
// infer mode. The mask (stored as the applied scale factor per element) is
// returned through `mask` so backward reuses it exactly.
Tensor dropout_forward(const Tensor& x, double p, Mode mode, uint64_t stream_seed,
                       Tensor* mask);
Tensor dropout_backward(const Tensor& mask, const Tensor& dy);

Tensor concat_forward(const std::vector<const Tensor*>& xs, size_t axis);
std::vector<Tensor> concat_backward(const std::vector<const Tensor*>& xs, size_t axis,
                                    const Tensor& dy);

// Depthwise kernel (C,kh,kw), pointwise (F,C), bias (F).
Tensor depthwise_sep_forward(const Tensor& x, const Tensor& wd, const Tensor& wp,
                             const Tensor& b, size_t stride, Padding pad,
                             Tensor* depthwise_out = nullptr);
void depthwise_sep_backward(const Tensor& x, const Tensor& wd, const Tensor& wp,
                            const Tensor& depthwise_out, const Tensor& dy, size_t stride,
                            Padding pad, Tensor& dx, Tensor& dwd, Tensor& dwp, Tensor& db);

enum class LayerKind {
    input, conv2d, depthwise_sep_conv, maxpool2d, global_avg_pool, batchnorm, dense,
    relu, softmax, dropout, flatten, concat
};

const char* layer_kind_name(LayerKind k);
LayerKind layer_kind_from_name(const std::string& s);

struct LayerHyper {
    size_t kernel_h = 0, kernel_w = 0, stride = 1;
    Padding padding = Padding::valid;
    size_t pool_h = 2, pool_w = 2, pool_stride = 2;
    double dropout_rate = 0.0;
    double bn_momentum = 0.1, bn_epsilon = 1e-5;
    size_t units = 0;         // dense output width
    size_t out_channels = 0;  // conv filter count
    size_t concat_axis = 1;
    Shape input_shape;        // input nodes only, without the batch axis
};

struct LayerNode {
    std::string name;
    LayerKind kind = LayerKind::input;
    LayerHyper hyper;
    std::vector<int> inputs;
    std::vector<Tensor> params;  // learnable, kind-specific
    std::vector<Tensor> state;   // batchnorm running mean/var
    bool stats_ready = false;
};

// Directed acyclic network; storage order is the topological order
// (enforced: a node may only reference earlier nodes).
class Graph {
public:
    int add(LayerNode node);
    void set_output(int id);
    int output() const { return output_; }

    size_t node_count() const { return nodes_.size(); }
    LayerNode& node(int id) { return nodes_[static_cast<size_t>(id)]; }
    const LayerNode& node(int id) const { return nodes_[static_cast<size_t>(id)]; }
    int find(const std::string& name) const;

    // Per-node output shape without the batch axis; also sizes and
    // initializes parameter tensors that are still empty.
    void finalize(uint64_t seed);
    const std::vector<Shape>& node_shapes() const { return shapes_; }

    Tensor forward(const std::map<std::string, Tensor>& inputs, Mode mode);
    void backward(const Tensor& d_output);
    // Starts backprop below the softmax output node with a gradient on the
    // logits (the fused softmax+CE path).
    void backward_from_logits(const Tensor& d_logits);

    struct Learnable {
        int node_id;
        size_t param_index;
        std::string name;
    };
    std::vector<Learnable> learnables() const;
    Tensor& param(const Learnable& l) { return nodes_[l.node_id].params[l.param_index]; }
    Tensor& grad(const Learnable& l) { return grads_[l.node_id][l.param_index]; }

    const Tensor& activation(int id) const;
    const Tensor& activation_grad(int id) const;
    bool has_forward_cache() const { return forward_done_; }

    size_t param_count() const;
    std::string manifest_json() const;

    // Validates the classification contract: exactly one softmax node and
    // it is the output.
    void validate_classifier() const;

    uint64_t dropout_seed = 0;
    uint64_t step = 0;  // advanced per train-mode forward; keys dropout masks

private:
    void check_id(int id) const;
    std::vector<LayerNode> nodes_;
    std::vector<Shape> shapes_;
    int output_ = -1;
    bool finalized_ = false;

    // forward/backward caches
    Mode mode_ = Mode::infer;
    bool forward_done_ = false;
    std::vector<Tensor> acts_;
    std::vector<Tensor> act_grads_;
    std::vector<std::vector<Tensor>> grads_;
    std::vector<Tensor> aux_;              // maxpool argmax / dropout mask / depthwise intermediate
    std::vector<BatchNormCache> bn_cache_;
};

// Glorot-uniform bound for a weight tensor, given fan-in and fan-out.
double glorot_bound(size_t fan_in, size_t fan_out);

}  // namespace leafnet
