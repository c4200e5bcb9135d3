#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "leafnet/tensor.hpp"

namespace leafnet {

enum class OptimizerVariant { sgd, adam, rmsprop, adagrad, nadam };

const char* optimizer_name(OptimizerVariant v);
OptimizerVariant optimizer_from_name(const std::string& s);

struct OptimizerConfig {
    OptimizerVariant variant = OptimizerVariant::adam;
    double lr = 0.001;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    double rho = 0.9;       // rmsprop decay
    double momentum = 0.0;  // sgd only
    double weight_decay = 0.0;
};

// Holds one (m, v) slot pair per parameter tensor. sgd uses m as the
// momentum buffer; adagrad/rmsprop use v as the accumulator.
class Optimizer {
public:
    explicit Optimizer(OptimizerConfig cfg) : cfg_(cfg) {}

    // params and grads must be index-aligned with identical shapes; slots
    // are created lazily on the first step.
    void step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads,
              double lr_t);

    const OptimizerConfig& config() const { return cfg_; }
    uint64_t steps_taken() const { return t_; }

    // checkpoint access
    std::vector<Tensor>& slot_m() { return m_; }
    std::vector<Tensor>& slot_v() { return v_; }
    void set_steps_taken(uint64_t t) { t_ = t; }

private:
    OptimizerConfig cfg_;
    uint64_t t_ = 0;
    std::vector<Tensor> m_, v_;
};

struct Schedule {
    enum class Kind { constant, cosine_annealing };
    Kind kind = Kind::constant;
    double eta_max = 0.001;
    double eta_min = 0.0;
    size_t period = 1;  // total epochs of one annealing period

    // eta(t) = eta_min + (eta_max - eta_min) * (1 + cos(pi t / T)) / 2;
    // t past the period clamps to eta_min.
    double lr_at(size_t t) const;
};

}  // namespace leafnet
