#include "leafnet/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace leafnet {

const char* optimizer_name(OptimizerVariant v) {
    switch (v) {
        case OptimizerVariant::sgd: return "sgd";
        case OptimizerVariant::adam: return "adam";
        case OptimizerVariant::rmsprop: return "rmsprop";
        case OptimizerVariant::adagrad: return "adagrad";
        case OptimizerVariant::nadam: return "nadam";
    }
    return "?";
}

OptimizerVariant optimizer_from_name(const std::string& s) {
    if (s == "sgd") return OptimizerVariant::sgd;
    if (s == "adam") return OptimizerVariant::adam;
    if (s == "rmsprop") return OptimizerVariant::rmsprop;
    if (s == "adagrad") return OptimizerVariant::adagrad;
    if (s == "nadam") return OptimizerVariant::nadam;
    throw std::invalid_argument("unknown optimizer: " + s);
}

void Optimizer::step(const std::vector<Tensor*>& params,
                     const std::vector<const Tensor*>& grads, double lr_t) {
    if (lr_t <= 0.0) throw std::invalid_argument("optimizer: lr must be > 0");
    if (params.size() != grads.size())
        throw std::invalid_argument("optimizer: params/grads count mismatch");
    if (m_.empty()) {
        for (const Tensor* p : params) {
            m_.emplace_back(p->shape());
            v_.emplace_back(p->shape());
        }
    }
    if (m_.size() != params.size())
        throw std::invalid_argument("optimizer: slot count mismatch");

    ++t_;
    const double t = static_cast<double>(t_);
    const double lam = cfg_.weight_decay;

    for (size_t k = 0; k < params.size(); ++k) {
        Tensor& p = *params[k];
        const Tensor& g = *grads[k];
        if (!p.same_shape(g) || !p.same_shape(m_[k]))
            throw std::invalid_argument("optimizer: shape mismatch for parameter " +
                                        std::to_string(k));
        Tensor& m = m_[k];
        Tensor& v = v_[k];
        switch (cfg_.variant) {
            case OptimizerVariant::sgd:
                for (size_t i = 0; i < p.size(); ++i) {
                    const double gi = g[i] + lam * p[i];
                    if (cfg_.momentum != 0.0) {
                        m[i] = cfg_.momentum * m[i] + gi;
                        p[i] -= lr_t * m[i];
                    } else {
                        p[i] -= lr_t * gi;
                    }
                }
                break;
            case OptimizerVariant::adagrad:
                for (size_t i = 0; i < p.size(); ++i) {
                    v[i] += g[i] * g[i];
                    p[i] -= lr_t * g[i] / (std::sqrt(v[i]) + cfg_.eps);
                    p[i] -= lr_t * lam * p[i];
                }
                break;
            case OptimizerVariant::rmsprop:
                for (size_t i = 0; i < p.size(); ++i) {
                    v[i] = cfg_.rho * v[i] + (1.0 - cfg_.rho) * g[i] * g[i];
                    p[i] -= lr_t * g[i] / (std::sqrt(v[i]) + cfg_.eps);
                    p[i] -= lr_t * lam * p[i];
                }
                break;
            case OptimizerVariant::adam: {
                const double bc1 = 1.0 - std::pow(cfg_.beta1, t);
                const double bc2 = 1.0 - std::pow(cfg_.beta2, t);
                for (size_t i = 0; i < p.size(); ++i) {
                    m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
                    v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
                    const double mhat = m[i] / bc1;
                    const double vhat = v[i] / bc2;
                    p[i] -= lr_t * mhat / (std::sqrt(vhat) + cfg_.eps);
                    p[i] -= lr_t * lam * p[i];
                }
                break;
            }
            case OptimizerVariant::nadam: {
                // Nesterov lookahead on the first moment (Dozat 2016)
                const double bc1 = 1.0 - std::pow(cfg_.beta1, t);
                const double bc1_next = 1.0 - std::pow(cfg_.beta1, t + 1.0);
                const double bc2 = 1.0 - std::pow(cfg_.beta2, t);
                for (size_t i = 0; i < p.size(); ++i) {
                    m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
                    v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
                    const double mhat =
                        cfg_.beta1 * m[i] / bc1_next + (1.0 - cfg_.beta1) * g[i] / bc1;
                    const double vhat = v[i] / bc2;
                    p[i] -= lr_t * mhat / (std::sqrt(vhat) + cfg_.eps);
                    p[i] -= lr_t * lam * p[i];
                }
                break;
            }
        }
    }
}

double Schedule::lr_at(size_t t) const {
    if (kind == Kind::constant) return eta_max;
    if (period < 1) throw std::invalid_argument("schedule: period must be >= 1");
    if (t >= period) return eta_min;  // past the period: clamp
    const double phase = M_PI * static_cast<double>(t) / static_cast<double>(period);
    return eta_min + 0.5 * (eta_max - eta_min) * (1.0 + std::cos(phase));
}

}  // namespace leafnet
