#pragma once

// Central finite-difference gradient checking shared by the layer tests and
// the acceptance runner.

#include <cmath>
#include <functional>
#include <vector>

#include "leafnet/rng.hpp"
#include "leafnet/tensor.hpp"

namespace fdcheck {

inline leafnet::Tensor random_tensor(leafnet::Shape shape, leafnet::Rng& rng,
                                     double lo = -1.0, double hi = 1.0) {
    leafnet::Tensor t(std::move(shape));
    for (size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
    return t;
}

// Relative error between an analytic gradient and the central difference
// (f(x+h)-f(x-h))/2h, maximized over all elements of all checked tensors.
// `loss` must be a pure function of the tensors passed by pointer.
inline double max_rel_error(const std::function<double()>& loss,
                            const std::vector<leafnet::Tensor*>& inputs,
                            const std::vector<const leafnet::Tensor*>& analytic,
                            double h = 1e-4) {
    double worst = 0.0;
    for (size_t t = 0; t < inputs.size(); ++t) {
        leafnet::Tensor& x = *inputs[t];
        const leafnet::Tensor& g = *analytic[t];
        for (size_t i = 0; i < x.size(); ++i) {
            const double keep = x[i];
            x[i] = keep + h;
            const double fp = loss();
            x[i] = keep - h;
            const double fm = loss();
            x[i] = keep;
            const double fd = (fp - fm) / (2 * h);
            const double denom = std::max({std::fabs(fd), std::fabs(g[i]), 1e-8});
            worst = std::max(worst, std::fabs(fd - g[i]) / denom);
        }
    }
    return worst;
}

// Weighted-sum scalarization: loss = sum(w .* y). The gradient of this loss
// w.r.t. y is exactly w, which we feed into the layer's backward.
inline double weighted_sum(const leafnet::Tensor& y, const leafnet::Tensor& w) {
    double acc = 0.0;
    for (size_t i = 0; i < y.size(); ++i) acc += y[i] * w[i];
    return acc;
}

}  // namespace fdcheck
