#include "leafnet/layers.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "leafnet/rng.hpp"

namespace leafnet {

Tensor relu_forward(const Tensor& x) {
    Tensor y(x.shape());
    for (size_t i = 0; i < x.size(); ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
    return y;
}

Tensor relu_backward(const Tensor& x, const Tensor& dy) {
    Tensor dx(x.shape());
    for (size_t i = 0; i < x.size(); ++i) dx[i] = x[i] > 0.0 ? dy[i] : 0.0;
    return dx;
}

Tensor softmax_forward(const Tensor& x) {
    if (x.rank() != 2) throw std::invalid_argument("softmax: input must be (N,K)");
    const size_t n = x.extent(0), k = x.extent(1);
    if (k < 1) throw std::invalid_argument("softmax: K must be >= 1");
    for (size_t i = 0; i < x.size(); ++i)
        if (!std::isfinite(x[i])) throw std::domain_error("softmax: non-finite logit");
    Tensor y(x.shape());
    for (size_t i = 0; i < n; ++i) {
        double mx = x.at2(i, 0);
        for (size_t j = 1; j < k; ++j) mx = std::max(mx, x.at2(i, j));
        double sum = 0.0;
        for (size_t j = 0; j < k; ++j) {
            y.at2(i, j) = std::exp(x.at2(i, j) - mx);
            sum += y.at2(i, j);
        }
        for (size_t j = 0; j < k; ++j) y.at2(i, j) /= sum;
    }
    return y;
}

Tensor softmax_backward(const Tensor& y, const Tensor& dy) {
    const size_t n = y.extent(0), k = y.extent(1);
    Tensor dx(y.shape());
    for (size_t i = 0; i < n; ++i) {
        double dot = 0.0;
        for (size_t j = 0; j < k; ++j) dot += dy.at2(i, j) * y.at2(i, j);
        for (size_t j = 0; j < k; ++j) dx.at2(i, j) = y.at2(i, j) * (dy.at2(i, j) - dot);
    }
    return dx;
}

LossResult cross_entropy(const Tensor& probs, const Tensor& targets_onehot) {
    if (!probs.same_shape(targets_onehot))
        throw std::invalid_argument("cross_entropy: shape mismatch");
    const size_t n = probs.extent(0), k = probs.extent(1);
    constexpr double eps_clip = 1e-12;
    LossResult r;
    r.dlogits = Tensor(probs.shape());
    for (size_t i = 0; i < n; ++i) {
        size_t target = k;
        for (size_t j = 0; j < k; ++j) {
            if (targets_onehot.at2(i, j) == 1.0) target = j;
            r.dlogits.at2(i, j) = (probs.at2(i, j) - targets_onehot.at2(i, j)) / double(n);
        }
        if (target >= k) throw std::invalid_argument("cross_entropy: target row is not one-hot");
        r.loss -= std::log(probs.at2(i, target) + eps_clip);
    }
    r.loss /= double(n);
    return r;
}

Tensor global_avg_pool_forward(const Tensor& x) {
    if (x.rank() != 4) throw std::invalid_argument("global_avg_pool: input must be (N,C,H,W)");
    const size_t n = x.extent(0), c = x.extent(1), h = x.extent(2), w = x.extent(3);
    if (h * w == 0) throw std::invalid_argument("global_avg_pool: empty spatial extent");
    Tensor y({n, c});
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < c; ++j) {
            double acc = 0.0;
            for (size_t p = 0; p < h; ++p)
                for (size_t q = 0; q < w; ++q) acc += x.at4(i, j, p, q);
            y.at2(i, j) = acc / double(h * w);
        }
    return y;
}

Tensor global_avg_pool_backward(const Shape& x_shape, const Tensor& dy) {
    const size_t n = x_shape[0], c = x_shape[1], h = x_shape[2], w = x_shape[3];
    Tensor dx(x_shape);
    const double inv = 1.0 / double(h * w);
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < c; ++j) {
            const double g = dy.at2(i, j) * inv;
            for (size_t p = 0; p < h; ++p)
                for (size_t q = 0; q < w; ++q) dx.at4(i, j, p, q) = g;
        }
    return dx;
}

// iterate per channel over all (batch, spatial) positions
template <typename F>
static void bn_for_each(const Tensor& x, size_t c, F&& f) {
    const size_t n = x.extent(0);
    if (x.rank() == 2) {
        for (size_t i = 0; i < n; ++i) f(i * x.extent(1) + c);
    } else {
        const size_t h = x.extent(2), w = x.extent(3);
        for (size_t i = 0; i < n; ++i)
            for (size_t p = 0; p < h; ++p)
                for (size_t q = 0; q < w; ++q)
                    f(((i * x.extent(1) + c) * h + p) * w + q);
    }
}

Tensor batchnorm_forward(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                         Tensor& run_mean, Tensor& run_var, bool& stats_ready,
                         double momentum, double eps, Mode mode, BatchNormCache* cache) {
    if (x.rank() != 2 && x.rank() != 4)
        throw std::invalid_argument("batchnorm: input must be (N,C) or (N,C,H,W)");
    const size_t c = x.extent(1);
    if (gamma.size() != c || beta.size() != c)
        throw std::invalid_argument("batchnorm: gamma/beta size mismatch");
    const size_t per_channel = x.size() / c;
    if (mode == Mode::train && per_channel == 0)
        throw std::invalid_argument("batchnorm: empty batch in train mode");
    if (mode == Mode::infer && !stats_ready)
        throw std::runtime_error("batchnorm: infer before any statistics recorded");

    Tensor y(x.shape());
    Tensor mean({c}), var({c}), inv_std({c});
    if (mode == Mode::train) {
        for (size_t j = 0; j < c; ++j) {
            double m = 0.0;
            bn_for_each(x, j, [&](size_t i) { m += x[i]; });
            m /= double(per_channel);
            double v = 0.0;
            bn_for_each(x, j, [&](size_t i) { v += (x[i] - m) * (x[i] - m); });
            v /= double(per_channel);
            mean[j] = m;
            var[j] = v;
            run_mean[j] = (1.0 - momentum) * run_mean[j] + momentum * m;
            run_var[j] = (1.0 - momentum) * run_var[j] + momentum * v;
        }
        stats_ready = true;
    } else {
        mean = run_mean;
        var = run_var;
    }
    Tensor xhat(x.shape());
    for (size_t j = 0; j < c; ++j) {
        inv_std[j] = 1.0 / std::sqrt(var[j] + eps);
        bn_for_each(x, j, [&](size_t i) {
            xhat[i] = (x[i] - mean[j]) * inv_std[j];
            y[i] = gamma[j] * xhat[i] + beta[j];
        });
    }
    if (cache) {
        cache->xhat = std::move(xhat);
        cache->mean = std::move(mean);
        cache->var = std::move(var);
        cache->inv_std = std::move(inv_std);
    }
    return y;
}

void batchnorm_backward(const Tensor& x, const Tensor& gamma, const BatchNormCache& cache,
                        const Tensor& dy, Tensor& dx, Tensor& dgamma, Tensor& dbeta) {
    const size_t c = x.extent(1);
    const size_t m = x.size() / c;
    dx = Tensor(x.shape());
    dgamma = Tensor({c});
    dbeta = Tensor({c});
    for (size_t j = 0; j < c; ++j) {
        double sum_dy = 0.0, sum_dy_xhat = 0.0;
        bn_for_each(x, j, [&](size_t i) {
            sum_dy += dy[i];
            sum_dy_xhat += dy[i] * cache.xhat[i];
        });
        dgamma[j] = sum_dy_xhat;
        dbeta[j] = sum_dy;
        const double scale = gamma[j] * cache.inv_std[j];
        bn_for_each(x, j, [&](size_t i) {
            dx[i] = scale * (dy[i] - sum_dy / double(m) -
                             cache.xhat[i] * sum_dy_xhat / double(m));
        });
    }
}

Tensor dense_forward(const Tensor& x, const Tensor& w, const Tensor& b) {
    if (x.rank() != 2) throw std::invalid_argument("dense: input must be (N,d_in)");
    if (x.extent(1) != w.extent(0))
        throw std::invalid_argument("dense: input width " + std::to_string(x.extent(1)) +
                                    " != weight rows " + std::to_string(w.extent(0)));
    Tensor y = matmul(x, w);
    const size_t n = y.extent(0), d = y.extent(1);
    if (b.size() != d) throw std::invalid_argument("dense: bias size mismatch");
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < d; ++j) y.at2(i, j) += b[j];
    return y;
}

static Tensor transposed(const Tensor& a) {
    const size_t m = a.extent(0), n = a.extent(1);
    Tensor t({n, m});
    for (size_t i = 0; i < m; ++i)
        for (size_t j = 0; j < n; ++j) t.at2(j, i) = a.at2(i, j);
    return t;
}

void dense_backward(const Tensor& x, const Tensor& w, const Tensor& dy, Tensor& dx,
                    Tensor& dw, Tensor& db) {
    dw = matmul(transposed(x), dy);
    dx = matmul(dy, transposed(w));
    db = Tensor({dy.extent(1)});
    for (size_t i = 0; i < dy.extent(0); ++i)
        for (size_t j = 0; j < dy.extent(1); ++j) db[j] += dy.at2(i, j);
}

Tensor dropout_forward(const Tensor& x, double p, Mode mode, uint64_t stream_seed,
                       Tensor* mask) {
    if (p < 0.0 || p >= 1.0) throw std::invalid_argument("dropout: rate must be in [0,1)");
    if (mode == Mode::infer || p == 0.0) {
        if (mask) *mask = Tensor(x.shape(), 1.0);
        return x;
    }
    Rng rng(stream_seed);
    const double scale = 1.0 / (1.0 - p);
    Tensor m(x.shape());
    Tensor y(x.shape());
    for (size_t i = 0; i < x.size(); ++i) {
        m[i] = rng.bernoulli(p) ? 0.0 : scale;
        y[i] = x[i] * m[i];
    }
    if (mask) *mask = std::move(m);
    return y;
}

Tensor dropout_backward(const Tensor& mask, const Tensor& dy) {
    return elementwise(dy, mask, EwOp::mul);
}

Tensor concat_forward(const std::vector<const Tensor*>& xs, size_t axis) {
    if (xs.empty()) throw std::invalid_argument("concat: no inputs");
    const Tensor& first = *xs[0];
    if (axis >= first.rank()) throw std::invalid_argument("concat: axis out of range");
    size_t total = 0;
    for (const Tensor* t : xs) {
        if (t->rank() != first.rank())
            throw std::invalid_argument("concat: rank mismatch");
        for (size_t k = 0; k < first.rank(); ++k)
            if (k != axis && t->extent(k) != first.extent(k))
                throw std::invalid_argument("concat: off-axis extent mismatch");
        total += t->extent(axis);
    }
    Shape out_shape = first.shape();
    out_shape[axis] = total;
    Tensor y(out_shape);

    size_t outer = 1, inner = 1;
    for (size_t k = 0; k < axis; ++k) outer *= first.extent(k);
    for (size_t k = axis + 1; k < first.rank(); ++k) inner *= first.extent(k);

    size_t offset = 0;
    for (const Tensor* t : xs) {
        const size_t span = t->extent(axis) * inner;
        for (size_t o = 0; o < outer; ++o)
            for (size_t s = 0; s < span; ++s)
                y[o * total * inner + offset * inner + s] = (*t)[o * span + s];
        offset += t->extent(axis);
    }
    return y;
}

std::vector<Tensor> concat_backward(const std::vector<const Tensor*>& xs, size_t axis,
                                    const Tensor& dy) {
    const Tensor& first = *xs[0];
    size_t outer = 1, inner = 1;
    for (size_t k = 0; k < axis; ++k) outer *= first.extent(k);
    for (size_t k = axis + 1; k < first.rank(); ++k) inner *= first.extent(k);
    const size_t total = dy.extent(axis);

    std::vector<Tensor> dxs;
    size_t offset = 0;
    for (const Tensor* t : xs) {
        Tensor dx(t->shape());
        const size_t span = t->extent(axis) * inner;
        for (size_t o = 0; o < outer; ++o)
            for (size_t s = 0; s < span; ++s)
                dx[o * span + s] = dy[o * total * inner + offset * inner + s];
        offset += t->extent(axis);
        dxs.push_back(std::move(dx));
    }
    return dxs;
}

Tensor depthwise_sep_forward(const Tensor& x, const Tensor& wd, const Tensor& wp,
                             const Tensor& b, size_t stride, Padding pad,
                             Tensor* depthwise_out) {
    if (x.rank() != 4) throw std::invalid_argument("depthwise_sep: input must be (N,C,H,W)");
    if (wd.rank() != 3 || wd.extent(0) != x.extent(1))
        throw std::invalid_argument("depthwise_sep: depthwise kernel must be (C,kh,kw)");
    if (wp.rank() != 2 || wp.extent(1) != x.extent(1))
        throw std::invalid_argument("depthwise_sep: pointwise kernel must be (F,C)");
    const size_t N = x.extent(0), C = x.extent(1), H = x.extent(2), W = x.extent(3);
    const size_t kh = wd.extent(1), kw = wd.extent(2), F = wp.extent(0);
    ConvDims d = conv_out_dims(H, W, kh, kw, stride, pad);

    Tensor t({N, C, d.h_out, d.w_out});
    const long long nc = static_cast<long long>(N * C);
#pragma omp parallel for schedule(static)
    for (long long u = 0; u < nc; ++u) {
        const size_t n = static_cast<size_t>(u) / C;
        const size_t c = static_cast<size_t>(u) % C;
        for (size_t oh = 0; oh < d.h_out; ++oh)
            for (size_t ow = 0; ow < d.w_out; ++ow) {
                double acc = 0.0;
                for (size_t m = 0; m < kh; ++m) {
                    const long long ih =
                        static_cast<long long>(oh * stride + m) - static_cast<long long>(d.pad_top);
                    if (ih < 0 || ih >= static_cast<long long>(H)) continue;
                    for (size_t q = 0; q < kw; ++q) {
                        const long long iw = static_cast<long long>(ow * stride + q) -
                                             static_cast<long long>(d.pad_left);
                        if (iw < 0 || iw >= static_cast<long long>(W)) continue;
                        acc += x.at4(n, c, ih, iw) * wd.at3(c, m, q);
                    }
                }
                t.at4(n, c, oh, ow) = acc;
            }
    }

    Tensor y({N, F, d.h_out, d.w_out});
    const long long nf = static_cast<long long>(N * F);
#pragma omp parallel for schedule(static)
    for (long long u = 0; u < nf; ++u) {
        const size_t n = static_cast<size_t>(u) / F;
        const size_t f = static_cast<size_t>(u) % F;
        for (size_t oh = 0; oh < d.h_out; ++oh)
            for (size_t ow = 0; ow < d.w_out; ++ow) {
                double acc = b[f];
                for (size_t c = 0; c < C; ++c) acc += wp.at2(f, c) * t.at4(n, c, oh, ow);
                y.at4(n, f, oh, ow) = acc;
            }
    }
    if (depthwise_out) *depthwise_out = std::move(t);
    return y;
}

void depthwise_sep_backward(const Tensor& x, const Tensor& wd, const Tensor& wp,
                            const Tensor& depthwise_out, const Tensor& dy, size_t stride,
                            Padding pad, Tensor& dx, Tensor& dwd, Tensor& dwp, Tensor& db) {
    const size_t N = x.extent(0), C = x.extent(1), H = x.extent(2), W = x.extent(3);
    const size_t kh = wd.extent(1), kw = wd.extent(2), F = wp.extent(0);
    ConvDims d = conv_out_dims(H, W, kh, kw, stride, pad);
    const size_t Ho = d.h_out, Wo = d.w_out;

    // pointwise stage
    db = Tensor({F});
    dwp = Tensor(wp.shape());
    Tensor dt({N, C, Ho, Wo});
    for (size_t n = 0; n < N; ++n)
        for (size_t f = 0; f < F; ++f)
            for (size_t oh = 0; oh < Ho; ++oh)
                for (size_t ow = 0; ow < Wo; ++ow) {
                    const double g = dy.at4(n, f, oh, ow);
                    db[f] += g;
                    for (size_t c = 0; c < C; ++c) {
                        dwp.at2(f, c) += g * depthwise_out.at4(n, c, oh, ow);
                        dt.at4(n, c, oh, ow) += g * wp.at2(f, c);
                    }
                }

    // depthwise stage
    dx = Tensor(x.shape());
    dwd = Tensor(wd.shape());
    for (size_t n = 0; n < N; ++n)
        for (size_t c = 0; c < C; ++c)
            for (size_t oh = 0; oh < Ho; ++oh)
                for (size_t ow = 0; ow < Wo; ++ow) {
                    const double g = dt.at4(n, c, oh, ow);
                    for (size_t m = 0; m < kh; ++m) {
                        const long long ih = static_cast<long long>(oh * stride + m) -
                                             static_cast<long long>(d.pad_top);
                        if (ih < 0 || ih >= static_cast<long long>(H)) continue;
                        for (size_t q = 0; q < kw; ++q) {
                            const long long iw = static_cast<long long>(ow * stride + q) -
                                                 static_cast<long long>(d.pad_left);
                            if (iw < 0 || iw >= static_cast<long long>(W)) continue;
                            dwd.at3(c, m, q) += x.at4(n, c, ih, iw) * g;
                            dx.at4(n, c, ih, iw) += wd.at3(c, m, q) * g;
                        }
                    }
                }
}

double glorot_bound(size_t fan_in, size_t fan_out) {
    return std::sqrt(6.0 / double(fan_in + fan_out));
}

}  // namespace leafnet
