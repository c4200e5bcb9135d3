#include "leafnet/kernels.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>
#include <string>

namespace leafnet {

ConvDims conv_out_dims(size_t h, size_t w, size_t kh, size_t kw, size_t stride, Padding pad) {
    if (stride == 0) throw std::invalid_argument("conv: stride must be >= 1");
    ConvDims d;
    if (pad == Padding::valid) {
        if (kh > h || kw > w)
            throw std::invalid_argument("conv: kernel larger than input with valid padding");
        d.h_out = (h - kh) / stride + 1;
        d.w_out = (w - kw) / stride + 1;
    } else {
        d.h_out = (h + stride - 1) / stride;
        d.w_out = (w + stride - 1) / stride;
        size_t pad_h = (d.h_out - 1) * stride + kh > h ? (d.h_out - 1) * stride + kh - h : 0;
        size_t pad_w = (d.w_out - 1) * stride + kw > w ? (d.w_out - 1) * stride + kw - w : 0;
        d.pad_top = pad_h / 2;
        d.pad_bottom = pad_h - d.pad_top;
        d.pad_left = pad_w / 2;
        d.pad_right = pad_w - d.pad_left;
    }
    return d;
}

static void check_conv_args(const Tensor& x, const Tensor& w, const Tensor& b) {
    if (x.rank() != 4) throw std::invalid_argument("conv: input must be (N,C,H,W)");
    if (w.rank() != 4) throw std::invalid_argument("conv: kernel must be (F,C,kh,kw)");
    if (w.extent(1) != x.extent(1))
        throw std::invalid_argument("conv: kernel channels " + std::to_string(w.extent(1)) +
                                    " != input channels " + std::to_string(x.extent(1)));
    if (b.size() != w.extent(0)) throw std::invalid_argument("conv: bias size != filter count");
}

Tensor conv2d_forward(const Tensor& x, const Tensor& w, const Tensor& b, size_t stride,
                      Padding pad) {
    check_conv_args(x, w, b);
    const size_t N = x.extent(0), C = x.extent(1), H = x.extent(2), W = x.extent(3);
    const size_t F = w.extent(0), kh = w.extent(2), kw = w.extent(3);
    ConvDims d = conv_out_dims(H, W, kh, kw, stride, pad);
    Tensor y({N, F, d.h_out, d.w_out});
    const long long nf = static_cast<long long>(N * F);
#pragma omp parallel for schedule(static)
    for (long long t = 0; t < nf; ++t) {
        const size_t n = static_cast<size_t>(t) / F;
        const size_t f = static_cast<size_t>(t) % F;
        for (size_t oh = 0; oh < d.h_out; ++oh)
            for (size_t ow = 0; ow < d.w_out; ++ow) {
                double acc = b[f];
                for (size_t c = 0; c < C; ++c)
                    for (size_t m = 0; m < kh; ++m) {
                        const long long ih =
                            static_cast<long long>(oh * stride + m) - static_cast<long long>(d.pad_top);
                        if (ih < 0 || ih >= static_cast<long long>(H)) continue;
                        for (size_t q = 0; q < kw; ++q) {
                            const long long iw = static_cast<long long>(ow * stride + q) -
                                                 static_cast<long long>(d.pad_left);
                            if (iw < 0 || iw >= static_cast<long long>(W)) continue;
                            acc += x.at4(n, c, ih, iw) * w.at4(f, c, m, q);
                        }
                    }
                y.at4(n, f, oh, ow) = acc;
            }
    }
    return y;
}

void conv2d_backward(const Tensor& x, const Tensor& w, const Tensor& dy, size_t stride,
                     Padding pad, Tensor& dx, Tensor& dw, Tensor& db) {
    if (x.rank() != 4 || w.rank() != 4 || w.extent(1) != x.extent(1))
        throw std::invalid_argument("conv backward: bad operand shapes");
    const size_t N = x.extent(0), C = x.extent(1), H = x.extent(2), W = x.extent(3);
    const size_t F = w.extent(0), kh = w.extent(2), kw = w.extent(3);
    ConvDims d = conv_out_dims(H, W, kh, kw, stride, pad);
    dx = Tensor(x.shape());
    dw = Tensor(w.shape());
    db = Tensor({F});

#pragma omp parallel for schedule(static)
    for (long long f = 0; f < static_cast<long long>(F); ++f) {
        for (size_t n = 0; n < N; ++n)
            for (size_t oh = 0; oh < d.h_out; ++oh)
                for (size_t ow = 0; ow < d.w_out; ++ow) {
                    const double g = dy.at4(n, f, oh, ow);
                    db[f] += g;
                    for (size_t c = 0; c < C; ++c)
                        for (size_t m = 0; m < kh; ++m) {
                            const long long ih = static_cast<long long>(oh * stride + m) -
                                                 static_cast<long long>(d.pad_top);
                            if (ih < 0 || ih >= static_cast<long long>(H)) continue;
                            for (size_t q = 0; q < kw; ++q) {
                                const long long iw = static_cast<long long>(ow * stride + q) -
                                                     static_cast<long long>(d.pad_left);
                                if (iw < 0 || iw >= static_cast<long long>(W)) continue;
                                dw.at4(f, c, m, q) += x.at4(n, c, ih, iw) * g;
                            }
                        }
                }
    }

#pragma omp parallel for schedule(static)
    for (long long n = 0; n < static_cast<long long>(N); ++n) {
        for (size_t f = 0; f < F; ++f)
            for (size_t oh = 0; oh < d.h_out; ++oh)
                for (size_t ow = 0; ow < d.w_out; ++ow) {
                    const double g = dy.at4(n, f, oh, ow);
                    for (size_t c = 0; c < C; ++c)
                        for (size_t m = 0; m < kh; ++m) {
                            const long long ih = static_cast<long long>(oh * stride + m) -
                                                 static_cast<long long>(d.pad_top);
                            if (ih < 0 || ih >= static_cast<long long>(H)) continue;
                            for (size_t q = 0; q < kw; ++q) {
                                const long long iw = static_cast<long long>(ow * stride + q) -
                                                     static_cast<long long>(d.pad_left);
                                if (iw < 0 || iw >= static_cast<long long>(W)) continue;
                                dx.at4(n, c, ih, iw) += w.at4(f, c, m, q) * g;
                            }
                        }
                }
    }
}

Tensor maxpool2d_forward(const Tensor& x, size_t wh, size_t ww, size_t stride,
                         Tensor* argmax) {
    if (x.rank() != 4) throw std::invalid_argument("maxpool: input must be (N,C,H,W)");
    const size_t N = x.extent(0), C = x.extent(1), H = x.extent(2), W = x.extent(3);
    if (wh > H || ww > W) throw std::invalid_argument("maxpool: window exceeds input");
    if (stride == 0) throw std::invalid_argument("maxpool: stride must be >= 1");
    const size_t Ho = (H - wh) / stride + 1;
    const size_t Wo = (W - ww) / stride + 1;
    Tensor y({N, C, Ho, Wo});
    if (argmax) *argmax = Tensor({N, C, Ho, Wo});
    const long long nc = static_cast<long long>(N * C);
#pragma omp parallel for schedule(static)
    for (long long t = 0; t < nc; ++t) {
        const size_t n = static_cast<size_t>(t) / C;
        const size_t c = static_cast<size_t>(t) % C;
        for (size_t oh = 0; oh < Ho; ++oh)
            for (size_t ow = 0; ow < Wo; ++ow) {
                double best = -std::numeric_limits<double>::infinity();
                size_t best_idx = 0;
                for (size_t m = 0; m < wh; ++m)
                    for (size_t q = 0; q < ww; ++q) {
                        const size_t ih = oh * stride + m, iw = ow * stride + q;
                        const double v = x.at4(n, c, ih, iw);
                        if (v > best) {  // strict: ties keep the lowest flat index
                            best = v;
                            best_idx = ih * W + iw;
                        }
                    }
                y.at4(n, c, oh, ow) = best;
                if (argmax) argmax->at4(n, c, oh, ow) = static_cast<double>(best_idx);
            }
    }
    return y;
}

Tensor maxpool2d_backward(const Tensor& x, const Tensor& dy, const Tensor& argmax,
                          size_t wh, size_t ww, size_t stride) {
    (void)wh; (void)ww; (void)stride;
    const size_t N = x.extent(0), C = x.extent(1), W = x.extent(3);
    Tensor dx(x.shape());
    const size_t Ho = dy.extent(2), Wo = dy.extent(3);
    // windows may overlap, so accumulate serially per (n,c) plane
    const long long nc = static_cast<long long>(N * C);
#pragma omp parallel for schedule(static)
    for (long long t = 0; t < nc; ++t) {
        const size_t n = static_cast<size_t>(t) / C;
        const size_t c = static_cast<size_t>(t) % C;
        for (size_t oh = 0; oh < Ho; ++oh)
            for (size_t ow = 0; ow < Wo; ++ow) {
                const size_t flat = static_cast<size_t>(argmax.at4(n, c, oh, ow));
                dx.at4(n, c, flat / W, flat % W) += dy.at4(n, c, oh, ow);
            }
    }
    return dx;
}


}  // namespace leafnet
