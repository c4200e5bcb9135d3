#include "leafnet/kernels.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace leafnet {
namespace ref {

Tensor matmul(const Tensor& a, const Tensor& b) {
    const size_t m = a.extent(0), k = a.extent(1), n = b.extent(1);
    if (k != b.extent(0)) throw std::invalid_argument("ref::matmul: inner extents differ");
    Tensor c({m, n});
    for (size_t i = 0; i < m; ++i)
        for (size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (size_t t = 0; t < k; ++t) acc += a.at2(i, t) * b.at2(t, j);
            c.at2(i, j) = acc;
        }
    return c;
}

Tensor conv2d_forward(const Tensor& x, const Tensor& w, const Tensor& b, size_t stride,
                      Padding pad) {
    const size_t N = x.extent(0), C = x.extent(1), H = x.extent(2), W = x.extent(3);
    const size_t F = w.extent(0), kh = w.extent(2), kw = w.extent(3);
    ConvDims d = conv_out_dims(H, W, kh, kw, stride, pad);
    Tensor y({N, F, d.h_out, d.w_out});
    for (size_t n = 0; n < N; ++n)
        for (size_t f = 0; f < F; ++f)
            for (size_t oh = 0; oh < d.h_out; ++oh)
                for (size_t ow = 0; ow < d.w_out; ++ow) {
                    double acc = b[f];
                    for (size_t c = 0; c < C; ++c)
                        for (size_t m = 0; m < kh; ++m)
                            for (size_t q = 0; q < kw; ++q) {
                                const long long ih = static_cast<long long>(oh * stride + m) -
                                                     static_cast<long long>(d.pad_top);
                                const long long iw = static_cast<long long>(ow * stride + q) -
                                                     static_cast<long long>(d.pad_left);
                                if (ih < 0 || ih >= static_cast<long long>(H)) continue;
                                if (iw < 0 || iw >= static_cast<long long>(W)) continue;
                                acc += x.at4(n, c, ih, iw) * w.at4(f, c, m, q);
                            }
                    y.at4(n, f, oh, ow) = acc;
                }
    return y;
}

Tensor maxpool2d_forward(const Tensor& x, size_t wh, size_t ww, size_t stride) {
    const size_t N = x.extent(0), C = x.extent(1), H = x.extent(2), W = x.extent(3);
    const size_t Ho = (H - wh) / stride + 1;
    const size_t Wo = (W - ww) / stride + 1;
    Tensor y({N, C, Ho, Wo});
    for (size_t n = 0; n < N; ++n)
        for (size_t c = 0; c < C; ++c)
            for (size_t oh = 0; oh < Ho; ++oh)
                for (size_t ow = 0; ow < Wo; ++ow) {
                    double best = -std::numeric_limits<double>::infinity();
                    for (size_t m = 0; m < wh; ++m)
                        for (size_t q = 0; q < ww; ++q)
                            best = std::max(best, x.at4(n, c, oh * stride + m, ow * stride + q));
                    y.at4(n, c, oh, ow) = best;
                }
    return y;
}

}  // namespace ref
}  // namespace leafnet
