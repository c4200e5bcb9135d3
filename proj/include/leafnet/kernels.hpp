#pragma once

#include "leafnet/tensor.hpp"

namespace leafnet {

enum class Padding { valid, same };

struct ConvDims {
    size_t h_out = 0, w_out = 0;
    size_t pad_top = 0, pad_left = 0, pad_bottom = 0, pad_right = 0;
};

// "same" keeps ceil(extent/stride) and puts the odd pad pixel on the
// bottom/right; "valid" pads nothing.
ConvDims conv_out_dims(size_t h, size_t w, size_t kh, size_t kw, size_t stride, Padding pad);

// x: (N,C,H,W), w: (F,C,kh,kw), b: (F) -> (N,F,H',W')
Tensor conv2d_forward(const Tensor& x, const Tensor& w, const Tensor& b, size_t stride,
                      Padding pad);
void conv2d_backward(const Tensor& x, const Tensor& w, const Tensor& dy, size_t stride,
                     Padding pad, Tensor& dx, Tensor& dw, Tensor& db);

// Records the winning flat spatial index (h*W+w) per output cell in argmax.
Tensor maxpool2d_forward(const Tensor& x, size_t wh, size_t ww, size_t stride,
                         Tensor* argmax = nullptr);
Tensor maxpool2d_backward(const Tensor& x, const Tensor& dy, const Tensor& argmax,
                          size_t wh, size_t ww, size_t stride);

// Serial single-loop-nest reference kernels. Kept apart from the OpenMP
// versions so tests can cross-check one against the other, and the
// benchmark can compare their throughput.
namespace ref {

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor conv2d_forward(const Tensor& x, const Tensor& w, const Tensor& b, size_t stride,
                      Padding pad);
Tensor maxpool2d_forward(const Tensor& x, size_t wh, size_t ww, size_t stride);

}  // namespace ref

}  // namespace leafnet
