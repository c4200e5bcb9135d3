#include "leafnet/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace leafnet {

size_t shape_size(const Shape& shape) {
    size_t n = 1;
    for (size_t e : shape) n *= e;
    return n;
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), data_(std::move(values)) {
    if (data_.size() != shape_size(shape_))
        throw std::invalid_argument("Tensor: value count " + std::to_string(data_.size()) +
                                    " does not match shape size " +
                                    std::to_string(shape_size(shape_)));
}

size_t Tensor::flat_index(const std::vector<size_t>& idx) const {
    if (idx.size() != shape_.size())
        throw std::invalid_argument("Tensor::at: index rank mismatch");
    size_t flat = 0;
    for (size_t k = 0; k < idx.size(); ++k) {
        if (idx[k] >= shape_[k]) throw std::out_of_range("Tensor::at: index out of range");
        flat = flat * shape_[k] + idx[k];
    }
    return flat;
}

Tensor Tensor::reshaped(Shape new_shape) const {
    if (shape_size(new_shape) != data_.size())
        throw std::invalid_argument("Tensor::reshaped: size mismatch");
    Tensor out;
    out.shape_ = std::move(new_shape);
    out.data_ = data_;
    return out;
}

static double apply_ew(double x, double y, EwOp op) {
    switch (op) {
        case EwOp::add: return x + y;
        case EwOp::sub: return x - y;
        case EwOp::mul: return x * y;
        case EwOp::div:
            if (y == 0.0) throw std::domain_error("elementwise: division by zero");
            return x / y;
        case EwOp::max: return std::max(x, y);
    }
    throw std::logic_error("elementwise: bad op");
}

Tensor elementwise(const Tensor& a, const Tensor& b, EwOp op) {
    if (!a.same_shape(b))
        throw std::invalid_argument("elementwise: shape mismatch (no general broadcasting)");
    Tensor out(a.shape());
    for (size_t i = 0; i < a.size(); ++i) out[i] = apply_ew(a[i], b[i], op);
    return out;
}

Tensor elementwise(const Tensor& a, double b, EwOp op) {
    Tensor out(a.shape());
    for (size_t i = 0; i < a.size(); ++i) out[i] = apply_ew(a[i], b, op);
    return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2)
        throw std::invalid_argument("matmul: operands must be rank 2");
    if (a.extent(1) != b.extent(0))
        throw std::invalid_argument("matmul: inner extents differ");
    const size_t m = a.extent(0), k = a.extent(1), n = b.extent(1);
    Tensor c({m, n});
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < static_cast<long long>(m); ++i) {
        for (size_t t = 0; t < k; ++t) {
            const double av = a.at2(i, t);
            for (size_t j = 0; j < n; ++j) c.at2(i, j) += av * b.at2(t, j);
        }
    }
    return c;
}

Tensor reduce(const Tensor& a, const std::vector<size_t>& axes, ReduceOp op) {
    for (size_t ax : axes)
        if (ax >= a.rank()) throw std::invalid_argument("reduce: axis out of range");
    std::vector<bool> reduced(a.rank(), false);
    for (size_t ax : axes) reduced[ax] = true;

    Shape out_shape;
    size_t red_count = 1;
    for (size_t k = 0; k < a.rank(); ++k) {
        if (reduced[k]) red_count *= a.extent(k);
        else out_shape.push_back(a.extent(k));
    }
    if (red_count == 0 && (op == ReduceOp::max || op == ReduceOp::argmax))
        throw std::invalid_argument("reduce: empty extent for max/argmax");
    if (op == ReduceOp::argmax && axes.size() != 1 && axes.size() != a.rank())
        throw std::invalid_argument("reduce: argmax needs a single axis or all axes");

    const bool maxlike = (op == ReduceOp::max || op == ReduceOp::argmax);
    Tensor out(out_shape, maxlike ? -std::numeric_limits<double>::infinity() : 0.0);
    Tensor arg(out_shape, 0.0);
    std::vector<bool> seen(out.size(), false);

    std::vector<size_t> idx(a.rank(), 0);
    for (size_t flat = 0; flat < a.size(); ++flat) {
        size_t oflat = 0, dim = 0;
        size_t rpos = 0;  // position within the reduced subspace, row-major
        for (size_t k = 0; k < a.rank(); ++k) {
            if (reduced[k]) rpos = rpos * a.extent(k) + idx[k];
            else { oflat = oflat * out_shape[dim] + idx[k]; ++dim; }
        }
        double v = a[flat];
        switch (op) {
            case ReduceOp::sum:
            case ReduceOp::mean:
                out[oflat] += v;
                break;
            case ReduceOp::max:
                if (!seen[oflat] || v > out[oflat]) { out[oflat] = v; seen[oflat] = true; }
                break;
            case ReduceOp::argmax:
                if (!seen[oflat] || v > out[oflat]) {
                    out[oflat] = v;
                    arg[oflat] = static_cast<double>(rpos);
                    seen[oflat] = true;
                }
                break;
        }
        // advance multi-index
        for (size_t k = a.rank(); k-- > 0;) {
            if (++idx[k] < a.extent(k)) break;
            idx[k] = 0;
        }
    }
    if (op == ReduceOp::mean) {
        if (red_count == 0) throw std::invalid_argument("reduce: mean over empty extent");
        for (size_t i = 0; i < out.size(); ++i) out[i] /= static_cast<double>(red_count);
    }
    return op == ReduceOp::argmax ? arg : out;
}

}  // namespace leafnet
