#pragma once

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

namespace leafnet {

using Shape = std::vector<size_t>;

size_t shape_size(const Shape& shape);

// Dense N-dimensional array, row-major, 64-bit floats in memory.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> values);

    static Tensor zeros(Shape shape) { return Tensor(std::move(shape), 0.0); }
    static Tensor full(Shape shape, double v) { return Tensor(std::move(shape), v); }

    const Shape& shape() const { return shape_; }
    size_t rank() const { return shape_.size(); }
    size_t extent(size_t axis) const { return shape_[axis]; }
    size_t size() const { return data_.size(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    double& operator[](size_t flat) { return data_[flat]; }
    double operator[](size_t flat) const { return data_[flat]; }

    size_t flat_index(const std::vector<size_t>& idx) const;
    double& at(const std::vector<size_t>& idx) { return data_[flat_index(idx)]; }
    double at(const std::vector<size_t>& idx) const { return data_[flat_index(idx)]; }

    // unchecked 4-d accessors, the hot path in conv kernels
    double& at4(size_t n, size_t c, size_t h, size_t w) {
        return data_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
    }
    double at4(size_t n, size_t c, size_t h, size_t w) const {
        return data_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
    }
    double& at2(size_t i, size_t j) { return data_[i * shape_[1] + j]; }
    double at2(size_t i, size_t j) const { return data_[i * shape_[1] + j]; }
    double& at3(size_t c, size_t h, size_t w) {
        return data_[(c * shape_[1] + h) * shape_[2] + w];
    }
    double at3(size_t c, size_t h, size_t w) const {
        return data_[(c * shape_[1] + h) * shape_[2] + w];
    }

    Tensor reshaped(Shape new_shape) const;

    const std::string& name() const { return name_; }
    void set_name(std::string n) { name_ = std::move(n); }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

private:
    Shape shape_;
    std::vector<double> data_;
    std::string name_;
};

enum class EwOp { add, sub, mul, div, max };
enum class ReduceOp { sum, mean, max, argmax };

Tensor elementwise(const Tensor& a, const Tensor& b, EwOp op);
Tensor elementwise(const Tensor& a, double b, EwOp op);

Tensor matmul(const Tensor& a, const Tensor& b);

// Reduced axes are removed from the shape. mean = sum/count; argmax ties
// resolve to the lowest index and is restricted to a single axis or to
// all axes (flat index).
Tensor reduce(const Tensor& a, const std::vector<size_t>& axes, ReduceOp op);

}  // namespace leafnet
