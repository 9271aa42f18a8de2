#include "dygenc/tensor.hpp"

#include <functional>
#include <numeric>

#include "dygenc/errors.hpp"

namespace dygenc {

namespace {
std::size_t product(const std::vector<std::size_t>& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}
} // namespace

Tensor::Tensor(std::vector<std::size_t> shape, real fill)
    : shape_(std::move(shape)), data_(product(shape_), fill) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<real> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != product(shape_)) {
        throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                         " does not match shape " + shape_str(shape_));
    }
}

std::size_t Tensor::rows() const noexcept {
    return shape_.size() == 2 ? shape_[0] : 1;
}

std::size_t Tensor::cols() const noexcept {
    if (shape_.empty()) return 1;
    return shape_.back();
}

real Tensor::item() const {
    if (data_.size() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape_));
    return data_[0];
}

void Tensor::fill(real v) {
    std::fill(data_.begin(), data_.end(), v);
}

std::string shape_str(const std::vector<std::size_t>& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += "x";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

} // namespace dygenc
