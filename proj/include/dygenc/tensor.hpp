#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace dygenc {

#ifdef DYGENC_FLOAT32
using real = float;
#else
using real = double;
#endif

// Dense row-major tensor. Rank 0, 1 and 2 are used throughout; a rank-1 tensor
// of length d behaves as a 1×d row where a matrix is expected.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> shape, real fill = real(0));
    Tensor(std::vector<std::size_t> shape, std::vector<real> data);

    static Tensor matrix(std::size_t rows, std::size_t cols, real fill = real(0)) {
        return Tensor({rows, cols}, fill);
    }
    static Tensor scalar(real v) { return Tensor({}, std::vector<real>{v}); }

    const std::vector<std::size_t>& shape() const noexcept { return shape_; }
    std::size_t ndim() const noexcept { return shape_.size(); }
    std::size_t size() const noexcept { return data_.size(); }
    std::size_t rows() const noexcept;
    std::size_t cols() const noexcept;

    real* data() noexcept { return data_.data(); }
    const real* data() const noexcept { return data_.data(); }
    std::span<real> values() noexcept { return data_; }
    std::span<const real> values() const noexcept { return data_; }
    std::vector<real>& storage() noexcept { return data_; }
    const std::vector<real>& storage() const noexcept { return data_; }

    real& operator[](std::size_t i) noexcept { return data_[i]; }
    real operator[](std::size_t i) const noexcept { return data_[i]; }
    real& at(std::size_t r, std::size_t c) noexcept { return data_[r * cols() + c]; }
    real at(std::size_t r, std::size_t c) const noexcept { return data_[r * cols() + c]; }

    real item() const;
    void fill(real v);
    bool same_shape(const Tensor& other) const noexcept { return shape_ == other.shape_; }

    bool operator==(const Tensor& other) const = default;

private:
    std::vector<std::size_t> shape_;
    std::vector<real> data_;
};

std::string shape_str(const std::vector<std::size_t>& shape);

} // namespace dygenc
