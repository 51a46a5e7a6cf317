#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <initializer_list>
#include <vector>

#include "denim/common.hpp"
#include "denim/rng.hpp"

namespace denim {

using MatMap = Eigen::Map<Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using ConstMatMap = Eigen::Map<const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using StridedMap =
    Eigen::Map<Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>, 0, Eigen::OuterStride<>>;
using ConstStridedMap =
    Eigen::Map<const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>, 0, Eigen::OuterStride<>>;
using VecMap = Eigen::Map<Eigen::VectorXf>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXf>;

// Dense float32 tensor, contiguous row-major storage, value semantics.
// Heavy math goes through the Eigen map views.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<std::int64_t> shape) : shape_(std::move(shape)) { data_.assign(count(shape_), 0.0f); }
    Tensor(std::initializer_list<std::int64_t> shape) : Tensor(std::vector<std::int64_t>(shape)) {}

    static Tensor zeros(std::vector<std::int64_t> shape) { return Tensor(std::move(shape)); }
    static Tensor full(std::vector<std::int64_t> shape, float v) {
        Tensor t(std::move(shape));
        t.fill(v);
        return t;
    }
    static Tensor randn(std::vector<std::int64_t> shape, Rng& rng, float stddev = 1.0f) {
        Tensor t(std::move(shape));
        for (auto& x : t.data_) x = static_cast<float>(rng.normal()) * stddev;
        return t;
    }

    const std::vector<std::int64_t>& shape() const { return shape_; }
    std::int64_t dim(int i) const { return shape_.at(static_cast<std::size_t>(i)); }
    int rank() const { return static_cast<int>(shape_.size()); }
    std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }
    bool empty() const { return data_.empty(); }

    float* data() { return data_.data(); }
    const float* data() const { return data_.data(); }
    float& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
    float operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

    void fill(float v) { std::fill(data_.begin(), data_.end(), v); }
    void zero() { fill(0.0f); }

    // Same storage, new shape (element count must match).
    Tensor reshaped(std::vector<std::int64_t> shape) const {
        if (count(shape) != size()) throw ArgError("tensor reshape: element count mismatch");
        Tensor t = *this;
        t.shape_ = std::move(shape);
        return t;
    }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    // 2-D Eigen view over the full buffer.
    MatMap mat(std::int64_t rows, std::int64_t cols) {
        if (rows * cols != size()) throw ArgError("tensor mat view: element count mismatch");
        return MatMap(data(), rows, cols);
    }
    ConstMatMap mat(std::int64_t rows, std::int64_t cols) const {
        if (rows * cols != size()) throw ArgError("tensor mat view: element count mismatch");
        return ConstMatMap(data(), rows, cols);
    }
    // View treating the leading dims as rows and the last dim as cols.
    MatMap rows_by_last() { return MatMap(data(), size() / shape_.back(), shape_.back()); }
    ConstMatMap rows_by_last() const { return ConstMatMap(data(), size() / shape_.back(), shape_.back()); }

    VecMap vec() { return VecMap(data(), size()); }
    ConstVecMap vec() const { return ConstVecMap(data(), size()); }

    bool all_finite() const {
        for (float v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    bool operator==(const Tensor& o) const { return shape_ == o.shape_ && data_ == o.data_; }

    static std::int64_t count(const std::vector<std::int64_t>& shape) {
        std::int64_t n = 1;
        for (auto d : shape) {
            if (d < 0) throw ArgError("tensor shape: negative dimension");
            n *= d;
        }
        return n;
    }

private:
    std::vector<std::int64_t> shape_;
    // 64-byte-aligned storage keeps Eigen's kernel dispatch, and therefore
    // the floating-point rounding, identical across allocations. Forward
    // passes on equal inputs are bit-reproducible.
    std::vector<float, Eigen::aligned_allocator<float>> data_;
};

}  // namespace denim
