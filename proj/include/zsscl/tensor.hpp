#pragma once

#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "zsscl/common.hpp"

namespace zsscl {

/// Extents of a dense tensor. An empty shape denotes a scalar (size 1).
using Shape = std::vector<int>;

inline std::int64_t shape_size(const Shape& s) {
    std::int64_t n = 1;
    for (int e : s) n *= e;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) os << ',';
        os << s[i];
    }
    os << ']';
    return os.str();
}

/// Dense multi-dimensional array with contiguous storage, last extent
/// fastest. Gathers enter the network as [1, time, traces].
template <class Real>
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(Shape shape, Real fill = Real(0))
        : shape_(std::move(shape)) {
        for (int e : shape_) {
            if (e <= 0) throw DimensionError("tensor extent must be positive, got shape " + shape_str(shape_));
        }
        data_.assign(static_cast<std::size_t>(shape_size(shape_)), fill);
    }

    static Tensor scalar(Real v) {
        Tensor t{Shape{}};
        t.data_[0] = v;
        return t;
    }

    const Shape& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    int extent(int axis) const { return shape_[static_cast<std::size_t>(axis)]; }
    std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }
    bool empty() const { return data_.empty(); }

    Real* data() { return data_.data(); }
    const Real* data() const { return data_.data(); }

    Real& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
    Real operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

    /// Element access for rank-3 [C,H,W] tensors.
    Real& at3(int c, int h, int w) {
        return data_[static_cast<std::size_t>((static_cast<std::int64_t>(c) * shape_[1] + h) * shape_[2] + w)];
    }
    Real at3(int c, int h, int w) const {
        return data_[static_cast<std::size_t>((static_cast<std::int64_t>(c) * shape_[1] + h) * shape_[2] + w)];
    }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    bool is_scalar() const { return data_.size() == 1; }

    Real scalar_value() const {
        if (!is_scalar()) throw UsageError("expected scalar tensor, got shape " + shape_str(shape_));
        return data_[0];
    }

    void fill(Real v) { std::fill(data_.begin(), data_.end(), v); }

    bool all_finite() const {
        for (Real v : data_)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }

    template <class Other>
    Tensor<Other> cast() const {
        Tensor<Other> t{shape_};
        for (std::int64_t i = 0; i < size(); ++i) t[i] = static_cast<Other>(data_[static_cast<std::size_t>(i)]);
        return t;
    }

private:
    Shape shape_;
    std::vector<Real> data_;
};

}  // namespace zsscl
