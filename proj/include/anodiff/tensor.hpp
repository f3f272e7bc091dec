#pragma once

// Small contiguous row-major tensor used across the library. No views, no
// broadcasting; layers index raw pointers directly in their inner loops.

#include <array>
#include <cassert>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace anodiff {

template <typename T>
class TensorT {
public:
    TensorT() = default;

    explicit TensorT(std::vector<int64_t> dims) { resize(std::move(dims)); }

    TensorT(int64_t d0) : TensorT(std::vector<int64_t>{d0}) {}
    TensorT(int64_t d0, int64_t d1) : TensorT(std::vector<int64_t>{d0, d1}) {}
    TensorT(int64_t d0, int64_t d1, int64_t d2)
        : TensorT(std::vector<int64_t>{d0, d1, d2}) {}
    TensorT(int64_t d0, int64_t d1, int64_t d2, int64_t d3)
        : TensorT(std::vector<int64_t>{d0, d1, d2, d3}) {}

    void resize(std::vector<int64_t> dims) {
        int64_t n = 1;
        for (int64_t d : dims) {
            if (d < 0) throw std::invalid_argument("tensor: negative dim");
            n *= d;
        }
        dims_ = std::move(dims);
        data_.assign(static_cast<size_t>(n), T(0));
    }

    int ndim() const { return static_cast<int>(dims_.size()); }
    int64_t dim(int i) const { return dims_[static_cast<size_t>(i)]; }
    const std::vector<int64_t>& dims() const { return dims_; }
    int64_t numel() const { return static_cast<int64_t>(data_.size()); }
    bool empty() const { return data_.empty(); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }

    T& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
    const T& operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

    // 2-D access (rows, cols)
    T& at(int64_t r, int64_t c) { return data_[static_cast<size_t>(r * dims_[1] + c)]; }
    const T& at(int64_t r, int64_t c) const {
        return data_[static_cast<size_t>(r * dims_[1] + c)];
    }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

    bool same_shape(const TensorT& o) const { return dims_ == o.dims_; }

    std::string shape_str() const {
        std::string s = "(";
        for (size_t i = 0; i < dims_.size(); ++i) {
            if (i) s += ",";
            s += std::to_string(dims_[i]);
        }
        return s + ")";
    }

    template <typename U>
    TensorT<U> cast() const {
        TensorT<U> out(dims_);
        for (int64_t i = 0; i < numel(); ++i)
            out[i] = static_cast<U>(data_[static_cast<size_t>(i)]);
        return out;
    }

private:
    std::vector<int64_t> dims_;
    std::vector<T> data_;
};

using FTensor = TensorT<float>;
using DTensor = TensorT<double>;

}  // namespace anodiff
