// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "llast/error.hpp"
#include "llast/rng.hpp"

namespace llast {

using Shape = std::vector<int64_t>;

inline std::string shape_str(const Shape& s) {
    std::string out = "[";
    for (size_t i = 0; i < s.size(); ++i) {
        if (i) out += " x ";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

inline int64_t shape_numel(const Shape& s) {
    int64_t n = 1;
    for (int64_t d : s) n *= d;
    return n;
}

// Dense row-major tensor. Shape is fixed at construction; a default-constructed
// tensor is the "absent" sentinel (used for missing gradients).
template <typename S>
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(Shape shape) : shape_(std::move(shape)) {
        validate_shape();
        data_.assign(static_cast<size_t>(shape_numel(shape_)), S(0));
    }

    Tensor(Shape shape, std::vector<S> data) : shape_(std::move(shape)), data_(std::move(data)) {
        validate_shape();
        if (static_cast<int64_t>(data_.size()) != shape_numel(shape_)) {
            throw ShapeError("tensor data size " + std::to_string(data_.size()) +
                             " does not match shape " + shape_str(shape_));
        }
    }

    static Tensor full(Shape shape, S v) {
        Tensor t(std::move(shape));
        for (auto& x : t.data_) x = v;
        return t;
    }

    static Tensor randn(Shape shape, Rng& rng, S stddev = S(1)) {
        Tensor t(std::move(shape));
        for (auto& x : t.data_) x = static_cast<S>(rng.normal()) * stddev;
        return t;
    }

    bool empty() const { return data_.empty(); }
    const Shape& shape() const { return shape_; }
    int64_t rank() const { return static_cast<int64_t>(shape_.size()); }
    int64_t dim(int64_t i) const { return shape_[static_cast<size_t>(i)]; }
    int64_t numel() const { return static_cast<int64_t>(data_.size()); }

    S* data() { return data_.data(); }
    const S* data() const { return data_.data(); }
    std::vector<S>& vec() { return data_; }
    const std::vector<S>& vec() const { return data_; }

    S& at(int64_t i) { return data_[static_cast<size_t>(i)]; }
    S at(int64_t i) const { return data_[static_cast<size_t>(i)]; }
    S& at(int64_t r, int64_t c) { return data_[static_cast<size_t>(r * shape_[1] + c)]; }
    S at(int64_t r, int64_t c) const { return data_[static_cast<size_t>(r * shape_[1] + c)]; }

    void fill(S v) {
        for (auto& x : data_) x = v;
    }

    template <typename T>
    Tensor<T> cast() const {
        if (empty()) return Tensor<T>();
        std::vector<T> out(data_.size());
        for (size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<T>(data_[i]);
        return Tensor<T>(shape_, std::move(out));
    }

private:
    void validate_shape() const {
        if (shape_.empty()) throw ShapeError("tensor rank must be >= 1");
        for (int64_t d : shape_) {
            if (d <= 0) throw ShapeError("tensor dims must be positive, got " + shape_str(shape_));
        }
    }

    Shape shape_;
    std::vector<S> data_;
};

// A named, optionally trainable tensor. grad is absent until a backward pass
// reaches it; accumulation is additive and cleared only by zero_grad().
template <typename S>
struct Parameter {
    Tensor<S> value;
    Tensor<S> grad;
    bool trainable = true;
    std::string name;

    bool has_grad() const { return !grad.empty(); }
    void zero_grad() { grad = Tensor<S>(); }
};

}  // namespace llast
