/*
 *  Copyright 2026 The FDI Authors
 *
 *  Licensed under the Apache License, Version 2.0 (the "License");
 *  you may not use this file except in compliance with the License.
 *  You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 *  Unless required by applicable law or agreed to in writing, software
 *  distributed under the License is distributed on an "AS IS" BASIS,
 *  WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 *  See the License for the specific language governing permissions and
 *  limitations under the License.
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace fdi {

/// Dense row-major tensor of rank 1..4. Feature maps follow the NCHW
/// convention; single images are stored as C x H x W.
template <typename T>
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
        for (int d : shape_) {
            if (d <= 0) throw std::invalid_argument("Tensor: non-positive dimension");
        }
        data_.assign(numel_of(shape_), T(0));
    }

    Tensor(std::vector<int> shape, std::vector<T> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (data_.size() != numel_of(shape_))
            throw std::invalid_argument("Tensor: data size does not match shape");
    }

    static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

    static Tensor full(std::vector<int> shape, T value) {
        Tensor t(std::move(shape));
        std::fill(t.data_.begin(), t.data_.end(), value);
        return t;
    }

    int rank() const { return static_cast<int>(shape_.size()); }
    int dim(int i) const { return shape_.at(static_cast<std::size_t>(i)); }
    const std::vector<int>& shape() const { return shape_; }
    std::size_t numel() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }
    std::vector<T>& raw() { return data_; }
    const std::vector<T>& raw() const { return data_; }

    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    // rank-4 access (n, c, h, w)
    T& at(int n, int c, int h, int w) {
        return data_[idx4(n, c, h, w)];
    }
    const T& at(int n, int c, int h, int w) const {
        return data_[idx4(n, c, h, w)];
    }

    // rank-3 access (c, h, w)
    T& at(int c, int h, int w) { return data_[idx3(c, h, w)]; }
    const T& at(int c, int h, int w) const { return data_[idx3(c, h, w)]; }

    std::size_t idx4(int n, int c, int h, int w) const {
        return ((static_cast<std::size_t>(n) * shape_[1] + c) * shape_[2] + h) * shape_[3] + w;
    }
    std::size_t idx3(int c, int h, int w) const {
        return (static_cast<std::size_t>(c) * shape_[1] + h) * shape_[2] + w;
    }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    std::string shape_str() const {
        std::ostringstream os;
        os << "(";
        for (std::size_t i = 0; i < shape_.size(); ++i)
            os << shape_[i] << (i + 1 < shape_.size() ? "x" : "");
        os << ")";
        return os.str();
    }

    template <typename U>
    Tensor<U> cast() const {
        Tensor<U> out(shape_);
        for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
        return out;
    }

private:
    static std::size_t numel_of(const std::vector<int>& s) {
        std::size_t n = 1;
        for (int d : s) n *= static_cast<std::size_t>(d);
        return s.empty() ? 0 : n;
    }

    std::vector<int> shape_;
    std::vector<T> data_;
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

template <typename T>
bool all_finite(const Tensor<T>& t) {
    for (std::size_t i = 0; i < t.numel(); ++i)
        if (!std::isfinite(t[i])) return false;
    return true;
}

template <typename T>
T max_abs(const Tensor<T>& t) {
    T m = T(0);
    for (std::size_t i = 0; i < t.numel(); ++i) m = std::max(m, std::abs(t[i]));
    return m;
}

template <typename T>
T max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("max_abs_diff: shape mismatch");
    T m = T(0);
    for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

template <typename T>
void check_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* who) {
    if (!a.same_shape(b))
        throw std::invalid_argument(std::string(who) + ": shape mismatch " + a.shape_str() +
                                    " vs " + b.shape_str());
}

template <typename T>
Tensor<T> clamp(const Tensor<T>& t, T lo, T hi) {
    Tensor<T> out = t;
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] = std::clamp(out[i], lo, hi);
    return out;
}

}  // namespace fdi
