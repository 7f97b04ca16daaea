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

#include <Eigen/Dense>
#include <cmath>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "fdi/rng.hpp"
#include "fdi/tensor.hpp"

namespace fdi {

// ---------------------------------------------------------------------------
// Layer specifications and shape arithmetic
// ---------------------------------------------------------------------------

enum class LayerKind {
    conv,
    transpose_conv,
    batch_norm,
    instance_norm,
    relu,
    leaky_relu,
    tanh_act,
    sigmoid_act,
    residual_block
};

enum class NormKind { none, batch, instance };

struct LayerSpec {
    LayerKind kind = LayerKind::conv;
    int kernel = 0;
    int stride = 1;
    int padding = 0;
    int in_ch = 0;
    int out_ch = 0;
    NormKind normalizer = NormKind::none;  // residual_block branch norm
    bool spectral_norm = false;
    double slope = 0.0;  // leaky_relu
};

LayerSpec conv_spec(int in_ch, int out_ch, int kernel, int stride, int padding,
                    bool spectral_norm = false);
LayerSpec tconv_spec(int in_ch, int out_ch, int kernel, int stride, int padding);
LayerSpec batch_norm_spec(int ch);
LayerSpec instance_norm_spec(int ch);
LayerSpec relu_spec();
LayerSpec leaky_relu_spec(double slope);
LayerSpec tanh_spec();
LayerSpec sigmoid_spec();
LayerSpec residual_block_spec(int ch, NormKind norm = NormKind::instance, int kernel = 3);

/// out = floor((in + 2p - k)/s) + 1
int conv_out_size(int in, int k, int s, int p);
/// out = (in - 1)*s - 2p + k
int tconv_out_size(int in, int k, int s, int p);

/// Output shape of one layer / a whole chain on a C x H x W input.
/// Throws std::invalid_argument on inconsistent chains (channel mismatch,
/// vanishing or non-integral spatial size).
std::array<int, 3> shape_of(const LayerSpec& spec, std::array<int, 3> in);
std::array<int, 3> shape_of(const std::vector<LayerSpec>& chain, std::array<int, 3> in);
std::vector<std::array<int, 3>> shape_trace(const std::vector<LayerSpec>& chain,
                                            std::array<int, 3> in);

/// Closed-form trainable parameter count of a chain.
std::size_t param_count(const std::vector<LayerSpec>& chain);

std::string layer_spec_to_json(const std::vector<LayerSpec>& chain);
std::vector<LayerSpec> layer_spec_from_json(const std::string& text);

// ---------------------------------------------------------------------------
// Spectral normalization (power iteration)
// ---------------------------------------------------------------------------

template <typename T>
using MatX = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using VecX = Eigen::Matrix<T, Eigen::Dynamic, 1>;

template <typename T>
struct PowerIterState {
    VecX<T> u, v;
    bool ready = false;
};

/// W / sigma_hat with sigma_hat estimated by `iters` power iterations on the
/// persistent state. sigma_hat is floored at eps so a zero matrix stays zero.
template <typename T>
MatX<T> spectral_normalize(const MatX<T>& w, int iters, PowerIterState<T>& state,
                           T eps = T(1e-12)) {
    const auto rows = w.rows(), cols = w.cols();
    if (!state.ready) {
        std::mt19937_64 rng(0x5eed5eedULL ^ (static_cast<std::uint64_t>(rows) << 20) ^
                            static_cast<std::uint64_t>(cols));
        std::normal_distribution<double> nd(0.0, 1.0);
        state.u.resize(rows);
        state.v.resize(cols);
        for (Eigen::Index i = 0; i < rows; ++i) state.u(i) = static_cast<T>(nd(rng));
        state.u.normalize();
        state.v.setZero();
        state.ready = true;
    }
    T sigma = T(0);
    for (int it = 0; it < std::max(iters, 1); ++it) {
        VecX<T> v = w.transpose() * state.u;
        T nv = v.norm();
        if (nv > eps) state.v = v / nv;
        VecX<T> u = w * state.v;
        T nu = u.norm();
        if (nu > eps) state.u = u / nu;
        sigma = state.u.dot(w * state.v);
    }
    sigma = std::max(sigma, eps);
    return w / sigma;
}

// ---------------------------------------------------------------------------
// Layers
// ---------------------------------------------------------------------------

template <typename T>
struct ParamRef {
    std::string name;
    Tensor<T>* value = nullptr;
    Tensor<T>* grad = nullptr;  // null for non-trainable buffers
};

/// A differentiable module over N x C x H x W tensors. backward() consumes
/// the gradient w.r.t. the last forward output and returns the gradient
/// w.r.t. that forward's input, accumulating parameter gradients in place.
template <typename T>
class Layer {
public:
    virtual ~Layer() = default;
    virtual Tensor<T> forward(const Tensor<T>& x, bool train) = 0;
    virtual Tensor<T> backward(const Tensor<T>& grad_out) = 0;
    virtual void collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) {
        (void)prefix;
        (void)out;
    }
    /// Non-trainable state (running statistics, power-iteration vectors).
    virtual void collect_buffers(const std::string& prefix, std::vector<ParamRef<T>>& out) {
        (void)prefix;
        (void)out;
    }
    /// He initialization of this layer's parameters, deterministic per seed.
    virtual void init_he(std::uint64_t seed) { (void)seed; }
    virtual std::string kind_name() const = 0;
};

namespace detail {

// column r = (c*k+ky)*k+kx of position (oy,ox) reads x[c, oy*s-p+ky, ox*s-p+kx]
template <typename T>
void im2col(const T* x, int C, int H, int W, int k, int s, int p, int OH, int OW, T* cols) {
    const int P = OH * OW;
    for (int c = 0; c < C; ++c)
        for (int ky = 0; ky < k; ++ky)
            for (int kx = 0; kx < k; ++kx) {
                T* row = cols + (static_cast<std::size_t>(c) * k * k + ky * k + kx) * P;
                for (int oy = 0; oy < OH; ++oy) {
                    const int iy = oy * s - p + ky;
                    if (iy < 0 || iy >= H) {
                        std::fill(row + static_cast<std::size_t>(oy) * OW,
                                  row + static_cast<std::size_t>(oy + 1) * OW, T(0));
                        continue;
                    }
                    const T* src = x + (static_cast<std::size_t>(c) * H + iy) * W;
                    for (int ox = 0; ox < OW; ++ox) {
                        const int ix = ox * s - p + kx;
                        row[static_cast<std::size_t>(oy) * OW + ox] =
                            (ix >= 0 && ix < W) ? src[ix] : T(0);
                    }
                }
            }
}

// adjoint of im2col: scatter-add columns back into the image
template <typename T>
void col2im(const T* cols, int C, int H, int W, int k, int s, int p, int OH, int OW, T* x) {
    std::fill(x, x + static_cast<std::size_t>(C) * H * W, T(0));
    const int P = OH * OW;
    for (int c = 0; c < C; ++c)
        for (int ky = 0; ky < k; ++ky)
            for (int kx = 0; kx < k; ++kx) {
                const T* row = cols + (static_cast<std::size_t>(c) * k * k + ky * k + kx) * P;
                for (int oy = 0; oy < OH; ++oy) {
                    const int iy = oy * s - p + ky;
                    if (iy < 0 || iy >= H) continue;
                    T* dst = x + (static_cast<std::size_t>(c) * H + iy) * W;
                    for (int ox = 0; ox < OW; ++ox) {
                        const int ix = ox * s - p + kx;
                        if (ix >= 0 && ix < W) dst[ix] += row[static_cast<std::size_t>(oy) * OW + ox];
                    }
                }
            }
}

}  // namespace detail

template <typename T>
class Conv2d : public Layer<T> {
public:
    Conv2d(int in_ch, int out_ch, int kernel, int stride, int padding, bool use_spectral_norm = false)
        : in_(in_ch), out_(out_ch), k_(kernel), s_(stride), p_(padding), sn_(use_spectral_norm),
          weight_({out_ch, in_ch, kernel, kernel}), bias_({out_ch}),
          wgrad_({out_ch, in_ch, kernel, kernel}), bgrad_({out_ch}) {}

    Tensor<T> forward(const Tensor<T>& x, bool train) override {
        if (x.rank() != 4 || x.dim(1) != in_)
            throw std::invalid_argument("Conv2d: bad input shape " + x.shape_str());
        const int N = x.dim(0), H = x.dim(2), W = x.dim(3);
        const int OH = conv_out_size(H, k_, s_, p_), OW = conv_out_size(W, k_, s_, p_);
        x_cache_ = x;
        const MatX<T> wmat = effective_weight_matrix(train);

        Tensor<T> y({N, out_, OH, OW});
        const int K = in_ * k_ * k_, P = OH * OW;
        MatX<T> cols(K, P);
        for (int n = 0; n < N; ++n) {
            detail::im2col(&x.at(n, 0, 0, 0), in_, H, W, k_, s_, p_, OH, OW, cols.data());
            Eigen::Map<MatX<T>> ymap(&y.at(n, 0, 0, 0), out_, P);
            ymap.noalias() = wmat * cols;
            for (int c = 0; c < out_; ++c) ymap.row(c).array() += bias_[c];
        }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& gy) override {
        const int N = x_cache_.dim(0), H = x_cache_.dim(2), W = x_cache_.dim(3);
        const int OH = gy.dim(2), OW = gy.dim(3);
        const int K = in_ * k_ * k_, P = OH * OW;

        MatX<T> dwhat = MatX<T>::Zero(out_, K);
        Tensor<T> gx({N, in_, H, W});
        MatX<T> cols(K, P), dcols(K, P);
        for (int n = 0; n < N; ++n) {
            detail::im2col(&x_cache_.at(n, 0, 0, 0), in_, H, W, k_, s_, p_, OH, OW, cols.data());
            Eigen::Map<const MatX<T>> gmap(&gy.at(n, 0, 0, 0), out_, P);
            dwhat.noalias() += gmap * cols.transpose();
            for (int c = 0; c < out_; ++c) bgrad_[c] += gmap.row(c).sum();
            dcols.noalias() = eff_weight_.transpose() * gmap;
            detail::col2im(dcols.data(), in_, H, W, k_, s_, p_, OH, OW, &gx.at(n, 0, 0, 0));
        }

        Eigen::Map<MatX<T>> wg(wgrad_.data(), out_, K);
        if (sn_) {
            // d(W/sigma)/dW with u,v treated as constants:
            // dW = dWhat/sigma - (<dWhat, What>/sigma) * u v^T
            const T inner = (dwhat.array() * eff_weight_.array()).sum();
            wg.noalias() += dwhat / sigma_ - (inner / sigma_) * (sn_state_.u * sn_state_.v.transpose());
        } else {
            wg.noalias() += dwhat;
        }
        return gx;
    }

    void collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) override {
        out.push_back({prefix + ".weight", &weight_, &wgrad_});
        out.push_back({prefix + ".bias", &bias_, &bgrad_});
    }

    void collect_buffers(const std::string& prefix, std::vector<ParamRef<T>>& out) override {
        if (!sn_) return;
        sync_sn_buffers();
        out.push_back({prefix + ".sn_u", &sn_u_buf_, nullptr});
        out.push_back({prefix + ".sn_v", &sn_v_buf_, nullptr});
    }

    void init_he(std::uint64_t seed) override {
        auto rng = make_rng(seed);
        std::normal_distribution<double> nd(0.0, std::sqrt(2.0 / (in_ * k_ * k_)));
        for (std::size_t i = 0; i < weight_.numel(); ++i)
            weight_[i] = static_cast<T>(nd(rng));
        bias_.fill(T(0));
    }

    std::string kind_name() const override { return sn_ ? "conv+sn" : "conv"; }

    Tensor<T>& weight() { return weight_; }
    Tensor<T>& bias() { return bias_; }
    bool spectral_norm_enabled() const { return sn_; }

    /// The weight matrix actually used by forward (normalized when spectral
    /// norm is on), without advancing the power iteration.
    MatX<T> normalized_weight_matrix() {
        return effective_weight_matrix(/*train=*/false);
    }

    /// Run warm-up power iterations (used right after initialization).
    void warmup_spectral_norm(int iters) {
        if (!sn_) return;
        Eigen::Map<const MatX<T>> wmat(weight_.data(), out_, in_ * k_ * k_);
        MatX<T> w = wmat;
        spectral_normalize(w, iters, sn_state_);
    }

    void restore_sn_state(const Tensor<T>& u, const Tensor<T>& v) {
        sn_state_.u = Eigen::Map<const VecX<T>>(u.data(), u.numel());
        sn_state_.v = Eigen::Map<const VecX<T>>(v.data(), v.numel());
        sn_state_.ready = true;
    }

private:
    MatX<T> effective_weight_matrix(bool train) {
        Eigen::Map<const MatX<T>> wmat(weight_.data(), out_, in_ * k_ * k_);
        if (!sn_) {
            eff_weight_ = wmat;
            sigma_ = T(1);
            return eff_weight_;
        }
        MatX<T> w = wmat;
        if (train || !sn_state_.ready) {
            eff_weight_ = spectral_normalize(w, 1, sn_state_);
        } else {
            // frozen estimate: sigma from the stored power-iteration vectors
            const T sigma = std::max(sn_state_.u.dot(w * sn_state_.v), T(1e-12));
            eff_weight_ = w / sigma;
        }
        sigma_ = std::max(sn_state_.u.dot(w * sn_state_.v), T(1e-12));
        return eff_weight_;
    }

    void sync_sn_buffers() {
        sn_u_buf_ = Tensor<T>({static_cast<int>(sn_state_.u.size())});
        sn_v_buf_ = Tensor<T>({static_cast<int>(sn_state_.v.size())});
        for (Eigen::Index i = 0; i < sn_state_.u.size(); ++i) sn_u_buf_[i] = sn_state_.u(i);
        for (Eigen::Index i = 0; i < sn_state_.v.size(); ++i) sn_v_buf_[i] = sn_state_.v(i);
    }

    int in_, out_, k_, s_, p_;
    bool sn_;
    Tensor<T> weight_, bias_, wgrad_, bgrad_;
    Tensor<T> x_cache_;
    MatX<T> eff_weight_;
    T sigma_ = T(1);
    PowerIterState<T> sn_state_;
    Tensor<T> sn_u_buf_, sn_v_buf_;
};

template <typename T>
class ConvTranspose2d : public Layer<T> {
public:
    ConvTranspose2d(int in_ch, int out_ch, int kernel, int stride, int padding)
        : in_(in_ch), out_(out_ch), k_(kernel), s_(stride), p_(padding),
          weight_({in_ch, out_ch, kernel, kernel}), bias_({out_ch}),
          wgrad_({in_ch, out_ch, kernel, kernel}), bgrad_({out_ch}) {}

    Tensor<T> forward(const Tensor<T>& x, bool) override {
        if (x.rank() != 4 || x.dim(1) != in_)
            throw std::invalid_argument("ConvTranspose2d: bad input shape " + x.shape_str());
        const int N = x.dim(0), H = x.dim(2), W = x.dim(3);
        const int OH = tconv_out_size(H, k_, s_, p_), OW = tconv_out_size(W, k_, s_, p_);
        x_cache_ = x;

        const int K = out_ * k_ * k_, P = H * W;
        Eigen::Map<const MatX<T>> wmat(weight_.data(), in_, K);
        Tensor<T> y({N, out_, OH, OW});
        MatX<T> cols(K, P);
        for (int n = 0; n < N; ++n) {
            Eigen::Map<const MatX<T>> xmap(&x.at(n, 0, 0, 0), in_, P);
            cols.noalias() = wmat.transpose() * xmap;
            detail::col2im(cols.data(), out_, OH, OW, k_, s_, p_, H, W, &y.at(n, 0, 0, 0));
            for (int c = 0; c < out_; ++c) {
                T* dst = &y.at(n, c, 0, 0);
                for (int i = 0; i < OH * OW; ++i) dst[i] += bias_[c];
            }
        }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& gy) override {
        const int N = x_cache_.dim(0), H = x_cache_.dim(2), W = x_cache_.dim(3);
        const int OH = gy.dim(2), OW = gy.dim(3);
        const int K = out_ * k_ * k_, P = H * W;

        Eigen::Map<const MatX<T>> wmat(weight_.data(), in_, K);
        Eigen::Map<MatX<T>> wg(wgrad_.data(), in_, K);
        Tensor<T> gx({N, in_, H, W});
        MatX<T> dcols(K, P);
        for (int n = 0; n < N; ++n) {
            detail::im2col(&gy.at(n, 0, 0, 0), out_, OH, OW, k_, s_, p_, H, W, dcols.data());
            Eigen::Map<const MatX<T>> xmap(&x_cache_.at(n, 0, 0, 0), in_, P);
            wg.noalias() += xmap * dcols.transpose();
            Eigen::Map<MatX<T>> gxmap(&gx.at(n, 0, 0, 0), in_, P);
            gxmap.noalias() = wmat * dcols;
            for (int c = 0; c < out_; ++c) {
                const T* src = &gy.at(n, c, 0, 0);
                T acc = T(0);
                for (int i = 0; i < OH * OW; ++i) acc += src[i];
                bgrad_[c] += acc;
            }
        }
        return gx;
    }

    void collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) override {
        out.push_back({prefix + ".weight", &weight_, &wgrad_});
        out.push_back({prefix + ".bias", &bias_, &bgrad_});
    }

    void init_he(std::uint64_t seed) override {
        auto rng = make_rng(seed);
        std::normal_distribution<double> nd(0.0, std::sqrt(2.0 / (in_ * k_ * k_)));
        for (std::size_t i = 0; i < weight_.numel(); ++i)
            weight_[i] = static_cast<T>(nd(rng));
        bias_.fill(T(0));
    }

    std::string kind_name() const override { return "transpose_conv"; }

    Tensor<T>& weight() { return weight_; }

private:
    int in_, out_, k_, s_, p_;
    Tensor<T> weight_, bias_, wgrad_, bgrad_;
    Tensor<T> x_cache_;
};

template <typename T>
class BatchNorm2d : public Layer<T> {
public:
    explicit BatchNorm2d(int ch, T momentum = T(0.1), T eps = T(1e-5))
        : ch_(ch), momentum_(momentum), eps_(eps), gamma_({ch}), beta_({ch}),
          ggrad_({ch}), bgrad_({ch}), running_mean_({ch}), running_var_({ch}) {
        gamma_.fill(T(1));
        running_var_.fill(T(1));
    }

    Tensor<T> forward(const Tensor<T>& x, bool train) override {
        const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
        if (C != ch_) throw std::invalid_argument("BatchNorm2d: channel mismatch");
        train_ = train;
        const std::size_t m = static_cast<std::size_t>(N) * H * W;
        Tensor<T> y(x.shape());
        xhat_ = Tensor<T>(x.shape());
        mean_ = Tensor<T>({C});
        invstd_ = Tensor<T>({C});
        for (int c = 0; c < C; ++c) {
            T mu, var;
            if (train) {
                double acc = 0, acc2 = 0;
                for (int n = 0; n < N; ++n) {
                    const T* p = &x.at(n, c, 0, 0);
                    for (int i = 0; i < H * W; ++i) {
                        acc += p[i];
                        acc2 += static_cast<double>(p[i]) * p[i];
                    }
                }
                mu = static_cast<T>(acc / m);
                var = static_cast<T>(acc2 / m - (acc / m) * (acc / m));
                var = std::max(var, T(0));
                running_mean_[c] = (T(1) - momentum_) * running_mean_[c] + momentum_ * mu;
                const T unbiased = m > 1 ? var * static_cast<T>(m) / static_cast<T>(m - 1) : var;
                running_var_[c] = (T(1) - momentum_) * running_var_[c] + momentum_ * unbiased;
            } else {
                mu = running_mean_[c];
                var = running_var_[c];
            }
            const T istd = T(1) / std::sqrt(var + eps_);
            mean_[c] = mu;
            invstd_[c] = istd;
            for (int n = 0; n < N; ++n) {
                const T* p = &x.at(n, c, 0, 0);
                T* xh = &xhat_.at(n, c, 0, 0);
                T* py = &y.at(n, c, 0, 0);
                for (int i = 0; i < H * W; ++i) {
                    xh[i] = (p[i] - mu) * istd;
                    py[i] = gamma_[c] * xh[i] + beta_[c];
                }
            }
        }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& gy) override {
        const int N = gy.dim(0), C = gy.dim(1), H = gy.dim(2), W = gy.dim(3);
        const std::size_t m = static_cast<std::size_t>(N) * H * W;
        Tensor<T> gx(gy.shape());
        for (int c = 0; c < C; ++c) {
            double sum_gy = 0, sum_gy_xhat = 0;
            for (int n = 0; n < N; ++n) {
                const T* g = &gy.at(n, c, 0, 0);
                const T* xh = &xhat_.at(n, c, 0, 0);
                for (int i = 0; i < H * W; ++i) {
                    sum_gy += g[i];
                    sum_gy_xhat += static_cast<double>(g[i]) * xh[i];
                }
            }
            ggrad_[c] += static_cast<T>(sum_gy_xhat);
            bgrad_[c] += static_cast<T>(sum_gy);
            const T gscale = gamma_[c] * invstd_[c];
            if (train_) {
                const T mg = static_cast<T>(sum_gy / m);
                const T mgx = static_cast<T>(sum_gy_xhat / m);
                for (int n = 0; n < N; ++n) {
                    const T* g = &gy.at(n, c, 0, 0);
                    const T* xh = &xhat_.at(n, c, 0, 0);
                    T* out = &gx.at(n, c, 0, 0);
                    for (int i = 0; i < H * W; ++i) out[i] = gscale * (g[i] - mg - xh[i] * mgx);
                }
            } else {
                for (int n = 0; n < N; ++n) {
                    const T* g = &gy.at(n, c, 0, 0);
                    T* out = &gx.at(n, c, 0, 0);
                    for (int i = 0; i < H * W; ++i) out[i] = gscale * g[i];
                }
            }
        }
        return gx;
    }

    void collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) override {
        out.push_back({prefix + ".gamma", &gamma_, &ggrad_});
        out.push_back({prefix + ".beta", &beta_, &bgrad_});
    }

    void collect_buffers(const std::string& prefix, std::vector<ParamRef<T>>& out) override {
        out.push_back({prefix + ".running_mean", &running_mean_, nullptr});
        out.push_back({prefix + ".running_var", &running_var_, nullptr});
    }

    void init_he(std::uint64_t) override {
        gamma_.fill(T(1));
        beta_.fill(T(0));
        running_mean_.fill(T(0));
        running_var_.fill(T(1));
    }

    std::string kind_name() const override { return "batch_norm"; }

private:
    int ch_;
    T momentum_, eps_;
    bool train_ = true;
    Tensor<T> gamma_, beta_, ggrad_, bgrad_, running_mean_, running_var_;
    Tensor<T> xhat_, mean_, invstd_;
};

/// Instance normalization without learned affine; statistics are always the
/// per-sample ones, so train and eval behave identically.
template <typename T>
class InstanceNorm2d : public Layer<T> {
public:
    explicit InstanceNorm2d(int ch, T eps = T(1e-5)) : ch_(ch), eps_(eps) {}

    Tensor<T> forward(const Tensor<T>& x, bool) override {
        const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
        if (C != ch_) throw std::invalid_argument("InstanceNorm2d: channel mismatch");
        const int m = H * W;
        Tensor<T> y(x.shape());
        xhat_ = Tensor<T>(x.shape());
        invstd_ = Tensor<T>({N, C, 1, 1});
        for (int n = 0; n < N; ++n)
            for (int c = 0; c < C; ++c) {
                const T* p = &x.at(n, c, 0, 0);
                double acc = 0, acc2 = 0;
                for (int i = 0; i < m; ++i) {
                    acc += p[i];
                    acc2 += static_cast<double>(p[i]) * p[i];
                }
                const T mu = static_cast<T>(acc / m);
                T var = static_cast<T>(acc2 / m - (acc / m) * (acc / m));
                var = std::max(var, T(0));
                const T istd = T(1) / std::sqrt(var + eps_);
                invstd_.at(n, c, 0, 0) = istd;
                T* xh = &xhat_.at(n, c, 0, 0);
                T* py = &y.at(n, c, 0, 0);
                for (int i = 0; i < m; ++i) {
                    xh[i] = (p[i] - mu) * istd;
                    py[i] = xh[i];
                }
            }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& gy) override {
        const int N = gy.dim(0), C = gy.dim(1), H = gy.dim(2), W = gy.dim(3);
        const int m = H * W;
        Tensor<T> gx(gy.shape());
        for (int n = 0; n < N; ++n)
            for (int c = 0; c < C; ++c) {
                const T* g = &gy.at(n, c, 0, 0);
                const T* xh = &xhat_.at(n, c, 0, 0);
                double sum_g = 0, sum_gx = 0;
                for (int i = 0; i < m; ++i) {
                    sum_g += g[i];
                    sum_gx += static_cast<double>(g[i]) * xh[i];
                }
                const T mg = static_cast<T>(sum_g / m), mgx = static_cast<T>(sum_gx / m);
                const T istd = invstd_.at(n, c, 0, 0);
                T* out = &gx.at(n, c, 0, 0);
                for (int i = 0; i < m; ++i) out[i] = istd * (g[i] - mg - xh[i] * mgx);
            }
        return gx;
    }

    std::string kind_name() const override { return "instance_norm"; }

private:
    int ch_;
    T eps_;
    Tensor<T> xhat_, invstd_;
};

template <typename T>
class ReLU : public Layer<T> {
public:
    Tensor<T> forward(const Tensor<T>& x, bool) override {
        x_cache_ = x;
        Tensor<T> y = x;
        for (std::size_t i = 0; i < y.numel(); ++i) y[i] = std::max(y[i], T(0));
        return y;
    }
    Tensor<T> backward(const Tensor<T>& gy) override {
        Tensor<T> gx = gy;
        for (std::size_t i = 0; i < gx.numel(); ++i)
            if (x_cache_[i] <= T(0)) gx[i] = T(0);
        return gx;
    }
    std::string kind_name() const override { return "relu"; }

private:
    Tensor<T> x_cache_;
};

template <typename T>
class LeakyReLU : public Layer<T> {
public:
    explicit LeakyReLU(T slope) : slope_(slope) {}
    Tensor<T> forward(const Tensor<T>& x, bool) override {
        x_cache_ = x;
        Tensor<T> y = x;
        for (std::size_t i = 0; i < y.numel(); ++i)
            if (y[i] < T(0)) y[i] *= slope_;
        return y;
    }
    Tensor<T> backward(const Tensor<T>& gy) override {
        Tensor<T> gx = gy;
        for (std::size_t i = 0; i < gx.numel(); ++i)
            if (x_cache_[i] < T(0)) gx[i] *= slope_;
        return gx;
    }
    std::string kind_name() const override { return "leaky_relu"; }

private:
    T slope_;
    Tensor<T> x_cache_;
};

template <typename T>
class TanhAct : public Layer<T> {
public:
    Tensor<T> forward(const Tensor<T>& x, bool) override {
        Tensor<T> y = x;
        for (std::size_t i = 0; i < y.numel(); ++i) y[i] = std::tanh(y[i]);
        y_cache_ = y;
        return y;
    }
    Tensor<T> backward(const Tensor<T>& gy) override {
        Tensor<T> gx = gy;
        for (std::size_t i = 0; i < gx.numel(); ++i)
            gx[i] *= (T(1) - y_cache_[i] * y_cache_[i]);
        return gx;
    }
    std::string kind_name() const override { return "tanh"; }

private:
    Tensor<T> y_cache_;
};

template <typename T>
class SigmoidAct : public Layer<T> {
public:
    Tensor<T> forward(const Tensor<T>& x, bool) override {
        Tensor<T> y = x;
        for (std::size_t i = 0; i < y.numel(); ++i) y[i] = T(1) / (T(1) + std::exp(-y[i]));
        y_cache_ = y;
        return y;
    }
    Tensor<T> backward(const Tensor<T>& gy) override {
        Tensor<T> gx = gy;
        for (std::size_t i = 0; i < gx.numel(); ++i)
            gx[i] *= y_cache_[i] * (T(1) - y_cache_[i]);
        return gx;
    }
    std::string kind_name() const override { return "sigmoid"; }

private:
    Tensor<T> y_cache_;
};

/// y = x + B(x), B = conv3x3 -> norm -> ReLU -> conv3x3 -> norm.
/// Channels are preserved; a zero-parameter branch is an exact identity.
template <typename T>
class ResidualBlock : public Layer<T> {
public:
    ResidualBlock(int ch, NormKind norm = NormKind::instance, int kernel = 3)
        : conv1_(ch, ch, kernel, 1, kernel / 2), conv2_(ch, ch, kernel, 1, kernel / 2) {
        if (norm == NormKind::instance) {
            norm1_ = std::make_unique<InstanceNorm2d<T>>(ch);
            norm2_ = std::make_unique<InstanceNorm2d<T>>(ch);
        } else if (norm == NormKind::batch) {
            norm1_ = std::make_unique<BatchNorm2d<T>>(ch);
            norm2_ = std::make_unique<BatchNorm2d<T>>(ch);
        }
    }

    Tensor<T> forward(const Tensor<T>& x, bool train) override {
        Tensor<T> b = conv1_.forward(x, train);
        if (norm1_) b = norm1_->forward(b, train);
        b = relu_.forward(b, train);
        b = conv2_.forward(b, train);
        if (norm2_) b = norm2_->forward(b, train);
        check_same_shape(b, x, "ResidualBlock");
        Tensor<T> y = x;
        for (std::size_t i = 0; i < y.numel(); ++i) y[i] += b[i];
        return y;
    }

    Tensor<T> backward(const Tensor<T>& gy) override {
        Tensor<T> g = gy;
        if (norm2_) g = norm2_->backward(g);
        g = conv2_.backward(g);
        g = relu_.backward(g);
        if (norm1_) g = norm1_->backward(g);
        g = conv1_.backward(g);
        for (std::size_t i = 0; i < g.numel(); ++i) g[i] += gy[i];
        return g;
    }

    void collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) override {
        conv1_.collect_params(prefix + ".conv1", out);
        if (norm1_) norm1_->collect_params(prefix + ".norm1", out);
        conv2_.collect_params(prefix + ".conv2", out);
        if (norm2_) norm2_->collect_params(prefix + ".norm2", out);
    }

    void collect_buffers(const std::string& prefix, std::vector<ParamRef<T>>& out) override {
        conv1_.collect_buffers(prefix + ".conv1", out);
        if (norm1_) norm1_->collect_buffers(prefix + ".norm1", out);
        conv2_.collect_buffers(prefix + ".conv2", out);
        if (norm2_) norm2_->collect_buffers(prefix + ".norm2", out);
    }

    void init_he(std::uint64_t seed) override {
        conv1_.init_he(split_seed(seed, "res.conv1"));
        if (norm1_) norm1_->init_he(split_seed(seed, "res.norm1"));
        conv2_.init_he(split_seed(seed, "res.conv2"));
        if (norm2_) norm2_->init_he(split_seed(seed, "res.norm2"));
    }

    std::string kind_name() const override { return "residual_block"; }

private:
    Conv2d<T> conv1_, conv2_;
    std::unique_ptr<Layer<T>> norm1_, norm2_;
    ReLU<T> relu_;
};

// ---------------------------------------------------------------------------
// Sequential container
// ---------------------------------------------------------------------------

template <typename T>
class Sequential {
public:
    Sequential() = default;
    explicit Sequential(std::vector<LayerSpec> chain) : chain_(std::move(chain)) {
        for (const auto& spec : chain_) layers_.push_back(make_layer(spec));
    }

    Tensor<T> forward(const Tensor<T>& x, bool train) {
        Tensor<T> h = x;
        for (auto& l : layers_) h = l->forward(h, train);
        return h;
    }

    /// Forward pass that records every intermediate output shape (input
    /// shape first), for conformance checks against printed architectures.
    Tensor<T> forward_trace(const Tensor<T>& x, bool train,
                            std::vector<std::vector<int>>& shapes) {
        shapes.clear();
        shapes.push_back(x.shape());
        Tensor<T> h = x;
        for (auto& l : layers_) {
            h = l->forward(h, train);
            shapes.push_back(h.shape());
        }
        return h;
    }

    Tensor<T> backward(const Tensor<T>& gy) {
        Tensor<T> g = gy;
        for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
        return g;
    }

    std::vector<ParamRef<T>> params() {
        std::vector<ParamRef<T>> out;
        for (std::size_t i = 0; i < layers_.size(); ++i)
            layers_[i]->collect_params("layer" + std::to_string(i), out);
        return out;
    }

    std::vector<ParamRef<T>> buffers() {
        std::vector<ParamRef<T>> out;
        for (std::size_t i = 0; i < layers_.size(); ++i)
            layers_[i]->collect_buffers("layer" + std::to_string(i), out);
        return out;
    }

    void zero_grad() {
        for (auto& p : params())
            if (p.grad) p.grad->fill(T(0));
    }

    std::size_t num_params() {
        std::size_t n = 0;
        for (auto& p : params()) n += p.value->numel();
        return n;
    }

    const std::vector<LayerSpec>& chain() const { return chain_; }
    std::size_t size() const { return layers_.size(); }
    Layer<T>& layer(std::size_t i) { return *layers_[i]; }

private:
    static std::unique_ptr<Layer<T>> make_layer(const LayerSpec& s) {
        switch (s.kind) {
            case LayerKind::conv:
                return std::make_unique<Conv2d<T>>(s.in_ch, s.out_ch, s.kernel, s.stride,
                                                   s.padding, s.spectral_norm);
            case LayerKind::transpose_conv:
                return std::make_unique<ConvTranspose2d<T>>(s.in_ch, s.out_ch, s.kernel, s.stride,
                                                            s.padding);
            case LayerKind::batch_norm: return std::make_unique<BatchNorm2d<T>>(s.in_ch);
            case LayerKind::instance_norm: return std::make_unique<InstanceNorm2d<T>>(s.in_ch);
            case LayerKind::relu: return std::make_unique<ReLU<T>>();
            case LayerKind::leaky_relu: return std::make_unique<LeakyReLU<T>>(static_cast<T>(s.slope));
            case LayerKind::tanh_act: return std::make_unique<TanhAct<T>>();
            case LayerKind::sigmoid_act: return std::make_unique<SigmoidAct<T>>();
            case LayerKind::residual_block:
                return std::make_unique<ResidualBlock<T>>(s.in_ch, s.normalizer, s.kernel);
        }
        throw std::logic_error("make_layer: unknown kind");
    }

    std::vector<LayerSpec> chain_;
    std::vector<std::unique_ptr<Layer<T>>> layers_;
};

// ---------------------------------------------------------------------------
// Initialization
// ---------------------------------------------------------------------------

/// He initialization of a whole network: conv weights ~ N(0, 2/fan_in) with
/// fan_in = in_ch*k*k, biases zero, norm affine reset. Deterministic per
/// seed. Spectral-norm layers get `sn_warmup` power iterations afterwards.
template <typename T>
void he_init(Sequential<T>& net, std::uint64_t seed, int sn_warmup = 10) {
    for (std::size_t i = 0; i < net.size(); ++i)
        net.layer(i).init_he(split_seed(seed, "he_init", i));
    for (std::size_t i = 0; i < net.size(); ++i)
        if (auto* conv = dynamic_cast<Conv2d<T>*>(&net.layer(i)))
            conv->warmup_spectral_norm(sn_warmup);
}

}  // namespace fdi
