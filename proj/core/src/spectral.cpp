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

#include "fdi/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <opencv2/imgcodecs.hpp>

namespace fdi {

namespace {

bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

template <typename T>
void fft_radix2(std::vector<std::complex<T>>& v, bool inverse) {
    const int n = static_cast<int>(v.size());
    // bit-reversal permutation
    for (int i = 1, j = 0; i < n; ++i) {
        int bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(v[i], v[j]);
    }
    const T sign = inverse ? T(1) : T(-1);
    for (int len = 2; len <= n; len <<= 1) {
        const T ang = sign * T(2) * static_cast<T>(M_PI) / static_cast<T>(len);
        const std::complex<T> wlen(std::cos(ang), std::sin(ang));
        for (int i = 0; i < n; i += len) {
            std::complex<T> w(1, 0);
            for (int k = 0; k < len / 2; ++k) {
                std::complex<T> u = v[i + k];
                std::complex<T> t = v[i + k + len / 2] * w;
                v[i + k] = u + t;
                v[i + k + len / 2] = u - t;
                w *= wlen;
            }
        }
    }
}

template <typename T>
void dft_naive(std::vector<std::complex<T>>& v, bool inverse) {
    const int n = static_cast<int>(v.size());
    const T sign = inverse ? T(1) : T(-1);
    std::vector<std::complex<T>> out(n);
    for (int p = 0; p < n; ++p) {
        std::complex<T> acc(0, 0);
        for (int m = 0; m < n; ++m) {
            const T ang = sign * T(2) * static_cast<T>(M_PI) * static_cast<T>(p) *
                          static_cast<T>(m) / static_cast<T>(n);
            acc += v[m] * std::complex<T>(std::cos(ang), std::sin(ang));
        }
        out[p] = acc;
    }
    v = std::move(out);
}

// Unnormalized 2-D transform of one plane, rows then columns.
template <typename T>
void dft_2d_plane(std::complex<T>* plane, int h, int w, bool inverse) {
    std::vector<std::complex<T>> line;
    line.resize(w);
    for (int y = 0; y < h; ++y) {
        std::copy(plane + static_cast<std::size_t>(y) * w,
                  plane + static_cast<std::size_t>(y + 1) * w, line.begin());
        dft_1d(line, inverse);
        std::copy(line.begin(), line.end(), plane + static_cast<std::size_t>(y) * w);
    }
    line.resize(h);
    for (int x = 0; x < w; ++x) {
        for (int y = 0; y < h; ++y) line[y] = plane[static_cast<std::size_t>(y) * w + x];
        dft_1d(line, inverse);
        for (int y = 0; y < h; ++y) plane[static_cast<std::size_t>(y) * w + x] = line[y];
    }
}

}  // namespace

template <typename T>
void dft_1d(std::vector<std::complex<T>>& v, bool inverse) {
    if (v.empty()) return;
    if (is_pow2(static_cast<int>(v.size())))
        fft_radix2(v, inverse);
    else
        dft_naive(v, inverse);
}

template <typename T>
Spectrum<T> forward_dft(const Tensor<T>& img) {
    if (img.rank() != 3) throw std::invalid_argument("forward_dft: expected C x H x W input");
    if (!all_finite(img)) throw std::invalid_argument("forward_dft: non-finite input");
    const int C = img.dim(0), H = img.dim(1), W = img.dim(2);
    Spectrum<T> spec(C, H, W);
    const T norm = T(1) / std::sqrt(static_cast<T>(H) * static_cast<T>(W));
    for (int c = 0; c < C; ++c) {
        std::complex<T>* plane = &spec.at(c, 0, 0);
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x)
                plane[static_cast<std::size_t>(y) * W + x] = std::complex<T>(img.at(c, y, x), 0);
        dft_2d_plane(plane, H, W, /*inverse=*/false);
        for (std::size_t i = 0; i < static_cast<std::size_t>(H) * W; ++i) plane[i] *= norm;
    }
    return spec;
}

template <typename T>
InverseDftResult<T> inverse_dft(const Spectrum<T>& spec) {
    if (spec.channels <= 0 || spec.height <= 0 || spec.width <= 0)
        throw std::invalid_argument("inverse_dft: empty spectrum");
    const int C = spec.channels, H = spec.height, W = spec.width;
    InverseDftResult<T> res{Tensor<T>({C, H, W}), T(0)};
    const T norm = T(1) / std::sqrt(static_cast<T>(H) * static_cast<T>(W));
    std::vector<std::complex<T>> plane(static_cast<std::size_t>(H) * W);
    for (int c = 0; c < C; ++c) {
        std::copy(&spec.at(c, 0, 0), &spec.at(c, 0, 0) + plane.size(), plane.begin());
        dft_2d_plane(plane.data(), H, W, /*inverse=*/true);
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                const std::complex<T> z = plane[static_cast<std::size_t>(y) * W + x] * norm;
                res.image.at(c, y, x) = z.real();
                res.max_imag_residue = std::max(res.max_imag_residue, std::abs(z.imag()));
            }
    }
    return res;
}

template <typename T>
PackedSpectrum<T> pack_spectrum(const Spectrum<T>& spec, PackLayout layout) {
    const int C = spec.channels, H = spec.height, W = spec.width;
    PackedSpectrum<T> out{Tensor<T>({2 * C, H, W}), layout};
    for (int c = 0; c < C; ++c)
        for (int p = 0; p < H; ++p)
            for (int q = 0; q < W; ++q) {
                const std::complex<T> z = spec.at(c, p, q);
                if (layout == PackLayout::real_imag) {
                    out.planes.at(2 * c, p, q) = z.real();
                    out.planes.at(2 * c + 1, p, q) = z.imag();
                } else {
                    out.planes.at(2 * c, p, q) = std::abs(z);
                    out.planes.at(2 * c + 1, p, q) = std::arg(z);
                }
            }
    return out;
}

template <typename T>
Spectrum<T> unpack_spectrum(const PackedSpectrum<T>& packed) {
    if (packed.planes.rank() != 3) throw std::invalid_argument("unpack_spectrum: expected planes tensor");
    const int P = packed.planes.dim(0);
    if (P % 2 != 0)
        throw std::invalid_argument("unpack_spectrum: odd plane count " + std::to_string(P));
    const int C = P / 2, H = packed.planes.dim(1), W = packed.planes.dim(2);
    Spectrum<T> spec(C, H, W);
    for (int c = 0; c < C; ++c)
        for (int p = 0; p < H; ++p)
            for (int q = 0; q < W; ++q) {
                const T a = packed.planes.at(2 * c, p, q);
                const T b = packed.planes.at(2 * c + 1, p, q);
                spec.at(c, p, q) = packed.layout == PackLayout::real_imag
                                       ? std::complex<T>(a, b)
                                       : std::polar(a, b);
            }
    return spec;
}

template <typename T>
double verify_masking_identity(const Tensor<T>& img, const Tensor<T>& mask) {
    if (img.rank() != 3 || mask.rank() != 3)
        throw std::invalid_argument("verify_masking_identity: expected C x H x W tensors");
    const int C = img.dim(0), H = img.dim(1), W = img.dim(2);
    if (mask.dim(1) != H || mask.dim(2) != W)
        throw std::invalid_argument("verify_masking_identity: spatial size mismatch");
    const bool broadcast_mask = mask.dim(0) == 1 && C > 1;
    if (!broadcast_mask && mask.dim(0) != C)
        throw std::invalid_argument("verify_masking_identity: channel mismatch");

    const double k = 1.0 / std::sqrt(static_cast<double>(H) * static_cast<double>(W));
    double residual = 0.0;
    for (int c = 0; c < C; ++c) {
        Tensor<double> ic({1, H, W}), mc({1, H, W}), prod({1, H, W});
        const int mc_src = broadcast_mask ? 0 : c;
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                ic.at(0, y, x) = static_cast<double>(img.at(c, y, x));
                mc.at(0, y, x) = static_cast<double>(mask.at(mc_src, y, x));
                prod.at(0, y, x) = ic.at(0, y, x) * mc.at(0, y, x);
            }
        const Spectrum<double> lhs = forward_dft(prod);
        const Spectrum<double> a = forward_dft(ic);
        const Spectrum<double> b = forward_dft(mc);
        // direct circular convolution over all bins
        for (int p = 0; p < H; ++p)
            for (int q = 0; q < W; ++q) {
                std::complex<double> acc(0, 0);
                for (int r = 0; r < H; ++r) {
                    const int pr = (p - r + H) % H;
                    for (int s = 0; s < W; ++s)
                        acc += a.at(0, r, s) * b.at(0, pr, (q - s + W) % W);
                }
                residual = std::max(residual, std::abs(lhs.at(0, p, q) - k * acc));
            }
    }
    return residual;
}

template <typename T>
Tensor<T> spectrum_magnitude_map(const Spectrum<T>& spec) {
    const int C = spec.channels, H = spec.height, W = spec.width;
    Tensor<T> out({1, H, W});
    Tensor<T> chan({1, H, W});
    for (int c = 0; c < C; ++c) {
        T lo = std::numeric_limits<T>::max(), hi = std::numeric_limits<T>::lowest();
        for (int p = 0; p < H; ++p)
            for (int q = 0; q < W; ++q) {
                // shift zero frequency to the center
                const int sp = (p + H / 2) % H, sq = (q + W / 2) % W;
                const T v = std::log1p(std::abs(spec.at(c, p, q)));
                chan.at(0, sp, sq) = v;
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
        const T range = hi - lo;
        for (std::size_t i = 0; i < chan.numel(); ++i) {
            const T v = range > T(0) ? (chan[i] - lo) / range : T(0);
            out[i] += v / static_cast<T>(C);
        }
    }
    return out;
}

template <typename T>
std::vector<T> mask_spectrum_profile(const MaskSpec& m) {
    if (m.kind != MaskKind::regular)
        throw std::invalid_argument("mask_spectrum_profile: unsupported for irregular masks");
    Tensor<T> grid({1, m.height, m.width});
    for (int y = 0; y < m.height; ++y)
        for (int x = 0; x < m.width; ++x) grid.at(0, y, x) = static_cast<T>(m.at(y, x));
    const Spectrum<T> spec = forward_dft(grid);
    std::vector<T> profile(m.height);
    for (int p = 0; p < m.height; ++p) {
        const T mag = std::abs(spec.at(0, p, 0));
        profile[p] = mag * mag;
    }
    return profile;
}

void save_grayscale_png(const Tensor<float>& plane, const std::string& path) {
    if (plane.rank() != 3 || plane.dim(0) != 1)
        throw std::invalid_argument("save_grayscale_png: expected 1 x H x W");
    const int H = plane.dim(1), W = plane.dim(2);
    cv::Mat gray(H, W, CV_8UC1);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            const float v = std::clamp(plane.at(0, y, x), 0.0f, 1.0f);
            gray.at<std::uint8_t>(y, x) = static_cast<std::uint8_t>(std::lround(v * 255.0f));
        }
    if (!cv::imwrite(path, gray)) throw std::runtime_error("save_grayscale_png: cannot write " + path);
}

// explicit instantiations
template void dft_1d<float>(std::vector<std::complex<float>>&, bool);
template void dft_1d<double>(std::vector<std::complex<double>>&, bool);
template Spectrum<float> forward_dft<float>(const Tensor<float>&);
template Spectrum<double> forward_dft<double>(const Tensor<double>&);
template InverseDftResult<float> inverse_dft<float>(const Spectrum<float>&);
template InverseDftResult<double> inverse_dft<double>(const Spectrum<double>&);
template PackedSpectrum<float> pack_spectrum<float>(const Spectrum<float>&, PackLayout);
template PackedSpectrum<double> pack_spectrum<double>(const Spectrum<double>&, PackLayout);
template Spectrum<float> unpack_spectrum<float>(const PackedSpectrum<float>&);
template Spectrum<double> unpack_spectrum<double>(const PackedSpectrum<double>&);
template double verify_masking_identity<float>(const Tensor<float>&, const Tensor<float>&);
template double verify_masking_identity<double>(const Tensor<double>&, const Tensor<double>&);
template Tensor<float> spectrum_magnitude_map<float>(const Spectrum<float>&);
template Tensor<double> spectrum_magnitude_map<double>(const Spectrum<double>&);
template std::vector<float> mask_spectrum_profile<float>(const MaskSpec&);
template std::vector<double> mask_spectrum_profile<double>(const MaskSpec&);

}  // namespace fdi
