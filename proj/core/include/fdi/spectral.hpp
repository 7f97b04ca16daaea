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

#include <complex>
#include <vector>

#include "fdi/masking.hpp"
#include "fdi/tensor.hpp"

namespace fdi {

/// Unitary 2-D DFT of an image, one complex plane per channel.
///
/// X[p,q] = 1/sqrt(H*W) * sum_{m,n} x[m,n] * exp(-2*pi*i*(p*m/H + q*n/W))
///
/// Unitary normalization makes Parseval hold with constant 1 and fixes the
/// masking-identity constant k = 1/sqrt(H*W).
template <typename T>
struct Spectrum {
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<std::complex<T>> data;  // channel-major, row-major per channel

    Spectrum() = default;
    Spectrum(int c, int h, int w)
        : channels(c), height(h), width(w),
          data(static_cast<std::size_t>(c) * h * w, std::complex<T>(0, 0)) {}

    std::complex<T>& at(int c, int p, int q) {
        return data[(static_cast<std::size_t>(c) * height + p) * width + q];
    }
    const std::complex<T>& at(int c, int p, int q) const {
        return data[(static_cast<std::size_t>(c) * height + p) * width + q];
    }
};

enum class PackLayout { real_imag, mag_phase };

/// Real-plane view of a spectrum for network I/O: 2C planes ordered
/// [R(c0), I(c0), R(c1), I(c1), ...] (or magnitude/phase pairs under the
/// alternative layout).
template <typename T>
struct PackedSpectrum {
    Tensor<T> planes;  // 2C x H x W
    PackLayout layout = PackLayout::real_imag;
};

template <typename T>
struct InverseDftResult {
    Tensor<T> image;      // real part, C x H x W
    T max_imag_residue;   // diagnostic: largest |imag| of the inverse transform
};

// ---- transforms -----------------------------------------------------------

/// In-place 1-D DFT of `v` (inverse when `inverse`), no normalization.
/// Radix-2 when the length is a power of two, direct summation otherwise.
template <typename T>
void dft_1d(std::vector<std::complex<T>>& v, bool inverse);

template <typename T>
Spectrum<T> forward_dft(const Tensor<T>& img);

template <typename T>
InverseDftResult<T> inverse_dft(const Spectrum<T>& spec);

// ---- packing ---------------------------------------------------------------

template <typename T>
PackedSpectrum<T> pack_spectrum(const Spectrum<T>& spec, PackLayout layout = PackLayout::real_imag);

template <typename T>
Spectrum<T> unpack_spectrum(const PackedSpectrum<T>& packed);

/// Scale applied to packed planes before they face a network (and undone
/// before the inverse transform); tames the DC bin's dynamic range.
template <typename T>
T network_spectrum_scale(int h, int w) {
    return T(1) / std::sqrt(static_cast<T>(h) * static_cast<T>(w));
}

template <typename T>
void scale_planes(PackedSpectrum<T>& packed, T factor) {
    for (std::size_t i = 0; i < packed.planes.numel(); ++i) packed.planes[i] *= factor;
}

// ---- verification and reporting --------------------------------------------

/// Residual of the convolution-multiplication identity
///   DFT(img*mask) == k * (DFT(img) circ-conv DFT(mask)),  k = 1/sqrt(H*W),
/// as a max-abs over all channels and bins. Computed in double precision with
/// the circular convolution evaluated by direct summation.
template <typename T>
double verify_masking_identity(const Tensor<T>& img, const Tensor<T>& mask);

/// Figure-ready view of a spectrum: zero frequency shifted to the center,
/// log(1+|X|), min-max normalized to [0,1] per channel, channel-averaged
/// to a single plane.
template <typename T>
Tensor<T> spectrum_magnitude_map(const Spectrum<T>& spec);

/// |M^f(p,0)|^2 along the first frequency axis of a regular mask's grid.
/// Throws for irregular masks.
template <typename T>
std::vector<T> mask_spectrum_profile(const MaskSpec& m);

/// Export a single-plane [0,1] map as an 8-bit grayscale PNG.
void save_grayscale_png(const Tensor<float>& plane, const std::string& path);

}  // namespace fdi
