/*
 * Copyright 2026 the iass authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <complex>
#include <cstddef>
#include <vector>

namespace iass {

/// In-place iterative radix-2 FFT. a.size() must be a power of two.
/// The inverse transform includes the 1/N normalization.
void fft_inplace(std::vector<std::complex<double>>& a, bool inverse);

/// Real-input forward transform: returns n/2+1 non-redundant bins.
/// n must be a power of two.
std::vector<std::complex<double>> rfft(const double* x, size_t n);

/// Inverse of rfft: reconstructs n real samples from n/2+1 bins.
std::vector<double> irfft(const std::vector<std::complex<double>>& spectrum,
                          size_t n);

/// Smallest power of two >= n (n >= 1).
size_t next_pow2(size_t n);

/// True if n is a power of two (n >= 1).
bool is_pow2(size_t n);

}  // namespace iass
