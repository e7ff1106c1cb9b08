#pragma once

#include <complex>
#include <vector>

namespace sfda {

// 2-D DFT over a row-major H x W grid. Thin wrapper over a radix-handling
// 1-D FFT; sizes need not be powers of two.
using ComplexGrid = std::vector<std::complex<double>>;

ComplexGrid fft2d(const std::vector<double>& real, int h, int w);
std::vector<std::complex<double>> ifft2d(const ComplexGrid& spec, int h, int w);

}  // namespace sfda
