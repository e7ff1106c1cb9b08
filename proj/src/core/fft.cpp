#include "sfda/core/fft.hpp"

#include <unsupported/Eigen/FFT>

namespace sfda {

ComplexGrid fft2d(const std::vector<double>& real, int h, int w) {
    Eigen::FFT<double> fft;
    ComplexGrid spec(static_cast<size_t>(h) * w);
    std::vector<std::complex<double>> row(w), rowf(w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) row[x] = {real[static_cast<size_t>(y) * w + x], 0.0};
        fft.fwd(rowf, row);
        for (int x = 0; x < w; ++x) spec[static_cast<size_t>(y) * w + x] = rowf[x];
    }
    std::vector<std::complex<double>> col(h), colf(h);
    for (int x = 0; x < w; ++x) {
        for (int y = 0; y < h; ++y) col[y] = spec[static_cast<size_t>(y) * w + x];
        fft.fwd(colf, col);
        for (int y = 0; y < h; ++y) spec[static_cast<size_t>(y) * w + x] = colf[y];
    }
    return spec;
}

std::vector<std::complex<double>> ifft2d(const ComplexGrid& spec, int h, int w) {
    Eigen::FFT<double> fft;
    ComplexGrid out = spec;
    std::vector<std::complex<double>> col(h), coli(h);
    for (int x = 0; x < w; ++x) {
        for (int y = 0; y < h; ++y) col[y] = out[static_cast<size_t>(y) * w + x];
        fft.inv(coli, col);
        for (int y = 0; y < h; ++y) out[static_cast<size_t>(y) * w + x] = coli[y];
    }
    std::vector<std::complex<double>> row(w), rowi(w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) row[x] = out[static_cast<size_t>(y) * w + x];
        fft.inv(rowi, row);
        for (int x = 0; x < w; ++x) out[static_cast<size_t>(y) * w + x] = rowi[x];
    }
    return out;
}

}  // namespace sfda
