#pragma once
// Image quality metrics: MSE, PSNR (100 dB cap at zero MSE) and a
// multi-scale SSIM suited to small images.
//
// MS-SSIM details (documented, frozen): per scale the contrast*structure
// mean is taken with a Gaussian window (sigma 1.5, side min(11, min dim)
// forced odd), K1 = 0.01, K2 = 0.03, L = 1; scales are built by 2x2 mean
// pooling while the smaller dimension stays >= 4, capped at the standard 5;
// the standard exponents {0.0448, 0.2856, 0.3001, 0.2363, 0.1333} are
// truncated to the feasible scale count and renormalized; luminance enters
// once at the coarsest scale.

#include <cmath>
#include <stdexcept>
#include <vector>

#include "sdac/tensor.hpp"

namespace sdac {

inline double mse(const Tensor& x, const Tensor& y) {
    check_same_shape(x, y, "mse");
    double s = 0.0;
    for (std::size_t i = 0; i < x.numel(); ++i) {
        const double d = x.data[i] - y.data[i];
        s += d * d;
    }
    return s / double(x.numel());
}

inline constexpr double kPsnrCapDb = 100.0;

inline double psnr(const Tensor& x, const Tensor& y) {
    const double m = mse(x, y);
    if (m <= 0.0) return kPsnrCapDb;
    return std::min(kPsnrCapDb, 10.0 * std::log10(1.0 / m));
}

namespace detail {

inline Tensor downsample2(const Tensor& img) {
    const std::size_t h = img.rows() / 2, w = img.cols() / 2;
    Tensor out({h, w});
    for (std::size_t i = 0; i < h; ++i)
        for (std::size_t j = 0; j < w; ++j)
            out.at(i, j) = 0.25 * (img.at(2 * i, 2 * j) + img.at(2 * i, 2 * j + 1) +
                                   img.at(2 * i + 1, 2 * j) + img.at(2 * i + 1, 2 * j + 1));
    return out;
}

inline std::vector<double> gaussian_window(std::size_t side, double sigma) {
    std::vector<double> w(side * side);
    const double c = double(side - 1) / 2.0;
    double total = 0.0;
    for (std::size_t i = 0; i < side; ++i)
        for (std::size_t j = 0; j < side; ++j) {
            const double dy = double(i) - c, dx = double(j) - c;
            w[i * side + j] = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
            total += w[i * side + j];
        }
    for (double& v : w) v /= total;
    return w;
}

struct SsimTerms {
    double luminance = 0.0;
    double contrast_structure = 0.0;
};

// Mean SSIM terms over all fully-contained window positions.
inline SsimTerms ssim_scale(const Tensor& x, const Tensor& y) {
    const std::size_t h = x.rows(), w = x.cols();
    std::size_t side = std::min<std::size_t>(11, std::min(h, w));
    if (side % 2 == 0) --side;
    const auto win = gaussian_window(side, 1.5);
    const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
    SsimTerms t;
    std::size_t count = 0;
    for (std::size_t i = 0; i + side <= h; ++i)
        for (std::size_t j = 0; j + side <= w; ++j) {
            double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
            for (std::size_t a = 0; a < side; ++a)
                for (std::size_t b = 0; b < side; ++b) {
                    const double wv = win[a * side + b];
                    const double xv = x.at(i + a, j + b), yv = y.at(i + a, j + b);
                    mx += wv * xv;
                    my += wv * yv;
                    sxx += wv * xv * xv;
                    syy += wv * yv * yv;
                    sxy += wv * xv * yv;
                }
            sxx -= mx * mx;
            syy -= my * my;
            sxy -= mx * my;
            t.luminance += (2 * mx * my + c1) / (mx * mx + my * my + c1);
            t.contrast_structure += (2 * sxy + c2) / (sxx + syy + c2);
            ++count;
        }
    t.luminance /= double(count);
    t.contrast_structure /= double(count);
    return t;
}

}  // namespace detail

inline double ms_ssim(const Tensor& x, const Tensor& y) {
    check_same_shape(x, y, "ms_ssim");
    if (x.shape.size() != 2) throw std::invalid_argument("ms_ssim: images must be 2-D");
    if (std::min(x.rows(), x.cols()) < 4)
        throw std::invalid_argument("ms_ssim: image too small for one scale");
    static const double kWeights[5] = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};

    std::vector<Tensor> xs{x}, ys{y};
    while (xs.size() < 5 && std::min(xs.back().rows(), xs.back().cols()) / 2 >= 4) {
        xs.push_back(detail::downsample2(xs.back()));
        ys.push_back(detail::downsample2(ys.back()));
    }
    const std::size_t m = xs.size();
    double wsum = 0.0;
    for (std::size_t j = 0; j < m; ++j) wsum += kWeights[j];

    double result = 1.0;
    for (std::size_t j = 0; j < m; ++j) {
        const auto t = detail::ssim_scale(xs[j], ys[j]);
        const double expo = kWeights[j] / wsum;
        result *= std::pow(std::max(t.contrast_structure, 1e-12), expo);
        if (j + 1 == m) result *= std::pow(std::max(t.luminance, 1e-12), expo);
    }
    return result;
}

}  // namespace sdac
