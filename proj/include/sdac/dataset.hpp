#pragma once
// Deterministic procedural grayscale images: oriented gradients plus
// Gaussian blobs, optionally mixed with a checkerboard. Pixel values in
// [0, 1]; the population mean sits near 0.5 by construction.

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "sdac/rng.hpp"
#include "sdac/tensor.hpp"

namespace sdac {

inline Tensor gen_synthetic_image(std::size_t h, std::size_t w, SeededRng& rng) {
    Tensor img({h, w});
    // Oriented linear gradient centered at 0.5.
    const double theta = 2.0 * 3.14159265358979323846 * rng.next_double();
    const double gx = std::cos(theta), gy = std::sin(theta);
    const double amp = 0.2 + 0.3 * rng.next_double();
    for (std::size_t i = 0; i < h; ++i)
        for (std::size_t j = 0; j < w; ++j) {
            const double u = (double(j) / double(w - 1) - 0.5);
            const double v = (double(i) / double(h - 1) - 0.5);
            img.at(i, j) = 0.5 + amp * (gx * u + gy * v);
        }
    // 1-3 signed Gaussian blobs.
    const std::size_t blobs = 1 + rng.next_index(3);
    for (std::size_t b = 0; b < blobs; ++b) {
        const double cy = rng.next_double() * double(h - 1);
        const double cx = rng.next_double() * double(w - 1);
        const double sigma = 1.0 + 2.5 * rng.next_double();
        const double a = (rng.next_double() < 0.5 ? -1.0 : 1.0) * (0.2 + 0.4 * rng.next_double());
        for (std::size_t i = 0; i < h; ++i)
            for (std::size_t j = 0; j < w; ++j) {
                const double dy = double(i) - cy, dx = double(j) - cx;
                img.at(i, j) += a * std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
            }
    }
    // 2-4 sinusoidal gratings: compressible detail whose reconstruction
    // needs latent precision, so coarse quantization visibly costs PSNR.
    const std::size_t gratings = 3 + rng.next_index(3);
    for (std::size_t g = 0; g < gratings; ++g) {
        const double phi = 2.0 * 3.14159265358979323846 * rng.next_double();
        const double freq = 0.5 + 3.5 * rng.next_double();  // cycles across the image
        const double phase = 2.0 * 3.14159265358979323846 * rng.next_double();
        const double ga = 0.08 + 0.14 * rng.next_double();
        const double kx = std::cos(phi) * freq, ky = std::sin(phi) * freq;
        for (std::size_t i = 0; i < h; ++i)
            for (std::size_t j = 0; j < w; ++j) {
                const double u = double(j) / double(w - 1), v = double(i) / double(h - 1);
                img.at(i, j) += ga * std::sin(2.0 * 3.14159265358979323846 *
                                                  (kx * u + ky * v) +
                                              phase);
            }
    }
    // Occasionally blend in a checkerboard.
    if (rng.next_double() < 0.3) {
        const std::size_t cell = 2 + rng.next_index(3);
        const double mix = 0.15 + 0.2 * rng.next_double();
        for (std::size_t i = 0; i < h; ++i)
            for (std::size_t j = 0; j < w; ++j) {
                const double cb = ((i / cell + j / cell) % 2 == 0) ? 1.0 : 0.0;
                img.at(i, j) = (1.0 - mix) * img.at(i, j) + mix * cb;
            }
    }
    for (double& p : img.data) p = std::clamp(p, 0.0, 1.0);
    return img;
}

inline std::vector<Tensor> gen_synthetic_dataset(std::size_t n, std::size_t h,
                                                 std::size_t w, std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("gen_synthetic_dataset: n must be >= 1");
    SeededRng rng(seed);
    std::vector<Tensor> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(gen_synthetic_image(h, w, rng));
    return out;
}

}  // namespace sdac
