#pragma once
// Dense row-major f64 tensor plus the small set of array ops the rest of
// the toolkit is built on. Everything is 64-bit; see README for rationale.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace sdac {

struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> s, double fill = 0.0)
        : shape(std::move(s)), data(numel_of(shape), fill) {}
    Tensor(std::vector<std::size_t> s, std::vector<double> d)
        : shape(std::move(s)), data(std::move(d)) {
        if (numel_of(shape) != data.size())
            throw std::invalid_argument("Tensor: shape/data size mismatch");
    }

    static std::size_t numel_of(const std::vector<std::size_t>& s) {
        std::size_t n = 1;
        for (std::size_t d : s) {
            if (d == 0) throw std::invalid_argument("Tensor: zero dimension");
            n *= d;
        }
        return n;
    }

    std::size_t numel() const { return data.size(); }
    std::size_t dim(std::size_t i) const { return shape.at(i); }

    double& operator[](std::size_t i) { return data[i]; }
    double operator[](std::size_t i) const { return data[i]; }

    // 2-D accessors; valid when shape is [rows, cols].
    std::size_t rows() const { return shape.at(0); }
    std::size_t cols() const { return shape.at(1); }
    double& at(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    bool all_finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }
};

inline void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b))
        throw std::invalid_argument(std::string(op) + ": shape mismatch");
}

inline Tensor add(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "add");
    Tensor r = a;
    for (std::size_t i = 0; i < r.numel(); ++i) r.data[i] += b.data[i];
    return r;
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "sub");
    Tensor r = a;
    for (std::size_t i = 0; i < r.numel(); ++i) r.data[i] -= b.data[i];
    return r;
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "mul");
    Tensor r = a;
    for (std::size_t i = 0; i < r.numel(); ++i) r.data[i] *= b.data[i];
    return r;
}

inline Tensor scale(const Tensor& a, double c) {
    Tensor r = a;
    for (double& v : r.data) v *= c;
    return r;
}

inline Tensor shift(const Tensor& a, double c) {
    Tensor r = a;
    for (double& v : r.data) v += c;
    return r;
}

// a[m,k] * b[k,n] -> [m,n]
inline Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.shape.size() != 2 || b.shape.size() != 2 || a.cols() != b.rows())
        throw std::invalid_argument("matmul: incompatible shapes");
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    Tensor r({m, n});
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
            const double av = a.data[i * k + p];
            if (av == 0.0) continue;
            const double* brow = &b.data[p * n];
            double* rrow = &r.data[i * n];
            for (std::size_t j = 0; j < n; ++j) rrow[j] += av * brow[j];
        }
    }
    return r;
}

inline double sum(const Tensor& a) {
    return std::accumulate(a.data.begin(), a.data.end(), 0.0);
}

inline double mean(const Tensor& a) { return sum(a) / double(a.numel()); }

inline double sum_sq(const Tensor& a) {
    double s = 0.0;
    for (double v : a.data) s += v * v;
    return s;
}

// Argmin along the last axis; ties resolve to the lowest index.
inline std::vector<std::size_t> argmin_last_axis(const Tensor& a) {
    if (a.shape.empty()) throw std::invalid_argument("argmin_last_axis: scalar input");
    const std::size_t inner = a.shape.back();
    const std::size_t outer = a.numel() / inner;
    std::vector<std::size_t> out(outer);
    for (std::size_t i = 0; i < outer; ++i) {
        const double* row = &a.data[i * inner];
        std::size_t best = 0;
        for (std::size_t j = 1; j < inner; ++j)
            if (row[j] < row[best]) best = j;
        out[i] = best;
    }
    return out;
}

inline Tensor clamp(const Tensor& a, double lo, double hi) {
    Tensor r = a;
    for (double& v : r.data) v = std::clamp(v, lo, hi);
    return r;
}

}  // namespace sdac
