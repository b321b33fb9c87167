#pragma once
// Netpbm grayscale PGM (P2 ASCII / P5 binary, maxval 255). Pixels map to
// [0, 1] on load; save rounds to the nearest 8-bit level.

#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "sdac/tensor.hpp"

namespace sdac {

namespace detail {

// Reads the next header token, skipping whitespace and # comments.
inline std::string pgm_token(std::istream& in) {
    std::string tok;
    int c;
    while ((c = in.get()) != EOF) {
        if (c == '#') {
            while ((c = in.get()) != EOF && c != '\n') {}
            continue;
        }
        if (std::isspace(c)) {
            if (!tok.empty()) break;
            continue;
        }
        tok.push_back(char(c));
    }
    if (tok.empty()) throw std::runtime_error("pgm: truncated header");
    return tok;
}

}  // namespace detail

inline Tensor load_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("pgm: cannot open " + path);
    const std::string magic = detail::pgm_token(in);
    if (magic != "P2" && magic != "P5")
        throw std::runtime_error("pgm: unsupported magic '" + magic + "' in " + path);
    const long w = std::stol(detail::pgm_token(in));
    const long h = std::stol(detail::pgm_token(in));
    const long maxval = std::stol(detail::pgm_token(in));
    if (w <= 0 || h <= 0) throw std::runtime_error("pgm: degenerate dimensions in " + path);
    if (maxval != 255) throw std::runtime_error("pgm: only maxval 255 supported");

    Tensor img({std::size_t(h), std::size_t(w)});
    if (magic == "P5") {
        std::vector<std::uint8_t> buf(std::size_t(w) * std::size_t(h));
        in.read(reinterpret_cast<char*>(buf.data()), std::streamsize(buf.size()));
        if (std::size_t(in.gcount()) != buf.size())
            throw std::runtime_error("pgm: truncated pixel payload in " + path);
        for (std::size_t i = 0; i < buf.size(); ++i) img.data[i] = double(buf[i]) / 255.0;
    } else {
        for (auto& px : img.data) {
            long v;
            if (!(in >> v)) throw std::runtime_error("pgm: truncated pixel payload in " + path);
            if (v < 0 || v > 255) throw std::runtime_error("pgm: pixel out of range in " + path);
            px = double(v) / 255.0;
        }
    }
    return img;
}

inline void save_pgm(const std::string& path, const Tensor& img, bool binary = true) {
    if (img.shape.size() != 2) throw std::invalid_argument("save_pgm: image must be 2-D");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("pgm: cannot write " + path);
    out << (binary ? "P5" : "P2") << "\n" << img.cols() << " " << img.rows() << "\n255\n";
    for (std::size_t i = 0; i < img.numel(); ++i) {
        const int v = int(std::lround(std::clamp(img.data[i], 0.0, 1.0) * 255.0));
        if (binary)
            out.put(char(std::uint8_t(v)));
        else
            out << v << ((i + 1) % img.cols() == 0 ? '\n' : ' ');
    }
    if (!out) throw std::runtime_error("pgm: write failure on " + path);
}

}  // namespace sdac
