#pragma once
// Learnable codebook of 2^q vectors in R^q and the fixed index <-> bit
// pattern bijection (big-endian, fixed width q).

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "sdac/channel.hpp"
#include "sdac/rng.hpp"
#include "sdac/tensor.hpp"

namespace sdac {

struct Codebook {
    std::size_t q = 0;
    Tensor entries;  // [2^q, q]

    std::size_t size() const { return std::size_t(1) << q; }
};

// Big-endian fixed-width binary of the index; the MAP bijection.
inline void index_to_bits(std::size_t index, std::size_t q, BitSequence& out) {
    if (index >= (std::size_t(1) << q))
        throw std::out_of_range("index_to_bits: index >= 2^q");
    for (std::size_t j = 0; j < q; ++j)
        out.push_back(std::uint8_t((index >> (q - 1 - j)) & 1));
}

inline std::size_t bits_to_index(const BitSequence& b, std::size_t offset, std::size_t q) {
    if (offset + q > b.size()) throw std::out_of_range("bits_to_index: out of range");
    std::size_t idx = 0;
    for (std::size_t j = 0; j < q; ++j) idx = (idx << 1) | std::size_t(b[offset + j] & 1);
    return idx;
}

// Entries drawn i.i.d. uniform in [-1, 1]^q, the expected dynamic range of
// normalized encoder outputs.
inline Codebook codebook_init(std::size_t q, SeededRng& rng) {
    if (q < 1 || q > 8) throw std::invalid_argument("codebook_init: q outside [1, 8]");
    Codebook cb;
    cb.q = q;
    cb.entries = Tensor({std::size_t(1) << q, q});
    for (double& v : cb.entries.data) v = 2.0 * rng.next_double() - 1.0;
    return cb;
}

}  // namespace sdac
