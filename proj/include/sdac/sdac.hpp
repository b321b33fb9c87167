#pragma once
// The converter itself: quantization adapter (group-wise affine expand and
// combine), nearest-neighbor quantization to bits, inverse table lookup,
// the three-term stop-gradient training loss, and the ASE metric.
//
// Latent layout: a latent tensor of shape (c, h, w) is handled flat in
// row-major order; position i belongs to channel i / (h*w). Expanded
// signals are stored as [n, q] with one q-vector per latent position.

#include <cstddef>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "sdac/autodiff.hpp"
#include "sdac/codebook.hpp"
#include "sdac/tensor.hpp"

namespace sdac {

using Gradient = std::map<std::string, Tensor>;

struct LatentShape {
    std::size_t c = 0, h = 0, w = 0;
    std::size_t hw() const { return h * w; }
    std::size_t len() const { return c * h * w; }
};

// Per-channel affine maps R -> R^q (expand) and R^q -> R (combine).
// Weights are shared across spatial positions within a channel.
struct AdapterParams {
    Tensor expand_w;   // [c, q]
    Tensor expand_b;   // [c, q]
    Tensor combine_w;  // [c, q]
    Tensor combine_b;  // [c]

    std::size_t channels() const { return expand_w.rows(); }
    std::size_t q() const { return expand_w.cols(); }
};

inline AdapterParams adapter_init(std::size_t channels, std::size_t q, SeededRng& rng) {
    AdapterParams p;
    p.expand_w = Tensor({channels, q});
    p.expand_b = Tensor({channels, q});
    p.combine_w = Tensor({channels, q});
    p.combine_b = Tensor({channels});
    // Expand replicates the scalar; combine averages back. Small jitter
    // breaks the symmetry between the q copies.
    for (double& v : p.expand_w.data) v = 1.0 + 0.1 * (2.0 * rng.next_double() - 1.0);
    for (double& v : p.expand_b.data) v = 0.1 * (2.0 * rng.next_double() - 1.0);
    for (double& v : p.combine_w.data) v = 1.0 / double(q);
    return p;
}

struct SdacState {
    Codebook codebook;
    AdapterParams adapter;
    LatentShape latent;

    std::size_t q() const { return codebook.q; }

    void validate() const {
        if (codebook.q != adapter.q())
            throw std::invalid_argument("SdacState: codebook/adapter order mismatch");
        if (adapter.channels() != latent.c)
            throw std::invalid_argument("SdacState: adapter/latent channel mismatch");
    }
};

inline SdacState sdac_init(std::size_t q, LatentShape latent, SeededRng& rng) {
    SdacState st;
    st.codebook = codebook_init(q, rng);
    st.adapter = adapter_init(latent.c, q, rng);
    st.latent = latent;
    return st;
}

// s flat [n] (n a multiple of latent.len()) -> [n, q].
inline Tensor adapter_expand(const Tensor& s, const AdapterParams& p,
                             const LatentShape& latent) {
    if (s.numel() % latent.len() != 0 || p.channels() != latent.c)
        throw std::invalid_argument("adapter_expand: shape mismatch");
    const std::size_t n = s.numel(), q = p.q(), L = latent.len(), hw = latent.hw();
    Tensor out({n, q});
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t ch = (i % L) / hw;
        for (std::size_t j = 0; j < q; ++j)
            out.at(i, j) = s.data[i] * p.expand_w.at(ch, j) + p.expand_b.at(ch, j);
    }
    return out;
}

// [n, q] -> flat [n].
inline Tensor adapter_combine(const Tensor& sp, const AdapterParams& p,
                              const LatentShape& latent) {
    if (sp.shape.size() != 2 || sp.cols() != p.q() ||
        sp.rows() % latent.len() != 0 || p.channels() != latent.c)
        throw std::invalid_argument("adapter_combine: shape mismatch");
    const std::size_t n = sp.rows(), q = p.q(), L = latent.len(), hw = latent.hw();
    Tensor out({n});
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t ch = (i % L) / hw;
        double acc = p.combine_b[ch];
        for (std::size_t j = 0; j < q; ++j) acc += sp.at(i, j) * p.combine_w.at(ch, j);
        out.data[i] = acc;
    }
    return out;
}

struct QuantizeResult {
    std::vector<std::size_t> indices;  // one codebook index per position
    BitSequence bits;                  // n * q bits, big-endian per index
};

// Nearest codebook entry per position by squared Euclidean distance,
// lowest index on ties; bits are the concatenated index patterns.
inline QuantizeResult quantize(const Tensor& s_prime, const Codebook& cb) {
    if (s_prime.shape.size() != 2 || s_prime.cols() != cb.q)
        throw std::invalid_argument("quantize: expanded signal must be [n, q]");
    if (!cb.entries.all_finite())
        throw std::invalid_argument("quantize: non-finite codebook");
    const std::size_t n = s_prime.rows(), q = cb.q, count = cb.size();
    QuantizeResult r;
    r.indices.resize(n);
    r.bits.reserve(n * q);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t e = 0; e < count; ++e) {
            double d = 0.0;
            for (std::size_t j = 0; j < q; ++j) {
                const double diff = s_prime.at(i, j) - cb.entries.at(e, j);
                d += diff * diff;
            }
            if (d < best_d) {
                best_d = d;
                best = e;
            }
        }
        r.indices[i] = best;
        index_to_bits(best, q, r.bits);
    }
    return r;
}

inline std::vector<std::size_t> bits_to_indices(const BitSequence& b, std::size_t q) {
    if (b.size() % q != 0)
        throw std::invalid_argument("bits_to_indices: length not a multiple of q");
    std::vector<std::size_t> idx(b.size() / q);
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = bits_to_index(b, i * q, q);
    return idx;
}

// Table lookup: every q bits select one codebook entry.
inline Tensor dequantize(const BitSequence& b_hat, const Codebook& cb, std::size_t n) {
    if (b_hat.size() != n * cb.q)
        throw std::invalid_argument("dequantize: bit length mismatch");
    const auto idx = bits_to_indices(b_hat, cb.q);
    Tensor out({n, cb.q});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < cb.q; ++j)
            out.at(i, j) = cb.entries.at(idx[i], j);
    return out;
}

struct SdacLossResult {
    double loss = 0.0;
    double recon_term = 0.0;
    double codebook_term = 0.0;   // the alpha term, pre-weighting
    double commitment_term = 0.0; // the beta term, pre-weighting
    Gradient grads;               // expand_w/b, combine_w/b, codebook, s
};

// Three-term loss ||f_comb(ste) - s||^2 + alpha ||sg[s'] - shat'||^2 +
// beta ||s' - sg[shat']||^2 with ste = s' + sg[shat' - s'].
// `indices` are the post-channel codebook selections (constants on the tape).
inline SdacLossResult sdac_loss(const Tensor& s, const SdacState& st,
                                const std::vector<std::size_t>& indices,
                                double alpha, double beta) {
    if (alpha < 0.0 || beta < 0.0 || std::fabs(alpha + beta - 1.0) > 1e-12)
        throw std::invalid_argument("sdac_loss: need alpha, beta >= 0 with alpha + beta = 1");
    if (indices.size() != s.numel())
        throw std::invalid_argument("sdac_loss: one index per latent position required");
    st.validate();

    Tape tape;
    const Var vs = tape.leaf(s);
    const Var vew = tape.leaf(st.adapter.expand_w);
    const Var veb = tape.leaf(st.adapter.expand_b);
    const Var vcw = tape.leaf(st.adapter.combine_w);
    const Var vcb = tape.leaf(st.adapter.combine_b);
    const Var ve = tape.leaf(st.codebook.entries);

    const std::size_t L = st.latent.len(), hw = st.latent.hw();
    const Var sp = tape.group_affine_expand(vs, vew, veb, L, hw);
    const Var shat = tape.gather_rows(ve, indices);

    // Straight-through reconstruction path: value of shat, gradient of sp.
    const Var ste = tape.add(sp, tape.stop_grad(tape.sub(shat, sp)));
    const Var combined = tape.group_affine_combine(ste, vcw, vcb, L, hw, s.shape);
    const Var recon = tape.sum_sq(tape.sub(combined, vs));

    const Var term_a = tape.sum_sq(tape.sub(tape.stop_grad(sp), shat));
    const Var term_b = tape.sum_sq(tape.sub(sp, tape.stop_grad(shat)));

    const Var total = tape.add(recon, tape.add(tape.scale(term_a, alpha),
                                               tape.scale(term_b, beta)));
    tape.backward(total);

    SdacLossResult r;
    r.loss = tape.value(total)[0];
    r.recon_term = tape.value(recon)[0];
    r.codebook_term = tape.value(term_a)[0];
    r.commitment_term = tape.value(term_b)[0];
    r.grads["expand_w"] = tape.grad(vew);
    r.grads["expand_b"] = tape.grad(veb);
    r.grads["combine_w"] = tape.grad(vcw);
    r.grads["combine_b"] = tape.grad(vcb);
    r.grads["codebook"] = tape.grad(ve);
    r.grads["s"] = tape.grad(vs);
    return r;
}

struct AseWeights {
    double alpha = 1.0, beta = 1.0, gamma = 1.0;
};

// Average semantic error over N latent positions:
//   mean_i [ alpha ||a_i - s'_i|| + beta ||shat'_i - a_i|| + gamma |shat_i - s_i| ].
// The three components are also reported separately.
struct AseResult {
    double total = 0.0;
    double kl = 0.0;      // codebook-fit component (pre-weighting mean)
    double channel = 0.0; // channel-displacement component
    double quant = 0.0;   // end-to-end latent error component
};

inline AseResult ase(const Tensor& s, const Tensor& s_prime,
                     const Tensor& s_hat_prime, const Tensor& s_hat,
                     const Tensor& selected, AseWeights w) {
    const std::size_t n = s.numel();
    if (s_prime.shape.size() != 2 || !s_prime.same_shape(s_hat_prime) ||
        !s_prime.same_shape(selected) || s_prime.rows() != n || s_hat.numel() != n)
        throw std::invalid_argument("ase: inconsistent shapes");
    const std::size_t q = s_prime.cols();
    AseResult r;
    for (std::size_t i = 0; i < n; ++i) {
        double d_kl = 0.0, d_ch = 0.0;
        for (std::size_t j = 0; j < q; ++j) {
            const double a = selected.at(i, j);
            const double u = a - s_prime.at(i, j);
            const double v = s_hat_prime.at(i, j) - a;
            d_kl += u * u;
            d_ch += v * v;
        }
        r.kl += std::sqrt(d_kl);
        r.channel += std::sqrt(d_ch);
        r.quant += std::fabs(s_hat.data[i] - s.data[i]);
    }
    r.kl /= double(n);
    r.channel /= double(n);
    r.quant /= double(n);
    r.total = w.alpha * r.kl + w.beta * r.channel + w.gamma * r.quant;
    return r;
}

}  // namespace sdac
