#pragma once
// Binary symmetric channel, analog AWGN, closed-form BER/SNR conversions
// for BPSK/QPSK/M-QAM, and a Monte Carlo modem used as an independent
// cross-check of the closed forms.
//
// Conventions (see README): constellations are normalized to unit average
// symbol energy, so d^2 = 6/(M-1) for square M-QAM and d^2/(4 N0) =
// 3 snr / (2 (M-1)). For BPSK/QPSK `snr` is the per-bit ratio Eb/N0, which
// makes both share BER = erfc(sqrt(snr))/2; for M-QAM it is the per-symbol
// ratio Es/N0. Gray labeling is the reflected-binary code per I/Q axis.

#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "sdac/rng.hpp"
#include "sdac/special.hpp"
#include "sdac/tensor.hpp"

namespace sdac {

using BitSequence = std::vector<std::uint8_t>;

enum class Modulation { BPSK, QPSK, QAM16, QAM64 };

inline int modulation_order(Modulation m) {
    switch (m) {
        case Modulation::BPSK: return 2;
        case Modulation::QPSK: return 4;
        case Modulation::QAM16: return 16;
        case Modulation::QAM64: return 64;
    }
    throw std::invalid_argument("modulation_order: bad enum");
}

inline int bits_per_symbol(Modulation m) {
    switch (m) {
        case Modulation::BPSK: return 1;
        case Modulation::QPSK: return 2;
        case Modulation::QAM16: return 4;
        case Modulation::QAM64: return 6;
    }
    throw std::invalid_argument("bits_per_symbol: bad enum");
}

inline std::string modulation_name(Modulation m) {
    switch (m) {
        case Modulation::BPSK: return "bpsk";
        case Modulation::QPSK: return "qpsk";
        case Modulation::QAM16: return "16qam";
        case Modulation::QAM64: return "64qam";
    }
    return "?";
}

inline Modulation parse_modulation(const std::string& s) {
    if (s == "bpsk") return Modulation::BPSK;
    if (s == "qpsk") return Modulation::QPSK;
    if (s == "16qam" || s == "qam16") return Modulation::QAM16;
    if (s == "64qam" || s == "qam64") return Modulation::QAM64;
    throw std::invalid_argument("unknown modulation: " + s);
}

enum class ChannelKind { BSC, AWGN, MODULATED };

struct ChannelSpec {
    ChannelKind kind = ChannelKind::BSC;
    double flip_probability = 0.0;  // BSC, in [0, 0.5]
    double snr_db = 0.0;            // AWGN / MODULATED
    Modulation modulation = Modulation::BPSK;

    void validate() const {
        if (kind == ChannelKind::BSC &&
            (flip_probability < 0.0 || flip_probability > 0.5))
            throw std::invalid_argument("ChannelSpec: flip probability outside [0, 0.5]");
    }
};

// --- BSC ------------------------------------------------------------------

inline BitSequence bsc_transmit(const BitSequence& b, double p, SeededRng& rng) {
    if (p < 0.0 || p > 0.5)
        throw std::invalid_argument("bsc_transmit: p outside [0, 0.5]");
    BitSequence out = b;
    for (auto& bit : out)
        if (rng.next_double() < p) bit = std::uint8_t(1 - bit);
    return out;
}

// --- AWGN -----------------------------------------------------------------

inline Tensor awgn_transmit(const Tensor& s, double snr_db, SeededRng& rng) {
    if (s.numel() == 0) throw std::invalid_argument("awgn_transmit: empty signal");
    if (snr_db == std::numeric_limits<double>::infinity()) return s;
    const double sig_power = sum_sq(s) / double(s.numel());
    if (sig_power == 0.0)
        throw std::invalid_argument("awgn_transmit: zero-power signal, SNR undefined");
    const double noise_power = sig_power / std::pow(10.0, snr_db / 10.0);
    Tensor out = s;
    const double sigma = std::sqrt(noise_power);
    for (double& v : out.data) v += sigma * rng.next_gaussian();
    return out;
}

// --- Closed-form BER/SER --------------------------------------------------

// Per-axis (sqrt(M)-PAM) symbol error rate of square M-QAM at unit average
// symbol energy: (sqrt(M)-1)/sqrt(M) * erfc(sqrt(3 snr / (2 (M-1)))).
inline double ser_per_axis(int M, double snr) {
    if (M != 4 && M != 16 && M != 64)
        throw std::invalid_argument("ser_per_axis: M must be 4, 16 or 64");
    if (snr <= 0.0) throw std::invalid_argument("ser_per_axis: snr must be > 0");
    const double rootM = std::sqrt(double(M));
    const double arg = std::sqrt(3.0 * snr / (2.0 * double(M - 1)));
    return (rootM - 1.0) / rootM * sdac::erfc(arg);
}

// Exact symbol error rate of square M-QAM from the per-axis rate.
inline double ser_mqam(int M, double snr) {
    // pa * (2 - pa) == 1 - (1 - pa)^2 without the cancellation at tiny pa.
    const double pa = ser_per_axis(M, snr);
    return pa * (2.0 - pa);
}

// The low-SER shortcut 2*P_axis, exposed for comparison only.
inline double ser_mqam_approx(int M, double snr) { return 2.0 * ser_per_axis(M, snr); }

// Gray-code BER of M-QAM under the one-error-bit-per-error-symbol model.
inline double ber_mqam(int M, double snr) {
    if (M != 16 && M != 64)
        throw std::invalid_argument("ber_mqam: M must be 16 or 64");
    return ser_mqam(M, snr) / std::log2(double(M));
}

inline double ber_bpsk_qpsk(double snr) {
    if (snr < 0.0) throw std::invalid_argument("ber_bpsk_qpsk: snr must be >= 0");
    return 0.5 * sdac::erfc(std::sqrt(snr));
}

inline double ber_closed_form(Modulation m, double snr) {
    switch (m) {
        case Modulation::BPSK:
        case Modulation::QPSK: return ber_bpsk_qpsk(snr);
        case Modulation::QAM16: return ber_mqam(16, snr);
        case Modulation::QAM64: return ber_mqam(64, snr);
    }
    throw std::invalid_argument("ber_closed_form: bad enum");
}

// Inverse of ber_closed_form by bisection on the (monotone decreasing) BER.
inline double snr_for_ber(double target_ber, Modulation m) {
    if (target_ber <= 0.0 || target_ber > 0.5)
        throw std::invalid_argument("snr_for_ber: target outside (0, 0.5]");
    double lo = 1e-12, hi = 1e7;
    const double ber_lo = ber_closed_form(m, lo);
    if (target_ber > ber_lo)
        throw std::invalid_argument("snr_for_ber: target BER unreachable for modulation");
    if (ber_closed_form(m, hi) > target_ber)
        throw std::invalid_argument("snr_for_ber: target BER below resolvable range");
    for (int it = 0; it < 500; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (ber_closed_form(m, mid) > target_ber)
            lo = mid;
        else
            hi = mid;
        if (hi - lo < 1e-15 * hi) break;
    }
    return 0.5 * (lo + hi);
}

// --- Monte Carlo modem ----------------------------------------------------

namespace detail {

// Reflected-binary Gray code and its inverse.
inline unsigned gray_encode(unsigned n) { return n ^ (n >> 1); }
inline unsigned gray_decode(unsigned g) {
    unsigned n = g;
    for (unsigned shift = 1; shift < 16; shift <<= 1) n ^= n >> shift;
    return n;
}

// Amplitude of PAM index k (0..L-1) before energy normalization: -(L-1)+2k.
inline double pam_level(unsigned k, unsigned L) {
    return -double(L - 1) + 2.0 * double(k);
}

// Per-axis noise standard deviation realizing the closed-form convention.
inline double axis_sigma(Modulation m, double snr) {
    switch (m) {
        case Modulation::BPSK:  // amplitude 1, BER = erfc(sqrt(snr))/2
            return 1.0 / std::sqrt(2.0 * snr);
        case Modulation::QPSK:  // amplitude 1/sqrt(2) per axis, snr = Eb/N0
            return 0.5 / std::sqrt(snr);
        case Modulation::QAM16:
        case Modulation::QAM64: {
            // N0 = Es/snr = 1/snr, sigma^2 = N0/2 per axis
            return 1.0 / std::sqrt(2.0 * snr);
        }
    }
    throw std::invalid_argument("axis_sigma: bad enum");
}

// Per-axis amplitude scale giving unit average symbol energy.
inline double qam_scale(int M) { return std::sqrt(3.0 / (2.0 * double(M - 1))); }

}  // namespace detail

struct ModemStats {
    std::uint64_t bit_errors = 0;
    std::uint64_t symbol_errors = 0;
    std::uint64_t n_bits = 0;
    std::uint64_t n_symbols = 0;
    double ber() const { return double(bit_errors) / double(n_bits); }
    double ser() const { return double(symbol_errors) / double(n_symbols); }
    // BER under the closed forms' one-error-bit-per-error-symbol model.
    double ber_nearest_neighbor() const {
        return double(symbol_errors) / double(n_bits);
    }
};

// Gray-maps random bits onto the unit-energy constellation, adds AWGN at
// the modulation's snr convention, hard-demodulates by nearest point.
inline ModemStats mc_modem_run(Modulation m, double snr, std::uint64_t n_bits,
                               SeededRng& rng) {
    const int bps = bits_per_symbol(m);
    if (n_bits < 10000 || n_bits % std::uint64_t(bps) != 0)
        throw std::invalid_argument("mc_modem: n_bits must be >= 1e4 and divisible by bits/symbol");
    const double sigma = detail::axis_sigma(m, snr);
    ModemStats st;
    st.n_bits = n_bits;
    st.n_symbols = n_bits / std::uint64_t(bps);

    if (m == Modulation::BPSK) {
        for (std::uint64_t i = 0; i < st.n_symbols; ++i) {
            const unsigned bit = unsigned(rng.next_u64() & 1);
            const double tx = bit ? 1.0 : -1.0;
            const double rx = tx + sigma * rng.next_gaussian();
            const unsigned hat = rx >= 0.0 ? 1u : 0u;
            if (hat != bit) {
                ++st.bit_errors;
                ++st.symbol_errors;
            }
        }
        return st;
    }

    // Square constellations: independent Gray-coded PAM per axis.
    const int M = modulation_order(m);
    const unsigned L = unsigned(std::lround(std::sqrt(double(M))));
    const int axis_bits = bps / 2;
    const double scale = m == Modulation::QPSK ? 1.0 / std::sqrt(2.0)
                                               : detail::qam_scale(M);
    for (std::uint64_t i = 0; i < st.n_symbols; ++i) {
        bool sym_err = false;
        for (int axis = 0; axis < 2; ++axis) {
            const unsigned bits = unsigned(rng.next_u64() & ((1u << axis_bits) - 1));
            const unsigned k = detail::gray_decode(bits) % L;  // Gray label -> level index
            const double tx = scale * detail::pam_level(k, L);
            const double rx = tx + sigma * rng.next_gaussian();
            // Nearest level by slicing.
            double kd = std::floor((rx / scale + double(L - 1)) / 2.0 + 0.5);
            const unsigned khat = unsigned(std::clamp(kd, 0.0, double(L - 1)));
            const unsigned bhat = detail::gray_encode(khat);
            if (khat != k) sym_err = true;
            unsigned diff = bhat ^ bits;
            while (diff) {
                st.bit_errors += diff & 1u;
                diff >>= 1;
            }
        }
        if (sym_err) ++st.symbol_errors;
    }
    return st;
}

// Empirical bit error rate of the Monte Carlo modem.
inline double mc_modem_ber(Modulation m, double snr, std::uint64_t n_bits,
                           SeededRng& rng) {
    return mc_modem_run(m, snr, n_bits, rng).ber();
}

}  // namespace sdac
