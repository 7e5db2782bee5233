// SPDX-License-Identifier: Apache-2.0
//
// DFT beamforming codebooks, exhaustive pair sweep and the argmax beam
// selection that labels the datasets.

#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "beamtrack/linalg.hpp"
#include "beamtrack/mimo.hpp"

namespace beamtrack {

enum class CodebookSide { transmitter, receiver };

struct Codebook {
    std::vector<CVec> vectors;
    CodebookSide side = CodebookSide::transmitter;

    std::size_t size() const { return vectors.size(); }
    std::size_t n_antennas() const { return vectors.empty() ? 0 : vectors.front().size(); }
};

// Codeword m, entry n: (1/sqrt(N)) exp(-i 2 pi n m / M). Codewords are
// unit-norm; with M = N the codebook matrix is unitary.
inline Codebook dft_codebook(int n_antennas, int n_codewords,
                             CodebookSide side = CodebookSide::transmitter) {
    if (n_antennas < 1)
        throw std::invalid_argument("dft_codebook: n_antennas must be >= 1");
    if (n_codewords < n_antennas)
        throw std::invalid_argument("dft_codebook: n_codewords must be >= n_antennas");
    const double scale = 1.0 / std::sqrt(static_cast<double>(n_antennas));
    Codebook cb;
    cb.side = side;
    cb.vectors.reserve(static_cast<std::size_t>(n_codewords));
    for (int m = 0; m < n_codewords; ++m) {
        CVec v(static_cast<std::size_t>(n_antennas));
        const double step = -2.0 * std::numbers::pi * static_cast<double>(m) / n_codewords;
        for (int n = 0; n < n_antennas; ++n)
            v[static_cast<std::size_t>(n)] = std::polar(scale, step * n);
        cb.vectors.push_back(std::move(v));
    }
    return cb;
}

struct SweepResult {
    std::size_t m_tx = 0;        // codewords on the transmit side
    std::size_t m_rx = 0;        // codewords on the receive side
    std::vector<double> gains;   // |y| for every pair, row-major [tx][rx]
    int best_tx = 0;
    int best_rx = 0;
    int best_flat = 0;           // best_tx * m_rx + best_rx
    double best_gain = 0.0;

    double gain(std::size_t tx, std::size_t rx) const { return gains[tx * m_rx + rx]; }
};

// Evaluates |w_q^H H f_p| for every codeword pair and returns the full gain
// table plus the argmax. Ties break toward the lowest flat index, so the
// result does not depend on evaluation order.
inline SweepResult sweep(const CMat& h, const Codebook& ct, const Codebook& cr) {
    if (ct.size() == 0 || cr.size() == 0)
        throw std::invalid_argument("sweep: empty codebook");
    if (ct.n_antennas() != h.cols())
        throw std::invalid_argument("sweep: transmit codeword length does not match N_tx");
    if (cr.n_antennas() != h.rows())
        throw std::invalid_argument("sweep: receive codeword length does not match N_rx");

    SweepResult res;
    res.m_tx = ct.size();
    res.m_rx = cr.size();
    res.gains.resize(res.m_tx * res.m_rx);
    double best = -1.0;
    for (std::size_t p = 0; p < res.m_tx; ++p) {
        // H f_p is shared across all combiners for this precoder.
        const CVec hf = h.apply(ct.vectors[p]);
        for (std::size_t q = 0; q < res.m_rx; ++q) {
            const double g = std::abs(inner(cr.vectors[q], hf));
            res.gains[p * res.m_rx + q] = g;
            if (g > best) {
                best = g;
                res.best_tx = static_cast<int>(p);
                res.best_rx = static_cast<int>(q);
            }
        }
    }
    res.best_flat = static_cast<int>(res.best_tx * static_cast<int>(res.m_rx) + res.best_rx);
    res.best_gain = best;
    return res;
}

// Azimuth a DFT codeword points at: inverse of the steering phase relation.
// The codeword frequency m/M is mapped to the principal interval [-0.5, 0.5)
// and divided by the spacing ratio; throws when that exceeds the sin range.
inline double beam_broadside_angle(int m, const ArrayConfig& cfg, int n_codewords) {
    cfg.validate();
    if (n_codewords < 1)
        throw std::invalid_argument("beam_broadside_angle: n_codewords must be >= 1");
    if (m < 0 || m >= n_codewords)
        throw std::invalid_argument("beam_broadside_angle: codeword index out of range");
    double omega = static_cast<double>(m) / n_codewords;
    if (omega >= 0.5) omega -= 1.0;
    const double s = omega / cfg.spacing_ratio;
    if (s < -1.0 || s > 1.0)
        throw std::invalid_argument("beam_broadside_angle: spatial frequency not reachable");
    return std::asin(s);
}

}  // namespace beamtrack
