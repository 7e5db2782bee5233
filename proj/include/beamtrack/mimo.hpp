// SPDX-License-Identifier: Apache-2.0
//
// Narrowband geometric MIMO channel math: ULA steering vectors, channel
// assembly from multipath rays, first-order AR channel evolution and
// beamformed received gain.

#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <stdexcept>

#include "beamtrack/linalg.hpp"
#include "beamtrack/rng.hpp"

namespace beamtrack {

struct ArrayConfig {
    int n_elements = 1;
    double spacing_ratio = 0.5;  // element spacing d / lambda

    void validate() const {
        if (n_elements < 1)
            throw std::invalid_argument("ArrayConfig: n_elements must be >= 1");
        if (!(spacing_ratio > 0.0) || !std::isfinite(spacing_ratio))
            throw std::invalid_argument("ArrayConfig: spacing_ratio must be positive");
    }
};

// One propagation path. Angles are in the local frame of the respective
// array: azimuth in [-pi, pi], elevation in [-pi/2, pi/2]. The delay is kept
// for dataset fidelity; the narrowband channel sum does not use it.
struct RayPath {
    cxd gain{0.0, 0.0};
    double aod_az = 0.0;
    double aod_el = 0.0;
    double aoa_az = 0.0;
    double aoa_el = 0.0;
    double delay_s = 0.0;

    void validate() const {
        const double pi = std::numbers::pi;
        auto in_range = [](double v, double lo, double hi) {
            return std::isfinite(v) && v >= lo && v <= hi;
        };
        if (!in_range(aod_az, -pi, pi) || !in_range(aoa_az, -pi, pi))
            throw std::invalid_argument("RayPath: azimuth out of [-pi, pi]");
        if (!in_range(aod_el, -pi / 2, pi / 2) || !in_range(aoa_el, -pi / 2, pi / 2))
            throw std::invalid_argument("RayPath: elevation out of [-pi/2, pi/2]");
        if (!std::isfinite(gain.real()) || !std::isfinite(gain.imag()))
            throw std::invalid_argument("RayPath: gain must be finite");
        if (!std::isfinite(delay_s) || delay_s < 0.0)
            throw std::invalid_argument("RayPath: delay must be finite and non-negative");
    }
};

// ULA response for a plane wave from (az, el). Entry n is
// exp(-i 2 pi (d/lambda) sin(az) cos(el) n); entry 0 is exactly 1 and the
// vector is not normalized. Elevation folds into the effective spatial
// frequency so that el = 0 reduces to the classic sin(az) phase ramp.
inline CVec steering_vector(double az, double el, const ArrayConfig& cfg) {
    cfg.validate();
    if (!std::isfinite(az) || !std::isfinite(el))
        throw std::invalid_argument("steering_vector: angles must be finite");
    const double omega = std::sin(az) * std::cos(el);
    const double step = -2.0 * std::numbers::pi * cfg.spacing_ratio * omega;
    CVec v(static_cast<std::size_t>(cfg.n_elements));
    v[0] = cxd{1.0, 0.0};
    for (int n = 1; n < cfg.n_elements; ++n)
        v[static_cast<std::size_t>(n)] = std::polar(1.0, step * n);
    return v;
}

// H = sum_l gain_l a_r(aoa_l) a_t(aod_l)^H, shape N_rx x N_tx.
// Plain finite sum, no normalization.
inline CMat build_channel(std::span<const RayPath> rays, const ArrayConfig& tx,
                          const ArrayConfig& rx) {
    tx.validate();
    rx.validate();
    if (rays.empty())
        throw std::invalid_argument("build_channel: ray list is empty");
    CMat h(static_cast<std::size_t>(rx.n_elements), static_cast<std::size_t>(tx.n_elements));
    for (const RayPath& ray : rays) {
        ray.validate();
        const CVec ar = steering_vector(ray.aoa_az, ray.aoa_el, rx);
        const CVec at = steering_vector(ray.aod_az, ray.aod_el, tx);
        add_scaled_outer(h, ray.gain, ar, at);
    }
    return h;
}

// H' = rho H + sqrt(1 - rho^2) W with W i.i.d. circularly-symmetric complex
// Gaussian, unit variance per entry, drawn deterministically from noise_seed.
inline CMat ar1_step(const CMat& h, double rho, std::uint64_t noise_seed) {
    if (!(rho >= 0.0 && rho <= 1.0))
        throw std::invalid_argument("ar1_step: rho must be in [0, 1]");
    const double noise_scale = std::sqrt(1.0 - rho * rho);
    constexpr double inv_sqrt2 = 0.70710678118654752440;
    Rng rng(noise_seed);
    CMat out(h.rows(), h.cols());
    for (std::size_t i = 0; i < h.size(); ++i) {
        const double re = rng.gaussian() * inv_sqrt2;
        const double im = rng.gaussian() * inv_sqrt2;
        out.data()[i] = rho * h.data()[i] + noise_scale * cxd{re, im};
    }
    return out;
}

// y = w^H H f. The combiner is conjugated; f has N_tx entries, w has N_rx.
inline cxd received_gain(const CMat& h, const CVec& f, const CVec& w) {
    if (f.size() != h.cols())
        throw std::invalid_argument("received_gain: precoder length does not match N_tx");
    if (w.size() != h.rows())
        throw std::invalid_argument("received_gain: combiner length does not match N_rx");
    cxd acc{0.0, 0.0};
    for (std::size_t r = 0; r < h.rows(); ++r) {
        cxd row{0.0, 0.0};
        for (std::size_t c = 0; c < h.cols(); ++c) row += h(r, c) * f[c];
        acc += std::conj(w[r]) * row;
    }
    return acc;
}

}  // namespace beamtrack
