#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdlib>
#include <vector>

#include "constants.hpp"
#include "envelope.hpp"
#include "errors.hpp"
#include "lattice.hpp"
#include "scaled_system.hpp"

namespace twistenv {

/// Generalized Laguerre polynomial L_n^alpha(x) by upward recurrence
///   (k+1) L_{k+1} = (2k + 1 + alpha - x) L_k - (k + alpha) L_{k-1}.
inline double laguerre(int n, int alpha, double x) {
    if (n < 0 || alpha < 0) throw InvalidInput("laguerre: n and alpha must be nonnegative");
    double prev = 1.0;
    if (n == 0) return prev;
    double curr = 1.0 + alpha - x;
    for (int k = 1; k < n; ++k) {
        const double next = ((2.0 * k + 1.0 + alpha - x) * curr - (k + alpha) * prev) / (k + 1.0);
        prev = curr;
        curr = next;
    }
    return curr;
}

/// Landau mode (n, l) with spin tag.
struct TwistedMode {
    int n = 0;
    int l = 0;
    Spin spin = Spin::up;

    TwistedMode() = default;
    TwistedMode(int n_, int l_, Spin s = Spin::up) : n(n_), l(l_), spin(s) {
        if (n < 0) throw InvalidInput("radial index n must be nonnegative");
    }
    static TwistedMode from_beam(const BeamSpec& b) { return {b.n, b.l, b.spin}; }

    int abs_l() const { return std::abs(l); }
    /// Eigenvalue 2n + |l| + 1.
    int kappa() const { return 2 * n + abs_l() + 1; }
    /// log N_{n,l}; N^2 = n! / (pi (n+|l|)!) evaluated through lgamma so that
    /// |l| ~ 1e3 does not overflow.
    double log_norm() const {
        return 0.5 * (std::lgamma(n + 1.0) - std::lgamma(n + abs_l() + 1.0) - std::log(constants::pi));
    }
    double norm() const { return std::exp(log_norm()); }
};

/// Stationary Landau state
///   N rho^|l| L_n^|l|(rho^2) exp(-rho^2/2 + i l phi - i kappa z).
inline std::complex<double> landau_state(const TwistedMode& m, double rho, double phi, double z) {
    if (!(rho >= 0.0)) throw InvalidInput("rho must be nonnegative");
    const double r2 = rho * rho;
    double radial;
    if (rho == 0.0) {
        radial = m.abs_l() == 0 ? m.norm() * laguerre(m.n, 0, 0.0) : 0.0;
    } else {
        radial = std::exp(m.log_norm() + m.abs_l() * std::log(rho) - 0.5 * r2) * laguerre(m.n, m.abs_l(), r2);
    }
    return std::polar(radial, m.l * phi - m.kappa() * z);
}

/// Transverse amplitude at one point. `amplitude` carries the unit-modulus
/// WKB phase but not the longitudinal modulus f^{-1/4}, which is reported in
/// `longitudinal_scale`; the upper-spinor component is the product.
struct WaveSample {
    double rho = 0.0;  // units of rho_H
    double phi = 0.0;
    double z = 0.0;  // dimensionless
    std::complex<double> amplitude;
    double intensity = 0.0;
    double longitudinal_scale = 0.0;  // f^{-1/4}, MeV^{-1/2}

    std::complex<double> spinor_component() const { return amplitude * longitudinal_scale; }
};

/// Propagated upper spinor from an already interpolated envelope point.
inline WaveSample propagated_spinor(const TwistedMode& m, const EnvelopePoint& p, const ScaledSystem& s, double rho,
                                    double phi) {
    const double fz = s.f(p.z);
    const double sqrt_f = std::sqrt(fz);
    const std::complex<double> psi = landau_state(m, rho / p.b, phi, p.phi_gouy);
    const double chirp = sqrt_f / (2.0 * s.p0()) * (p.db / p.b) * rho * rho;
    const double phase = chirp + m.l * p.phi_rot + p.phi_wkb;
    WaveSample out;
    out.rho = rho;
    out.phi = phi;
    out.z = p.z;
    out.amplitude = psi / p.b * std::polar(1.0, phase);
    out.intensity = std::norm(out.amplitude);
    out.longitudinal_scale = 1.0 / std::sqrt(sqrt_f);
    return out;
}

inline WaveSample propagated_spinor(const TwistedMode& m, const EnvelopeTrace& trace, const ScaledSystem& s,
                                    double rho, double phi, double z) {
    return propagated_spinor(m, interpolate(trace, s, z), s, rho, phi);
}

/// <rho^2> of the propagated mode in units of rho_H^2.
inline double radial_moment(const TwistedMode& m, double b) {
    if (!(b > 0.0)) throw InvalidInput("b must be positive");
    return m.kappa() * b * b;
}

/// <L_z>; the Ermakov transform does not touch the azimuthal factor.
inline int oam_expectation(const TwistedMode& m) { return m.l; }

struct GridSpec {
    std::size_t n_r = 64;
    std::size_t n_phi = 64;
    double r_max = 8.0;  // units of rho_H

    void validate() const {
        if (n_r == 0 || n_phi == 0 || !(r_max > 0.0)) throw InvalidInput("grid dimensions must be positive");
    }
    double d_rho() const { return r_max / static_cast<double>(n_r); }
    double d_phi() const { return constants::two_pi / static_cast<double>(n_phi); }
    /// Cell-centred radius and uniform azimuth.
    double rho(std::size_t i) const { return (static_cast<double>(i) + 0.5) * d_rho(); }
    double phi(std::size_t j) const { return static_cast<double>(j) * d_phi(); }
    /// Midpoint-rule weight of sample (i, j) for int . rho drho dphi.
    double weight(std::size_t i) const { return rho(i) * d_rho() * d_phi(); }
};

/// Polar grid at fixed z~, rho-major then phi, both ascending.
inline std::vector<WaveSample> intensity_grid(const TwistedMode& m, const EnvelopeTrace& trace, const ScaledSystem& s,
                                              double z, const GridSpec& grid) {
    grid.validate();
    const EnvelopePoint p = interpolate(trace, s, z);
    std::vector<WaveSample> out;
    out.reserve(grid.n_r * grid.n_phi);
    for (std::size_t i = 0; i < grid.n_r; ++i)
        for (std::size_t j = 0; j < grid.n_phi; ++j) out.push_back(propagated_spinor(m, p, s, grid.rho(i), grid.phi(j)));
    return out;
}

/// Sum of intensity times quadrature weight over a grid produced by
/// intensity_grid with the same spec.
inline double grid_norm(const std::vector<WaveSample>& samples, const GridSpec& grid) {
    double total = 0.0;
    for (std::size_t k = 0; k < samples.size(); ++k) total += samples[k].intensity * grid.weight(k / grid.n_phi);
    return total;
}

}  // namespace twistenv
