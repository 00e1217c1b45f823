#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <utility>
#include <vector>

#include "constants.hpp"
#include "errors.hpp"
#include "lattice.hpp"

namespace twistenv {

/// Electrostatic potential energy V(z) = q*phi(z) with phi(0) = 0 and
/// phi = -int E_z dz. Units: MeV, z in metres.
class Potential {
  public:
    Potential(FieldLattice lattice, int charge_sign) : lattice_(std::move(lattice)), charge_sign_(charge_sign) {}

    double operator()(double z) const { return -charge_sign_ * lattice_.ez_integral(z); }
    /// dV/dz in MeV/m.
    double gradient(double z) const { return -charge_sign_ * lattice_.ez(z); }

    const FieldLattice& lattice() const { return lattice_; }
    int charge_sign() const { return charge_sign_; }

  private:
    FieldLattice lattice_;
    int charge_sign_;
};

inline Potential build_potential(const FieldLattice& lattice, const BeamSpec& beam) {
    return Potential(lattice, beam.charge_sign);
}

/// Coefficients of the equivalent Caldirola-Kanai oscillator.
struct CkParams {
    double gamma;  // f'/(2f), derivative in the dimensionless coordinate
    double omega;  // p0*Omega/sqrt(f)
    double w;      // p0/sqrt(f)
};

/// Relative turning-point threshold: f_min = turning_fraction * p0^2.
inline constexpr double turning_fraction = 1e-6;

/// Lattice and beam mapped onto the dimensionless axis z~ = z/z0 with the
/// transverse unit rho_H. Immutable; all evaluators are pure.
class ScaledSystem {
  public:
    ScaledSystem(const FieldLattice& lattice, const BeamSpec& beam, std::optional<double> bz_ref_override = {})
        : beam_(beam), potential_(build_potential(lattice, beam)) {
        beam_.validate();
        const double max_b = lattice.max_abs_bz();
        if (bz_ref_override) {
            if (!(*bz_ref_override > 0.0) || !std::isfinite(*bz_ref_override))
                throw InvalidInput("reference field must be positive");
            bz_ref_ = *bz_ref_override;
        } else {
            if (!(max_b > 0.0)) throw MissingReferenceField();
            bz_ref_ = max_b;
        }
        p0_sq_ = (beam_.total_energy - beam_.mass) * (beam_.total_energy + beam_.mass);
        p0_ = std::sqrt(p0_sq_);
        rho_h_ = std::sqrt(2.0 * constants::hbar_c / (constants::mev_per_m_per_tesla * bz_ref_));
        z0_ = p0_ * rho_h_ * rho_h_ / constants::hbar_c;
        f_min_ = turning_fraction * p0_sq_;
    }

    const BeamSpec& beam() const { return beam_; }
    const FieldLattice& lattice() const { return potential_.lattice(); }
    const Potential& potential() const { return potential_; }

    double p0() const { return p0_; }
    double p0_squared() const { return p0_sq_; }
    double rho_h() const { return rho_h_; }
    double z0() const { return z0_; }
    double bz_ref() const { return bz_ref_; }
    double f_min() const { return f_min_; }
    int charge_sign() const { return beam_.charge_sign; }

    double to_metres(double z_dimless) const { return z_dimless * z0_; }
    double to_dimless(double z_m) const { return z_m / z0_; }

    /// V at z~, MeV.
    double potential_at(double z) const { return potential_(z * z0_); }
    /// Total energy E0 - V(z), MeV.
    double energy(double z) const { return beam_.total_energy - potential_at(z); }

    /// [E0 - V]^2 - m^2 without the turning-point check.
    double f_unchecked(double z) const {
        const double e = energy(z);
        return (e - beam_.mass) * (e + beam_.mass);
    }

    double f(double z) const {
        const double v = f_unchecked(z);
        if (!(v > f_min_)) throw TurningPoint(z, v);
        return v;
    }

    /// df/dz~ (MeV^2), exact for the piecewise-linear field model.
    double df(double z) const {
        const double zm = z * z0_;
        return -2.0 * (beam_.total_energy - potential_(zm)) * potential_.gradient(zm) * z0_;
    }

    /// Omega(z~) = B_z / B_ref.
    double omega_field(double z) const { return potential_.lattice().bz(z * z0_) / bz_ref_; }

    CkParams ck(double z) const {
        const double fz = f(z);
        const double w = p0_ / std::sqrt(fz);
        return {df(z) / (2.0 * fz), w * omega_field(z), w};
    }

    /// CK coefficients at z~ using the field piece that contains `probe`.
    /// Gives one-sided limits at piece boundaries, where Omega and
    /// gamma jump.
    CkParams ck_in_piece(double z, double probe) const {
        const FieldLattice& lat = potential_.lattice();
        const double zm = z * z0_;
        double bz = 0.0;
        double ez = 0.0;
        if (auto idx = lat.locate(probe * z0_)) {
            const Segment& seg = lat.segments()[*idx];
            bz = seg.bz_at(zm);
            ez = seg.ez_at(zm);
        }
        const double fz = f(z);
        const double w = p0_ / std::sqrt(fz);
        const double grad_v = -beam_.charge_sign * ez;
        const double dfz = -2.0 * (beam_.total_energy - potential_(zm)) * grad_v * z0_;
        return {dfz / (2.0 * fz), w * bz / bz_ref_, w};
    }

    /// Lattice breakpoints on the dimensionless axis.
    std::vector<double> breakpoints() const {
        std::vector<double> out = potential_.lattice().breakpoints();
        for (double& z : out) z /= z0_;
        return out;
    }

  private:
    BeamSpec beam_;
    Potential potential_;
    double bz_ref_ = 0.0;
    double p0_ = 0.0;
    double p0_sq_ = 0.0;
    double rho_h_ = 0.0;
    double z0_ = 0.0;
    double f_min_ = 0.0;
};

inline ScaledSystem compute_scales(const FieldLattice& lattice, const BeamSpec& beam,
                                   std::optional<double> bz_ref_override = {}) {
    return ScaledSystem(lattice, beam, bz_ref_override);
}

inline double eval_f(const ScaledSystem& s, double z) { return s.f(z); }
inline CkParams eval_ck_params(const ScaledSystem& s, double z) { return s.ck(z); }

/// Breakpoints of `s` strictly inside (a, b), with a and b prepended/appended.
/// Works for either direction of travel.
inline std::vector<double> piece_edges(const ScaledSystem& s, double a, double b) {
    std::vector<double> out{a};
    const double lo = std::min(a, b);
    const double hi = std::max(a, b);
    std::vector<double> inner;
    for (double z : s.breakpoints())
        if (z > lo && z < hi) inner.push_back(z);
    if (b < a) std::reverse(inner.begin(), inner.end());
    out.insert(out.end(), inner.begin(), inner.end());
    out.push_back(b);
    return out;
}

/// Points z~ in [a, b] where f crosses f_min. Each field piece is scanned on
/// a fine grid and sign changes are refined by bisection to 1e-10 in z~.
inline std::vector<double> detect_turning_points(const ScaledSystem& s, double a, double b) {
    constexpr int scan_points = 64;
    constexpr double z_tol = 1e-10;
    std::vector<double> roots;
    const auto g = [&](double z) { return s.f_unchecked(z) - s.f_min(); };
    const std::vector<double> edges = piece_edges(s, std::min(a, b), std::max(a, b));
    for (std::size_t k = 0; k + 1 < edges.size(); ++k) {
        const double lo = edges[k];
        const double hi = edges[k + 1];
        double z_prev = lo;
        double g_prev = g(lo);
        for (int i = 1; i <= scan_points; ++i) {
            const double z = (i == scan_points) ? hi : lo + (hi - lo) * i / scan_points;
            const double gz = g(z);
            if ((g_prev > 0.0) != (gz > 0.0)) {
                double left = z_prev;
                double right = z;
                const bool left_positive = g_prev > 0.0;
                while (right - left > z_tol) {
                    const double mid = 0.5 * (left + right);
                    if (mid <= left || mid >= right) break;
                    if ((g(mid) > 0.0) == left_positive)
                        left = mid;
                    else
                        right = mid;
                }
                const double root = 0.5 * (left + right);
                if (roots.empty() || std::abs(roots.back() - root) > z_tol) roots.push_back(root);
            }
            z_prev = z;
            g_prev = gz;
        }
    }
    return roots;
}

}  // namespace twistenv
