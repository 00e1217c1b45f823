#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "constants.hpp"
#include "errors.hpp"
#include "scaled_system.hpp"

namespace twistenv {

/// Kinetic energy (MeV) that must be greatly exceeded for the spin-orbit-like
/// dV/dz term to be negligible: |dV/dz| hbar c / (2 m).
inline double spinless_threshold(double grad_v, double mass) {
    if (!(grad_v >= 0.0)) throw InvalidInput("potential gradient magnitude must be nonnegative");
    return grad_v * constants::hbar_c / (2.0 * mass);
}

/// Kinetic energy (MeV) above which the longitudinal WKB solution holds:
/// (m hbar c |dV/dz|)^(1/3).
inline double wkb_threshold(double grad_v, double mass) {
    if (!(grad_v >= 0.0)) throw InvalidInput("potential gradient magnitude must be nonnegative");
    return std::cbrt(mass * constants::hbar_c * grad_v);
}

/// Local WKB smallness parameter |df/dz| hbar c / (2 f^{3/2}), z in metres.
/// At z = 0 this is E0 hbar c |dV/dz| / p0^3.
inline double wkb_parameter(const ScaledSystem& s, double z) {
    const double fz = s.f(z);
    const double df_dz = s.df(z) / s.z0();
    return std::abs(df_dz) * constants::hbar_c / (2.0 * fz * std::sqrt(fz));
}

enum class Status { pass, warn, fail };

inline std::string_view to_string(Status s) {
    switch (s) {
        case Status::pass: return "PASS";
        case Status::warn: return "WARN";
        case Status::fail: return "FAIL";
    }
    return "FAIL";
}

/// ratio >= 100 passes, [10, 100) warns, below 10 fails.
inline Status classify(double ratio) {
    if (ratio >= 100.0) return Status::pass;
    if (ratio >= 10.0) return Status::warn;
    return Status::fail;
}

struct ValidityRow {
    double z_m;
    std::string criterion;
    double value;
    double threshold;
    double ratio;
    Status status;
};

struct ValidityReport {
    std::vector<ValidityRow> rows;

    Status overall() const {
        Status worst = Status::pass;
        for (const auto& r : rows)
            if (static_cast<int>(r.status) > static_cast<int>(worst)) worst = r.status;
        return worst;
    }
};

namespace detail {

inline double safe_ratio(double num, double den) {
    if (den == 0.0) return std::numeric_limits<double>::infinity();
    return num / den;
}

inline void append_rows(ValidityReport& rep, const ScaledSystem& s, double z_m, double ez) {
    const double z = s.to_dimless(z_m);
    const double fz = s.f(z);
    const double energy = s.energy(z);
    const double mass = s.beam().mass;
    const double kinetic = energy - mass;
    const double grad = std::abs(ez);  // |dV/dz| for unit charge, MeV/m

    const double t1 = spinless_threshold(grad, mass);
    const double r1 = safe_ratio(kinetic, t1);
    rep.rows.push_back({z_m, "spinless", kinetic, t1, r1, classify(r1)});

    const double t2 = wkb_threshold(grad, mass);
    const double r2 = safe_ratio(kinetic, t2);
    rep.rows.push_back({z_m, "wkb_energy", kinetic, t2, r2, classify(r2)});

    const double param = std::abs(energy) * grad * constants::hbar_c / (fz * std::sqrt(fz));
    const double r3 = safe_ratio(1.0, param);
    rep.rows.push_back({z_m, "wkb_parameter", param, 1.0, r3, classify(r3)});
}

}  // namespace detail

/// Evaluates the three criteria at both ends of every field piece (with the
/// one-sided field of that piece) and at 16 interior points.
inline ValidityReport check_report(const ScaledSystem& s) {
    constexpr int interior = 16;
    ValidityReport rep;
    const auto segments = s.lattice().segments();
    if (segments.empty()) {
        detail::append_rows(rep, s, 0.0, 0.0);
        return rep;
    }
    for (const Segment& seg : segments) {
        for (int i = 0; i <= interior + 1; ++i) {
            const double z = (i == interior + 1) ? seg.z_end
                                                 : seg.z_begin + seg.length() * i / (interior + 1);
            detail::append_rows(rep, s, z, seg.ez_at(z));
        }
    }
    return rep;
}

}  // namespace twistenv
