#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "constants.hpp"
#include "errors.hpp"
#include "ode.hpp"
#include "scaled_system.hpp"

namespace twistenv {

/// Relative tolerance for the adaptive Gauss-Kronrod path integrals. Boost's
/// error estimate has a floor near 1e-14 relative, so tighter requests only
/// exhaust the recursion depth without changing the result.
inline constexpr double quad_tolerance = 1e-13;

namespace detail {

/// Adaptive Gauss-Kronrod over [lo, hi], mapped onto [-1, 1] first. Boost
/// compares the interval-scaled estimate against an unscaled error bound, so
/// short intervals would otherwise recurse to `depth` on every call.
template <unsigned Points, class F>
double integrate_mapped(F&& fn, double lo, double hi, unsigned depth) {
    using Quad = boost::math::quadrature::gauss_kronrod<double, Points>;
    const double mid = 0.5 * (lo + hi);
    const double half = 0.5 * (hi - lo);
    return Quad::integrate([&](double x) { return half * fn(mid + half * x); }, -1.0, 1.0, depth, quad_tolerance);
}

}  // namespace detail

/// Phase kept as whole turns plus a residual in [0, 2pi). Increments are
/// split before summation and residuals are added with Neumaier
/// compensation, so the residual stays accurate when the total is ~1e14 rad.
class TurnPhase {
  public:
    void add(double radians) {
        const double turns = std::floor(radians / constants::two_pi);
        double r = std::fma(-turns, two_pi_hi, radians);
        r = std::fma(-turns, two_pi_lo, r);
        turns_ += static_cast<std::int64_t>(turns);
        const double s = residual_ + r;
        if (std::abs(residual_) >= std::abs(r))
            comp_ += (residual_ - s) + r;
        else
            comp_ += (r - s) + residual_;
        residual_ = s;
        normalize();
    }

    std::int64_t turns() const { return turns_; }
    double residual() const { return residual_ + comp_; }
    /// Total phase as a double; loses the residual when turns are large.
    double total() const { return static_cast<double>(turns_) * constants::two_pi + residual(); }

  private:
    static constexpr double two_pi_hi = 6.283185307179586;
    static constexpr double two_pi_lo = 2.4492935982947064e-16;

    void normalize() {
        while (residual() >= two_pi_hi) {
            residual_ -= two_pi_hi;
            comp_ -= two_pi_lo;
            ++turns_;
        }
        while (residual() < 0.0) {
            residual_ += two_pi_hi;
            comp_ += two_pi_lo;
            --turns_;
        }
    }

    std::int64_t turns_ = 0;
    double residual_ = 0.0;
    double comp_ = 0.0;
};

struct EnvelopeState {
    double b = 1.0;
    double db = 0.0;
    double phi_wkb = 0.0;  // residual in [0, 2pi)
    std::int64_t wkb_turns = 0;
    double phi_gouy = 0.0;  // per unit kappa: int p0/(sqrt(f) b^2) dz~
    double phi_rot = 0.0;   // per unit l: sign(q) int p0 Omega/sqrt(f) dz~
};

struct EnvelopeSample {
    double z = 0.0;  // dimensionless
    EnvelopeState state;
    double energy = 0.0;  // MeV
};

struct EnvelopeOptions {
    ode::Tolerance tol{};
    double output_step = 0.01;  // dimensionless
};

/// Sampled solution of the envelope equation. z~ strictly increasing.
struct EnvelopeTrace {
    std::vector<EnvelopeSample> samples;

    double z_begin() const { return samples.front().z; }
    double z_end() const { return samples.back().z; }
    const EnvelopeSample& front() const { return samples.front(); }
    const EnvelopeSample& back() const { return samples.back(); }
};

namespace detail {

/// Output grid: a, interior multiples of `step` from a, piece edges, b.
inline std::vector<double> output_grid(const ScaledSystem& s, double a, double b, double step) {
    if (!(step > 0.0)) throw InvalidInput("output step must be positive");
    const std::vector<double> edges = piece_edges(s, a, b);
    const double merge = 1e-9 * step;
    std::vector<double> out = edges;
    for (std::size_t k = 1;; ++k) {
        const double z = a + static_cast<double>(k) * step;
        if (z >= b - merge) break;
        auto it = std::lower_bound(edges.begin(), edges.end(), z - merge);
        if (it != edges.end() && *it <= z + merge) continue;
        out.push_back(z);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

/// Integrates a piecewise-smooth system over [a, b] (either direction),
/// restarting at every field-piece boundary. `make_rhs(probe)` returns the
/// right-hand side valid in the piece containing `probe`. `emit(z, y, probe)`
/// is called at every point of `grid` strictly inside (a, b) and at every
/// interior piece boundary.
template <std::size_t N, class MakeRhs, class Emit>
ode::State<N> integrate_pieces(const ScaledSystem& s, double a, double b, ode::State<N> y, ode::Tolerance tol,
                               std::span<const double> grid, MakeRhs&& make_rhs, Emit&& emit) {
    const std::vector<double> edges = piece_edges(s, a, b);
    ode::DormandPrince<N> stepper(tol);
    const double dir = b >= a ? 1.0 : -1.0;
    for (std::size_t k = 0; k + 1 < edges.size(); ++k) {
        const double lo = edges[k];
        const double hi = edges[k + 1];
        if (lo == hi) continue;
        const double probe = 0.5 * (lo + hi);
        auto rhs = make_rhs(probe);
        std::vector<double> inner;
        for (double z : grid)
            if (dir * (z - lo) > 0.0 && dir * (hi - z) > 0.0) inner.push_back(z);
        if (dir < 0.0) std::reverse(inner.begin(), inner.end());
        y = stepper.integrate(rhs, lo, hi, y, inner, [&](double z, const ode::State<N>& yz) { emit(z, yz, probe); });
        if (k + 2 < edges.size()) emit(hi, y, probe);
    }
    return y;
}

}  // namespace detail

/// Right-hand side of the envelope equation
///   b'' + gamma b' + omega^2 b = w^2 / b^3
/// augmented with the Gouy and rotation phase integrands.
inline ode::State<4> envelope_rhs(const ScaledSystem& s, double z, const ode::State<4>& y, double probe) {
    const CkParams ck = s.ck_in_piece(z, probe);
    const double b = y[0];
    const double db = y[1];
    const double b2 = b * b;
    return {db, -ck.gamma * db - ck.omega * ck.omega * b + ck.w * ck.w / (b2 * b), ck.w / b2,
            s.charge_sign() * ck.omega};
}

/// Fills the WKB phase (z0/hbar c) int sqrt(f) dz~ on every sample.
/// The Gouy and rotation integrals are co-integrated with the envelope and
/// are left untouched.
inline void accumulate_phases(EnvelopeTrace& trace, const ScaledSystem& s) {
    if (trace.samples.empty()) return;
    TurnPhase phase;
    trace.samples.front().state.phi_wkb = 0.0;
    trace.samples.front().state.wkb_turns = 0;
    const double scale = s.z0() / constants::hbar_c;
    for (std::size_t i = 1; i < trace.samples.size(); ++i) {
        const double lo = trace.samples[i - 1].z;
        const double hi = trace.samples[i].z;
        const double integral =
            detail::integrate_mapped<21>([&](double z) { return std::sqrt(s.f(z)); }, lo, hi, 12);
        phase.add(scale * integral);
        trace.samples[i].state.phi_wkb = phase.residual();
        trace.samples[i].state.wkb_turns = phase.turns();
    }
}

/// Integrates the envelope equation from span_begin to span_end (forward).
inline EnvelopeTrace integrate_ermakov(const ScaledSystem& s, double span_begin, double span_end, double b0,
                                      double db0, const EnvelopeOptions& opt = {}) {
    if (!(span_end > span_begin)) throw InvalidInput("envelope span must be increasing");
    if (!(b0 > 0.0)) throw InvalidInput("b0 must be positive");
    if (auto tp = detect_turning_points(s, span_begin, span_end); !tp.empty()) throw TurningPoint(tp.front(), s.f_min());
    s.f(span_begin);

    const std::vector<double> grid = detail::output_grid(s, span_begin, span_end, opt.output_step);
    EnvelopeTrace trace;
    trace.samples.reserve(grid.size());
    const auto push = [&](double z, const ode::State<4>& y) {
        if (!(y[0] > 0.0)) throw StepFailure("envelope collapsed to b <= 0");
        EnvelopeSample smp;
        smp.z = z;
        smp.state.b = y[0];
        smp.state.db = y[1];
        smp.state.phi_gouy = y[2];
        smp.state.phi_rot = y[3];
        smp.energy = s.energy(z);
        trace.samples.push_back(smp);
    };
    ode::State<4> y{b0, db0, 0.0, 0.0};
    push(span_begin, y);
    y = detail::integrate_pieces<4>(
        s, span_begin, span_end, y, opt.tol, grid,
        [&](double probe) {
            return [&s, probe](double z, const ode::State<4>& st) { return envelope_rhs(s, z, st, probe); };
        },
        [&](double z, const ode::State<4>& st, double) { push(z, st); });
    push(span_end, y);
    accumulate_phases(trace, s);
    return trace;
}

/// End state (b, b') after integrating from `from` to `to`; `to < from`
/// integrates backward.
inline std::pair<double, double> propagate_envelope(const ScaledSystem& s, double from, double to, double b,
                                                    double db, ode::Tolerance tol = {}) {
    ode::State<4> y{b, db, 0.0, 0.0};
    y = detail::integrate_pieces<4>(
        s, from, to, y, tol, std::span<const double>{},
        [&](double probe) {
            return [&s, probe](double z, const ode::State<4>& st) { return envelope_rhs(s, z, st, probe); };
        },
        [](double, const ode::State<4>&, double) {});
    return {y[0], y[1]};
}

/// Envelope, slope and phases at an arbitrary z~ inside the trace. (b, b')
/// use cubic Hermite interpolation with b'' from the envelope equation
/// evaluated inside the enclosing field piece; phases are linear.
struct EnvelopePoint {
    double z;
    double b;
    double db;
    double phi_gouy;
    double phi_rot;
    std::int64_t wkb_turns;
    double phi_wkb;
    double energy;
};

inline EnvelopePoint interpolate(const EnvelopeTrace& trace, const ScaledSystem& s, double z) {
    const auto& smp = trace.samples;
    if (smp.empty() || z < smp.front().z || z > smp.back().z)
        throw InvalidInput("requested z~ lies outside the envelope trace");
    auto it = std::upper_bound(smp.begin(), smp.end(), z, [](double v, const EnvelopeSample& x) { return v < x.z; });
    std::size_t i = it == smp.end() ? smp.size() - 1 : static_cast<std::size_t>(it - smp.begin());
    if (i == 0) i = 1;
    const EnvelopeSample& p = smp[i - 1];
    const EnvelopeSample& q = smp[i];
    if (z == p.z) {
        return {z, p.state.b, p.state.db, p.state.phi_gouy, p.state.phi_rot, p.state.wkb_turns, p.state.phi_wkb,
                p.energy};
    }
    if (z == q.z) {
        return {z, q.state.b, q.state.db, q.state.phi_gouy, q.state.phi_rot, q.state.wkb_turns, q.state.phi_wkb,
                q.energy};
    }
    const double h = q.z - p.z;
    const double t = (z - p.z) / h;
    const double probe = 0.5 * (p.z + q.z);
    const double ddb_p = envelope_rhs(s, p.z, {p.state.b, p.state.db, 0.0, 0.0}, probe)[1];
    const double ddb_q = envelope_rhs(s, q.z, {q.state.b, q.state.db, 0.0, 0.0}, probe)[1];
    const auto hermite = [&](double y0, double y1, double d0, double d1) {
        const double t2 = t * t;
        const double t3 = t2 * t;
        return (2 * t3 - 3 * t2 + 1) * y0 + (t3 - 2 * t2 + t) * h * d0 + (-2 * t3 + 3 * t2) * y1 + (t3 - t2) * h * d1;
    };
    EnvelopePoint out;
    out.z = z;
    out.b = hermite(p.state.b, q.state.b, p.state.db, q.state.db);
    out.db = hermite(p.state.db, q.state.db, ddb_p, ddb_q);
    out.phi_gouy = p.state.phi_gouy + t * (q.state.phi_gouy - p.state.phi_gouy);
    out.phi_rot = p.state.phi_rot + t * (q.state.phi_rot - p.state.phi_rot);
    // WKB: interpolate the increment, then fold back into [0, 2pi)
    const double increment =
        static_cast<double>(q.state.wkb_turns - p.state.wkb_turns) * constants::two_pi + (q.state.phi_wkb - p.state.phi_wkb);
    TurnPhase ph;
    ph.add(p.state.phi_wkb);
    ph.add(t * increment);
    out.wkb_turns = p.state.wkb_turns + ph.turns();
    out.phi_wkb = ph.residual();
    out.energy = s.energy(z);
    return out;
}

// ---------------------------------------------------------------------------
// Hill pair

/// Two solutions of s'' + gamma s' + omega^2 s = 0 with s(0) = 0,
/// s'(0) = 1/b0 and t(0) = b0, t'(0) = b0'. Wronskian s't - st'.
struct HillPair {
    std::vector<double> z;
    std::vector<double> s, ds;
    std::vector<double> t, dt;
    std::vector<double> wronskian;
};

inline HillPair integrate_hill_pair(const ScaledSystem& sys, double span_begin, double span_end, double b0,
                                    double db0, const EnvelopeOptions& opt = {}) {
    if (!(span_end > span_begin)) throw InvalidInput("span must be increasing");
    if (!(b0 > 0.0)) throw InvalidInput("b0 must be positive");
    if (auto tp = detect_turning_points(sys, span_begin, span_end); !tp.empty())
        throw TurningPoint(tp.front(), sys.f_min());

    const std::vector<double> grid = detail::output_grid(sys, span_begin, span_end, opt.output_step);
    HillPair pair;
    const auto push = [&](double z, const ode::State<4>& y) {
        pair.z.push_back(z);
        pair.s.push_back(y[0]);
        pair.ds.push_back(y[1]);
        pair.t.push_back(y[2]);
        pair.dt.push_back(y[3]);
        pair.wronskian.push_back(y[1] * y[2] - y[0] * y[3]);
    };
    ode::State<4> y{0.0, 1.0 / b0, b0, db0};
    push(span_begin, y);
    y = detail::integrate_pieces<4>(
        sys, span_begin, span_end, y, opt.tol, grid,
        [&](double probe) {
            return [&sys, probe](double z, const ode::State<4>& st) -> ode::State<4> {
                const CkParams ck = sys.ck_in_piece(z, probe);
                const double w2 = ck.omega * ck.omega;
                return {st[1], -ck.gamma * st[1] - w2 * st[0], st[3], -ck.gamma * st[3] - w2 * st[2]};
            };
        },
        [&](double z, const ode::State<4>& st, double) { push(z, st); });
    push(span_end, y);
    return pair;
}

/// b = sqrt(s^2 + t^2) pointwise.
inline std::vector<double> hill_to_envelope(const HillPair& pair) {
    if (pair.s.size() != pair.t.size()) throw InvalidInput("Hill pair components have different lengths");
    std::vector<double> b(pair.s.size());
    for (std::size_t i = 0; i < b.size(); ++i) b[i] = std::hypot(pair.s[i], pair.t[i]);
    return b;
}

// ---------------------------------------------------------------------------
// Closed forms for B = 0

namespace detail {

/// b from the once-integrated zero-field equation, given
/// I = int_0^z p0/sqrt(f) dz~. Uses sqrt(c b0^2 - 1) = b0 |b0'| exactly;
/// sign(0) is taken as +1 (waist).
inline double zero_field_envelope(double integral, double b0, double db0) {
    const double c = 1.0 / (b0 * b0) + db0 * db0;
    const double sign = db0 >= 0.0 ? 1.0 : -1.0;
    const double x = b0 * std::abs(db0) + sign * c * integral;
    return std::sqrt((1.0 + x * x) / c);
}

}  // namespace detail

/// int_a^b p0/sqrt(f) dz~ by adaptive Gauss-Kronrod on each field piece.
inline double inverse_momentum_integral(const ScaledSystem& s, double a, double b) {
    const std::vector<double> edges = piece_edges(s, a, b);
    double sum = 0.0;
    for (std::size_t k = 0; k + 1 < edges.size(); ++k) {
        if (edges[k] == edges[k + 1]) continue;
        sum += detail::integrate_mapped<31>([&](double z) { return s.p0() / std::sqrt(s.f(z)); }, edges[k],
                                            edges[k + 1], 15);
    }
    return sum;
}

/// Zero-magnetic-field envelope in integral form for an arbitrary E_z profile.
inline double closed_form_zero_B(const ScaledSystem& s, double z, double b0, double db0) {
    if (s.lattice().max_abs_bz() != 0.0) throw InvalidInput("closed_form_zero_B requires B_z == 0 on the lattice");
    if (!(b0 > 0.0)) throw InvalidInput("b0 must be positive");
    if (z == 0.0) return b0;
    if (auto tp = detect_turning_points(s, std::min(0.0, z), std::max(0.0, z)); !tp.empty())
        throw TurningPoint(tp.front(), s.f_min());
    return detail::zero_field_envelope(inverse_momentum_integral(s, 0.0, z), b0, db0);
}

/// Homogeneous accelerating field in dimensionless form:
/// f = p0^2 (1 + 2 K1 z~ + K2^2 z~^2) with K1 = (E0/p0) K2.
struct UniformField {
    double energy_ratio = 1.0;  // E0 / p0
    double k2 = 0.0;            // q E_z z0 / p0

    double k1() const { return energy_ratio * k2; }

    static UniformField from_field(const ScaledSystem& s, double ez_mv_per_m) {
        return {s.beam().total_energy / s.p0(), s.charge_sign() * ez_mv_per_m * s.z0() / s.p0()};
    }
    static UniformField from_coefficients(double k1, double k2) {
        if (k2 == 0.0) throw InvalidInput("K1 and K2 determine E0/p0 only when K2 != 0");
        return {k1 / k2, k2};
    }
};

/// int_0^z p0/sqrt(f) dz~ for a homogeneous field. The logarithm
///   (p0 z / V) ln[(E0+p0)/(E0-p0) * (sqrt f - p0 + V)/(sqrt f - p0 - V)]
/// equals (1/K2) ln[(E + sqrt f)/(E0 + p0)], evaluated here with log1p.
/// Below |K2 z| = 1e-8 a third-order series is used instead.
inline double uniform_field_integral(const UniformField& u, double z) {
    const double k1 = u.k1();
    const double k2 = u.k2;
    const double q = 1.0 + 2.0 * k1 * z + k2 * k2 * z * z;
    if (!(q > turning_fraction)) throw TurningPoint(z, q);
    if (std::abs(k2 * z) < 1e-8) return z - 0.5 * k1 * z * z + (0.5 * k1 * k1 - k2 * k2 / 6.0) * z * z * z;
    const double root = std::sqrt(q);
    const double root_minus_one = (2.0 * k1 * z + k2 * k2 * z * z) / (root + 1.0);
    return std::log1p((k2 * z + root_minus_one) / (u.energy_ratio + 1.0)) / k2;
}

inline double closed_form_uniform_E(const UniformField& u, double z, double b0, double db0) {
    if (!(b0 > 0.0)) throw InvalidInput("b0 must be positive");
    return detail::zero_field_envelope(uniform_field_integral(u, z), b0, db0);
}

/// Dimensionful parameters of the reference homogeneous-field beam-width law.
/// k0 = p0/hbar c, K1 = E0 qE_z/p0^2, K2 = qE_z/p0 (all 1/m); w0 in m;
/// dw0 = dw/dz at z = 0.
struct SilenkoParams {
    double k0;
    double k1;
    double k2;
    double w0;
    double dw0;
};

inline SilenkoParams silenko_params(const ScaledSystem& s, double ez_mv_per_m, double b0, double db0) {
    const double p0 = s.p0();
    const double qe = s.charge_sign() * ez_mv_per_m;  // MeV/m
    const double k0 = p0 / constants::hbar_c;
    return {k0, s.beam().total_energy * qe / (p0 * p0), qe / p0, std::sqrt(2.0) * s.rho_h() * b0,
            std::sqrt(2.0) * db0 / (k0 * s.rho_h())};
}

/// Beam width in a homogeneous field:
///   w = w0 sqrt[(1 + 2A w0'/(K2 w0))^2 + 16 A^2/(k0^2 K2^2 w0^4)],
///   A = arctanh{ K2/(2K1 + K2^2 z) [k(z)/k0 - 1] }.
/// The square applies to the whole first bracket; this is the reading that
/// reproduces the free-space law w0^2[(1 + z w0'/w0)^2 + 4z^2/(k0^2 w0^4)]
/// as K2 -> 0 and matches the log form of the envelope to rounding.
inline double silenko_width(const SilenkoParams& p, double z) {
    if (z == 0.0) return p.w0;
    double g;  // 2A/K2, metres
    if (p.k1 == 0.0 && p.k2 == 0.0) {
        g = z;
    } else {
        const double q = 1.0 + 2.0 * p.k1 * z + p.k2 * p.k2 * z * z;
        if (!(q > 0.0)) throw DomainError("k(z)^2 <= 0: beam stopped");
        const double denom = 2.0 * p.k1 + p.k2 * p.k2 * z;
        if (denom == 0.0) throw DomainError("arctanh argument undefined");
        const double k_ratio_minus_one = (2.0 * p.k1 * z + p.k2 * p.k2 * z * z) / (std::sqrt(q) + 1.0);
        const double r = k_ratio_minus_one / denom;
        const double y = p.k2 * r;
        if (!(std::abs(y) < 1.0)) throw DomainError("arctanh argument outside (-1, 1)");
        const double atanh_over_y = std::abs(y) < 1e-8 ? 1.0 + y * y / 3.0 : std::atanh(y) / y;
        g = 2.0 * r * atanh_over_y;
    }
    const double lin = 1.0 + g * p.dw0 / p.w0;
    const double dif = 2.0 * g / (p.k0 * p.w0 * p.w0);
    return p.w0 * std::sqrt(lin * lin + dif * dif);
}

}  // namespace twistenv
