#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>

#include "errors.hpp"

namespace twistenv::ode {

template <std::size_t N>
using State = std::array<double, N>;

struct Tolerance {
    double rtol = 1e-10;
    double atol = 1e-12;
};

struct Stats {
    std::size_t accepted = 0;
    std::size_t rejected = 0;
    std::size_t rhs_calls = 0;
};

/// Dormand-Prince 5(4) with the fourth-order continuous extension of
/// Hairer, Norsett & Wanner. Integrates one smooth piece at a time; callers
/// restart at coefficient discontinuities. Either direction of travel.
template <std::size_t N>
class DormandPrince {
  public:
    explicit DormandPrince(Tolerance tol = {}) : tol_(tol) {
        if (!(tol.rtol > 0.0) || !(tol.atol > 0.0)) throw InvalidInput("integrator tolerances must be positive");
    }

    const Stats& stats() const { return stats_; }

    /// Integrates dy/dt = rhs(t, y) from a to b. For every entry of `outputs`
    /// strictly between a and b (ordered along the direction of travel),
    /// `emit(t, y)` is called with the dense-output state. Returns y(b).
    /// `emit` is not called at a or b.
    template <class Rhs, class Emit>
    State<N> integrate(Rhs&& rhs, double a, double b, State<N> y, std::span<const double> outputs, Emit&& emit) {
        if (a == b) return y;
        const double dir = b > a ? 1.0 : -1.0;
        const double span = std::abs(b - a);
        const double h_min = 1e-14 * std::max({span, std::abs(a), std::abs(b)});
        constexpr std::size_t max_steps = 50'000'000;

        std::size_t next_out = 0;
        while (next_out < outputs.size() && dir * (outputs[next_out] - a) <= 0.0) ++next_out;

        State<N> k1 = call(rhs, a, y);
        double h = initial_step(rhs, a, y, k1, dir, span);
        double t = a;
        bool last_rejected = false;

        for (std::size_t step = 0; step < max_steps; ++step) {
            bool final_step = false;
            if (dir * (t + h - b) >= 0.0 || std::abs(b - (t + h)) < h_min) {
                h = b - t;
                final_step = true;
            }
            if (std::abs(h) < h_min) throw StepFailure("step size underflow while integrating");

            StepResult r = attempt(rhs, t, y, k1, h);
            const double err = r.error;
            if (err <= 1.0 && std::isfinite(err)) {
                const double t_new = final_step ? b : t + h;
                while (next_out < outputs.size() && dir * (outputs[next_out] - t_new) < 0.0) {
                    const double theta = (outputs[next_out] - t) / h;
                    emit(outputs[next_out], dense(r, y, h, theta));
                    ++next_out;
                }
                ++stats_.accepted;
                t = t_new;
                y = r.y;
                k1 = r.k7;
                if (final_step) return y;
                double fac = err == 0.0 ? max_growth : std::min(max_growth, std::max(min_shrink, safety * std::pow(err, -0.2)));
                if (last_rejected) fac = std::min(fac, 1.0);
                h *= fac;
                last_rejected = false;
            } else {
                ++stats_.rejected;
                const double fac = std::isfinite(err) ? std::max(min_shrink, safety * std::pow(err, -0.2)) : min_shrink;
                h *= std::min(fac, 0.9);
                last_rejected = true;
            }
        }
        throw StepFailure("maximum number of integration steps exceeded");
    }

  private:
    static constexpr double safety = 0.9;
    static constexpr double min_shrink = 0.2;
    static constexpr double max_growth = 10.0;

    struct StepResult {
        State<N> y;
        State<N> k2, k3, k4, k5, k6, k7;
        State<N> k1;
        double error;
    };

    template <class Rhs>
    State<N> call(Rhs& rhs, double t, const State<N>& y) {
        ++stats_.rhs_calls;
        return rhs(t, y);
    }

    double scale(double y0, double y1) const { return tol_.atol + tol_.rtol * std::max(std::abs(y0), std::abs(y1)); }

    template <class Rhs>
    double initial_step(Rhs& rhs, double t, const State<N>& y, const State<N>& f0, double dir, double span) {
        double d0 = 0.0, d1 = 0.0;
        for (std::size_t i = 0; i < N; ++i) {
            const double sc = scale(y[i], y[i]);
            d0 += (y[i] / sc) * (y[i] / sc);
            d1 += (f0[i] / sc) * (f0[i] / sc);
        }
        d0 = std::sqrt(d0 / N);
        d1 = std::sqrt(d1 / N);
        double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
        h0 = std::min(h0, span);
        State<N> y1;
        for (std::size_t i = 0; i < N; ++i) y1[i] = y[i] + dir * h0 * f0[i];
        const State<N> f1 = call(rhs, t + dir * h0, y1);
        double d2 = 0.0;
        for (std::size_t i = 0; i < N; ++i) {
            const double sc = scale(y[i], y[i]);
            d2 += ((f1[i] - f0[i]) / sc) * ((f1[i] - f0[i]) / sc);
        }
        d2 = std::sqrt(d2 / N) / h0;
        const double dm = std::max(d1, d2);
        const double h1 = dm <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dm, 0.2);
        return dir * std::min({100.0 * h0, h1, span});
    }

    template <class Rhs>
    StepResult attempt(Rhs& rhs, double t, const State<N>& y, const State<N>& k1, double h) {
        constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
        constexpr double a21 = 1.0 / 5;
        constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
        constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
        constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
        constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                         a65 = -5103.0 / 18656;
        constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784,
                         a76 = 11.0 / 84;
        constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                         e6 = 22.0 / 525, e7 = -1.0 / 40;

        StepResult r;
        r.k1 = k1;
        State<N> tmp;
        for (std::size_t i = 0; i < N; ++i) tmp[i] = y[i] + h * a21 * k1[i];
        r.k2 = call(rhs, t + c2 * h, tmp);
        for (std::size_t i = 0; i < N; ++i) tmp[i] = y[i] + h * (a31 * k1[i] + a32 * r.k2[i]);
        r.k3 = call(rhs, t + c3 * h, tmp);
        for (std::size_t i = 0; i < N; ++i) tmp[i] = y[i] + h * (a41 * k1[i] + a42 * r.k2[i] + a43 * r.k3[i]);
        r.k4 = call(rhs, t + c4 * h, tmp);
        for (std::size_t i = 0; i < N; ++i)
            tmp[i] = y[i] + h * (a51 * k1[i] + a52 * r.k2[i] + a53 * r.k3[i] + a54 * r.k4[i]);
        r.k5 = call(rhs, t + c5 * h, tmp);
        for (std::size_t i = 0; i < N; ++i)
            tmp[i] = y[i] + h * (a61 * k1[i] + a62 * r.k2[i] + a63 * r.k3[i] + a64 * r.k4[i] + a65 * r.k5[i]);
        r.k6 = call(rhs, t + h, tmp);
        for (std::size_t i = 0; i < N; ++i)
            r.y[i] = y[i] + h * (a71 * k1[i] + a73 * r.k3[i] + a74 * r.k4[i] + a75 * r.k5[i] + a76 * r.k6[i]);
        r.k7 = call(rhs, t + h, r.y);

        double err = 0.0;
        for (std::size_t i = 0; i < N; ++i) {
            const double e =
                h * (e1 * k1[i] + e3 * r.k3[i] + e4 * r.k4[i] + e5 * r.k5[i] + e6 * r.k6[i] + e7 * r.k7[i]);
            const double sc = scale(y[i], r.y[i]);
            err = std::max(err, std::abs(e) / sc);
            if (!std::isfinite(r.y[i])) err = std::numeric_limits<double>::infinity();
        }
        r.error = err;
        return r;
    }

    static State<N> dense(const StepResult& r, const State<N>& y0, double h, double theta) {
        constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                         d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                         d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;
        const double theta1 = 1.0 - theta;
        State<N> out;
        for (std::size_t i = 0; i < N; ++i) {
            const double dy = r.y[i] - y0[i];
            const double bspl = h * r.k1[i] - dy;
            const double c4 = dy - h * r.k7[i] - bspl;
            const double c5 = h * (d1 * r.k1[i] + d3 * r.k3[i] + d4 * r.k4[i] + d5 * r.k5[i] + d6 * r.k6[i] +
                                   d7 * r.k7[i]);
            out[i] = y0[i] + theta * (dy + theta1 * (bspl + theta * (c4 + theta1 * c5)));
        }
        return out;
    }

    Tolerance tol_;
    Stats stats_;
};

}  // namespace twistenv::ode
