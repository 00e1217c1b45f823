#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "constants.hpp"
#include "errors.hpp"

namespace twistenv {

enum class Species { electron, proton, custom };
enum class Spin { up, down };

inline std::string_view to_string(Species s) {
    switch (s) {
        case Species::electron: return "electron";
        case Species::proton: return "proton";
        case Species::custom: return "custom";
    }
    return "custom";
}

inline std::string_view to_string(Spin s) { return s == Spin::up ? "up" : "down"; }

/// Particle, injection energy, transverse mode and initial envelope.
struct BeamSpec {
    Species species = Species::electron;
    double mass = constants::electron_mass;  // MeV
    int charge_sign = -1;
    double total_energy = 2.0;  // MeV, E0
    int n = 0;
    int l = 0;
    Spin spin = Spin::up;
    double b0 = 1.0;
    double db0 = 0.0;

    static BeamSpec electron(double total_energy, double b0 = 1.0, double db0 = 0.0) {
        BeamSpec b;
        b.total_energy = total_energy;
        b.b0 = b0;
        b.db0 = db0;
        return b;
    }

    static BeamSpec proton(double total_energy, double b0 = 1.0, double db0 = 0.0) {
        BeamSpec b;
        b.species = Species::proton;
        b.mass = constants::proton_mass;
        b.charge_sign = +1;
        b.total_energy = total_energy;
        b.b0 = b0;
        b.db0 = db0;
        return b;
    }

    double momentum() const { return std::sqrt((total_energy - mass) * (total_energy + mass)); }
    double kinetic_energy() const { return total_energy - mass; }

    void validate() const {
        if (!(mass > 0.0)) throw InvalidInput("beam: mass must be positive");
        if (charge_sign != 1 && charge_sign != -1) throw InvalidInput("beam: charge sign must be +1 or -1");
        if (!(total_energy > mass)) throw InvalidInput("beam: total energy must exceed the rest mass");
        if (n < 0) throw InvalidInput("beam: radial index n must be nonnegative");
        if (!(b0 > 0.0) || !std::isfinite(b0)) throw InvalidInput("beam: b0 must be positive");
        if (!std::isfinite(db0)) throw InvalidInput("beam: db0 must be finite");
    }
};

enum class ElementKind { drift, solenoid, cavity };

inline std::string_view to_string(ElementKind k) {
    switch (k) {
        case ElementKind::drift: return "drift";
        case ElementKind::solenoid: return "solenoid";
        case ElementKind::cavity: return "cavity";
    }
    return "drift";
}

struct Element {
    ElementKind kind = ElementKind::drift;
    double length = 0.0;  // m
    double bz = 0.0;      // T, solenoid only
    double ez = 0.0;      // MV/m, cavity only

    static Element drift(double length) { return {ElementKind::drift, length, 0.0, 0.0}; }
    static Element solenoid(double length, double bz) { return {ElementKind::solenoid, length, bz, 0.0}; }
    static Element cavity(double length, double ez) { return {ElementKind::cavity, length, 0.0, ez}; }

    bool operator==(const Element&) const = default;
};

/// One row of a sampled field table.
struct FieldSample {
    double z = 0.0;   // m
    double bz = 0.0;  // T
    double ez = 0.0;  // MV/m

    bool operator==(const FieldSample&) const = default;
};

/// Interval on which both fields are linear in z. Element lattices produce
/// constant-field segments; sampled tables produce one segment per row pair.
struct Segment {
    double z_begin = 0.0;
    double z_end = 0.0;
    double bz_begin = 0.0;
    double bz_end = 0.0;
    double ez_begin = 0.0;
    double ez_end = 0.0;

    double length() const { return z_end - z_begin; }
    double bz_at(double z) const { return bz_begin + (bz_end - bz_begin) * (z - z_begin) / length(); }
    double ez_at(double z) const { return ez_begin + (ez_end - ez_begin) * (z - z_begin) / length(); }
    /// Exact integral of E_z from z_begin to z (MV).
    double ez_integral_to(double z) const {
        const double dz = z - z_begin;
        return ez_begin * dz + 0.5 * (ez_end - ez_begin) * dz * dz / length();
    }
    bool uniform() const { return bz_begin == bz_end && ez_begin == ez_end; }
};

/// Longitudinal field description: an ordered element list starting at z = 0
/// or a sampled table with linear interpolation. Both fields vanish outside
/// the described range.
class FieldLattice {
  public:
    FieldLattice() = default;

    static FieldLattice from_elements(std::vector<Element> elements) {
        FieldLattice lat;
        double z = 0.0;
        for (std::size_t i = 0; i < elements.size(); ++i) {
            const Element& el = elements[i];
            if (!(el.length > 0.0) || !std::isfinite(el.length))
                throw InvalidInput("element " + std::to_string(i) + ": length must be positive");
            if (!std::isfinite(el.bz) || !std::isfinite(el.ez))
                throw InvalidInput("element " + std::to_string(i) + ": fields must be finite");
            const double z_end = z + el.length;
            lat.segments_.push_back({z, z_end, el.bz, el.bz, el.ez, el.ez});
            z = z_end;
        }
        lat.elements_ = std::move(elements);
        lat.finish();
        return lat;
    }

    static FieldLattice from_samples(std::vector<FieldSample> samples) {
        FieldLattice lat;
        for (std::size_t i = 0; i < samples.size(); ++i) {
            const FieldSample& s = samples[i];
            if (!std::isfinite(s.z) || !std::isfinite(s.bz) || !std::isfinite(s.ez))
                throw InvalidInput("sample " + std::to_string(i) + ": values must be finite");
            if (i > 0 && !(s.z > samples[i - 1].z))
                throw InvalidInput("sample " + std::to_string(i) + ": z must be strictly increasing");
        }
        for (std::size_t i = 1; i < samples.size(); ++i) {
            const FieldSample& a = samples[i - 1];
            const FieldSample& b = samples[i];
            lat.segments_.push_back({a.z, b.z, a.bz, b.bz, a.ez, b.ez});
        }
        lat.samples_ = std::move(samples);
        lat.sampled_ = true;
        lat.finish();
        return lat;
    }

    bool sampled() const { return sampled_; }
    bool empty() const { return segments_.empty(); }
    std::span<const Element> elements() const { return elements_; }
    std::span<const FieldSample> samples() const { return samples_; }
    std::span<const Segment> segments() const { return segments_; }

    double z_begin() const { return segments_.empty() ? 0.0 : segments_.front().z_begin; }
    double z_end() const { return segments_.empty() ? 0.0 : segments_.back().z_end; }

    /// Index of the segment containing z (right-continuous), or nullopt outside.
    std::optional<std::size_t> locate(double z) const {
        if (segments_.empty() || z < z_begin() || z > z_end()) return std::nullopt;
        auto it = std::upper_bound(starts_.begin(), starts_.end(), z);
        std::size_t idx = static_cast<std::size_t>(it - starts_.begin()) - 1;
        return idx;
    }

    double bz(double z) const {
        auto idx = locate(z);
        return idx ? segments_[*idx].bz_at(z) : 0.0;
    }

    double ez(double z) const {
        auto idx = locate(z);
        return idx ? segments_[*idx].ez_at(z) : 0.0;
    }

    /// Integral of E_z from 0 to z in MV.
    double ez_integral(double z) const { return ez_integral_from_start(z) - integral_at_zero_; }

    double max_abs_bz() const {
        double m = 0.0;
        for (const Segment& s : segments_) m = std::max({m, std::abs(s.bz_begin), std::abs(s.bz_end)});
        return m;
    }

    double max_abs_ez() const {
        double m = 0.0;
        for (const Segment& s : segments_) m = std::max({m, std::abs(s.ez_begin), std::abs(s.ez_end)});
        return m;
    }

    /// Segment end points in increasing order (no duplicates).
    std::vector<double> breakpoints() const {
        std::vector<double> out;
        for (const Segment& s : segments_) {
            if (out.empty() || out.back() != s.z_begin) out.push_back(s.z_begin);
            out.push_back(s.z_end);
        }
        return out;
    }

  private:
    double ez_integral_from_start(double z) const {
        if (segments_.empty() || z <= z_begin()) return 0.0;
        if (z >= z_end()) return cumulative_.back();
        const std::size_t idx = *locate(z);
        return cumulative_[idx] + segments_[idx].ez_integral_to(z);
    }

    void finish() {
        starts_.clear();
        cumulative_.assign(1, 0.0);
        for (const Segment& s : segments_) {
            starts_.push_back(s.z_begin);
            cumulative_.push_back(cumulative_.back() + s.ez_integral_to(s.z_end));
        }
        integral_at_zero_ = 0.0;
        integral_at_zero_ = ez_integral_from_start(0.0);
    }

    std::vector<Element> elements_;
    std::vector<FieldSample> samples_;
    std::vector<Segment> segments_;
    std::vector<double> starts_;
    std::vector<double> cumulative_;  // integral of E_z from z_begin to each segment start, plus total
    double integral_at_zero_ = 0.0;
    bool sampled_ = false;
};

/// Analytic field profile of an element lattice whose step discontinuities
/// are replaced by raised-cosine transitions of full width `ramp_length`,
/// centred on each element boundary (including the two lattice ends).
class CosineRampProfile {
  public:
    CosineRampProfile(const FieldLattice& lattice, double ramp_length) : ramp_(ramp_length) {
        if (lattice.sampled()) throw InvalidInput("cosine ramps apply to element lattices only");
        if (!(ramp_length > 0.0)) throw InvalidInput("ramp length must be positive");
        double prev_bz = 0.0;
        double prev_ez = 0.0;
        for (const Segment& s : lattice.segments()) {
            if (ramp_length > s.length()) throw InvalidInput("ramp length exceeds an element length");
            edges_.push_back({s.z_begin, s.bz_begin - prev_bz, s.ez_begin - prev_ez});
            prev_bz = s.bz_begin;
            prev_ez = s.ez_begin;
        }
        if (!lattice.empty()) edges_.push_back({lattice.z_end(), -prev_bz, -prev_ez});
    }

    double bz(double z) const {
        double v = 0.0;
        for (const Edge& e : edges_) v += e.dbz * step(z - e.z);
        return v;
    }

    double ez(double z) const {
        double v = 0.0;
        for (const Edge& e : edges_) v += e.dez * step(z - e.z);
        return v;
    }

    double z_begin() const { return edges_.empty() ? 0.0 : edges_.front().z - 0.5 * ramp_; }
    double z_end() const { return edges_.empty() ? 0.0 : edges_.back().z + 0.5 * ramp_; }

    /// Sampled table on a uniform grid covering the ramped profile.
    FieldLattice sample(std::size_t points) const {
        if (points < 2) throw InvalidInput("need at least two sample points");
        std::vector<FieldSample> rows(points);
        const double a = z_begin();
        const double b = z_end();
        for (std::size_t i = 0; i < points; ++i) {
            const double z = a + (b - a) * static_cast<double>(i) / static_cast<double>(points - 1);
            rows[i] = {z, bz(z), ez(z)};
        }
        return FieldLattice::from_samples(std::move(rows));
    }

  private:
    struct Edge {
        double z;
        double dbz;
        double dez;
    };

    double step(double dz) const {
        const double half = 0.5 * ramp_;
        if (dz <= -half) return 0.0;
        if (dz >= half) return 1.0;
        return 0.5 * (1.0 - std::cos(constants::pi * (dz + half) / ramp_));
    }

    double ramp_;
    std::vector<Edge> edges_;
};

}  // namespace twistenv
