#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "envelope.hpp"
#include "errors.hpp"
#include "lattice.hpp"
#include "scaled_system.hpp"
#include "validity.hpp"
#include "wavefunction.hpp"

namespace twistenv::io {

/// Shortest decimal string that parses back to the same binary64 value.
inline std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline std::optional<double> parse_double(std::string_view s) {
    double v = 0.0;
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

inline std::optional<long long> parse_integer(std::string_view s) {
    long long v = 0;
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

/// Parsed lattice file.
struct LatticeFile {
    BeamSpec beam;
    FieldLattice lattice;
    std::optional<double> bz_ref;  // Tesla, from a `reference` line
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

inline std::vector<std::string_view> split_ws(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
        std::size_t j = i;
        while (j < s.size() && s[j] != ' ' && s[j] != '\t') ++j;
        if (j > i) out.push_back(s.substr(i, j - i));
        i = j;
    }
    return out;
}

/// key=value pairs of one line; rejects duplicates and malformed tokens.
class KeyValues {
  public:
    KeyValues(std::size_t line, const std::vector<std::string_view>& tokens, std::size_t first) : line_(line) {
        for (std::size_t i = first; i < tokens.size(); ++i) {
            const auto eq = tokens[i].find('=');
            if (eq == std::string_view::npos || eq == 0 || eq + 1 == tokens[i].size())
                throw ParseError(line, "expected key=value, got '" + std::string(tokens[i]) + "'");
            std::string key(tokens[i].substr(0, eq));
            if (values_.count(key)) throw ParseError(line, "duplicate key '" + key + "'");
            values_.emplace(std::move(key), std::string(tokens[i].substr(eq + 1)));
        }
    }

    void allow_only(std::initializer_list<std::string_view> keys) const {
        for (const auto& [k, v] : values_) {
            bool ok = false;
            for (auto a : keys) ok = ok || a == k;
            if (!ok) throw ParseError(line_, "unknown key '" + k + "'");
        }
    }

    bool has(const std::string& key) const { return values_.count(key) != 0; }

    std::string text(const std::string& key) const {
        auto it = values_.find(key);
        if (it == values_.end()) throw SemanticError(line_, "missing key '" + key + "'");
        return it->second;
    }

    double number(const std::string& key) const {
        const std::string t = text(key);
        auto v = parse_double(t);
        if (!v || !std::isfinite(*v)) throw ParseError(line_, "key '" + key + "': not a finite number: '" + t + "'");
        return *v;
    }

    double number_or(const std::string& key, double fallback) const { return has(key) ? number(key) : fallback; }

    long long integer(const std::string& key) const {
        const std::string t = text(key);
        auto v = parse_integer(t);
        if (!v) throw ParseError(line_, "key '" + key + "': not an integer: '" + t + "'");
        return *v;
    }

    long long integer_or(const std::string& key, long long fallback) const { return has(key) ? integer(key) : fallback; }

  private:
    std::size_t line_;
    std::map<std::string, std::string> values_;
};

inline BeamSpec parse_beam(std::size_t line, const KeyValues& kv) {
    kv.allow_only({"particle", "energy_total_mev", "n", "l", "spin", "b0", "db0", "mass_mev", "charge"});
    BeamSpec b;
    const std::string particle = kv.text("particle");
    if (particle == "electron") {
        b = BeamSpec::electron(0.0);
    } else if (particle == "proton") {
        b = BeamSpec::proton(0.0);
    } else if (particle == "custom") {
        b.species = Species::custom;
        b.mass = kv.number("mass_mev");
        const long long q = kv.integer("charge");
        if (q != 1 && q != -1) throw SemanticError(line, "charge must be +1 or -1");
        b.charge_sign = static_cast<int>(q);
    } else {
        throw ParseError(line, "unknown particle '" + particle + "'");
    }
    if (particle != "custom" && (kv.has("mass_mev") || kv.has("charge")))
        throw ParseError(line, "mass_mev and charge are only accepted for particle=custom");
    b.total_energy = kv.number("energy_total_mev");
    const long long n = kv.integer_or("n", 0);
    const long long l = kv.integer_or("l", 0);
    if (n < 0) throw SemanticError(line, "n must be nonnegative");
    if (n > 1'000'000 || l > 1'000'000 || l < -1'000'000) throw SemanticError(line, "mode index out of range");
    b.n = static_cast<int>(n);
    b.l = static_cast<int>(l);
    if (kv.has("spin")) {
        const std::string s = kv.text("spin");
        if (s == "up")
            b.spin = Spin::up;
        else if (s == "down")
            b.spin = Spin::down;
        else
            throw ParseError(line, "spin must be up or down");
    }
    b.b0 = kv.number_or("b0", 1.0);
    b.db0 = kv.number_or("db0", 0.0);
    if (!(b.mass > 0.0)) throw SemanticError(line, "mass must be positive");
    if (!(b.total_energy > b.mass)) throw SemanticError(line, "total energy must exceed the rest mass");
    if (!(b.b0 > 0.0)) throw SemanticError(line, "b0 must be positive");
    return b;
}

inline Element parse_element(std::size_t line, std::string_view kind, const KeyValues& kv) {
    Element el;
    if (kind == "drift") {
        kv.allow_only({"length_m"});
        el = Element::drift(kv.number("length_m"));
    } else if (kind == "solenoid") {
        kv.allow_only({"length_m", "bz_tesla"});
        el = Element::solenoid(kv.number("length_m"), kv.number("bz_tesla"));
    } else if (kind == "cavity") {
        kv.allow_only({"length_m", "ez_mv_per_m"});
        el = Element::cavity(kv.number("length_m"), kv.number("ez_mv_per_m"));
    } else {
        throw ParseError(line, "unknown element kind '" + std::string(kind) + "'");
    }
    if (!(el.length > 0.0)) throw SemanticError(line, "element length must be positive");
    return el;
}

}  // namespace detail

/// Line-oriented lattice grammar:
///
///     # comment
///     beam particle=electron energy_total_mev=2.0 n=0 l=3 spin=up b0=2.0 db0=-1.0
///     reference bz_tesla=0.5
///     element solenoid length_m=0.1 bz_tesla=0.5
///     element cavity length_m=0.129 ez_mv_per_m=-10
///     element drift length_m=0.2
///
/// The element kind may also be written as kind=<name>.
inline LatticeFile parse_lattice(std::string_view text) {
    LatticeFile out;
    bool have_beam = false;
    std::vector<Element> elements;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        std::string_view raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        if (auto hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
        const auto tokens = detail::split_ws(detail::trim(raw));
        if (tokens.empty()) continue;
        const std::string_view keyword = tokens[0];
        if (keyword == "beam") {
            if (have_beam) throw ParseError(line_no, "duplicate beam line");
            out.beam = detail::parse_beam(line_no, detail::KeyValues(line_no, tokens, 1));
            have_beam = true;
        } else if (keyword == "reference") {
            if (out.bz_ref) throw ParseError(line_no, "duplicate reference line");
            detail::KeyValues kv(line_no, tokens, 1);
            kv.allow_only({"bz_tesla"});
            const double bz = kv.number("bz_tesla");
            if (!(bz > 0.0)) throw SemanticError(line_no, "reference field must be positive");
            out.bz_ref = bz;
        } else if (keyword == "element") {
            if (tokens.size() < 2) throw ParseError(line_no, "element kind missing");
            if (tokens[1].find('=') == std::string_view::npos) {
                elements.push_back(detail::parse_element(line_no, tokens[1], detail::KeyValues(line_no, tokens, 2)));
            } else {
                // kind=<name> form: pull kind out, parse the remaining keys
                std::vector<std::string_view> rest;
                std::string_view kind;
                for (std::size_t i = 1; i < tokens.size(); ++i) {
                    if (tokens[i].substr(0, 5) == "kind=") {
                        if (!kind.empty()) throw ParseError(line_no, "duplicate key 'kind'");
                        kind = tokens[i].substr(5);
                    } else {
                        rest.push_back(tokens[i]);
                    }
                }
                if (kind.empty()) throw ParseError(line_no, "element kind missing");
                elements.push_back(detail::parse_element(line_no, kind, detail::KeyValues(line_no, rest, 0)));
            }
        } else {
            throw ParseError(line_no, "unknown keyword '" + std::string(keyword) + "'");
        }
    }
    if (!have_beam) throw SemanticError(line_no, "missing beam line");
    out.lattice = FieldLattice::from_elements(std::move(elements));
    return out;
}

/// Inverse of parse_lattice for element lattices.
inline std::string serialize_lattice(const LatticeFile& f) {
    if (f.lattice.sampled()) throw InvalidInput("sampled lattices are written with write_profile_csv");
    std::ostringstream os;
    const BeamSpec& b = f.beam;
    os << "beam particle=" << to_string(b.species);
    if (b.species == Species::custom) os << " mass_mev=" << format_double(b.mass) << " charge=" << b.charge_sign;
    os << " energy_total_mev=" << format_double(b.total_energy) << " n=" << b.n << " l=" << b.l
       << " spin=" << to_string(b.spin) << " b0=" << format_double(b.b0) << " db0=" << format_double(b.db0) << '\n';
    if (f.bz_ref) os << "reference bz_tesla=" << format_double(*f.bz_ref) << '\n';
    for (const Element& el : f.lattice.elements()) {
        os << "element " << to_string(el.kind) << " length_m=" << format_double(el.length);
        if (el.kind == ElementKind::solenoid) os << " bz_tesla=" << format_double(el.bz);
        if (el.kind == ElementKind::cavity) os << " ez_mv_per_m=" << format_double(el.ez);
        os << '\n';
    }
    return os.str();
}

inline constexpr std::string_view profile_header = "z_m,bz_tesla,ez_mv_per_m";

/// Sampled field table. Blank lines and `#` comments are ignored.
inline FieldLattice parse_profile_csv(std::string_view text) {
    std::vector<FieldSample> rows;
    bool have_header = false;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        std::string_view raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        if (auto hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
        const std::string_view line = detail::trim(raw);
        if (line.empty()) continue;
        if (!have_header) {
            std::string compact;
            for (char c : line)
                if (c != ' ' && c != '\t') compact += c;
            if (compact != profile_header)
                throw ParseError(line_no, "expected header '" + std::string(profile_header) + "'");
            have_header = true;
            continue;
        }
        std::vector<std::string_view> cells;
        std::size_t start = 0;
        while (true) {
            const auto comma = line.find(',', start);
            cells.push_back(detail::trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos
                                                                                            : comma - start)));
            if (comma == std::string_view::npos) break;
            start = comma + 1;
        }
        if (cells.size() != 3) throw ParseError(line_no, "expected 3 columns");
        double v[3];
        for (int k = 0; k < 3; ++k) {
            auto d = parse_double(cells[k]);
            if (!d || !std::isfinite(*d)) throw ParseError(line_no, "not a finite number: '" + std::string(cells[k]) + "'");
            v[k] = *d;
        }
        if (!rows.empty() && !(v[0] > rows.back().z)) throw NonMonotoneZ(line_no, "z must be strictly increasing");
        rows.push_back({v[0], v[1], v[2]});
    }
    if (!have_header) throw ParseError(line_no, "empty profile");
    if (rows.size() < 2) throw ParseError(line_no, "profile needs at least two rows");
    return FieldLattice::from_samples(std::move(rows));
}

inline void write_profile_csv(std::ostream& os, const FieldLattice& lat) {
    os << profile_header << '\n';
    if (lat.sampled()) {
        for (const FieldSample& s : lat.samples())
            os << format_double(s.z) << ',' << format_double(s.bz) << ',' << format_double(s.ez) << '\n';
        return;
    }
    throw InvalidInput("element lattices are written with serialize_lattice");
}

inline constexpr std::string_view envelope_header =
    "z_m,z_dimless,b,db,w_m,energy_mev,f_mev2,gamma_tilde,omega_tilde,phase_wkb_turns,phase_wkb_residual_rad,"
    "phase_gouy_per_kappa,phase_rot_per_l";

inline void write_envelope_csv(std::ostream& os, const EnvelopeTrace& trace, const ScaledSystem& s) {
    os << envelope_header << '\n';
    const double width_scale = std::sqrt(2.0) * s.rho_h();
    for (std::size_t i = 0; i < trace.samples.size(); ++i) {
        const EnvelopeSample& smp = trace.samples[i];
        // coefficients from the piece that the next interval lies in
        const double probe = i + 1 < trace.samples.size() ? 0.5 * (smp.z + trace.samples[i + 1].z)
                                                          : 0.5 * (smp.z + trace.samples[i - 1].z);
        const CkParams ck = s.ck_in_piece(smp.z, probe);
        const EnvelopeState& st = smp.state;
        os << format_double(s.to_metres(smp.z)) << ',' << format_double(smp.z) << ',' << format_double(st.b) << ','
           << format_double(st.db) << ',' << format_double(width_scale * st.b) << ',' << format_double(smp.energy)
           << ',' << format_double(s.f(smp.z)) << ',' << format_double(ck.gamma) << ',' << format_double(ck.omega)
           << ',' << st.wkb_turns << ',' << format_double(st.phi_wkb) << ',' << format_double(st.phi_gouy) << ','
           << format_double(st.phi_rot) << '\n';
    }
}

inline constexpr std::string_view grid_header = "rho_dimless,phi_rad,re,im,intensity";

inline void write_grid_csv(std::ostream& os, const std::vector<WaveSample>& samples) {
    os << grid_header << '\n';
    for (const WaveSample& w : samples)
        os << format_double(w.rho) << ',' << format_double(w.phi) << ',' << format_double(w.amplitude.real()) << ','
           << format_double(w.amplitude.imag()) << ',' << format_double(w.intensity) << '\n';
}

inline constexpr std::string_view report_header = "z_m,criterion,value,threshold,status";

inline void write_report(std::ostream& os, const ValidityReport& rep) {
    os << report_header << '\n';
    for (const ValidityRow& r : rep.rows)
        os << format_double(r.z_m) << ',' << r.criterion << ',' << format_double(r.value) << ','
           << format_double(r.threshold) << ',' << to_string(r.status) << '\n';
}

}  // namespace twistenv::io
