#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "envelope.hpp"
#include "errors.hpp"
#include "io.hpp"
#include "lattice.hpp"
#include "scaled_system.hpp"
#include "validity.hpp"
#include "wavefunction.hpp"

namespace twistenv::cli {

enum class Command { check, envelope, wavefunction, crosscheck, hill };

inline std::string_view to_string(Command c) {
    switch (c) {
        case Command::check: return "check";
        case Command::envelope: return "envelope";
        case Command::wavefunction: return "wavefunction";
        case Command::crosscheck: return "crosscheck";
        case Command::hill: return "hill";
    }
    return "check";
}

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int error = 1;
inline constexpr int parse = 2;
inline constexpr int turning_point = 3;
inline constexpr int validity_fail = 4;
}  // namespace exit_code

/// Homogeneous-field comparison setup. Defaults reproduce the reference
/// case: 20 keV/c electron, 0.2 um waist parameter, converging at
/// dw/dz = -2/(k0 w0), reference field 0.5 T.
struct CrosscheckParams {
    double p0_mev = 0.02;
    double w0_m = 0.2e-6;
    std::optional<double> dw0;  // dw/dz at z = 0; default -2/(k0 w0)
    std::vector<double> ez_mv_per_m{-1.4, -3.0};
    double bz_ref = 0.5;
    double span = 10.0;  // dimensionless
};

struct RunConfig {
    Command command = Command::check;
    std::string input;    // lattice file
    std::string profile;  // optional sampled field table replacing the elements
    std::string output;   // empty: stdout
    double rtol = 1e-10;
    double atol = 1e-12;
    double output_step = 0.01;
    std::optional<double> length_m;  // span end override
    std::optional<double> z_dimless;  // wavefunction station
    GridSpec grid{};
    bool strict = false;
    CrosscheckParams crosscheck{};

    void validate() const {
        if (!(rtol > 0.0) || !(atol > 0.0)) throw InvalidInput("tolerances must be positive");
        if (!(output_step > 0.0)) throw InvalidInput("output step must be positive");
        if (length_m && !(*length_m > 0.0)) throw InvalidInput("length must be positive");
        grid.validate();
    }
};

namespace detail {

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct Scenario {
    io::LatticeFile file;
    ScaledSystem system;
    double span_end;  // dimensionless
};

inline Scenario load(const RunConfig& cfg) {
    if (cfg.input.empty()) throw InvalidInput("an input lattice file is required");
    io::LatticeFile file = io::parse_lattice(read_file(cfg.input));
    if (!cfg.profile.empty()) file.lattice = io::parse_profile_csv(read_file(cfg.profile));
    ScaledSystem sys(file.lattice, file.beam, file.bz_ref);
    const double end_m = cfg.length_m ? *cfg.length_m : file.lattice.z_end();
    if (!(end_m > 0.0)) throw InvalidInput("empty span: give the lattice a length or pass --length-m");
    return {std::move(file), std::move(sys), end_m / sys.z0()};
}

inline EnvelopeOptions envelope_options(const RunConfig& cfg) { return {{cfg.rtol, cfg.atol}, cfg.output_step}; }

class Output {
  public:
    explicit Output(const std::string& path) : path_(path) {
        if (!path.empty()) {
            file_.open(path, std::ios::binary);
            if (!file_) throw Error("cannot write '" + path + "'");
        }
    }
    std::ostream& stream() { return path_.empty() ? std::cout : file_; }

  private:
    std::string path_;
    std::ofstream file_;
};

inline void write_sidecar(const RunConfig& cfg, const nlohmann::json& extra) {
    if (cfg.output.empty()) return;
    nlohmann::json meta = {
        {"command", std::string(to_string(cfg.command))},
        {"input", cfg.input},
        {"profile", cfg.profile},
        {"rtol", cfg.rtol},
        {"atol", cfg.atol},
        {"output_step", cfg.output_step},
    };
    meta.update(extra);
    std::ofstream side(cfg.output + ".meta.json");
    side << meta.dump(2) << '\n';
}

inline int run_check(const RunConfig& cfg, std::ostream& log) {
    Scenario sc = load(cfg);
    const ValidityReport rep = check_report(sc.system);
    Output out(cfg.output);
    io::write_report(out.stream(), rep);
    const Status overall = rep.overall();
    log << "overall: " << twistenv::to_string(overall) << '\n';
    write_sidecar(cfg, {{"overall", std::string(twistenv::to_string(overall))}});
    return cfg.strict && overall == Status::fail ? exit_code::validity_fail : exit_code::ok;
}

inline int run_envelope(const RunConfig& cfg, std::ostream& log) {
    Scenario sc = load(cfg);
    const EnvelopeTrace trace =
        integrate_ermakov(sc.system, 0.0, sc.span_end, sc.file.beam.b0, sc.file.beam.db0, envelope_options(cfg));
    Output out(cfg.output);
    io::write_envelope_csv(out.stream(), trace, sc.system);
    log << "samples: " << trace.samples.size() << "  z0_m: " << io::format_double(sc.system.z0())
        << "  rho_h_m: " << io::format_double(sc.system.rho_h()) << '\n';
    write_sidecar(cfg, {{"z0_m", sc.system.z0()}, {"rho_h_m", sc.system.rho_h()}, {"p0_mev", sc.system.p0()},
                        {"samples", trace.samples.size()}});
    return exit_code::ok;
}

inline int run_wavefunction(const RunConfig& cfg, std::ostream& log) {
    Scenario sc = load(cfg);
    const double z = cfg.z_dimless ? *cfg.z_dimless : sc.span_end;
    if (!(z > 0.0)) throw InvalidInput("wavefunction station must be positive");
    const EnvelopeTrace trace =
        integrate_ermakov(sc.system, 0.0, z, sc.file.beam.b0, sc.file.beam.db0, envelope_options(cfg));
    const TwistedMode mode = TwistedMode::from_beam(sc.file.beam);
    const auto samples = intensity_grid(mode, trace, sc.system, z, cfg.grid);
    Output out(cfg.output);
    io::write_grid_csv(out.stream(), samples);
    const double f_scale = samples.empty() ? 0.0 : samples.front().longitudinal_scale;
    log << "z_dimless: " << io::format_double(z) << "  grid norm: " << io::format_double(grid_norm(samples, cfg.grid))
        << "  longitudinal f^-1/4: " << io::format_double(f_scale) << '\n';
    write_sidecar(cfg, {{"z_dimless", z},
                        {"n", mode.n},
                        {"l", mode.l},
                        {"spin", std::string(twistenv::to_string(mode.spin))},
                        {"longitudinal_scale", f_scale},
                        {"grid", {{"n_r", cfg.grid.n_r}, {"n_phi", cfg.grid.n_phi}, {"r_max", cfg.grid.r_max}}}});
    return exit_code::ok;
}

}  // namespace detail

/// Maximum relative deviations between the closed-form envelope, the
/// reference width law and the numerical envelope for one field value.
struct CrosscheckResult {
    double ez_mv_per_m;
    double closed_vs_reference;
    double closed_vs_numeric;
    double reference_vs_numeric;
};

inline std::vector<CrosscheckResult> crosscheck(const CrosscheckParams& p, ode::Tolerance tol, double output_step) {
    const double m = constants::electron_mass;
    const BeamSpec beam = BeamSpec::electron(std::sqrt(p.p0_mev * p.p0_mev + m * m));
    std::vector<CrosscheckResult> out;
    for (double ez : p.ez_mv_per_m) {
        const ScaledSystem unit(FieldLattice{}, beam, p.bz_ref);
        // cavity slightly longer than the span so the whole span is inside it
        const FieldLattice lat = FieldLattice::from_elements({Element::cavity(p.span * unit.z0() * (1 + 1e-9), ez)});
        const ScaledSystem s(lat, beam, p.bz_ref);
        const double k0 = s.p0() / constants::hbar_c;
        const double dw0 = p.dw0 ? *p.dw0 : -2.0 / (k0 * p.w0_m);
        const double width_scale = std::sqrt(2.0) * s.rho_h();
        const double b0 = p.w0_m / width_scale;
        const double db0 = dw0 * k0 * s.rho_h() / std::sqrt(2.0);
        const UniformField u = UniformField::from_field(s, ez);
        const SilenkoParams sp = silenko_params(s, ez, b0, db0);
        const EnvelopeTrace trace = integrate_ermakov(s, 0.0, p.span, b0, db0, {tol, output_step});
        CrosscheckResult r{ez, 0.0, 0.0, 0.0};
        for (const EnvelopeSample& smp : trace.samples) {
            const double closed = closed_form_uniform_E(u, smp.z, b0, db0);
            const double ref = silenko_width(sp, s.to_metres(smp.z)) / width_scale;
            const double num = smp.state.b;
            r.closed_vs_reference = std::max(r.closed_vs_reference, std::abs(closed - ref) / std::abs(ref));
            r.closed_vs_numeric = std::max(r.closed_vs_numeric, std::abs(closed - num) / std::abs(closed));
            r.reference_vs_numeric = std::max(r.reference_vs_numeric, std::abs(ref - num) / std::abs(ref));
        }
        out.push_back(r);
    }
    return out;
}

struct HillCheck {
    double max_abs_envelope;
    double max_rel_wronskian;
};

inline HillCheck hill_check(const ScaledSystem& s, double span_end, double b0, double db0, const EnvelopeOptions& opt) {
    const EnvelopeTrace trace = integrate_ermakov(s, 0.0, span_end, b0, db0, opt);
    const HillPair pair = integrate_hill_pair(s, 0.0, span_end, b0, db0, opt);
    const std::vector<double> b_hill = hill_to_envelope(pair);
    if (b_hill.size() != trace.samples.size()) throw Error("Hill pair and envelope grids differ");
    HillCheck r{0.0, 0.0};
    for (std::size_t i = 0; i < b_hill.size(); ++i) {
        r.max_abs_envelope = std::max(r.max_abs_envelope, std::abs(trace.samples[i].state.b - b_hill[i]));
        const double w = s.p0() / std::sqrt(s.f(pair.z[i]));
        r.max_rel_wronskian = std::max(r.max_rel_wronskian, std::abs(pair.wronskian[i] - w) / w);
    }
    return r;
}

namespace detail {

inline int run_crosscheck(const RunConfig& cfg, std::ostream& log) {
    const auto results = crosscheck(cfg.crosscheck, {cfg.rtol, cfg.atol}, cfg.output_step);
    Output out(cfg.output);
    std::ostream& os = out.stream();
    os << "ez_mv_per_m,closed_vs_reference,closed_vs_numeric,reference_vs_numeric\n";
    double worst = 0.0;
    for (const auto& r : results) {
        os << io::format_double(r.ez_mv_per_m) << ',' << io::format_double(r.closed_vs_reference) << ','
           << io::format_double(r.closed_vs_numeric) << ',' << io::format_double(r.reference_vs_numeric) << '\n';
        worst = std::max(worst, r.closed_vs_reference);
    }
    log << "max closed-form vs reference deviation: " << io::format_double(worst) << '\n';
    write_sidecar(cfg, {{"p0_mev", cfg.crosscheck.p0_mev}, {"w0_m", cfg.crosscheck.w0_m}, {"span", cfg.crosscheck.span}});
    return exit_code::ok;
}

inline int run_hill(const RunConfig& cfg, std::ostream& log) {
    Scenario sc = load(cfg);
    const HillCheck r = hill_check(sc.system, sc.span_end, sc.file.beam.b0, sc.file.beam.db0, envelope_options(cfg));
    Output out(cfg.output);
    out.stream() << "max_abs_b_ode_minus_b_hill," << io::format_double(r.max_abs_envelope) << '\n'
                 << "max_rel_wronskian_minus_w," << io::format_double(r.max_rel_wronskian) << '\n';
    log << "max |b_ode - b_hill| = " << io::format_double(r.max_abs_envelope) << '\n';
    write_sidecar(cfg, {{"max_abs_b_ode_minus_b_hill", r.max_abs_envelope}});
    return exit_code::ok;
}

}  // namespace detail

/// Runs one command and maps failures onto exit codes: 2 parse/semantic
/// errors, 3 turning point, 4 validity FAIL under --strict, 1 anything else.
inline int run(const RunConfig& cfg, std::ostream& log = std::cerr) {
    try {
        cfg.validate();
        switch (cfg.command) {
            case Command::check: return detail::run_check(cfg, log);
            case Command::envelope: return detail::run_envelope(cfg, log);
            case Command::wavefunction: return detail::run_wavefunction(cfg, log);
            case Command::crosscheck: return detail::run_crosscheck(cfg, log);
            case Command::hill: return detail::run_hill(cfg, log);
        }
    } catch (const ParseError& e) {
        log << "parse error: " << e.what() << '\n';
        return exit_code::parse;
    } catch (const TurningPoint& e) {
        log << "error: " << e.what() << '\n';
        return exit_code::turning_point;
    } catch (const std::exception& e) {
        log << "error: " << e.what() << '\n';
        return exit_code::error;
    }
    return exit_code::error;
}

}  // namespace twistenv::cli
