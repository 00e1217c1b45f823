#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "twistenv/cli.hpp"

namespace {

void add_common(CLI::App* sub, twistenv::cli::RunConfig& cfg, bool needs_input) {
    auto* in = sub->add_option("input", cfg.input, "lattice file");
    if (needs_input) in->required()->check(CLI::ExistingFile);
    sub->add_option("-o,--output", cfg.output, "output file (default stdout)");
    sub->add_option("--rtol", cfg.rtol, "relative tolerance")->capture_default_str();
    sub->add_option("--atol", cfg.atol, "absolute tolerance")->capture_default_str();
    sub->add_option("--dz", cfg.output_step, "output step in z/z0")->capture_default_str();
}

void add_profile(CLI::App* sub, twistenv::cli::RunConfig& cfg) {
    sub->add_option("--profile", cfg.profile, "field table z_m,bz_tesla,ez_mv_per_m replacing the elements")
        ->check(CLI::ExistingFile);
    sub->add_option("--length-m", cfg.length_m, "span end in metres (default: lattice end)");
}

}  // namespace

int main(int argc, char** argv) {
    using twistenv::cli::Command;
    twistenv::cli::RunConfig cfg;

    CLI::App app{"Envelope transport of twisted electrons through solenoid/cavity lattices"};
    app.require_subcommand(1);

    auto* check = app.add_subcommand("check", "validity report along the lattice");
    add_common(check, cfg, true);
    add_profile(check, cfg);
    check->add_flag("--strict", cfg.strict, "exit 4 if any criterion fails");

    auto* envelope = app.add_subcommand("envelope", "integrate the envelope and phases");
    add_common(envelope, cfg, true);
    add_profile(envelope, cfg);

    auto* wave = app.add_subcommand("wavefunction", "propagated mode on a polar grid");
    add_common(wave, cfg, true);
    add_profile(wave, cfg);
    wave->add_option("--z", cfg.z_dimless, "station z/z0 (default: span end)");
    wave->add_option("--nr", cfg.grid.n_r, "radial points")->capture_default_str();
    wave->add_option("--nphi", cfg.grid.n_phi, "azimuthal points")->capture_default_str();
    wave->add_option("--rmax", cfg.grid.r_max, "outer radius in rho_H")->capture_default_str();

    auto* cross = app.add_subcommand("crosscheck", "homogeneous-field closed forms against the integrator");
    add_common(cross, cfg, false);
    cross->add_option("--p0", cfg.crosscheck.p0_mev, "momentum, MeV")->capture_default_str();
    cross->add_option("--w0", cfg.crosscheck.w0_m, "initial width, m")->capture_default_str();
    cross->add_option("--dw0", cfg.crosscheck.dw0, "initial width slope (default -2/(k0 w0))");
    cross->add_option("--ez", cfg.crosscheck.ez_mv_per_m, "field values, MV/m")->capture_default_str();
    cross->add_option("--bref", cfg.crosscheck.bz_ref, "reference field for scaling, T")->capture_default_str();
    cross->add_option("--span", cfg.crosscheck.span, "span in z/z0")->capture_default_str();

    auto* hill = app.add_subcommand("hill", "compare the envelope with the Hill-pair construction");
    add_common(hill, cfg, true);
    add_profile(hill, cfg);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return twistenv::cli::exit_code::parse;
    }

    if (*check) cfg.command = Command::check;
    if (*envelope) cfg.command = Command::envelope;
    if (*wave) cfg.command = Command::wavefunction;
    if (*cross) cfg.command = Command::crosscheck;
    if (*hill) cfg.command = Command::hill;
    return twistenv::cli::run(cfg, std::cerr);
}
