#include <sys/wait.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "twistenv/cli.hpp"

using namespace twistenv;
namespace fs = std::filesystem;

namespace {

const std::string samples_dir = TWISTENV_SAMPLES_DIR;

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(slurp(p));
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::stringstream ls(line);
        std::string c;
        while (std::getline(ls, c, ',')) cells.push_back(c);
        rows.push_back(cells);
    }
    return rows;
}

class TempDir {
  public:
    TempDir() {
        path_ = fs::temp_directory_path() / ("twistenv_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter_++));
        fs::create_directories(path_);
    }
    ~TempDir() { fs::remove_all(path_); }
    fs::path file(const std::string& name, const std::string& content = {}) const {
        const fs::path p = path_ / name;
        if (!content.empty()) std::ofstream(p) << content;
        return p;
    }

  private:
    static inline int counter_ = 0;
    fs::path path_;
};

int run_quiet(const cli::RunConfig& cfg) {
    std::ostringstream log;
    return cli::run(cfg, log);
}

int run_binary(const std::string& args) {
    const std::string cmd = std::string(TWISTENV_CLI) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Numbers, RoundTripFormatting) {
    for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0, 5e-324}) {
        const std::string s = io::format_double(v);
        EXPECT_EQ(*io::parse_double(s), v) << s;
    }
    EXPECT_FALSE(io::parse_double("1.0x"));
    EXPECT_FALSE(io::parse_double(""));
    EXPECT_EQ(*io::parse_integer("-3"), -3);
    EXPECT_FALSE(io::parse_integer("3.0"));
}

TEST(LatticeGrammar, MinimalFile) {
    const auto f = io::parse_lattice(
        "# minimal\n"
        "beam particle=electron energy_total_mev=2.0 n=0 l=3 spin=up b0=2.0 db0=-1.0\n"
        "element solenoid length_m=0.5 bz_tesla=0.5   # trailing comment\n");
    EXPECT_EQ(f.beam.species, Species::electron);
    EXPECT_EQ(f.beam.total_energy, 2.0);
    EXPECT_EQ(f.beam.l, 3);
    EXPECT_EQ(f.beam.b0, 2.0);
    EXPECT_EQ(f.beam.db0, -1.0);
    EXPECT_EQ(f.beam.charge_sign, -1);
    ASSERT_EQ(f.lattice.elements().size(), 1u);
    EXPECT_EQ(f.lattice.elements()[0].kind, ElementKind::solenoid);
    EXPECT_FALSE(f.bz_ref);
}

TEST(LatticeGrammar, KindKeyAndReference) {
    const auto f = io::parse_lattice(
        "beam particle=proton energy_total_mev=1000\n"
        "reference bz_tesla=0.25\n"
        "element kind=cavity length_m=0.1 ez_mv_per_m=5\n"
        "element drift length_m=0.2\n");
    EXPECT_EQ(f.beam.species, Species::proton);
    EXPECT_EQ(*f.bz_ref, 0.25);
    EXPECT_EQ(f.lattice.elements()[0].kind, ElementKind::cavity);
    EXPECT_EQ(f.lattice.elements()[0].ez, 5.0);
    EXPECT_EQ(f.beam.n, 0);
    EXPECT_EQ(f.beam.b0, 1.0);
}

TEST(LatticeGrammar, NegativeLengthIsSemanticError) {
    try {
        io::parse_lattice("beam particle=electron energy_total_mev=2.0\n\nelement drift length_m=-1\n");
        FAIL() << "expected SemanticError";
    } catch (const SemanticError& e) {
        EXPECT_EQ(e.line(), 3u);
    }
}

TEST(LatticeGrammar, MissingBeamLine) {
    EXPECT_THROW(io::parse_lattice("element drift length_m=1\n"), SemanticError);
}

TEST(LatticeGrammar, Rejections) {
    const std::string beam = "beam particle=electron energy_total_mev=2.0\n";
    const auto line_of = [](const std::string& text) -> std::size_t {
        try {
            io::parse_lattice(text);
        } catch (const ParseError& e) {
            return e.line();
        }
        return 0;
    };
    EXPECT_EQ(line_of(beam + "element drift length_m=1 bz_tesla=0.5\n"), 2u);
    EXPECT_EQ(line_of(beam + "element wiggler length_m=1\n"), 2u);
    EXPECT_EQ(line_of(beam + "element drift length_m=abc\n"), 2u);
    EXPECT_EQ(line_of(beam + "element drift length_m=1 length_m=2\n"), 2u);
    EXPECT_EQ(line_of(beam + "quadrupole k=1\n"), 2u);
    EXPECT_EQ(line_of("beam particle=muon energy_total_mev=2.0\n"), 1u);
    EXPECT_EQ(line_of("beam particle=electron energy_total_mev=2.0 colour=red\n"), 1u);
    EXPECT_EQ(line_of("beam particle=electron energy_total_mev=0.1\n"), 1u);
    EXPECT_EQ(line_of(beam + beam), 2u);
}

TEST(LatticeGrammar, RoundTrip) {
    const std::string text =
        "beam particle=custom mass_mev=105.6583755 charge=-1 energy_total_mev=300 n=2 l=-5 spin=down b0=1.25 db0=0.1\n"
        "reference bz_tesla=0.7\n"
        "element solenoid length_m=0.3 bz_tesla=-0.45\n"
        "element cavity length_m=0.129 ez_mv_per_m=-10\n"
        "element drift length_m=0.1\n";
    const auto a = io::parse_lattice(text);
    const std::string once = io::serialize_lattice(a);
    const auto b = io::parse_lattice(once);
    EXPECT_EQ(io::serialize_lattice(b), once);
    EXPECT_EQ(b.beam.mass, a.beam.mass);
    EXPECT_EQ(b.beam.spin, Spin::down);
    EXPECT_EQ(*b.bz_ref, 0.7);
    ASSERT_EQ(b.lattice.elements().size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(b.lattice.elements()[i], a.lattice.elements()[i]);
}

TEST(LatticeGrammar, AccelerationSampleReachesFinalEnergy) {
    const auto f = io::parse_lattice(slurp(fs::path(samples_dir) / "acceleration_4m.lat"));
    double cavity_length = 0.0;
    for (const Element& el : f.lattice.elements()) {
        EXPECT_LE(std::abs(el.bz), 0.5);
        EXPECT_LE(std::abs(el.ez), 10.0);
        if (el.kind == ElementKind::cavity) cavity_length += el.length;
    }
    EXPECT_NEAR(cavity_length, 0.645, 1e-12);
    EXPECT_LE(f.lattice.z_end(), 4.4 + 1e-12);
    const ScaledSystem s(f.lattice, f.beam, f.bz_ref);
    EXPECT_NEAR(s.energy(s.to_dimless(f.lattice.z_end())), 8.45, 1e-12);
}

TEST(Profile, UniformTwoRows) {
    const FieldLattice lat = io::parse_profile_csv("z_m,bz_tesla,ez_mv_per_m\n0,0.5,0\n1,0.5,0\n");
    EXPECT_TRUE(lat.sampled());
    for (double z : {0.0, 0.3, 1.0}) EXPECT_EQ(lat.bz(z), 0.5);
    EXPECT_EQ(lat.bz(1.5), 0.0);
}

TEST(Profile, DuplicateZ) {
    try {
        io::parse_profile_csv("z_m,bz_tesla,ez_mv_per_m\n0,0.5,0\n0,0.5,0\n");
        FAIL() << "expected NonMonotoneZ";
    } catch (const NonMonotoneZ& e) {
        EXPECT_EQ(e.line(), 3u);
    }
}

TEST(Profile, MalformedRows) {
    EXPECT_THROW(io::parse_profile_csv("z,b,e\n0,0,0\n1,0,0\n"), ParseError);
    EXPECT_THROW(io::parse_profile_csv("z_m,bz_tesla,ez_mv_per_m\n0,0.5\n1,0.5,0\n"), ParseError);
    EXPECT_THROW(io::parse_profile_csv("z_m,bz_tesla,ez_mv_per_m\n0,0.5,0\n"), ParseError);
    EXPECT_THROW(io::parse_profile_csv("z_m,bz_tesla,ez_mv_per_m\n0,0.5,nan\n1,0.5,0\n"), ParseError);
}

TEST(Profile, RampedSolenoidFollowsAnalyticRamp) {
    const auto lat = FieldLattice::from_elements({Element::solenoid(0.4, 0.5), Element::drift(0.1)});
    const CosineRampProfile ramp(lat, 0.06);
    std::ostringstream csv;
    io::write_profile_csv(csv, ramp.sample(1201));
    const FieldLattice table = io::parse_profile_csv(csv.str());
    const ScaledSystem s(table, BeamSpec::electron(2.0), 0.5);
    double worst = 0.0;
    for (int i = 0; i <= 4000; ++i) {
        const double zm = ramp.z_begin() + (ramp.z_end() - ramp.z_begin()) * i / 4000.0;
        worst = std::max(worst, std::abs(s.omega_field(s.to_dimless(zm)) - ramp.bz(zm) / 0.5));
    }
    EXPECT_LE(worst, 1e-3);
}

TEST(Run, ConfigValidation) {
    cli::RunConfig cfg;
    cfg.rtol = 0.0;
    EXPECT_THROW(cfg.validate(), InvalidInput);
    cfg.rtol = 1e-10;
    cfg.output_step = -1.0;
    EXPECT_THROW(cfg.validate(), InvalidInput);
    cfg.output_step = 0.1;
    EXPECT_NO_THROW(cfg.validate());
}

TEST(Run, FreeSpaceEnvelopeCsv) {
    TempDir tmp;
    cli::RunConfig cfg;
    cfg.command = cli::Command::envelope;
    cfg.input = (fs::path(samples_dir) / "free_space.lat").string();
    cfg.output = tmp.file("env.csv").string();
    cfg.output_step = 0.5;
    ASSERT_EQ(run_quiet(cfg), cli::exit_code::ok);
    const auto rows = read_csv(cfg.output);
    ASSERT_GT(rows.size(), 10u);
    std::string header;
    for (std::size_t i = 0; i < rows[0].size(); ++i) header += (i ? "," : "") + rows[0][i];
    EXPECT_EQ(header, io::envelope_header);
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const double z = std::stod(rows[i][1]);
        EXPECT_NEAR(std::stod(rows[i][2]), std::hypot(1.0, z), 1e-8);
    }
    EXPECT_TRUE(fs::exists(cfg.output + ".meta.json"));
    const auto meta = nlohmann::json::parse(slurp(cfg.output + ".meta.json"));
    EXPECT_EQ(meta.at("command"), "envelope");
}

TEST(Run, OutputIsDeterministic) {
    TempDir tmp;
    cli::RunConfig cfg;
    cfg.command = cli::Command::envelope;
    cfg.input = (fs::path(samples_dir) / "check_10mv.lat").string();
    cfg.output = tmp.file("a.csv").string();
    ASSERT_EQ(run_quiet(cfg), 0);
    const std::string first = slurp(cfg.output);
    cfg.output = tmp.file("b.csv").string();
    ASSERT_EQ(run_quiet(cfg), 0);
    EXPECT_EQ(slurp(cfg.output), first);
}

TEST(Run, CheckTenMegavoltGapAllPass) {
    TempDir tmp;
    cli::RunConfig cfg;
    cfg.command = cli::Command::check;
    cfg.input = (fs::path(samples_dir) / "check_10mv.lat").string();
    cfg.output = tmp.file("report.csv").string();
    cfg.strict = true;
    ASSERT_EQ(run_quiet(cfg), cli::exit_code::ok);
    const auto rows = read_csv(cfg.output);
    ASSERT_GT(rows.size(), 1u);
    for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_EQ(rows[i][4], "PASS") << rows[i][0] << ' ' << rows[i][1];
}

TEST(Run, StrictFailExitCode) {
    TempDir tmp;
    const fs::path lat = tmp.file("slow.lat",
                                  "beam particle=electron energy_total_mev=0.5110990 b0=1\n"
                                  "element cavity length_m=0.001 ez_mv_per_m=-10\n"
                                  "reference bz_tesla=0.5\n");
    cli::RunConfig cfg;
    cfg.command = cli::Command::check;
    cfg.input = lat.string();
    cfg.output = tmp.file("r.csv").string();
    EXPECT_EQ(run_quiet(cfg), cli::exit_code::ok);
    cfg.strict = true;
    EXPECT_EQ(run_quiet(cfg), cli::exit_code::validity_fail);
}

TEST(Run, ParseAndTurningPointExitCodes) {
    TempDir tmp;
    cli::RunConfig cfg;
    cfg.command = cli::Command::envelope;
    cfg.output = tmp.file("o.csv").string();
    cfg.input = tmp.file("bad.lat", "beam particle=electron energy_total_mev=2\nelement drift length_m=-2\n").string();
    EXPECT_EQ(run_quiet(cfg), cli::exit_code::parse);
    cfg.input = tmp.file("stop.lat",
                         "beam particle=electron energy_total_mev=1.0\nreference bz_tesla=0.5\n"
                         "element cavity length_m=1 ez_mv_per_m=10\n")
                    .string();
    EXPECT_EQ(run_quiet(cfg), cli::exit_code::turning_point);
    cfg.input = tmp.file("nob.lat", "beam particle=electron energy_total_mev=2\nelement drift length_m=1\n").string();
    EXPECT_EQ(run_quiet(cfg), cli::exit_code::error);
    cfg.input = (tmp.file("missing.lat")).string();
    EXPECT_EQ(run_quiet(cfg), cli::exit_code::error);
}

TEST(Run, Crosscheck) {
    const auto res = cli::crosscheck({}, {1e-10, 1e-12}, 0.01);
    ASSERT_EQ(res.size(), 2u);
    for (const auto& r : res) {
        EXPECT_LE(r.closed_vs_reference, 1e-10);
        EXPECT_LE(r.closed_vs_numeric, 1e-7);
        EXPECT_LE(r.reference_vs_numeric, 1e-7);
    }
}

TEST(Run, HillCommand) {
    TempDir tmp;
    cli::RunConfig cfg;
    cfg.command = cli::Command::hill;
    cfg.input = (fs::path(samples_dir) / "acceleration_4m.lat").string();
    cfg.output = tmp.file("h.csv").string();
    cfg.output_step = 0.1;
    ASSERT_EQ(run_quiet(cfg), 0);
    const auto rows = read_csv(cfg.output);
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_LE(std::stod(rows[0][1]), 1e-6);
    EXPECT_LE(std::stod(rows[1][1]), 1e-8);
}

TEST(Run, WavefunctionGridWithProfile) {
    TempDir tmp;
    cli::RunConfig cfg;
    cfg.command = cli::Command::wavefunction;
    cfg.input = (fs::path(samples_dir) / "ramped_solenoid.lat").string();
    cfg.profile = (fs::path(samples_dir) / "ramped_solenoid.csv").string();
    cfg.output = tmp.file("g.csv").string();
    cfg.grid = {24, 16, 9.0};
    ASSERT_EQ(run_quiet(cfg), 0);
    const auto rows = read_csv(cfg.output);
    ASSERT_EQ(rows.size(), 1u + 24u * 16u);
    EXPECT_EQ(rows[0].size(), 5u);
    EXPECT_EQ(rows[0][0], "rho_dimless");
    EXPECT_EQ(rows[0][4], "intensity");
    double prev_rho = -1.0;
    for (std::size_t i = 1; i < rows.size(); i += 16) {
        EXPECT_GT(std::stod(rows[i][0]), prev_rho);
        prev_rho = std::stod(rows[i][0]);
    }
}

TEST(Binary, ExitCodes) {
    TempDir tmp;
    const std::string out = tmp.file("x.csv").string();
    EXPECT_EQ(run_binary("check " + samples_dir + "/check_10mv.lat --strict -o " + out), 0);
    EXPECT_EQ(run_binary("envelope " + samples_dir + "/free_space.lat --dz 1 -o " + out), 0);
    EXPECT_EQ(run_binary("nonsense"), 2);
    EXPECT_EQ(run_binary("envelope --rtol abc " + samples_dir + "/free_space.lat"), 2);
    const std::string bad = tmp.file("bad.lat", "beam particle=electron\n").string();
    EXPECT_EQ(run_binary("envelope " + bad + " -o " + out), 2);
    const std::string stop = tmp.file("stop.lat",
                                      "beam particle=electron energy_total_mev=1.0\nreference bz_tesla=0.5\n"
                                      "element cavity length_m=1 ez_mv_per_m=10\n")
                                 .string();
    EXPECT_EQ(run_binary("envelope " + stop + " -o " + out), 3);
    EXPECT_EQ(run_binary("crosscheck -o " + out), 0);
}
