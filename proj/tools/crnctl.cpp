// crnctl: compile, analyze and simulate dual-rail CRN controller designs.

#include "crnctl/analysis.hpp"
#include "crnctl/dsd.hpp"
#include "crnctl/errors.hpp"
#include "crnctl/report.hpp"
#include "crnctl/sim.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace crnctl;
using nlohmann::json;

namespace {

constexpr const char *kVersion = "1.0.0";
constexpr const char *kOutputEnv = "CRNCTL_OUTPUT_ROOT";

enum ExitCode { kOk = 0, kUsage = 1, kValidation = 2, kUndecided = 3, kSolverFailure = 4 };

// =============================================================================
// Helpers
// =============================================================================

std::string read_file(const fs::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path &path, const std::string &text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
}

std::string version_header() { return fmt::format("crnctl {}", kVersion); }

/// Resolves a design argument: a JSON file, the same path with ".json", or a built-in name.
BlockDiagram load_design(const std::string &arg, std::string &name) {
    fs::path path(arg);
    name = path.stem().string();
    for (const fs::path &candidate : {path, fs::path(arg + ".json")}) {
        if (fs::is_regular_file(candidate)) return parse_spec(std::string_view(read_file(candidate)));
    }
    const std::string base = path.filename().string();
    if (base == "example1_nominal") return builtin_example1(RateTable::example1_nominal());
    if (base == "example1_asymmetric") return builtin_example1(RateTable::example1_asymmetric());
    if (base == "example2") return builtin_example2(1.0, 1.0, 1.0, 2.0);
    throw Error("no design file or built-in design named '" + arg + "'");
}

std::map<std::string, double> parse_overrides(const std::vector<std::string> &items) {
    std::map<std::string, double> out;
    for (const auto &item : items) {
        const auto eq = item.find('=');
        if (eq == std::string::npos) throw Error("override must look like name=factor: " + item);
        try {
            out[item.substr(0, eq)] = std::stod(item.substr(eq + 1));
        } catch (const std::exception &) {
            throw Error("bad override factor: " + item);
        }
    }
    return out;
}

struct DesignOptions {
    std::string design;
    bool no_feedback = false;
    double eta_scale = 1.0;
    std::vector<std::string> rate_overrides;
};

Crn build_crn(const DesignOptions &o, std::string &name) {
    BlockDiagram d = load_design(o.design, name);
    if (o.no_feedback) {
        d = open_loop(d);
        name += "_open_loop";
    }
    Crn crn = compile_dual_rail(d);
    auto factors = parse_overrides(o.rate_overrides);
    if (o.eta_scale != 1.0) factors["eta"] = factors.count("eta") ? factors["eta"] * o.eta_scale : o.eta_scale;
    if (!factors.empty()) crn = apply_perturbation(crn, factors);
    return crn;
}

json manifest(const std::string &sub, const DesignOptions &o, const fs::path &out, json extra = json::object()) {
    json m;
    m["version"] = version_header();
    m["subcommand"] = sub;
    m["input"] = o.design;
    m["overrides"] = {{"no_feedback", o.no_feedback}, {"eta_scale", o.eta_scale}, {"rates", o.rate_overrides}};
    for (auto it = extra.begin(); it != extra.end(); ++it) m["overrides"][it.key()] = it.value();
    m["output_dir"] = out.string();
    m["deterministic"] = true;
    return m;
}

fs::path output_root() {
    const char *env = std::getenv(kOutputEnv);
    return env && *env ? fs::path(env) : fs::path("out");
}

void add_design_options(CLI::App *app, DesignOptions &o) {
    app->add_option("design", o.design, "Design JSON file or built-in name (example1_nominal, ...)")->required();
    app->add_flag("--no-feedback", o.no_feedback, "Open the loop: subtraction blocks lose their negative input");
    app->add_option("--eta-scale", o.eta_scale, "Multiply the annihilation rate")->check(CLI::PositiveNumber);
    app->add_option("--rate", o.rate_overrides, "Scale a rate: name=factor (name is symbol, symbol+ or symbol-)");
}

// =============================================================================
// compile
// =============================================================================

int cmd_compile(const DesignOptions &o, const fs::path &out_dir) {
    std::string name;
    const Crn crn = build_crn(o, name);
    const StructuredSystem s = extract_structure(crn);
    write_file(out_dir / (name + ".crn"), export_reactions(crn));
    json doc = structure_to_json(crn, s);
    doc["manifest"] = manifest("compile", o, out_dir);
    write_file(out_dir / (name + ".structure.json"), dump(doc));
    fmt::print("{}: {} species, {} reactions, symmetric={}, cascaded={}\n", name, crn.n_species(),
               crn.reactions.size(), s.symmetric, is_cascaded(crn));
    fmt::print("wrote {}\n", (out_dir / (name + ".crn")).string());
    fmt::print("wrote {}\n", (out_dir / (name + ".structure.json")).string());
    return kOk;
}

// =============================================================================
// analyze
// =============================================================================

int cmd_analyze(const DesignOptions &o, const fs::path &out_dir, double r_plus, double r_minus) {
    std::string name;
    const Crn crn = build_crn(o, name);
    Vector r = Vector::Zero(static_cast<Eigen::Index>(crn.n_input_rails()));
    if (r.size() == 2) r << r_plus, r_minus;
    const StabilityReport rep = stability_report(crn, r);
    json doc = to_json(rep);
    doc["manifest"] = manifest("analyze", o, out_dir, {{"r_plus", r_plus}, {"r_minus", r_minus}});
    write_file(out_dir / (name + ".report.json"), dump(doc));
    const std::string table = format_table(rep);
    write_file(out_dir / (name + ".table.txt"), table);
    fmt::print("{}", table);
    for (const auto &v : rep.verdicts) fmt::print("  {:<18} {:<15} {}\n", v.id, to_string(v.status), v.claim);
    return rep.undecided() ? kUndecided : kOk;
}

// =============================================================================
// simulate
// =============================================================================

struct SimOptions {
    std::string profile = "shipped";
    double t_end = 2e6;
    double x0 = 1.0;
    bool perturb = false;
    double perturb_fraction = 0.01;
    bool dsd = false;
    double c_max = 1e4;
    bool decoupled = false;
    double record_interval = 0.0;
    std::size_t max_steps = 0;
};

ReferenceProfile load_profile(const std::string &arg) {
    if (arg == "shipped") return ReferenceProfile::shipped();
    if (arg == "zero") return ReferenceProfile::zero();
    return ReferenceProfile::from_json(json::parse(read_file(arg)));
}

int cmd_simulate(const DesignOptions &o, const SimOptions &so, const fs::path &out_dir) {
    std::string name;
    const Crn crn = build_crn(o, name);
    const ReferenceProfile profile = so.perturb ? ReferenceProfile::zero() : load_profile(so.profile);

    IntegrationOptions io = so.dsd ? dsd_default_options() : IntegrationOptions{};
    io.record_interval = so.record_interval;
    if (so.max_steps > 0) io.ode.max_steps = so.max_steps;
    Vector x0 = default_initial_state(crn, so.x0);
    json extra{{"profile", so.perturb ? "zero" : so.profile}, {"t_end", so.t_end}, {"dsd", so.dsd},
               {"decoupled", so.decoupled}, {"x0_level_nM", so.x0}};
    if (so.perturb) {
        const FullEquilibrium eq = equilibrium_full(crn, Vector::Zero(static_cast<Eigen::Index>(crn.n_input_rails())));
        io.reference_state = eq.selected.x_star;
        x0 = perturb_state(eq.selected.x_star, 0, so.perturb_fraction);
        extra["perturbation"] = {{"species", crn.species_name(0)}, {"fraction", so.perturb_fraction},
                                 {"equilibrium", vector_to_json(eq.selected.x_star)}};
    }
    if (so.dsd) extra["c_max_nM"] = so.c_max;

    Trajectory traj;
    std::optional<FuelReport> fuel;
    std::string suffix;
    if (so.dsd) {
        const DsdProgram prog = translate(crn, so.c_max);
        write_file(out_dir / (name + ".dsd.txt"), export_program(prog));
        DsdRun run = simulate_dsd(prog, x0, profile, so.t_end, io);
        traj = std::move(run.trajectory);
        fuel = run.fuel;
        suffix = ".dsd";
    } else if (so.decoupled) {
        traj = integrate_decoupled(extract_structure(crn), x0, profile, so.t_end, io);
        suffix = ".decoupled";
    } else {
        traj = integrate(crn, x0, profile, so.t_end, io);
    }

    write_file(out_dir / (name + suffix + ".csv"), trajectory_csv(traj));
    json side = trajectory_sidecar(traj);
    side["profile"] = profile.to_json();
    side["manifest"] = manifest("simulate", o, out_dir, extra);
    write_file(out_dir / (name + suffix + ".meta.json"), dump(side));
    if (fuel) write_file(out_dir / (name + ".fuel.json"), dump(to_json(*fuel)));

    fmt::print("{}{}: {} samples to t={:g} s, diverged={}\n", name, suffix, traj.size(), traj.t.back(), traj.diverged);
    if (traj.diverged) fmt::print("  {} at t={:g} s\n", traj.divergence_reason, traj.divergence_time);
    if (fuel) fmt::print("  max fuel depletion {:.4f}\n", fuel->max_depletion);
    return kOk;
}

// =============================================================================
// repro
// =============================================================================

std::string dated_name() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "repro-%Y%m%d", &tm);
    return buf;
}

int cmd_repro(const fs::path &out_dir, bool with_dsd_long) {
    bool undecided = false;
    const Crn nominal = compile_dual_rail(builtin_example1(RateTable::example1_nominal()));
    const Crn asym = compile_dual_rail(builtin_example1(RateTable::example1_asymmetric()));
    const Vector r0 = Vector::Zero(2);

    // Table 2
    json table2;
    std::string text;
    for (const auto &[label, crn] : {std::pair<std::string, const Crn &>{"nominal", nominal}, {"asymmetric", asym}}) {
        const StabilityReport rep = stability_report(crn, r0);
        undecided = undecided || rep.undecided();
        table2[label] = to_json(rep);
        text += label + "\n" + format_table(rep) + "\n";
    }
    write_file(out_dir / "table2.json", dump(table2));
    write_file(out_dir / "table2.txt", text);

    // Nominal tracking
    {
        const Trajectory tr = integrate(nominal, default_initial_state(nominal), ReferenceProfile::shipped(), 2e6);
        write_file(out_dir / "fig5_nominal.csv", trajectory_csv(tr));
        write_file(out_dir / "fig5_nominal.json", dump(trajectory_sidecar(tr)));
    }
    // Asymmetric instability, then decoupled rotated dynamics
    const FullEquilibrium eq = equilibrium_full(asym, r0);
    const Vector x0 = perturb_state(eq.selected.x_star, 0);
    {
        IntegrationOptions io;
        io.reference_state = eq.selected.x_star;
        const Trajectory tr = integrate(asym, x0, ReferenceProfile::zero(), 1e6, io);
        write_file(out_dir / "fig6_asymmetric.csv", trajectory_csv(tr));
        write_file(out_dir / "fig6_asymmetric.json", dump(trajectory_sidecar(tr)));
        IntegrationOptions dec = io;
        dec.stop_on_divergence = false;
        const Trajectory td = integrate_decoupled(extract_structure(asym), x0, ReferenceProfile::zero(), 1e6, dec);
        write_file(out_dir / "fig7_decoupled.csv", trajectory_csv(td));
        write_file(out_dir / "fig7_decoupled.json", dump(trajectory_sidecar(td)));
    }
    // DSD
    {
        IntegrationOptions io = dsd_default_options();
        io.record_interval = 1e3;
        const DsdProgram prog = translate(nominal, 1e4);
        write_file(out_dir / "dsd_nominal_program.txt", export_program(prog));
        const DsdRun run = simulate_dsd(prog, Vector::Zero(10), ReferenceProfile::shipped(), with_dsd_long ? 1e7 : 2e5, io);
        write_file(out_dir / "fig8_dsd_nominal.csv", trajectory_csv(run.trajectory));
        write_file(out_dir / "fig8_dsd_nominal.json", dump(trajectory_sidecar(run.trajectory)));
        write_file(out_dir / "fig9_dsd_fuel.json", dump(to_json(run.fuel)));

        IntegrationOptions ia = dsd_default_options();
        ia.reference_state = eq.selected.x_star;
        ia.record_interval = 100;
        const DsdRun ra = simulate_dsd(translate(asym, 1e4), x0, ReferenceProfile::zero(), 1e6, ia);
        write_file(out_dir / "fig10_dsd_asymmetric.csv", trajectory_csv(ra.trajectory));
        write_file(out_dir / "fig10_dsd_asymmetric.json", dump(trajectory_sidecar(ra.trajectory)));
    }
    // Example 2: existence of a positive q equilibrium over (c1, c2), d1 = d2 = 1
    {
        std::string csv = "c1,c2,descartes,q_positive,q1,q2\n";
        for (int i = 1; i <= 20; ++i) {
            for (int j = 1; j <= 20; ++j) {
                const double c1 = 0.15 * i, c2 = 0.15 * j;
                const StructuredSystem s = extract_structure(compile_dual_rail(builtin_example2(1, 1, c1, c2)));
                const QEquilibrium q = equilibrium_q(*s.R22_bar, 1.0, Vector::Zero(2));
                const Vector &qs = q.selected.x_star;
                csv += fmt::format("{:g},{:g},{},{},{:.10g},{:.10g}\n", c1, c2, descartes_condition(1, 1, c1, c2),
                                   q.selected.classification == EquilibriumClass::Positive, qs[0], qs[1]);
            }
        }
        write_file(out_dir / "example2_sweep.csv", csv);
    }
    write_file(out_dir / "manifest.json",
               dump({{"version", version_header()}, {"subcommand", "repro"}, {"deterministic", true}}));
    fmt::print("wrote repro datasets to {}\n", out_dir.string());
    return undecided ? kUndecided : kOk;
}

} // namespace

// =============================================================================
// main
// =============================================================================

int main(int argc, char **argv) {
    CLI::App app{"Compile and analyze dual-rail chemical reaction network controllers"};
    app.set_version_flag("--version", version_header());
    app.require_subcommand(1);
    app.fallthrough();

    std::string out;
    app.add_option("-o,--out", out, "Output directory (default: $CRNCTL_OUTPUT_ROOT or ./out)");

    DesignOptions design;
    auto *compile = app.add_subcommand("compile", "Compile a design to a CRN and dump its matrices");
    add_design_options(compile, design);

    auto *analyze = app.add_subcommand("analyze", "Stability report and Table-2 style summary");
    add_design_options(analyze, design);
    double r_plus = 0.0, r_minus = 0.0;
    analyze->add_option("--r-plus", r_plus, "Constant reference, plus rail (nM)")->check(CLI::NonNegativeNumber);
    analyze->add_option("--r-minus", r_minus, "Constant reference, minus rail (nM)")->check(CLI::NonNegativeNumber);

    auto *simulate = app.add_subcommand("simulate", "Integrate the CRN (or its DSD program) under a profile");
    add_design_options(simulate, design);
    SimOptions so;
    simulate->add_option("--profile", so.profile, "shipped, zero, or a JSON profile file");
    simulate->add_option("--t-end", so.t_end, "Horizon (s)")->check(CLI::PositiveNumber);
    simulate->add_option("--x0", so.x0, "Initial concentration of every species (nM)")->check(CLI::NonNegativeNumber);
    auto *perturb = simulate->add_option("--perturb", so.perturb_fraction,
                                         "Start at the r=0 equilibrium with x1+ raised by this fraction");
    perturb->expected(0, 1)->default_str("0.01");
    simulate->add_flag("--dsd", so.dsd, "Simulate the DSD program");
    simulate->add_option("--cmax", so.c_max, "Fuel concentration for --dsd (nM)")->check(CLI::PositiveNumber);
    simulate->add_flag("--decoupled", so.decoupled, "Integrate rotated dynamics with R12 = R21 = 0");
    simulate->add_option("--record-interval", so.record_interval, "Minimum spacing of samples (s)");
    simulate->add_option("--max-steps", so.max_steps, "Step budget for the integrator");

    auto *repro = app.add_subcommand("repro", "Regenerate every table and figure dataset");
    bool long_dsd = false;
    repro->add_flag("--long-dsd", long_dsd, "Run the nominal DSD simulation to 1e7 s");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        return app.exit(e);
    }
    so.perturb = perturb->count() > 0;

    try {
        if (*repro) {
            const fs::path dir = out.empty() ? output_root() / dated_name() : fs::path(out);
            return cmd_repro(dir, long_dsd);
        }
        const fs::path dir = out.empty() ? output_root() : fs::path(out);
        if (*compile) return cmd_compile(design, dir);
        if (*analyze) return cmd_analyze(design, dir, r_plus, r_minus);
        if (*simulate) return cmd_simulate(design, so, dir);
    } catch (const SchemaError &e) {
        std::cerr << "error: " << e.what() << "\n";
        return kValidation;
    } catch (const ValidationError &e) {
        std::cerr << "error: " << e.what() << "\n";
        return kValidation;
    } catch (const MissingRate &e) {
        std::cerr << "error: " << e.what() << "\n";
        return kValidation;
    } catch (const UnsupportedBlock &e) {
        std::cerr << "error: " << e.what() << "\n";
        return kValidation;
    } catch (const UnknownRate &e) {
        std::cerr << "error: " << e.what() << "\n";
        return kValidation;
    } catch (const StepUnderflow &e) {
        std::cerr << "error: " << e.what() << "\n";
        return kSolverFailure;
    } catch (const NoConvergence &e) {
        std::cerr << "error: " << e.what() << "\n";
        return kSolverFailure;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    }
    return kOk;
}
