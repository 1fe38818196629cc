#include "properties.hpp"

#include "crnctl/analysis.hpp"
#include "crnctl/crn.hpp"
#include "crnctl/dsd.hpp"
#include "crnctl/frontend.hpp"
#include "crnctl/sim.hpp"

#include <fmt/core.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

using namespace crnctl;
using namespace testsupport;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

/// Rounds to three significant figures.
std::string sig3(double v) { return fmt::format("{:.2e}", v); }

const Crn &nominal() {
    static const Crn crn = compile_dual_rail(builtin_example1(RateTable::example1_nominal()));
    return crn;
}

const Crn &asymmetric() {
    static const Crn crn = compile_dual_rail(builtin_example1(RateTable::example1_asymmetric()));
    return crn;
}

const NamedSpectrum &spectrum(const StabilityReport &rep, const std::string &name) {
    const NamedSpectrum *s = rep.find(name);
    if (!s) throw std::runtime_error("missing spectrum " + name);
    return *s;
}

// =============================================================================
// Criteria
// =============================================================================

Outcome stability_table_nominal() {
    const StabilityReport rep = stability_report(nominal(), Vector::Zero(2));
    const Spectrum &r11 = spectrum(rep, "R11_bar").spectrum;
    const Spectrum &as = spectrum(rep, "A_s").spectrum;
    const bool ok = sig3(r11.abscissa) == "-3.96e-06" && sig3(as.abscissa) == "-3.96e-06" && r11.is_hurwitz &&
                    as.is_hurwitz;
    return {ok, fmt::format("alpha(R11_bar) = {:.6g}, alpha(A_s) = {:.6g}", r11.abscissa, as.abscissa)};
}

Outcome stability_table_asymmetric() {
    const StabilityReport rep = stability_report(asymmetric(), Vector::Zero(2));
    const Spectrum &r11 = spectrum(rep, "R11").spectrum;
    const Spectrum &as = spectrum(rep, "A_s").spectrum;
    const auto dom = as.dominant();
    const bool ok = sig3(r11.abscissa) == "-5.23e-06" && sig3(dom.real()) == "3.16e-05" &&
                    sig3(std::abs(dom.imag())) == "1.26e-03" && r11.is_hurwitz && !as.is_hurwitz;
    return {ok, fmt::format("alpha(R11) = {:.6g} ({}), A_s dominant = {} ({})", r11.abscissa,
                            r11.is_hurwitz ? "H" : "not-H", format_eigenvalue(dom), as.is_hurwitz ? "H" : "not-H")};
}

Outcome instability() {
    const FullEquilibrium eq = equilibrium_full(asymmetric(), Vector::Zero(2));
    const Vector x0 = perturb_state(eq.selected.x_star, 0);
    IntegrationOptions io;
    io.reference_state = eq.selected.x_star;
    const Trajectory crn = integrate(asymmetric(), x0, ReferenceProfile::zero(), 1e6, io);

    IntegrationOptions id = dsd_default_options();
    id.reference_state = eq.selected.x_star;
    id.record_interval = 100;
    const DsdRun dsd = simulate_dsd(translate(asymmetric(), 1e4), x0, ReferenceProfile::zero(), 1e6, id);

    const bool ok = crn.diverged && dsd.trajectory.diverged;
    return {ok, fmt::format("CRN diverged={} at {:.6g} s, DSD diverged={} at {:.6g} s", crn.diverged,
                            crn.divergence_time, dsd.trajectory.diverged, dsd.trajectory.divergence_time)};
}

Outcome nominal_behaviour() {
    const ReferenceProfile profile = ReferenceProfile::shipped();
    const Trajectory tr = integrate(nominal(), default_initial_state(nominal()), profile, 8e6);
    const auto &steps = profile.steps();
    double worst_tracking = 0.0;
    for (std::size_t s = 0; s < steps.size(); ++s) {
        const double r = steps[s].r_plus - steps[s].r_minus;
        if (r == 0.0) continue;
        const double t_tail = s + 1 < steps.size() ? steps[s + 1].t_start : 8e6;
        const Vector x = tr.at(t_tail * (1.0 - 1e-9));
        const double p5 = x[4] - x[9];
        worst_tracking = std::max(worst_tracking, std::abs(p5 - r) / std::abs(r));
    }
    const Vector x_end = tr.x.back();
    double asym = 0.0;
    for (Eigen::Index i = 0; i < 5; ++i)
        asym = std::max(asym, std::abs(x_end[i] - x_end[i + 5]) / std::max(x_end[i], x_end[i + 5]));
    const FullEquilibrium eq = equilibrium_full(nominal(), Vector::Zero(2));
    const bool positive = eq.selected.classification == EquilibriumClass::Positive && x_end.minCoeff() > 0.0;
    const double gap = (x_end - eq.selected.x_star).cwiseAbs().maxCoeff() / eq.selected.x_star.cwiseAbs().maxCoeff();
    const bool ok = worst_tracking < 0.01 && positive && asym < 1e-6 && gap < 1e-3;
    return {ok, fmt::format("worst tail tracking error {:.3g}, final rail asymmetry {:.3g}, distance to x* {:.3g}",
                            worst_tracking, asym, gap)};
}

Outcome decoupling() {
    const FullEquilibrium eq = equilibrium_full(asymmetric(), Vector::Zero(2));
    const Vector x0 = perturb_state(eq.selected.x_star, 0);
    IntegrationOptions io;
    io.reference_state = eq.selected.x_star;
    io.stop_on_divergence = false;
    const StructuredSystem s = extract_structure(asymmetric());
    const Trajectory coupled = integrate_decoupled(s, x0, ReferenceProfile::zero(), 1e6, io, true);
    const Trajectory dec = integrate_decoupled(s, x0, ReferenceProfile::zero(), 1e6, io);
    const double p_sup = dec.p_matrix().cwiseAbs().maxCoeff();
    const double q_sup = dec.sup_q_norm();
    const bool ok = coupled.diverged && !dec.diverged && std::isfinite(p_sup) && q_sup < 10.0 * x0.sum();
    return {ok, fmt::format("coupled diverged={}, decoupled diverged={}, decoupled sup|p| {:.3g}, sup||q|| {:.3g}",
                            coupled.diverged, dec.diverged, p_sup, q_sup)};
}

Outcome example2_law(const fs::path &repro_dir) {
    int mismatches = 0;
    for (int i = 1; i <= 20; ++i) {
        for (int j = 1; j <= 20; ++j) {
            const double c1 = 0.15 * i, c2 = 0.15 * j;
            const StructuredSystem s = extract_structure(compile_dual_rail(builtin_example2(1, 1, c1, c2)));
            const QEquilibrium q = equilibrium_q(*s.R22_bar, 1.0, Vector::Zero(2));
            const bool positive = q.selected.classification == EquilibriumClass::Positive &&
                                  q.selected.x_star.minCoeff() > 0.0;
            const bool zero = q.selected.x_star.cwiseAbs().maxCoeff() == 0.0;
            const bool expect = c2 * c1 > 1.0;
            if (expect != positive || (!expect && !zero)) ++mismatches;
        }
    }
    const double root = bisect([](double q) { return q * q * q + 2 * q * q + 3 * q - 2; }, 0.0, 1.0, 1e-16);
    const StructuredSystem s = extract_structure(compile_dual_rail(builtin_example2(1, 1, 1, 2)));
    const QEquilibrium q = equilibrium_q(*s.R22_bar, 1.0, Vector::Zero(2));
    const double err = std::abs(q.selected.x_star[0] - root);

    // The repro sweep must agree with the condition as well.
    int csv_rows = 0, csv_mismatch = 0;
    std::ifstream in(repro_dir / "example2_sweep.csv");
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        std::stringstream ss(line);
        std::string c1, c2, desc, pos;
        std::getline(ss, c1, ',');
        std::getline(ss, c2, ',');
        std::getline(ss, desc, ',');
        std::getline(ss, pos, ',');
        ++csv_rows;
        if (desc != pos) ++csv_mismatch;
    }
    const bool ok = mismatches == 0 && err < 1e-9 && csv_rows == 400 && csv_mismatch == 0;
    return {ok, fmt::format("grid mismatches {}, repro sweep rows {} with {} mismatches, |q1* - root| = {:.2e}",
                            mismatches, csv_rows, csv_mismatch, err)};
}

Outcome properties() {
    std::string failed;
    std::size_t total = 0;
    bool ok = true;
    for (const auto &suite : all_properties()) {
        const PropertyResult r = suite();
        total += r.instances;
        if (!r.ok()) {
            ok = false;
            failed += fmt::format(" [{}: {}/{} failed, {}]", r.name, r.failures, r.instances, r.first_failure);
        }
    }
    return {ok, fmt::format("{} suites, {} instances{}", all_properties().size(), total, failed)};
}

Outcome eta_scaling() {
    const auto q_inf = [](const Crn &crn) {
        const FullEquilibrium eq = equilibrium_full(crn, Vector::Zero(2));
        if (eq.selected.classification != EquilibriumClass::Positive) throw std::runtime_error("no positive equilibrium");
        const Vector &x = eq.selected.x_star;
        const Eigen::Index n = x.size() / 2;
        return (x.head(n) + x.tail(n)).cwiseAbs().maxCoeff();
    };
    const double base = q_inf(nominal());
    const double doubled = q_inf(apply_perturbation(nominal(), {{"eta", 2.0}}));
    const double ratio = base / doubled;
    return {std::abs(ratio - 2.0) / 2.0 < 0.05, fmt::format("||q*|| {:.6g} -> {:.6g}, ratio {:.4f}", base, doubled, ratio)};
}

Outcome dsd_fidelity() {
    const DsdProgram prog = translate(nominal(), 1e4);
    const FidelityReport fid = fidelity_check(nominal(), prog, Vector::Zero(10), ReferenceProfile::shipped(), 1e5);

    Rng rng(909);
    double field_err = 0.0;
    for (int i = 0; i < 120; ++i) {
        const Crn crn = i == 0 ? nominal() : compile_dual_rail(random_diagram(rng));
        const DsdProgram p = translate(crn, 1e4);
        const Vector x = random_state(rng, static_cast<Eigen::Index>(crn.n_species()), 0.0, 10.0);
        const Vector r = random_state(rng, static_cast<Eigen::Index>(crn.n_input_rails()), 0.0, 5.0);
        const Vector expect = mass_action_field(crn)(x, r);
        const double scale = std::max(1e-300, expect.cwiseAbs().maxCoeff());
        field_err = std::max(field_err, (idealized_field(p, x, r) - expect).cwiseAbs().maxCoeff() / scale);
    }

    IntegrationOptions io = dsd_default_options();
    io.record_interval = 1e3;
    const DsdRun run = simulate_dsd(prog, Vector::Zero(10), ReferenceProfile::shipped(), 1.2e7, io);
    const auto steady = detect_steady_state(run.trajectory, 1e6, 1e-9);
    const FullEquilibrium eq = equilibrium_full(nominal(), Vector::Zero(2));
    bool converged = false;
    double t_settle = 0.0, gap = 0.0;
    if (steady) {
        t_settle = steady->first;
        const Vector s = run.trajectory.signal(run.trajectory.size() - 1);
        gap = (s - eq.selected.x_star).cwiseAbs().maxCoeff() / eq.selected.x_star.cwiseAbs().maxCoeff();
        converged = t_settle >= 3e6 && t_settle <= 9e6 && s.minCoeff() > 0.0 && gap < 0.05;
    }
    const Vector s_end = run.trajectory.signal(run.trajectory.size() - 1);
    std::string final_state;
    for (Eigen::Index i = 0; i < s_end.size(); ++i) final_state += fmt::format("{}{:.4g}", i ? "," : "", s_end[i]);

    const bool ok = fid.max_relative_deviation_fueled < 0.05 && field_err <= 1e-10 && converged;
    return {ok, fmt::format("fueled deviation {:.3g}, idealized field error {:.2e}, steady={} at {:.3g} s, "
                            "distance to CRN x* {:.3g}, max depletion {:.3f}, final signals [{}]",
                            fid.max_relative_deviation_fueled, field_err, steady.has_value(), t_settle, gap,
                            run.fuel.max_depletion, final_state)};
}

} // namespace

// =============================================================================
// main
// =============================================================================

int main() {
    const fs::path repro_dir = fs::temp_directory_path() / "crnctl_acceptance_repro";
    fs::remove_all(repro_dir);
    const std::string cmd = std::string(CRNCTL_BIN) + " repro -o " + repro_dir.string() + " > /dev/null";
    const int repro_status = std::system(cmd.c_str());

    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"stability table nominal", stability_table_nominal},
        {"stability table asymmetric", stability_table_asymmetric},
        {"instability demonstration", instability},
        {"nominal behaviour", nominal_behaviour},
        {"decoupling experiment", decoupling},
        {"example 2 equilibrium law", [&] { return example2_law(repro_dir); }},
        {"property suites", properties},
        {"eta scaling", eta_scaling},
        {"DSD fidelity", dsd_fidelity},
    };

    int failures = repro_status == 0 ? 0 : 1;
    if (repro_status != 0) fmt::print("repro exited with status {}\n", repro_status);
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception &e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failures += o.pass ? 0 : 1;
        fmt::print("criterion {} {}: {} ({})\n", i + 1, criteria[i].first, o.pass ? "PASS" : "FAIL", o.detail);
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
