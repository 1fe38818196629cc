#pragma once

// =============================================================================
// DNA strand displacement lowering
// =============================================================================
// Each source reaction becomes a chain of bimolecular steps mediated by fuel
// strands (initially C_max). For a unimolecular reaction X -> products at rate k:
//
//     X + G  ->{2k/C_max}  I + W
//     I + T  ->{q_max}     products + W
//     I + B  ->{q_max}     X + W
//
// and for an annihilation X+ + X- at rate eta:
//
//     X+ + X- ->{q_max}  I
//     I + T   ->{q_max}  W
//     I + B   ->{q_max}  X+ + X- + W
//
// with q_max = 2 eta. T and B split the intermediate evenly, so while fuels
// stay near C_max the reduced dynamics match the source network. W is one
// waste counter per chain and grows by one for every fuel unit consumed.
// =============================================================================

#include "crnctl/crn.hpp"
#include "crnctl/sim.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace crnctl {

enum class DsdSpeciesKind { Signal, Fuel, Intermediate, Waste };

struct DsdOperand {
    bool is_input = false;
    std::size_t index = 0;
};

struct DsdReaction {
    DsdOperand a;
    DsdOperand b;
    std::vector<DsdOperand> products;
    double rate = 0.0; // 1/(nM*s)
    std::size_t chain = 0;
};

struct DsdChain {
    std::string source;     // source reaction name
    ReactionKind kind = ReactionKind::Catalysis;
    std::optional<std::size_t> gate; // fuel of the first step; none for annihilation
    std::size_t translator = 0;
    std::size_t backward = 0;
    std::size_t intermediate = 0;
    std::size_t waste = 0;
};

struct DsdProgram {
    std::vector<std::string> species;
    std::vector<DsdSpeciesKind> kinds;
    std::vector<std::string> inputs;
    std::size_t n_base = 0;
    std::vector<DsdReaction> reactions;
    std::vector<DsdChain> chains;
    double c_max = 0.0; // nM
    double q_max = 0.0; // 1/(nM*s)

    std::size_t n_species() const noexcept { return species.size(); }
    std::size_t n_signal() const noexcept { return 2 * n_base; }
    std::vector<std::size_t> fuels() const;
    /// Signal rails from `signal`, fuels at C_max, intermediates and waste at 0.
    Vector initial_state(const Vector &signal) const;
};

DsdProgram translate(const Crn &crn, double c_max = 1e4);

/// Mass-action field of the expanded program (r = [r+, r-] clamped).
Vector dsd_field(const DsdProgram &prog, const Vector &x, const Vector &r);
Matrix dsd_jacobian(const DsdProgram &prog, const Vector &x, const Vector &r);

/// Signal derivative with fuels clamped at C_max and intermediates at their
/// quasi-steady state.
Vector idealized_field(const DsdProgram &prog, const Vector &signal, const Vector &r);

struct FuelEntry {
    std::string name;
    double minimum = 0.0; // nM
    double time_of_minimum = 0.0;
    double depletion = 0.0; // (C_max - minimum) / C_max
};

struct FuelReport {
    std::vector<FuelEntry> fuels;
    double max_depletion = 0.0;
    /// max over chains |fuel consumed - waste produced| at the final time (nM)
    double bookkeeping_error = 0.0;
    /// Largest increase of any fuel between consecutive samples (nM).
    double max_fuel_increase = 0.0;
};

struct DsdRun {
    Trajectory trajectory;
    FuelReport fuel;
};

/// Defaults to the Rosenbrock integrator at rel 1e-7, abs 1e-10 unless options override.
IntegrationOptions dsd_default_options();

DsdRun simulate_dsd(const DsdProgram &prog, const Vector &signal0, const ReferenceProfile &profile, double t_end,
                    const IntegrationOptions &opts = dsd_default_options());

FuelReport fuel_report(const DsdProgram &prog, const Trajectory &traj);

struct FidelityReport {
    double max_relative_deviation = 0.0;
    /// Same, restricted to samples where every fuel is at least 0.9 C_max.
    double max_relative_deviation_fueled = 0.0;
    /// Largest fuel depletion seen before the deviation first exceeds 5%.
    std::optional<double> depletion_at_threshold;
    double max_depletion = 0.0;
    bool crn_diverged = false;
    bool dsd_diverged = false;
};

FidelityReport fidelity_check(const Crn &crn, const DsdProgram &prog, const Vector &signal0,
                              const ReferenceProfile &profile, double t_end);

std::string export_program(const DsdProgram &prog);
nlohmann::json to_json(const FuelReport &report);
nlohmann::json to_json(const FidelityReport &report);

} // namespace crnctl
