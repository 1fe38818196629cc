#pragma once

// =============================================================================
// Simulation of mass-action networks under piecewise-constant references
// =============================================================================

#include "crnctl/crn.hpp"
#include "crnctl/ode.hpp"

#include <json.hpp>

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace crnctl {

// -----------------------------------------------------------------------------
// Reference profiles
// -----------------------------------------------------------------------------

struct ReferenceStep {
    double t_start = 0.0;
    double r_plus = 0.0;  // nM
    double r_minus = 0.0; // nM
};

/// Sequence of steps; the reference is zero before the first one.
class ReferenceProfile {
  public:
    ReferenceProfile() = default;
    explicit ReferenceProfile(std::vector<ReferenceStep> steps);

    static ReferenceProfile zero() { return {}; }
    static ReferenceProfile constant(double r_plus, double r_minus);
    /// Representative step sequence: +5 nM, then -3 nM at 3.5e4 s, then 0 from 7e4 s.
    static ReferenceProfile shipped();

    const std::vector<ReferenceStep> &steps() const noexcept { return steps_; }
    /// r = [r+, r-] at time t (right-continuous at step times).
    Vector value(double t) const;
    /// Step times strictly inside (0, t_end).
    std::vector<double> breakpoints(double t_end) const;

    static ReferenceProfile from_json(const nlohmann::json &doc);
    nlohmann::json to_json() const;

  private:
    std::vector<ReferenceStep> steps_;
};

// -----------------------------------------------------------------------------
// Trajectories
// -----------------------------------------------------------------------------

struct Event {
    double t = 0.0;
    std::string kind; // "step", "clip", "steady", "divergence"
    std::string detail;
};

struct Trajectory {
    std::vector<std::string> species;
    std::size_t n_base = 0;
    /// Columns of x holding x1+..xN+ then x1-..xN-.
    std::vector<std::size_t> signal_columns;

    std::vector<double> t;
    std::vector<Vector> x;
    /// ||dx/dt||_inf over the signal columns at each sample.
    std::vector<double> rate;

    std::vector<Event> events;
    bool diverged = false;
    double divergence_time = 0.0;
    std::string divergence_reason;
    OdeStats stats;

    std::size_t size() const noexcept { return t.size(); }
    Vector signal(std::size_t i) const;
    Vector p(std::size_t i) const;
    Vector q(std::size_t i) const;
    /// Samples x rows, N columns.
    Matrix p_matrix() const;
    Matrix q_matrix() const;
    /// Linear interpolation of the state at time t.
    Vector at(double t) const;
    /// Max over samples of ||q||_2.
    double sup_q_norm() const;
};

struct IntegrationOptions {
    OdeOptions ode;
    double divergence_threshold = 1e6; // nM
    /// Signal-space reference equilibrium; enables the perturbation-growth test.
    std::optional<Vector> reference_state;
    double growth_factor = 100.0;
    /// Minimum spacing of recorded samples in s (0 records every accepted step).
    double record_interval = 0.0;
    /// Stop the run once divergence is flagged.
    bool stop_on_divergence = true;
};

/// Generic driven system used by both the CRN and the DSD simulators.
struct DrivenSystem {
    std::size_t dim = 0;
    std::function<void(const Vector &x, const Vector &r, Vector &dx)> rhs;
    std::function<void(const Vector &x, const Vector &r, Matrix &J)> jacobian;
    std::vector<std::string> names;
    std::vector<std::size_t> signal_columns;
    std::size_t n_base = 0;
    /// Maps the integrated state to the recorded state (identity when empty).
    std::function<Vector(const Vector &)> to_recorded;
};

Trajectory run(const DrivenSystem &sys, const Vector &x0, const ReferenceProfile &profile, double t_end,
               const IntegrationOptions &opts = {});

Trajectory integrate(const Crn &crn, const Vector &x0, const ReferenceProfile &profile, double t_end,
                     const IntegrationOptions &opts = {});

/// Integrates the rotated system with R12 = R21 = 0 (or the full rotated system
/// when `coupled`); the trajectory is reported in natural coordinates.
Trajectory integrate_decoupled(const StructuredSystem &sys, const Vector &x0, const ReferenceProfile &profile,
                               double t_end, const IntegrationOptions &opts = {}, bool coupled = false);

/// Earliest sample time after which the rate stays below eps for the whole window.
std::optional<std::pair<double, Vector>> detect_steady_state(const Trajectory &traj, double window, double eps);

/// Default initial state: every species at `level` nM.
Vector default_initial_state(const Crn &crn, double level = 1.0);
/// x* with x1+ increased by `fraction` of its value (or `fraction` nM if zero).
Vector perturb_state(const Vector &x_star, std::size_t index, double fraction = 0.01);

std::string trajectory_csv(const Trajectory &traj);
nlohmann::json trajectory_sidecar(const Trajectory &traj);

} // namespace crnctl
