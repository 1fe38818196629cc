#pragma once

// =============================================================================
// Adaptive integrators for autonomous systems
// =============================================================================
//   Dopri5       explicit Dormand-Prince 5(4), FSAL
//   Rosenbrock23 linearly implicit 2(3) pair for stiff systems
// Piecewise-constant inputs are handled by the caller: each constant segment
// is an autonomous system advanced with `advance`.
// =============================================================================

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <limits>

namespace crnctl {

enum class OdeMethod { Dopri5, Rosenbrock23 };

struct OdeOptions {
    OdeMethod method = OdeMethod::Dopri5;
    double rel_tol = 1e-8;
    double abs_tol = 1e-12;
    double initial_step = 0.0; // 0 selects automatically
    double max_step = std::numeric_limits<double>::infinity();
    std::size_t max_steps = 50'000'000;
    /// Replace negative components by zero after each accepted step.
    bool clip_negative = true;
};

struct OdeStats {
    std::size_t accepted = 0;
    std::size_t rejected = 0;
    std::size_t rhs_evaluations = 0;
    std::size_t jacobian_evaluations = 0;
    std::size_t clip_events = 0;
    /// Most negative raw component seen before clipping.
    double min_raw = 0.0;
};

struct OdeSystem {
    using Rhs = std::function<void(const Eigen::VectorXd &x, Eigen::VectorXd &dx)>;
    using Jac = std::function<void(const Eigen::VectorXd &x, Eigen::MatrixXd &J)>;

    Rhs rhs;
    Jac jacobian; // required by Rosenbrock23
};

class OdeSolver {
  public:
    /// Called after every accepted step; return false to stop.
    using Observer = std::function<bool(double t, const Eigen::VectorXd &x)>;

    OdeSolver(OdeSystem system, OdeOptions options);

    /// Advances x from t0 to t1 and lands exactly on t1 unless the observer
    /// stops early. Returns the time reached. Throws StepUnderflow.
    double advance(Eigen::VectorXd &x, double t0, double t1, const Observer &observer = {});

    const OdeStats &stats() const noexcept { return stats_; }
    const OdeOptions &options() const noexcept { return options_; }

  private:
    double error_norm(const Eigen::VectorXd &err, const Eigen::VectorXd &x0, const Eigen::VectorXd &x1) const;
    double initial_step(const Eigen::VectorXd &x, const Eigen::VectorXd &f0, double span);
    bool accept(Eigen::VectorXd &x);
    void eval(const Eigen::VectorXd &x, Eigen::VectorXd &dx);

    OdeSystem system_;
    OdeOptions options_;
    OdeStats stats_;
    double h_ = 0.0;
};

} // namespace crnctl
