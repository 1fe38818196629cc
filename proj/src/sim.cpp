#include "crnctl/sim.hpp"

#include "crnctl/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>

namespace crnctl {

using nlohmann::json;

// =============================================================================
// ReferenceProfile
// =============================================================================

ReferenceProfile::ReferenceProfile(std::vector<ReferenceStep> steps) : steps_(std::move(steps)) {
    std::vector<Diagnostic> diags;
    for (std::size_t i = 0; i < steps_.size(); ++i) {
        const auto &s = steps_[i];
        const std::string subject = fmt::format("step {}", i);
        if (!std::isfinite(s.t_start) || s.t_start < 0) diags.push_back({subject, "start time must be >= 0"});
        if (i > 0 && !(s.t_start > steps_[i - 1].t_start))
            diags.push_back({subject, "start times must be strictly increasing"});
        if (!std::isfinite(s.r_plus) || !std::isfinite(s.r_minus) || s.r_plus < 0 || s.r_minus < 0)
            diags.push_back({subject, "rail concentrations must be finite and >= 0"});
        if (s.r_plus > 0 && s.r_minus > 0) diags.push_back({subject, "at most one of r+ and r- may be nonzero"});
    }
    if (!diags.empty()) throw ValidationError(std::move(diags));
}

ReferenceProfile ReferenceProfile::constant(double r_plus, double r_minus) {
    return ReferenceProfile({{0.0, r_plus, r_minus}});
}

ReferenceProfile ReferenceProfile::shipped() {
    return ReferenceProfile({{0.0, 5.0, 0.0}, {3.5e4, 0.0, 3.0}, {7e4, 0.0, 0.0}});
}

Vector ReferenceProfile::value(double t) const {
    Vector r = Vector::Zero(2);
    for (const auto &s : steps_) {
        if (s.t_start > t) break;
        r << s.r_plus, s.r_minus;
    }
    return r;
}

std::vector<double> ReferenceProfile::breakpoints(double t_end) const {
    std::vector<double> out;
    for (const auto &s : steps_)
        if (s.t_start > 0 && s.t_start < t_end) out.push_back(s.t_start);
    return out;
}

ReferenceProfile ReferenceProfile::from_json(const json &doc) {
    const json &arr = doc.is_object() && doc.contains("steps") ? doc.at("steps") : doc;
    if (!arr.is_array()) throw SchemaError("profile", "expected an array of steps");
    std::vector<ReferenceStep> steps;
    for (std::size_t i = 0; i < arr.size(); ++i) {
        const json &s = arr[i];
        const std::string subject = fmt::format("step {}", i);
        try {
            if (s.is_array() && s.size() == 3) {
                steps.push_back({s[0].get<double>(), s[1].get<double>(), s[2].get<double>()});
            } else if (s.is_object()) {
                steps.push_back({s.at("t").get<double>(), s.value("r_plus", 0.0), s.value("r_minus", 0.0)});
            } else {
                throw SchemaError(subject, "expected [t, r_plus, r_minus] or an object with t, r_plus, r_minus");
            }
        } catch (const json::exception &e) {
            throw SchemaError(subject, e.what());
        }
    }
    return ReferenceProfile(std::move(steps));
}

json ReferenceProfile::to_json() const {
    json arr = json::array();
    for (const auto &s : steps_) arr.push_back({{"t", s.t_start}, {"r_plus", s.r_plus}, {"r_minus", s.r_minus}});
    return json{{"steps", arr}};
}

// =============================================================================
// Trajectory
// =============================================================================

Vector Trajectory::signal(std::size_t i) const {
    Vector s(static_cast<Eigen::Index>(signal_columns.size()));
    for (std::size_t c = 0; c < signal_columns.size(); ++c) s[static_cast<Eigen::Index>(c)] = x[i][static_cast<Eigen::Index>(signal_columns[c])];
    return s;
}

Vector Trajectory::p(std::size_t i) const {
    const Vector s = signal(i);
    const auto N = static_cast<Eigen::Index>(n_base);
    return s.head(N) - s.tail(N);
}

Vector Trajectory::q(std::size_t i) const {
    const Vector s = signal(i);
    const auto N = static_cast<Eigen::Index>(n_base);
    return s.head(N) + s.tail(N);
}

Matrix Trajectory::p_matrix() const {
    Matrix out(static_cast<Eigen::Index>(size()), static_cast<Eigen::Index>(n_base));
    for (std::size_t i = 0; i < size(); ++i) out.row(static_cast<Eigen::Index>(i)) = p(i).transpose();
    return out;
}

Matrix Trajectory::q_matrix() const {
    Matrix out(static_cast<Eigen::Index>(size()), static_cast<Eigen::Index>(n_base));
    for (std::size_t i = 0; i < size(); ++i) out.row(static_cast<Eigen::Index>(i)) = q(i).transpose();
    return out;
}

Vector Trajectory::at(double time) const {
    if (t.empty()) throw Error("empty trajectory");
    if (time <= t.front()) return x.front();
    if (time >= t.back()) return x.back();
    const auto it = std::upper_bound(t.begin(), t.end(), time);
    const auto i = static_cast<std::size_t>(it - t.begin());
    const double t0 = t[i - 1], t1 = t[i];
    if (t1 == t0) return x[i];
    const double w = (time - t0) / (t1 - t0);
    return (1.0 - w) * x[i - 1] + w * x[i];
}

double Trajectory::sup_q_norm() const {
    double best = 0.0;
    for (std::size_t i = 0; i < size(); ++i) best = std::max(best, q(i).norm());
    return best;
}

// =============================================================================
// Driver
// =============================================================================

namespace {

Vector signal_of(const Vector &x, const std::vector<std::size_t> &cols) {
    Vector s(static_cast<Eigen::Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) s[static_cast<Eigen::Index>(c)] = x[static_cast<Eigen::Index>(cols[c])];
    return s;
}

constexpr std::size_t kMaxClipEvents = 64;

} // namespace

Trajectory run(const DrivenSystem &sys, const Vector &x0, const ReferenceProfile &profile, double t_end,
               const IntegrationOptions &opts) {
    if (!(t_end > 0)) throw Error("t_end must be positive");
    if (static_cast<std::size_t>(x0.size()) != sys.dim) throw Error("initial state has the wrong dimension");
    if (!(opts.ode.rel_tol > 0) || !(opts.ode.abs_tol > 0)) throw Error("tolerances must be positive");

    Trajectory traj;
    traj.species = sys.names;
    traj.n_base = sys.n_base;
    traj.signal_columns = sys.signal_columns;

    auto recorded = [&](const Vector &x) { return sys.to_recorded ? sys.to_recorded(x) : x; };

    Vector r = profile.value(0.0);
    OdeSystem ode;
    ode.rhs = [&](const Vector &x, Vector &dx) { sys.rhs(x, r, dx); };
    if (sys.jacobian) ode.jacobian = [&](const Vector &x, Matrix &J) { sys.jacobian(x, r, J); };
    OdeSolver solver(ode, opts.ode);

    double ref_dev0 = 0.0;
    if (opts.reference_state) {
        ref_dev0 = (signal_of(recorded(x0), sys.signal_columns) - *opts.reference_state).cwiseAbs().maxCoeff();
        ref_dev0 = std::max(ref_dev0, 1e-12);
    }

    Vector dx(static_cast<Eigen::Index>(sys.dim));
    double last_recorded = -std::numeric_limits<double>::infinity();
    std::size_t last_clips = 0;

    auto check_divergence = [&](double t, const Vector &xr) {
        if (traj.diverged) return;
        const Vector s = signal_of(xr, sys.signal_columns);
        const double mag = s.cwiseAbs().maxCoeff();
        if (!std::isfinite(mag) || mag > opts.divergence_threshold) {
            traj.diverged = true;
            traj.divergence_time = t;
            traj.divergence_reason =
                fmt::format("signal concentration {:.6g} nM exceeds {:.6g} nM", mag, opts.divergence_threshold);
        } else if (opts.reference_state) {
            const double dev = (s - *opts.reference_state).cwiseAbs().maxCoeff();
            if (dev > opts.growth_factor * ref_dev0) {
                traj.diverged = true;
                traj.divergence_time = t;
                traj.divergence_reason = fmt::format(
                    "deviation from equilibrium grew from {:.6g} to {:.6g} nM (factor > {:.6g})", ref_dev0, dev,
                    opts.growth_factor);
            }
        }
        if (traj.diverged) traj.events.push_back({t, "divergence", traj.divergence_reason});
    };

    auto record = [&](double t, const Vector &x, bool force) {
        const auto &st = solver.stats();
        if (st.clip_events > last_clips) {
            if (traj.events.size() < kMaxClipEvents) {
                traj.events.push_back({t, "clip", fmt::format("negative round-off clipped (min raw {:.3g} nM)", st.min_raw)});
            }
            last_clips = st.clip_events;
        }
        const Vector xr = recorded(x);
        check_divergence(t, xr);
        if (!force && t - last_recorded < opts.record_interval && !traj.diverged) return;
        sys.rhs(x, r, dx);
        const Vector dr = recorded(dx); // recorded map is linear
        traj.t.push_back(t);
        traj.x.push_back(xr);
        traj.rate.push_back(signal_of(dr, sys.signal_columns).cwiseAbs().maxCoeff());
        last_recorded = t;
    };

    Vector x = x0;
    record(0.0, x, true);
    std::vector<double> cuts = profile.breakpoints(t_end);
    cuts.push_back(t_end);
    double t = 0.0;
    for (double cut : cuts) {
        r = profile.value(t);
        if (t > 0) traj.events.push_back({t, "step", fmt::format("r+={:g} nM, r-={:g} nM", r[0], r[1])});
        const double reached = solver.advance(x, t, cut, [&](double tt, const Vector &xx) {
            record(tt, xx, tt == cut);
            return !(traj.diverged && opts.stop_on_divergence);
        });
        t = reached;
        if (traj.t.back() != t) record(t, x, true);
        if (traj.diverged && opts.stop_on_divergence) break;
    }
    traj.stats = solver.stats();
    return traj;
}

Trajectory integrate(const Crn &crn, const Vector &x0, const ReferenceProfile &profile, double t_end,
                     const IntegrationOptions &opts) {
    if (x0.size() > 0 && x0.minCoeff() < 0) throw Error("initial state must be nonnegative");
    if (crn.n_input_rails() > 2) throw Error("profiles drive a single reference input");
    const VectorField f = mass_action_field(crn);
    DrivenSystem sys;
    sys.dim = crn.n_species();
    sys.n_base = crn.n_base();
    for (std::size_t i = 0; i < sys.dim; ++i) {
        sys.names.push_back(crn.species_name(i));
        sys.signal_columns.push_back(i);
    }
    const bool has_input = crn.n_input_rails() == 2;
    sys.rhs = [f, has_input](const Vector &x, const Vector &r, Vector &dx) {
        dx = has_input ? f(x, r) : f(x, Vector::Zero(0));
    };
    sys.jacobian = [f](const Vector &x, const Vector &, Matrix &J) { J = f.jacobian(x); };
    return run(sys, x0, profile, t_end, opts);
}

Trajectory integrate_decoupled(const StructuredSystem &s, const Vector &x0, const ReferenceProfile &profile,
                               double t_end, const IntegrationOptions &opts_in, bool coupled) {
    const auto N = static_cast<Eigen::Index>(s.n_base);
    Matrix R = s.R();
    if (!coupled) {
        R.topRightCorner(N, N).setZero();
        R.bottomLeftCorner(N, N).setZero();
    }
    const Matrix WB = s.W * s.B;
    const Matrix Winv = 0.5 * s.W.transpose();
    const double eta = s.eta;
    const bool has_input = s.B.cols() == 2;

    DrivenSystem sys;
    sys.dim = static_cast<std::size_t>(2 * N);
    sys.n_base = s.n_base;
    for (Eigen::Index i = 0; i < N; ++i) sys.names.push_back(fmt::format("x{}p", i + 1));
    for (Eigen::Index i = 0; i < N; ++i) sys.names.push_back(fmt::format("x{}m", i + 1));
    for (std::size_t i = 0; i < sys.dim; ++i) sys.signal_columns.push_back(i);
    sys.rhs = [R, WB, eta, N, has_input](const Vector &z, const Vector &r, Vector &dz) {
        dz = R * z;
        if (has_input) dz += WB * r;
        const auto p = z.head(N);
        const auto q = z.tail(N);
        dz.tail(N) -= 0.5 * eta * (q.cwiseProduct(q) - p.cwiseProduct(p));
    };
    sys.jacobian = [R, eta, N](const Vector &z, const Vector &, Matrix &J) {
        J = R;
        for (Eigen::Index i = 0; i < N; ++i) {
            J(N + i, i) += eta * z[i];
            J(N + i, N + i) -= eta * z[N + i];
        }
    };
    sys.to_recorded = [Winv](const Vector &z) -> Vector { return Winv * z; };

    IntegrationOptions opts = opts_in;
    opts.ode.clip_negative = false;
    return run(sys, s.W * x0, profile, t_end, opts);
}

std::optional<std::pair<double, Vector>> detect_steady_state(const Trajectory &traj, double window, double eps) {
    const std::size_t n = traj.size();
    if (n == 0) return std::nullopt;
    std::size_t i = 0;
    while (i < n) {
        if (traj.rate[i] >= eps) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j + 1 < n && traj.rate[j + 1] < eps) ++j;
        if (traj.t[j] - traj.t[i] >= window) return std::make_pair(traj.t[i], traj.x[i]);
        i = j + 1;
    }
    return std::nullopt;
}

Vector default_initial_state(const Crn &crn, double level) {
    return Vector::Constant(static_cast<Eigen::Index>(crn.n_species()), level);
}

Vector perturb_state(const Vector &x_star, std::size_t index, double fraction) {
    Vector x = x_star;
    const auto i = static_cast<Eigen::Index>(index);
    if (i >= x.size()) throw Error("perturbation index out of range");
    x[i] += x[i] != 0.0 ? fraction * x[i] : fraction;
    return x;
}

// =============================================================================
// Export
// =============================================================================

std::string trajectory_csv(const Trajectory &traj) {
    std::string out = "t";
    for (const auto &s : traj.species) out += "," + s;
    for (std::size_t i = 1; i <= traj.n_base; ++i) out += fmt::format(",p{}", i);
    for (std::size_t i = 1; i <= traj.n_base; ++i) out += fmt::format(",q{}", i);
    out += "\n";
    for (std::size_t k = 0; k < traj.size(); ++k) {
        out += fmt::format("{:.10g}", traj.t[k]);
        for (Eigen::Index j = 0; j < traj.x[k].size(); ++j) out += fmt::format(",{:.10g}", traj.x[k][j]);
        const Vector p = traj.p(k), q = traj.q(k);
        for (Eigen::Index j = 0; j < p.size(); ++j) out += fmt::format(",{:.10g}", p[j]);
        for (Eigen::Index j = 0; j < q.size(); ++j) out += fmt::format(",{:.10g}", q[j]);
        out += "\n";
    }
    return out;
}

json trajectory_sidecar(const Trajectory &traj) {
    json ev = json::array();
    for (const auto &e : traj.events) ev.push_back({{"t", e.t}, {"kind", e.kind}, {"detail", e.detail}});
    json out;
    out["species"] = traj.species;
    out["samples"] = traj.size();
    out["t_end"] = traj.t.empty() ? 0.0 : traj.t.back();
    out["diverged"] = traj.diverged;
    out["divergence_time"] = traj.diverged ? json(traj.divergence_time) : json(nullptr);
    out["divergence_reason"] = traj.divergence_reason;
    out["events"] = ev;
    out["solver"] = {{"accepted_steps", traj.stats.accepted},
                     {"rejected_steps", traj.stats.rejected},
                     {"rhs_evaluations", traj.stats.rhs_evaluations},
                     {"jacobian_evaluations", traj.stats.jacobian_evaluations},
                     {"clip_events", traj.stats.clip_events},
                     {"min_raw_nM", traj.stats.min_raw}};
    return out;
}

} // namespace crnctl
