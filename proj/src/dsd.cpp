#include "crnctl/dsd.hpp"

#include "crnctl/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

namespace crnctl {

using nlohmann::json;

std::vector<std::size_t> DsdProgram::fuels() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < kinds.size(); ++i)
        if (kinds[i] == DsdSpeciesKind::Fuel) out.push_back(i);
    return out;
}

Vector DsdProgram::initial_state(const Vector &signal) const {
    if (static_cast<std::size_t>(signal.size()) != n_signal()) throw Error("signal state has the wrong dimension");
    Vector x = Vector::Zero(static_cast<Eigen::Index>(n_species()));
    x.head(signal.size()) = signal;
    for (std::size_t f : fuels()) x[static_cast<Eigen::Index>(f)] = c_max;
    return x;
}

// =============================================================================
// Translation
// =============================================================================

DsdProgram translate(const Crn &crn, double c_max) {
    if (!(c_max > 0) || !std::isfinite(c_max)) throw Error("C_max must be positive");
    DsdProgram prog;
    prog.c_max = c_max;
    prog.q_max = 2.0 * crn.eta;
    prog.n_base = crn.n_base();
    for (std::size_t i = 0; i < crn.n_species(); ++i) {
        prog.species.push_back(crn.species_name(i));
        prog.kinds.push_back(DsdSpeciesKind::Signal);
    }
    for (std::size_t i = 0; i < crn.n_input_rails(); ++i) prog.inputs.push_back(crn.input_name(i));

    auto add = [&](std::string name, DsdSpeciesKind kind) {
        prog.species.push_back(std::move(name));
        prog.kinds.push_back(kind);
        return prog.species.size() - 1;
    };
    auto state = [](std::size_t i) { return DsdOperand{false, i}; };
    auto operand = [](const SpeciesRef &ref) { return DsdOperand{ref.is_input, ref.index}; };

    for (const Reaction &rx : crn.reactions) {
        const std::size_t c = prog.chains.size();
        const std::string tag = std::to_string(c + 1);
        DsdChain chain;
        chain.source = rx.name;
        chain.kind = rx.kind;
        if (!(rx.rate >= 0) || !std::isfinite(rx.rate)) throw UnsupportedReaction("reaction " + rx.name + " has a bad rate");

        switch (rx.kind) {
        case ReactionKind::Catalysis:
        case ReactionKind::Degradation: {
            chain.gate = add("G" + tag, DsdSpeciesKind::Fuel);
            chain.translator = add("T" + tag, DsdSpeciesKind::Fuel);
            chain.backward = add("B" + tag, DsdSpeciesKind::Fuel);
            chain.intermediate = add("I" + tag, DsdSpeciesKind::Intermediate);
            chain.waste = add("W" + tag, DsdSpeciesKind::Waste);
            const DsdOperand x = operand(rx.first);
            const DsdOperand I = state(chain.intermediate);
            const DsdOperand W = state(chain.waste);
            prog.reactions.push_back({x, state(*chain.gate), {I, W}, 2.0 * rx.rate / c_max, c});
            std::vector<DsdOperand> products;
            if (rx.kind == ReactionKind::Catalysis) products = {x, operand(rx.second), W};
            else products = {W};
            prog.reactions.push_back({I, state(chain.translator), products, prog.q_max, c});
            prog.reactions.push_back({I, state(chain.backward), {x, W}, prog.q_max, c});
            break;
        }
        case ReactionKind::Annihilation: {
            if (rx.first.is_input || rx.second.is_input) throw UnsupportedReaction("annihilation of an input species");
            chain.translator = add("T" + tag, DsdSpeciesKind::Fuel);
            chain.backward = add("B" + tag, DsdSpeciesKind::Fuel);
            chain.intermediate = add("I" + tag, DsdSpeciesKind::Intermediate);
            chain.waste = add("W" + tag, DsdSpeciesKind::Waste);
            const DsdOperand p = operand(rx.first), m = operand(rx.second);
            const DsdOperand I = state(chain.intermediate);
            const DsdOperand W = state(chain.waste);
            // q_max = 2 eta; the even split halves the effective rate back to eta.
            prog.reactions.push_back({p, m, {I}, 2.0 * rx.rate, c});
            prog.reactions.push_back({I, state(chain.translator), {W}, prog.q_max, c});
            prog.reactions.push_back({I, state(chain.backward), {p, m, W}, prog.q_max, c});
            break;
        }
        }
        prog.chains.push_back(std::move(chain));
    }
    return prog;
}

// =============================================================================
// Dynamics
// =============================================================================

namespace {

double value_of(const DsdOperand &o, const Vector &x, const Vector &r) {
    return o.is_input ? r[static_cast<Eigen::Index>(o.index)] : x[static_cast<Eigen::Index>(o.index)];
}

} // namespace

Vector dsd_field(const DsdProgram &prog, const Vector &x, const Vector &r) {
    Vector dx = Vector::Zero(x.size());
    for (const auto &rx : prog.reactions) {
        const double flux = rx.rate * value_of(rx.a, x, r) * value_of(rx.b, x, r);
        if (flux == 0.0) continue;
        if (!rx.a.is_input) dx[static_cast<Eigen::Index>(rx.a.index)] -= flux;
        if (!rx.b.is_input) dx[static_cast<Eigen::Index>(rx.b.index)] -= flux;
        for (const auto &p : rx.products)
            if (!p.is_input) dx[static_cast<Eigen::Index>(p.index)] += flux;
    }
    return dx;
}

Matrix dsd_jacobian(const DsdProgram &prog, const Vector &x, const Vector &r) {
    const auto n = x.size();
    Matrix J = Matrix::Zero(n, n);
    auto add_column = [&](const DsdReaction &rx, std::size_t col, double dflux) {
        const auto c = static_cast<Eigen::Index>(col);
        if (!rx.a.is_input) J(static_cast<Eigen::Index>(rx.a.index), c) -= dflux;
        if (!rx.b.is_input) J(static_cast<Eigen::Index>(rx.b.index), c) -= dflux;
        for (const auto &p : rx.products)
            if (!p.is_input) J(static_cast<Eigen::Index>(p.index), c) += dflux;
    };
    for (const auto &rx : prog.reactions) {
        if (!rx.a.is_input) add_column(rx, rx.a.index, rx.rate * value_of(rx.b, x, r));
        if (!rx.b.is_input) add_column(rx, rx.b.index, rx.rate * value_of(rx.a, x, r));
    }
    return J;
}

Vector idealized_field(const DsdProgram &prog, const Vector &signal, const Vector &r) {
    Vector y = prog.initial_state(signal);
    const auto n = y.size();
    Vector production = Vector::Zero(n), loss = Vector::Zero(n);
    auto is_intermediate = [&](const DsdOperand &o) {
        return !o.is_input && prog.kinds[o.index] == DsdSpeciesKind::Intermediate;
    };
    for (const auto &rx : prog.reactions) {
        const bool ia = is_intermediate(rx.a), ib = is_intermediate(rx.b);
        if (ia || ib) {
            const DsdOperand &I = ia ? rx.a : rx.b;
            const DsdOperand &other = ia ? rx.b : rx.a;
            loss[static_cast<Eigen::Index>(I.index)] += rx.rate * value_of(other, y, r);
        } else {
            const double flux = rx.rate * value_of(rx.a, y, r) * value_of(rx.b, y, r);
            for (const auto &p : rx.products)
                if (is_intermediate(p)) production[static_cast<Eigen::Index>(p.index)] += flux;
        }
    }
    for (Eigen::Index i = 0; i < n; ++i)
        if (loss[i] > 0) y[i] = production[i] / loss[i];
    return dsd_field(prog, y, r).head(static_cast<Eigen::Index>(prog.n_signal()));
}

// =============================================================================
// Simulation
// =============================================================================

IntegrationOptions dsd_default_options() {
    IntegrationOptions opts;
    opts.ode.method = OdeMethod::Rosenbrock23;
    opts.ode.rel_tol = 1e-7;
    opts.ode.abs_tol = 1e-10;
    return opts;
}

FuelReport fuel_report(const DsdProgram &prog, const Trajectory &traj) {
    FuelReport rep;
    if (traj.size() == 0) return rep;
    for (std::size_t f : prog.fuels()) {
        const auto col = static_cast<Eigen::Index>(f);
        FuelEntry e;
        e.name = prog.species[f];
        e.minimum = traj.x[0][col];
        e.time_of_minimum = traj.t[0];
        for (std::size_t i = 1; i < traj.size(); ++i) {
            const double v = traj.x[i][col];
            rep.max_fuel_increase = std::max(rep.max_fuel_increase, v - traj.x[i - 1][col]);
            if (v < e.minimum) {
                e.minimum = v;
                e.time_of_minimum = traj.t[i];
            }
        }
        e.depletion = std::clamp((prog.c_max - e.minimum) / prog.c_max, 0.0, 1.0);
        rep.max_depletion = std::max(rep.max_depletion, e.depletion);
        rep.fuels.push_back(std::move(e));
    }
    const Vector &last = traj.x.back();
    for (const auto &ch : prog.chains) {
        double consumed = 0.0;
        for (auto f : {ch.gate, std::optional<std::size_t>(ch.translator), std::optional<std::size_t>(ch.backward)}) {
            if (f) consumed += prog.c_max - last[static_cast<Eigen::Index>(*f)];
        }
        const double waste = last[static_cast<Eigen::Index>(ch.waste)];
        rep.bookkeeping_error = std::max(rep.bookkeeping_error, std::abs(consumed - waste));
    }
    return rep;
}

DsdRun simulate_dsd(const DsdProgram &prog, const Vector &signal0, const ReferenceProfile &profile, double t_end,
                    const IntegrationOptions &opts) {
    if (signal0.size() > 0 && signal0.minCoeff() < 0) throw Error("initial state must be nonnegative");
    if (prog.inputs.size() > 2) throw Error("profiles drive a single reference input");
    DrivenSystem sys;
    sys.dim = prog.n_species();
    sys.n_base = prog.n_base;
    sys.names = prog.species;
    for (std::size_t i = 0; i < prog.n_signal(); ++i) sys.signal_columns.push_back(i);
    const bool has_input = prog.inputs.size() == 2;
    const DsdProgram *pp = &prog;
    sys.rhs = [pp, has_input](const Vector &x, const Vector &r, Vector &dx) {
        dx = dsd_field(*pp, x, has_input ? r : Vector::Zero(0));
    };
    sys.jacobian = [pp, has_input](const Vector &x, const Vector &r, Matrix &J) {
        J = dsd_jacobian(*pp, x, has_input ? r : Vector::Zero(0));
    };
    DsdRun out;
    out.trajectory = run(sys, prog.initial_state(signal0), profile, t_end, opts);
    out.fuel = fuel_report(prog, out.trajectory);
    return out;
}

FidelityReport fidelity_check(const Crn &crn, const DsdProgram &prog, const Vector &signal0,
                              const ReferenceProfile &profile, double t_end) {
    FidelityReport rep;
    const Trajectory a = integrate(crn, signal0, profile, t_end);
    const DsdRun b = simulate_dsd(prog, signal0, profile, t_end);
    rep.crn_diverged = a.diverged;
    rep.dsd_diverged = b.trajectory.diverged;

    const double horizon = std::min(a.t.back(), b.trajectory.t.back());
    double scale = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) scale = std::max(scale, a.p(i).cwiseAbs().maxCoeff());
    scale = std::max(scale, 1e-12);

    const auto fuels = prog.fuels();
    const auto N = static_cast<Eigen::Index>(prog.n_base);
    bool crossed = false;
    double depletion_so_far = 0.0;
    for (std::size_t i = 0; i < a.size() && a.t[i] <= horizon; ++i) {
        const Vector xb = b.trajectory.at(a.t[i]);
        const Vector pb = xb.head(N) - xb.segment(N, N);
        const double dev = (pb - a.p(i)).cwiseAbs().maxCoeff() / scale;
        double min_frac = 1.0;
        for (std::size_t f : fuels) min_frac = std::min(min_frac, xb[static_cast<Eigen::Index>(f)] / prog.c_max);
        const double depletion = std::clamp(1.0 - min_frac, 0.0, 1.0);
        depletion_so_far = std::max(depletion_so_far, depletion);
        rep.max_depletion = std::max(rep.max_depletion, depletion);
        rep.max_relative_deviation = std::max(rep.max_relative_deviation, dev);
        if (min_frac >= 0.9) rep.max_relative_deviation_fueled = std::max(rep.max_relative_deviation_fueled, dev);
        if (!crossed && dev > 0.05) {
            crossed = true;
            rep.depletion_at_threshold = depletion_so_far;
        }
    }
    return rep;
}

// =============================================================================
// Export
// =============================================================================

std::string export_program(const DsdProgram &prog) {
    auto prefixed = [&](const DsdOperand &o) -> std::string {
        if (o.is_input) return "sig:" + prog.inputs[o.index];
        const std::string &name = prog.species[o.index];
        switch (prog.kinds[o.index]) {
        case DsdSpeciesKind::Signal: return "sig:" + name;
        case DsdSpeciesKind::Fuel: return "fuel:" + name;
        case DsdSpeciesKind::Intermediate: return "int:" + name;
        case DsdSpeciesKind::Waste: return "waste:" + name;
        }
        return name;
    };
    std::string out;
    for (const auto &rx : prog.reactions) {
        std::string rhs;
        for (const auto &p : rx.products) {
            if (!rhs.empty()) rhs += " + ";
            rhs += prefixed(p);
        }
        if (rhs.empty()) rhs = "0";
        out += fmt::format("{} + {} ->{{{}}} {}\n", prefixed(rx.a), prefixed(rx.b), rx.rate, rhs);
    }
    return out;
}

json to_json(const FuelReport &report) {
    json fuels = json::array();
    for (const auto &f : report.fuels) {
        fuels.push_back({{"name", f.name},
                         {"minimum_nM", f.minimum},
                         {"time_of_minimum_s", f.time_of_minimum},
                         {"depletion", f.depletion}});
    }
    return json{{"fuels", fuels},
                {"max_depletion", report.max_depletion},
                {"bookkeeping_error_nM", report.bookkeeping_error},
                {"max_fuel_increase_nM", report.max_fuel_increase}};
}

json to_json(const FidelityReport &report) {
    return json{{"max_relative_deviation", report.max_relative_deviation},
                {"max_relative_deviation_fueled", report.max_relative_deviation_fueled},
                {"depletion_at_threshold",
                 report.depletion_at_threshold ? json(*report.depletion_at_threshold) : json(nullptr)},
                {"max_depletion", report.max_depletion},
                {"crn_diverged", report.crn_diverged},
                {"dsd_diverged", report.dsd_diverged}};
}

} // namespace crnctl
