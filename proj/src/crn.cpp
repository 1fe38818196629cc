#include "crnctl/crn.hpp"

#include "crnctl/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <queue>

namespace crnctl {

Species Crn::species(std::size_t index) const {
    const std::size_t n = n_base();
    const Rail rail = index < n ? Rail::Plus : Rail::Minus;
    return {bases.at(index % n), rail, index};
}

std::string Crn::input_name(std::size_t rail_index) const {
    const std::size_t n = inputs.size();
    return inputs.at(rail_index % n) + (rail_index < n ? "p" : "m");
}

std::string Crn::operand_name(const SpeciesRef &ref) const {
    return ref.is_input ? input_name(ref.index) : species_name(ref.index);
}

// =============================================================================
// Compilation
// =============================================================================

Crn compile_dual_rail(const BlockDiagram &diagram) {
    validate(diagram);

    Crn crn;
    for (const auto &b : diagram.blocks) crn.bases.push_back(b.id);
    crn.inputs = diagram.references;
    crn.eta = diagram.eta_per_molar_second * kPerMolarToPerNanomolar;
    crn.output = *diagram.block_index(diagram.output);

    const std::size_t n = crn.n_base();
    const std::size_t n_in = crn.inputs.size();

    auto source_ref = [&](const std::string &source, Rail rail) -> SpeciesRef {
        if (auto idx = diagram.block_index(source)) return {false, crn.index_of(*idx, rail)};
        const auto it = std::find(diagram.references.begin(), diagram.references.end(), source);
        const auto k = static_cast<std::size_t>(it - diagram.references.begin());
        return {true, rail == Rail::Plus ? k : k + n_in};
    };
    auto rail_name = [](const RateParam &r, Rail rail) { return r.symbol + (rail == Rail::Plus ? "+" : "-"); };
    auto rail_value = [](const RateParam &r, Rail rail) { return rail == Rail::Plus ? r.value.plus : r.value.minus; };

    for (std::size_t j = 0; j < n; ++j) {
        const Block &b = diagram.blocks[j];
        switch (b.kind) {
        case BlockKind::Gain:
        case BlockKind::Integrator:
        case BlockKind::Summation:
        case BlockKind::Subtraction:
        case BlockKind::FirstOrderPlant:
            break;
        default:
            throw UnsupportedBlock("block '" + b.id + "' has an unsupported kind");
        }

        for (const auto &port : ports_of(b.kind)) {
            const Wire *w = diagram.wire_into(b.id, port.port);
            const RateParam &rate = b.rate(port.role);
            const bool from_input = !diagram.block_index(w->source).has_value();
            if (from_input && port.crossed_rails) {
                throw UnsupportedBlock("block '" + b.id + "': a reference input cannot drive a negated port");
            }
            for (Rail rail : {Rail::Plus, Rail::Minus}) {
                const Rail target_rail = port.crossed_rails ? opposite(rail) : rail;
                crn.reactions.push_back({ReactionKind::Catalysis, source_ref(w->source, rail),
                                         SpeciesRef{false, crn.index_of(j, target_rail)}, rail_value(rate, rail),
                                         rail_name(rate, rail)});
            }
        }
        if (const RateParam *decay = b.find_rate("decay"); decay && b.kind != BlockKind::Integrator) {
            for (Rail rail : {Rail::Plus, Rail::Minus}) {
                const SpeciesRef self{false, crn.index_of(j, rail)};
                crn.reactions.push_back(
                    {ReactionKind::Degradation, self, self, rail_value(*decay, rail), rail_name(*decay, rail)});
            }
        }
        crn.reactions.push_back({ReactionKind::Annihilation, SpeciesRef{false, crn.index_of(j, Rail::Plus)},
                                 SpeciesRef{false, crn.index_of(j, Rail::Minus)}, crn.eta, "eta"});
    }
    return crn;
}

// =============================================================================
// Mass-action semantics
// =============================================================================

Matrix rail_swap(std::size_t n_base) {
    const auto n = static_cast<Eigen::Index>(n_base);
    Matrix P = Matrix::Zero(2 * n, 2 * n);
    P.topRightCorner(n, n).setIdentity();
    P.bottomLeftCorner(n, n).setIdentity();
    return P;
}

Matrix annihilation_jacobian(const Vector &x) {
    const auto n = x.size() / 2;
    Vector px(x.size());
    px << x.tail(n), x.head(n);
    Matrix J = Matrix::Zero(x.size(), x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        J(i, i) = -px(i);
        // (D{x} P)(i, partner(i)) = x_i
        J(i, i < n ? i + n : i - n) = -x(i);
    }
    return J;
}

Vector VectorField::annihilation_flux(const Vector &x) const {
    const auto n = static_cast<Eigen::Index>(n_base());
    Vector flux(2 * n);
    flux.head(n) = x.head(n).cwiseProduct(x.tail(n));
    flux.tail(n) = flux.head(n);
    return flux;
}

Vector VectorField::operator()(const Vector &x, const Vector &r) const {
    Vector dx = A * x - eta * annihilation_flux(x);
    if (B.cols() > 0 && r.size() == B.cols()) dx += B * r;
    return dx;
}

Matrix VectorField::jacobian(const Vector &x) const { return A + eta * annihilation_jacobian(x); }

VectorField mass_action_field(const Crn &crn) {
    const auto n2 = static_cast<Eigen::Index>(crn.n_species());
    VectorField f;
    f.A = Matrix::Zero(n2, n2);
    f.B = Matrix::Zero(n2, static_cast<Eigen::Index>(crn.n_input_rails()));
    f.eta = crn.eta;
    for (const auto &rx : crn.reactions) {
        switch (rx.kind) {
        case ReactionKind::Catalysis: {
            const auto target = static_cast<Eigen::Index>(rx.second.index);
            const auto source = static_cast<Eigen::Index>(rx.first.index);
            if (rx.first.is_input) {
                f.B(target, source) += rx.rate;
            } else {
                f.A(target, source) += rx.rate;
            }
            break;
        }
        case ReactionKind::Degradation: {
            const auto s = static_cast<Eigen::Index>(rx.first.index);
            f.A(s, s) -= rx.rate;
            break;
        }
        case ReactionKind::Annihilation:
            f.eta = rx.rate;
            break;
        }
    }
    return f;
}

// =============================================================================
// Structure extraction
// =============================================================================

namespace {

Matrix off_diagonal(const Matrix &M) {
    Matrix out = M;
    out.diagonal().setZero();
    return out;
}

} // namespace

RotatedBlocks rotated_blocks(const Matrix &A1p, const Matrix &A1m, const Matrix &A2p, const Matrix &A2m) {
    const Vector abs_p = A1p.diagonal().cwiseAbs();
    const Vector abs_m = A1m.diagonal().cwiseAbs();
    const Matrix D_sum = (abs_p + abs_m).asDiagonal();
    const Matrix D_diff = (abs_p - abs_m).asDiagonal();

    RotatedBlocks R;
    R.R22 = off_diagonal(A1p + A1m + A2p + A2m) / 2.0 - D_sum / 2.0;
    R.R11 = off_diagonal(A1p + A1m - A2p - A2m) / 2.0 - D_sum / 2.0;
    R.R12 = off_diagonal(A1p - A1m - A2p + A2m) / 2.0 - D_diff / 2.0;
    R.R21 = off_diagonal(A1p - A1m + A2p - A2m) / 2.0 - D_diff / 2.0;
    return R;
}

Matrix StructuredSystem::R() const {
    const auto n = static_cast<Eigen::Index>(n_base);
    Matrix out(2 * n, 2 * n);
    out << R11, R12, R21, R22;
    return out;
}

StructuredSystem extract_structure(const Crn &crn) {
    const VectorField f = mass_action_field(crn);
    const auto n = static_cast<Eigen::Index>(crn.n_base());
    const auto m = static_cast<Eigen::Index>(crn.inputs.size());

    StructuredSystem s;
    s.n_base = crn.n_base();
    s.eta = f.eta;
    s.A = f.A;
    s.B = f.B;
    s.a = f.A.diagonal();
    s.A_off = off_diagonal(f.A);
    s.P = rail_swap(crn.n_base());

    // x+' = A1+ x+ + A2- x-,   x-' = A2+ x+ + A1- x-
    s.A1_plus = f.A.topLeftCorner(n, n);
    s.A2_minus = f.A.topRightCorner(n, n);
    s.A2_plus = f.A.bottomLeftCorner(n, n);
    s.A1_minus = f.A.bottomRightCorner(n, n);
    s.B1_plus = f.B.topLeftCorner(n, m);
    s.B1_minus = f.B.bottomRightCorner(n, m);

    s.W = Matrix(2 * n, 2 * n);
    const Matrix I = Matrix::Identity(n, n);
    s.W << I, -I, I, I;
    s.Wp = s.W.topRows(n);
    s.Wq = s.W.bottomRows(n);

    const RotatedBlocks R = rotated_blocks(s.A1_plus, s.A1_minus, s.A2_plus, s.A2_minus);
    s.R11 = R.R11;
    s.R12 = R.R12;
    s.R21 = R.R21;
    s.R22 = R.R22;

    s.symmetric = s.A1_plus == s.A1_minus && s.A2_plus == s.A2_minus && s.B1_plus == s.B1_minus;
    if (s.symmetric) {
        s.A1_bar = s.A1_plus;
        s.A2_bar = s.A2_plus;
        s.B1_bar = s.B1_plus;
        s.R11_bar = *s.A1_bar - *s.A2_bar;
        s.R22_bar = *s.A1_bar + *s.A2_bar;
    }
    return s;
}

// =============================================================================
// Perturbation and structure predicates
// =============================================================================

Crn apply_perturbation(const Crn &crn, const std::map<std::string, double> &factors) {
    Crn out = crn;
    for (const auto &[name, factor] : factors) {
        if (!(factor > 0.0)) throw Error("perturbation factor for '" + name + "' must be positive");
        bool matched = false;
        for (auto &rx : out.reactions) {
            const bool whole_symbol = rx.name.size() == name.size() + 1 &&
                                      rx.name.compare(0, name.size(), name) == 0 &&
                                      (rx.name.back() == '+' || rx.name.back() == '-');
            if (rx.name == name || (rx.kind != ReactionKind::Annihilation && whole_symbol)) {
                rx.rate *= factor;
                matched = true;
            }
        }
        if (name == "eta") out.eta *= factor;
        if (!matched) throw UnknownRate(name);
    }
    return out;
}

std::map<std::string, double> example1_asymmetric_factors() {
    const RateTable nominal = RateTable::example1_nominal();
    const RateTable asym = RateTable::example1_asymmetric();
    std::map<std::string, double> factors;
    for (const auto &[symbol, nom] : nominal.rates) {
        const RatePair &a = asym.at(symbol);
        factors[symbol + "+"] = a.plus / nom.plus;
        factors[symbol + "-"] = a.minus / nom.minus;
    }
    return factors;
}

std::optional<std::vector<std::size_t>> catalysis_topological_order(const Crn &crn) {
    const std::size_t n = crn.n_base();
    std::vector<std::vector<std::size_t>> out(n);
    std::vector<std::size_t> indegree(n, 0);
    for (const auto &rx : crn.reactions) {
        if (rx.kind != ReactionKind::Catalysis || rx.first.is_input) continue;
        const std::size_t from = rx.first.index % n;
        const std::size_t to = rx.second.index % n;
        if (std::find(out[from].begin(), out[from].end(), to) != out[from].end()) continue;
        out[from].push_back(to);
        ++indegree[to];
    }
    std::queue<std::size_t> ready;
    for (std::size_t i = 0; i < n; ++i) {
        if (indegree[i] == 0) ready.push(i);
    }
    std::vector<std::size_t> order;
    while (!ready.empty()) {
        const std::size_t u = ready.front();
        ready.pop();
        order.push_back(u);
        for (std::size_t v : out[u]) {
            if (--indegree[v] == 0) ready.push(v);
        }
    }
    if (order.size() != n) return std::nullopt;
    return order;
}

bool is_cascaded(const Crn &crn) { return catalysis_topological_order(crn).has_value(); }

std::string export_reactions(const Crn &crn) {
    std::string out;
    for (const auto &rx : crn.reactions) {
        const std::string a = crn.operand_name(rx.first);
        switch (rx.kind) {
        case ReactionKind::Catalysis:
            out += fmt::format("{} ->{{{}}} {} + {}", a, rx.rate, a, crn.operand_name(rx.second));
            break;
        case ReactionKind::Degradation:
            out += fmt::format("{} ->{{{}}} 0", a, rx.rate);
            break;
        case ReactionKind::Annihilation:
            out += fmt::format("{} + {} ->{{{}}} 0", a, crn.operand_name(rx.second), rx.rate);
            break;
        }
        out += "\n";
    }
    return out;
}

} // namespace crnctl
