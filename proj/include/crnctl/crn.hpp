#pragma once

// =============================================================================
// Dual-rail chemical reaction network IR
// =============================================================================
// State ordering: all plus rails first, then all minus rails, each in the
// block order of the source diagram:
//     x = [x1+ ... xN+ | x1- ... xN-]
// Reference inputs are external and ordered the same way: r = [r+ | r-].
// Concentrations are in nM, unimolecular rates in 1/s, eta in 1/(nM*s).
// =============================================================================

#include "crnctl/frontend.hpp"

#include <Eigen/Dense>

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace crnctl {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// 1/(M*s) -> 1/(nM*s)
constexpr double kPerMolarToPerNanomolar = 1e-9;

enum class Rail { Plus, Minus };

constexpr Rail opposite(Rail r) { return r == Rail::Plus ? Rail::Minus : Rail::Plus; }
constexpr char rail_suffix(Rail r) { return r == Rail::Plus ? 'p' : 'm'; }

struct Species {
    std::string base;
    Rail rail = Rail::Plus;
    std::size_t index = 0;

    std::string name() const { return base + rail_suffix(rail); }
};

enum class ReactionKind { Catalysis, Degradation, Annihilation };

/// A state species or one rail of an external reference input.
struct SpeciesRef {
    bool is_input = false;
    std::size_t index = 0;

    bool operator==(const SpeciesRef &) const = default;
};

/// One elementary reaction.
///   Catalysis:    first -> first + second   (second is always a state species)
///   Degradation:  first -> 0
///   Annihilation: first + second -> 0       (first = plus rail, second = minus rail)
struct Reaction {
    ReactionKind kind = ReactionKind::Catalysis;
    SpeciesRef first;
    SpeciesRef second;
    double rate = 0.0;
    /// Stable symbolic name: "<symbol>+" / "<symbol>-" by source rail, or "eta".
    std::string name;
};

class Crn {
  public:
    std::vector<std::string> bases;
    std::vector<std::string> inputs;
    std::vector<Reaction> reactions;
    double eta = 0.0;
    std::size_t output = 0;

    std::size_t n_base() const noexcept { return bases.size(); }
    std::size_t n_species() const noexcept { return 2 * bases.size(); }
    std::size_t n_input_rails() const noexcept { return 2 * inputs.size(); }

    Species species(std::size_t index) const;
    std::string species_name(std::size_t index) const { return species(index).name(); }
    std::string input_name(std::size_t rail_index) const;
    std::string operand_name(const SpeciesRef &ref) const;
    /// Index of the other rail of the same base species.
    std::size_t partner(std::size_t index) const noexcept {
        return index < n_base() ? index + n_base() : index - n_base();
    }
    std::size_t index_of(std::size_t base, Rail rail) const noexcept {
        return rail == Rail::Plus ? base : base + n_base();
    }
};

Crn compile_dual_rail(const BlockDiagram &diagram);

/// x -> A x + B r - eta (P x) o x, with its closed-form pieces.
struct VectorField {
    Matrix A;
    Matrix B;
    double eta = 0.0;

    std::size_t n_base() const noexcept { return static_cast<std::size_t>(A.rows()) / 2; }
    Vector annihilation_flux(const Vector &x) const;
    Vector operator()(const Vector &x, const Vector &r) const;
    /// A + eta * J{x}, where J{x} = -D{Px} - D{x} P.
    Matrix jacobian(const Vector &x) const;
};

VectorField mass_action_field(const Crn &crn);

/// Rail-swap permutation [[0, I], [I, 0]] of size 2N.
Matrix rail_swap(std::size_t n_base);
/// J{x} = -D{Px} - D{x}P
Matrix annihilation_jacobian(const Vector &x);

struct RotatedBlocks {
    Matrix R11, R12, R21, R22;
};

struct StructuredSystem {
    std::size_t n_base = 0;
    double eta = 0.0;

    Matrix A;
    Vector a;        // diagonal of A, <= 0
    Matrix A_off;    // off-diagonal part of A, >= 0
    Matrix B;
    Matrix P;

    Matrix A1_plus, A1_minus, A2_plus, A2_minus;
    Matrix B1_plus, B1_minus;

    Matrix W, Wp, Wq;
    Matrix R11, R12, R21, R22;

    /// Populated iff every rate equals its rail twin.
    bool symmetric = false;
    std::optional<Matrix> A1_bar, A2_bar, B1_bar, R11_bar, R22_bar;

    Matrix R() const;
};

StructuredSystem extract_structure(const Crn &crn);

/// Closed-form R blocks from the four partition blocks.
RotatedBlocks rotated_blocks(const Matrix &A1p, const Matrix &A1m, const Matrix &A2p, const Matrix &A2m);

/// Scales named rates. Keys: "<symbol>+" or "<symbol>-" for one rail,
/// "<symbol>" for both rails, "eta" for the annihilation rate.
Crn apply_perturbation(const Crn &crn, const std::map<std::string, double> &factors);

/// Rail-by-rail ratios that turn the nominal Example 1 rates into the asymmetric ones.
std::map<std::string, double> example1_asymmetric_factors();

/// Catalysis dependency graph over base species has no cycle.
bool is_cascaded(const Crn &crn);
/// Base species in a topological order of the catalysis graph, if acyclic.
std::optional<std::vector<std::size_t>> catalysis_topological_order(const Crn &crn);

/// One reaction per line, e.g. "X5p + X5m ->{0.0005} 0".
std::string export_reactions(const Crn &crn);

} // namespace crnctl
