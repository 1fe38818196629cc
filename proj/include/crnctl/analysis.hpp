#pragma once

// =============================================================================
// Stability analysis backend
// =============================================================================
// Spectra, structure predicates, equilibria of the positive nonlinear
// dynamics, linearisation, and the Lyapunov-style certificates used to decide
// stability of a compiled network.
// =============================================================================

#include "crnctl/crn.hpp"

#include <json.hpp>

#include <complex>
#include <optional>
#include <string>
#include <vector>

namespace crnctl {

/// Eigenvalues with |Re| below this are "marginal", never counted as stable.
constexpr double kTolHurwitz = 1e-12;
constexpr double kMaxBackwardError = 1e-10;

struct Spectrum {
    std::vector<std::complex<double>> eigenvalues; // sorted by decreasing real part
    double abscissa = 0.0;
    bool is_hurwitz = false;
    bool marginal = false;
    double max_backward_error = 0.0;

    /// Eigenvalue attaining the abscissa (the one with nonnegative imaginary part for a pair).
    std::complex<double> dominant() const;
};

/// All eigenvalues of a real nonsymmetric matrix, each verified to
/// ||Mv - lambda v|| / ||M|| <= kMaxBackwardError. Throws NoConvergence.
Spectrum eigenvalues(const Matrix &M);

bool is_metzler(const Matrix &M);
/// Graph of positive off-diagonal entries is strongly connected.
bool is_irreducible(const Matrix &M);
bool is_lower_triangular(const Matrix &M);

struct PerronPair {
    double lambda = 0.0;
    Vector w; // left eigenvector, w > 0, ||w||_1 = 1
};

/// Left Frobenius-Perron pair of an irreducible Metzler matrix. Throws NotIrreducible.
PerronPair frobenius_perron(const Matrix &M);

// -----------------------------------------------------------------------------
// Equilibria
// -----------------------------------------------------------------------------

enum class EquilibriumClass { Origin, Positive, MixedInvalid };
std::string to_string(EquilibriumClass c);

struct EquilibriumResult {
    Vector x_star;
    double residual = 0.0;
    EquilibriumClass classification = EquilibriumClass::Origin;
    bool converged = false;
    std::size_t iterations = 0;
    std::string seed;
};

struct FixedPointOptions {
    std::size_t max_iterations = 1'000'000;
    double tolerance = 1e-12;
};

struct QEquilibrium {
    EquilibriumResult selected;
    EquilibriumResult origin_branch;
    std::optional<EquilibriumResult> positive_branch;
};

/// Equilibria of q' = M q - k q o q + v via the per-coordinate nonnegative root
///   q_j = (-|m_jj| + sqrt(m_jj^2 + 4k (sum_{i!=j} m_ji q_i + v_j))) / (2k),
/// iterated (damped) from the origin and from a positive seed.
QEquilibrium equilibrium_q(const Matrix &M, double k, const Vector &v, const FixedPointOptions &opts = {});

/// Positive equilibrium exists for the two-state feedback loop iff c2 c1 > d2 d1.
bool descartes_condition(double d1, double d2, double c1, double c2);

struct SeedOutcome {
    std::string seed;
    bool converged = false;
    Vector x;
    double residual = 0.0;
    std::size_t iterations = 0;
};

struct FullEquilibrium {
    EquilibriumResult selected;
    std::vector<SeedOutcome> seeds;
};

struct NewtonOptions {
    std::size_t max_iterations = 200;
    /// Success when ||f(x)||_inf <= tol_residual (nM/s).
    double tol_residual = 1e-13;
    double pre_integration_time = 1e6;
};

/// Solves A x + B r - eta (Px) o x = 0 by damped Newton from several seeds and
/// returns the nonnegative equilibrium reached (a nonzero one when found).
/// Throws NoConvergence when no seed converges.
FullEquilibrium equilibrium_full(const Crn &crn, const Vector &r, const NewtonOptions &opts = {});

struct Linearization {
    Matrix A_s;
    Matrix Wp_J;
};

/// A_s = A + eta J{x*}; also W_p J{x*}, which vanishes identically.
Linearization linearize(const Crn &crn, const Vector &x_star);

// -----------------------------------------------------------------------------
// Certificates
// -----------------------------------------------------------------------------

double spectral_norm(const Matrix &M);

/// Unforced ultimate bound 2 sqrt(N) ||R22||_2 / eta on ||q||_2.
double boundedness_bound(const Matrix &R22, double eta, std::size_t N);

/// Fixed point b of b = (sqrt(N)||M||_2 + ||v||_1 / b) / k with k = eta/2.
/// An estimate: the forced bound has ||q||_2 on both sides.
double forced_boundedness_bound(const Matrix &R22, double eta, std::size_t N, double v_l1);

/// Diagonal Lyapunov certificate for a Metzler Hurwitz matrix: d > 0 with
/// M^T D + D M <= -I (negative definite, scaled so its largest eigenvalue is -1).
struct DiagonalLyapunov {
    Vector d;
    Matrix Q;
    double max_eigenvalue = 0.0;
    bool valid = false;
};
DiagonalLyapunov diagonal_lyapunov(const Matrix &M);

/// V_d(x) = x^T D{d} x
double lyapunov_value(const Vector &d, const Vector &x);
/// dV_d/dt along x' = M x + x o g
double lyapunov_derivative(const Vector &d, const Matrix &M, const Vector &x, const Vector &g);

// -----------------------------------------------------------------------------
// Report
// -----------------------------------------------------------------------------

enum class VerdictStatus { Holds, Fails, NotApplicable, Undecided };
std::string to_string(VerdictStatus s);

struct Verdict {
    std::string id;
    std::string claim;
    VerdictStatus status = VerdictStatus::NotApplicable;
    nlohmann::json evidence = nlohmann::json::object();
};

struct NamedSpectrum {
    std::string matrix;
    Spectrum spectrum;
};

struct StabilityReport {
    bool metzler = false;
    bool irreducible = false;
    bool cascaded = false;
    bool symmetric = false;

    std::vector<NamedSpectrum> spectra;
    std::optional<FullEquilibrium> equilibrium;
    std::optional<PerronPair> perron;
    std::optional<double> bound;
    std::vector<Verdict> verdicts;
    std::vector<std::string> notes;
    /// "stable", "unstable" or "undecided"
    std::string overall = "undecided";

    const NamedSpectrum *find(const std::string &matrix) const;
    const Verdict *verdict(const std::string &id) const;
    bool undecided() const;
};

StabilityReport stability_report(const Crn &crn, const Vector &r);

nlohmann::json to_json(const Spectrum &s);
nlohmann::json to_json(const StabilityReport &report);
/// Table of matrix, dominant poles, Hurwitz verdict.
std::string format_table(const StabilityReport &report);
/// 6 significant digits, "a+bi" for complex values.
std::string format_eigenvalue(std::complex<double> z);

} // namespace crnctl
