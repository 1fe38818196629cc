#include "support.hpp"

#include "crnctl/errors.hpp"

#include <catch_amalgamated.hpp>

using namespace crnctl;
using namespace testsupport;

namespace {

Matrix mat2(double a, double b, double c, double d) {
    Matrix M(2, 2);
    M << a, b, c, d;
    return M;
}

Matrix example2_R22(double d1, double d2, double c1, double c2) { return mat2(-d1, c2, c1, -d2); }

/// Positive root of q^3 + 2 q^2 + 3 q - 2.
double example2_root() {
    return bisect([](double q) { return q * q * q + 2 * q * q + 3 * q - 2; }, 0.0, 1.0, 1e-16);
}

const Crn &nominal() {
    static const Crn crn = compile_dual_rail(builtin_example1(RateTable::example1_nominal()));
    return crn;
}
const Crn &asymmetric() {
    static const Crn crn = compile_dual_rail(builtin_example1(RateTable::example1_asymmetric()));
    return crn;
}

} // namespace

// =============================================================================
// Eigenvalues
// =============================================================================

TEST_CASE("eigenvalues of a rotation-like matrix") {
    const Spectrum s = eigenvalues(mat2(-1, -1, 1, -1));
    REQUIRE(s.eigenvalues.size() == 2);
    CHECK(std::abs(s.eigenvalues[0] - cplx(-1, 1)) < 1e-14);
    CHECK(std::abs(s.eigenvalues[1] - cplx(-1, -1)) < 1e-14);
    CHECK(s.abscissa == Catch::Approx(-1.0));
    CHECK(s.is_hurwitz);
    CHECK(std::abs(s.dominant() - cplx(-1, 1)) < 1e-14);
}

TEST_CASE("eigenvalues match the characteristic-polynomial oracle") {
    Rng rng(21);
    for (int i = 0; i < 120; ++i) {
        const Eigen::Index n = uniform_int(rng, 2, 6);
        Matrix M(n, n);
        for (Eigen::Index a = 0; a < n; ++a)
            for (Eigen::Index b = 0; b < n; ++b) M(a, b) = uniform(rng, -1.0, 1.0);
        const Spectrum s = eigenvalues(M);
        REQUIRE(s.max_backward_error <= kMaxBackwardError);
        const auto oracle = poly_roots(charpoly(M));
        REQUIRE(match_distance(s.eigenvalues, oracle) < 1e-8);
    }
}

TEST_CASE("spectrum flags") {
    CHECK_FALSE(eigenvalues(mat2(0, 1, 0, 0)).is_hurwitz);
    CHECK(eigenvalues(mat2(0, 1, 0, 0)).marginal);
    CHECK_FALSE(eigenvalues(mat2(1e-3, 0, 0, -1)).is_hurwitz);
    CHECK_FALSE(eigenvalues(mat2(1e-3, 0, 0, -1)).marginal);
    CHECK_THROWS(eigenvalues(mat2(std::nan(""), 0, 0, 1)));
}

TEST_CASE("nominal I/O matrix has the tabulated abscissa") {
    const auto s = extract_structure(nominal());
    const Spectrum sp = eigenvalues(*s.R11_bar);
    CHECK(sp.abscissa == Catch::Approx(-3.96e-6).epsilon(0.005));
    CHECK(sp.is_hurwitz);
    const auto oracle = poly_roots(charpoly(*s.R11_bar));
    double amax = -1e300;
    for (auto z : oracle) amax = std::max(amax, z.real());
    CHECK(sp.abscissa == Catch::Approx(amax).epsilon(1e-6));
}

// =============================================================================
// Structure predicates
// =============================================================================

TEST_CASE("metzler and triangular predicates") {
    CHECK(is_metzler(mat2(-1, 0.5, 0, -2)));
    CHECK_FALSE(is_metzler(mat2(-1, -0.5, 0, -2)));
    CHECK(is_lower_triangular(mat2(-1, 0, 3, -2)));
    CHECK_FALSE(is_lower_triangular(mat2(-1, 1e-300, 3, -2)));
}

TEST_CASE("irreducibility agrees with the closure oracle") {
    Rng rng(22);
    int irreducible = 0;
    for (int i = 0; i < 200; ++i) {
        const Eigen::Index n = uniform_int(rng, 1, 7);
        const Matrix M = random_metzler(rng, n, uniform(rng, 0.05, 0.6));
        const bool expect = strongly_connected(M);
        irreducible += expect;
        REQUIRE(is_irreducible(M) == expect);
    }
    CHECK(irreducible > 20);
}

TEST_CASE("irreducibility of the design matrices") {
    CHECK(is_irreducible(example2_R22(1, 1, 1, 2)));
    Matrix L = Matrix::Zero(4, 4);
    L.diagonal().setConstant(-1);
    L(1, 0) = L(2, 1) = L(3, 2) = L(3, 0) = 1;
    CHECK_FALSE(is_irreducible(L));

    const auto closed = extract_structure(nominal());
    CHECK(is_irreducible(*closed.R22_bar));
    CHECK(strongly_connected(*closed.R22_bar));
    const auto open = extract_structure(compile_dual_rail(open_loop(builtin_example1(RateTable::example1_nominal()))));
    CHECK_FALSE(is_irreducible(*open.R22_bar));
    CHECK_FALSE(strongly_connected(*open.R22_bar));
}

// =============================================================================
// Frobenius-Perron
// =============================================================================

TEST_CASE("Perron pair of a 2x2 matrix") {
    const PerronPair pf = frobenius_perron(mat2(-1, 2, 1, -1));
    CHECK(pf.lambda == Catch::Approx(-1 + std::sqrt(2.0)).epsilon(1e-12));
    // Left eigenvector proportional to (1, sqrt 2).
    CHECK(pf.w[1] / pf.w[0] == Catch::Approx(std::sqrt(2.0)).epsilon(1e-10));
    CHECK(pf.w.sum() == Catch::Approx(1.0));
}

TEST_CASE("Perron root of example 2 across the Descartes boundary") {
    CHECK(frobenius_perron(example2_R22(1, 1, 1, 2)).lambda == Catch::Approx(-1 + std::sqrt(2.0)).epsilon(1e-12));
    CHECK(frobenius_perron(example2_R22(1, 1, 1, 0.5)).lambda == Catch::Approx(-1 + std::sqrt(0.5)).epsilon(1e-12));
    CHECK_THROWS_AS(frobenius_perron(mat2(-1, 0, 1, -1)), NotIrreducible);
}

TEST_CASE("Perron pair on random irreducible matrices") {
    Rng rng(23);
    for (int i = 0; i < 120; ++i) {
        const Matrix M = random_irreducible_metzler(rng, uniform_int(rng, 2, 7));
        const PerronPair pf = frobenius_perron(M);
        REQUIRE(pf.w.minCoeff() > 0.0);
        REQUIRE(pf.lambda == Catch::Approx(eigenvalues(M).abscissa).margin(1e-9));
        REQUIRE((M.transpose() * pf.w - pf.lambda * pf.w).cwiseAbs().maxCoeff() < 1e-10);
    }
}

// =============================================================================
// Equilibria of the q-dynamics
// =============================================================================

TEST_CASE("example 2 positive equilibrium equals the bisection root") {
    const double q1 = example2_root();
    CHECK(q1 == Catch::Approx(0.4780).margin(1e-4));
    const QEquilibrium eq = equilibrium_q(example2_R22(1, 1, 1, 2), 1.0, Vector::Zero(2));
    REQUIRE(eq.selected.classification == EquilibriumClass::Positive);
    CHECK(std::abs(eq.selected.x_star[0] - q1) < 1e-9);
    CHECK(std::abs(eq.selected.x_star[1] - (q1 + 1) * q1 / 2) < 1e-9);
    CHECK(eq.origin_branch.x_star.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("example 2 below the boundary has only the origin") {
    for (double c2 : {0.2, 0.5, 0.9, 0.99}) {
        const QEquilibrium eq = equilibrium_q(example2_R22(1, 1, 1, c2), 1.0, Vector::Zero(2));
        CHECK(eq.selected.classification == EquilibriumClass::Origin);
        CHECK(eq.selected.x_star.cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("Descartes condition") {
    CHECK(descartes_condition(1, 1, 1, 2));
    CHECK_FALSE(descartes_condition(1, 1, 1, 1));
    CHECK(descartes_condition(0.5, 0.5, 1, 0.3));
    const QEquilibrium eq = equilibrium_q(example2_R22(0.5, 0.5, 1, 0.3), 1.0, Vector::Zero(2));
    CHECK(eq.selected.classification == EquilibriumClass::Positive);
}

TEST_CASE("triangular Hurwitz matrices have only the origin") {
    Rng rng(24);
    for (int i = 0; i < 100; ++i) {
        const Eigen::Index n = uniform_int(rng, 1, 6);
        Matrix M = random_metzler(rng, n).triangularView<Eigen::Lower>();
        const QEquilibrium eq = equilibrium_q(M, uniform(rng, 0.1, 2.0), Vector::Zero(n));
        REQUIRE(eq.selected.classification == EquilibriumClass::Origin);
        REQUIRE(eq.selected.x_star.cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("q equilibrium scales inversely with k") {
    Rng rng(25);
    int checked = 0;
    while (checked < 100) {
        const Matrix M = random_irreducible_metzler(rng, uniform_int(rng, 2, 5), 0.5);
        if (eigenvalues(M).abscissa < 1e-2) continue;
        ++checked;
        const double k = uniform(rng, 0.2, 2.0);
        const auto a = equilibrium_q(M, k, Vector::Zero(M.rows()));
        const auto b = equilibrium_q(M, 10 * k, Vector::Zero(M.rows()));
        REQUIRE(a.selected.classification == EquilibriumClass::Positive);
        REQUIRE(b.selected.classification == EquilibriumClass::Positive);
        const Vector ratio = a.selected.x_star.cwiseQuotient(b.selected.x_star);
        REQUIRE((ratio.array() - 10.0).abs().maxCoeff() < 1e-5);
    }
}

TEST_CASE("forced q equilibrium solves the fixed-point equations") {
    Rng rng(26);
    for (int i = 0; i < 100; ++i) {
        const Eigen::Index n = uniform_int(rng, 2, 5);
        const Matrix M = random_metzler(rng, n, 0.4);
        const Vector v = random_state(rng, n, 0.1, 1.0);
        const double k = uniform(rng, 0.2, 2.0);
        const auto eq = equilibrium_q(M, k, v);
        const Vector &q = eq.selected.x_star;
        REQUIRE(q.minCoeff() > 0.0);
        const Vector residual = M * q - k * q.cwiseProduct(q) + v;
        REQUIRE(residual.cwiseAbs().maxCoeff() < 1e-9);
    }
}

// =============================================================================
// Full equilibrium and linearisation
// =============================================================================

TEST_CASE("nominal equilibrium is positive and rail-symmetric") {
    const FullEquilibrium eq = equilibrium_full(nominal(), Vector::Zero(2));
    const Vector &x = eq.selected.x_star;
    REQUIRE(eq.selected.classification == EquilibriumClass::Positive);
    CHECK(x.minCoeff() > 0.0);
    CHECK((x.head(5) - x.tail(5)).cwiseAbs().maxCoeff() < 1e-9 * x.maxCoeff());
    CHECK(eq.selected.residual < 1e-12);
    CHECK(x[4] == Catch::Approx(0.559766).epsilon(1e-5));
    CHECK(eq.seeds.size() >= 2);
}

TEST_CASE("cascaded network rests at the origin") {
    const Crn cascade = compile_dual_rail(builtin_example2(1, 1, 1, 0));
    const FullEquilibrium eq = equilibrium_full(cascade, Vector::Zero(2));
    CHECK(eq.selected.x_star.cwiseAbs().maxCoeff() < 1e-12);
    CHECK(eq.selected.classification == EquilibriumClass::Origin);
}

TEST_CASE("faster annihilation shrinks the equilibrium") {
    const FullEquilibrium base = equilibrium_full(nominal(), Vector::Zero(2));
    const FullEquilibrium fast = equilibrium_full(apply_perturbation(nominal(), {{"eta", 10.0}}), Vector::Zero(2));
    const auto s = extract_structure(nominal());
    const double qa = (s.Wq * base.selected.x_star).norm();
    const double qb = (s.Wq * fast.selected.x_star).norm();
    CHECK(qa / qb == Catch::Approx(10.0).epsilon(0.05));
}

TEST_CASE("linearisation at the origin is A") {
    const auto lin = linearize(nominal(), Vector::Zero(10));
    CHECK((lin.A_s - mass_action_field(nominal()).A).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("linearisation matches Table 2") {
    const auto eqn = equilibrium_full(nominal(), Vector::Zero(2));
    CHECK(eigenvalues(linearize(nominal(), eqn.selected.x_star).A_s).abscissa ==
          Catch::Approx(-3.96e-6).epsilon(0.005));
    const auto eqa = equilibrium_full(asymmetric(), Vector::Zero(2));
    REQUIRE(eqa.selected.x_star.minCoeff() >= 0.0);
    const auto z = eigenvalues(linearize(asymmetric(), eqa.selected.x_star).A_s).dominant();
    CHECK(z.real() == Catch::Approx(3.16e-5).epsilon(0.005));
    CHECK(std::abs(z.imag()) == Catch::Approx(1.26e-3).epsilon(0.005));
}

// =============================================================================
// Bounds and certificates
// =============================================================================

TEST_CASE("boundedness bound closed forms") {
    CHECK(boundedness_bound(Matrix::Zero(3, 3), 1.0, 3) == 0.0);
    const Matrix M = mat2(-1, 2, 1, -1);
    const double sigma = std::sqrt(Eigen::SelfAdjointEigenSolver<Matrix>(M.transpose() * M).eigenvalues().maxCoeff());
    CHECK(boundedness_bound(M, 1.0, 2) == Catch::Approx(2 * std::sqrt(2.0) * sigma).epsilon(1e-12));
    CHECK(spectral_norm(M) == Catch::Approx(sigma).epsilon(1e-12));
    // The forced bound reduces to the unforced one without input and is its own fixed point.
    CHECK(forced_boundedness_bound(M, 1.0, 2, 0.0) == Catch::Approx(2 * std::sqrt(2.0) * sigma).epsilon(1e-9));
    const double b = forced_boundedness_bound(M, 1.0, 2, 3.0);
    CHECK(b == Catch::Approx((std::sqrt(2.0) * sigma + 3.0 / b) / 0.5).epsilon(1e-9));
}

TEST_CASE("nominal bound exceeds the simulated q norm") {
    const auto s = extract_structure(nominal());
    const double bound = boundedness_bound(*s.R22_bar, s.eta, s.n_base);
    const auto tr = integrate(nominal(), Vector::Ones(10), ReferenceProfile::zero(), 2e6);
    CHECK(std::isfinite(bound));
    CHECK(tr.sup_q_norm() < bound);
}

TEST_CASE("diagonal Lyapunov certificate for a known matrix") {
    const Matrix M = mat2(-2, 1, 0.5, -1);
    const auto cert = diagonal_lyapunov(M);
    REQUIRE(cert.valid);
    CHECK(cert.d.minCoeff() > 0);
    CHECK(cert.max_eigenvalue == Catch::Approx(-1.0));
    CHECK_FALSE(diagonal_lyapunov(mat2(1, 0, 0, -1)).valid);
    Vector x(2);
    x << 1, 2;
    CHECK(lyapunov_value(cert.d, x) == Catch::Approx(cert.d[0] + 4 * cert.d[1]));
}

// =============================================================================
// Reports
// =============================================================================

TEST_CASE("nominal report") {
    const StabilityReport r = stability_report(nominal(), Vector::Zero(2));
    CHECK(r.symmetric);
    CHECK(r.metzler);
    CHECK(r.irreducible);
    CHECK_FALSE(r.cascaded);
    REQUIRE(r.find("R11_bar"));
    CHECK(r.find("R11_bar")->spectrum.is_hurwitz);
    CHECK_FALSE(r.find("R22_bar")->spectrum.is_hurwitz);
    CHECK(r.find("A_s")->spectrum.is_hurwitz);
    CHECK(r.verdict("positive_equilibrium")->status == VerdictStatus::Holds);
    CHECK(r.verdict("symmetric_bounded")->status == VerdictStatus::Holds);
    CHECK(r.verdict("local_stability")->status == VerdictStatus::Holds);
    CHECK(r.overall == "stable");
    CHECK_FALSE(r.undecided());
    const std::string table = format_table(r);
    CHECK(table.find("-3.96445e-06") != std::string::npos);
    const auto doc = to_json(r);
    CHECK(doc.contains("verdicts"));
    CHECK(doc["overall"] == "stable");
}

TEST_CASE("asymmetric report") {
    const StabilityReport r = stability_report(asymmetric(), Vector::Zero(2));
    CHECK_FALSE(r.symmetric);
    CHECK(r.find("R11")->spectrum.abscissa == Catch::Approx(-5.23e-6).epsilon(0.005));
    CHECK(r.find("R11")->spectrum.is_hurwitz);
    CHECK_FALSE(r.find("A_s")->spectrum.is_hurwitz);
    CHECK(r.verdict("asymmetric")->status == VerdictStatus::Fails);
    CHECK(r.overall == "unstable");
    CHECK(format_table(r).find("3.16475e-05 ± i0.00126448") != std::string::npos);
}

TEST_CASE("open-loop report is globally stable by cascade") {
    // Example 2 without feedback: a cascade with Hurwitz I/O dynamics.
    const StabilityReport r = stability_report(compile_dual_rail(builtin_example2(1, 1, 1, 0)), Vector::Zero(2));
    CHECK(r.cascaded);
    CHECK(r.verdict("cascade_gas")->status == VerdictStatus::Holds);
    CHECK(r.overall == "stable");
}

TEST_CASE("example 1 open loop is a cascade") {
    const StabilityReport r = stability_report(
        compile_dual_rail(open_loop(builtin_example1(RateTable::example1_nominal()))), Vector::Zero(2));
    CHECK(r.cascaded);
    CHECK_FALSE(r.irreducible);
}

TEST_CASE("eigenvalue formatting") {
    CHECK(format_eigenvalue({-3.96445e-6, 0}) == "-3.96445e-06");
    CHECK(format_eigenvalue({1.5, -2}) == "1.5-2i");
}
