#include "crnctl/analysis.hpp"

#include "crnctl/errors.hpp"
#include "crnctl/ode.hpp"

#include <fmt/format.h>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

namespace crnctl {

using nlohmann::json;

// =============================================================================
// Spectra
// =============================================================================

std::complex<double> Spectrum::dominant() const {
    if (eigenvalues.empty()) return {};
    std::complex<double> best = eigenvalues.front();
    for (const auto &z : eigenvalues) {
        if (z.real() < abscissa - 1e-12 * std::max(1.0, std::abs(abscissa))) break;
        if (z.imag() > best.imag()) best = z;
    }
    return best;
}

namespace {

using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

constexpr int kQrSweepsPerRow = 100;

double backward_error(const CMatrix &M, std::complex<double> lambda, const CVector &v, double norm_m) {
    const double nv = v.norm();
    if (nv == 0.0) return std::numeric_limits<double>::infinity();
    if (norm_m == 0.0) return std::abs(lambda);
    return (M * v - lambda * v).norm() / (norm_m * nv);
}

// Inverse iteration on a slightly shifted eigenvalue; recovers a good vector
// when the solver's one is poor (defective or clustered eigenvalues).
CVector refine_vector(const CMatrix &M, std::complex<double> lambda, double norm_m) {
    const auto n = M.rows();
    const double shift = std::max(norm_m, 1e-300) * 1e-10;
    CMatrix S = M;
    S.diagonal().array() -= (lambda + std::complex<double>(shift, shift));
    Eigen::PartialPivLU<CMatrix> lu(S);
    CVector v = CVector::Ones(n);
    for (int it = 0; it < 4; ++it) {
        v = lu.solve(v);
        const double nv = v.norm();
        if (!std::isfinite(nv) || nv == 0.0) break;
        v /= nv;
    }
    return v;
}

} // namespace

Spectrum eigenvalues(const Matrix &M) {
    if (M.rows() != M.cols()) throw Error("eigenvalues: matrix is not square");
    if (!M.allFinite()) throw Error("eigenvalues: matrix has non-finite entries");
    Spectrum s;
    const auto n = M.rows();
    if (n == 0) {
        s.abscissa = -std::numeric_limits<double>::infinity();
        s.is_hurwitz = true;
        return s;
    }

    Eigen::EigenSolver<Matrix> es;
    es.setMaxIterations(static_cast<Eigen::Index>(kQrSweepsPerRow) * n);
    es.compute(M, true);
    if (es.info() != Eigen::Success) throw NoConvergence("eigenvalue iteration did not converge", 0.0);

    const CMatrix Mc = M.cast<std::complex<double>>();
    const double norm_m = M.norm();
    const CVector vals = es.eigenvalues();
    const CMatrix vecs = es.eigenvectors();
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto lambda = vals[i];
        double be = backward_error(Mc, lambda, vecs.col(i), norm_m);
        if (!(be <= kMaxBackwardError)) {
            be = std::min(be, backward_error(Mc, lambda, refine_vector(Mc, lambda, norm_m), norm_m));
        }
        if (!(be <= kMaxBackwardError)) {
            throw NoConvergence(fmt::format("eigenpair {} failed verification", i), be);
        }
        s.max_backward_error = std::max(s.max_backward_error, be);
        s.eigenvalues.push_back(lambda);
    }
    std::sort(s.eigenvalues.begin(), s.eigenvalues.end(), [](auto a, auto b) {
        if (a.real() != b.real()) return a.real() > b.real();
        return a.imag() > b.imag();
    });
    s.abscissa = s.eigenvalues.front().real();
    s.is_hurwitz = s.abscissa < -kTolHurwitz;
    s.marginal = std::abs(s.abscissa) <= kTolHurwitz;
    return s;
}

// =============================================================================
// Structure predicates
// =============================================================================

bool is_metzler(const Matrix &M) {
    for (Eigen::Index i = 0; i < M.rows(); ++i)
        for (Eigen::Index j = 0; j < M.cols(); ++j)
            if (i != j && M(i, j) < 0) return false;
    return true;
}

namespace {

std::size_t reach_count(const Matrix &M, bool transpose) {
    const auto n = M.rows();
    std::vector<bool> seen(static_cast<std::size_t>(n), false);
    std::queue<Eigen::Index> todo;
    todo.push(0);
    seen[0] = true;
    std::size_t count = 1;
    while (!todo.empty()) {
        const auto i = todo.front();
        todo.pop();
        for (Eigen::Index j = 0; j < n; ++j) {
            if (j == i || seen[static_cast<std::size_t>(j)]) continue;
            const double e = transpose ? M(j, i) : M(i, j);
            if (e > 0) {
                seen[static_cast<std::size_t>(j)] = true;
                ++count;
                todo.push(j);
            }
        }
    }
    return count;
}

} // namespace

bool is_irreducible(const Matrix &M) {
    const auto n = static_cast<std::size_t>(M.rows());
    if (n <= 1) return true;
    return reach_count(M, false) == n && reach_count(M, true) == n;
}

bool is_lower_triangular(const Matrix &M) {
    for (Eigen::Index i = 0; i < M.rows(); ++i)
        for (Eigen::Index j = i + 1; j < M.cols(); ++j)
            if (M(i, j) != 0.0) return false;
    return true;
}

PerronPair frobenius_perron(const Matrix &M) {
    if (!is_metzler(M)) throw Error("frobenius_perron: matrix is not Metzler");
    if (!is_irreducible(M)) throw NotIrreducible("frobenius_perron: matrix is reducible");
    const Matrix Mt = M.transpose();
    Eigen::EigenSolver<Matrix> es(Mt, true);
    if (es.info() != Eigen::Success) throw NoConvergence("Perron eigenvalue iteration did not converge", 0.0);
    const auto vals = es.eigenvalues();
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < vals.size(); ++i)
        if (vals[i].real() > vals[best].real()) best = i;

    PerronPair out;
    out.lambda = vals[best].real();
    Vector w = es.eigenvectors().col(best).real();
    if (w.sum() < 0) w = -w;
    // Polish with a few inverse iterations on the real shifted matrix.
    Matrix S = Mt;
    S.diagonal().array() -= out.lambda + std::max(M.norm(), 1e-300) * 1e-12;
    Eigen::PartialPivLU<Matrix> lu(S);
    for (int it = 0; it < 3; ++it) {
        Vector next = lu.solve(w);
        if (!next.allFinite() || next.norm() == 0.0) break;
        if (next.sum() < 0) next = -next;
        w = next / next.norm();
    }
    if (w.minCoeff() <= 0.0) throw NoConvergence("Perron vector is not strictly positive", w.minCoeff());
    out.w = w / w.sum();
    return out;
}

// =============================================================================
// Equilibria
// =============================================================================

std::string to_string(EquilibriumClass c) {
    switch (c) {
    case EquilibriumClass::Origin: return "origin";
    case EquilibriumClass::Positive: return "positive";
    case EquilibriumClass::MixedInvalid: return "mixed-invalid";
    }
    return "?";
}

namespace {

double q_residual(const Matrix &M, double k, const Vector &v, const Vector &q) {
    if (q.size() == 0) return 0.0;
    return (M * q - k * q.cwiseProduct(q) + v).cwiseAbs().maxCoeff();
}

EquilibriumClass classify(const Vector &q, double threshold) {
    if (q.size() == 0 || q.maxCoeff() <= threshold) return EquilibriumClass::Origin;
    if (q.minCoeff() > threshold) return EquilibriumClass::Positive;
    return EquilibriumClass::MixedInvalid;
}

EquilibriumResult q_fixed_point(const Matrix &M, double k, const Vector &v, Vector q, const std::string &seed,
                                const FixedPointOptions &opts) {
    const auto n = M.rows();
    EquilibriumResult out;
    out.seed = seed;
    double omega = 1.0;
    double prev_step = std::numeric_limits<double>::infinity();
    Vector next(n);
    for (std::size_t it = 1; it <= opts.max_iterations; ++it) {
        for (Eigen::Index j = 0; j < n; ++j) {
            double s = v[j];
            for (Eigen::Index i = 0; i < n; ++i)
                if (i != j) s += M(j, i) * q[i];
            const double m = M(j, j);
            const double disc = std::max(m * m + 4.0 * k * s, 0.0);
            next[j] = std::max((m + std::sqrt(disc)) / (2.0 * k), 0.0);
        }
        next = (1.0 - omega) * q + omega * next;
        const double step = (next - q).cwiseAbs().maxCoeff();
        q = next;
        if (step > prev_step && omega > 1.0 / 1024) omega *= 0.5;
        prev_step = step;
        if (step <= opts.tolerance * std::max(1.0, q.cwiseAbs().maxCoeff())) {
            out.converged = true;
            out.iterations = it;
            break;
        }
        out.iterations = it;
    }
    out.x_star = q;
    out.residual = q_residual(M, k, v, q);
    if (!out.converged) {
        throw NoConvergence(fmt::format("fixed-point iteration from {} seed exhausted", seed), out.residual);
    }
    return out;
}

} // namespace

QEquilibrium equilibrium_q(const Matrix &M, double k, const Vector &v, const FixedPointOptions &opts) {
    if (!(k > 0)) throw Error("equilibrium_q: k must be positive");
    if (M.rows() != M.cols() || v.size() != M.rows()) throw Error("equilibrium_q: dimension mismatch");
    if (v.size() > 0 && v.minCoeff() < 0) throw Error("equilibrium_q: v must be nonnegative");
    const auto n = M.rows();
    const double scale_m = M.cwiseAbs().maxCoeff();
    const double vmax = n > 0 ? v.maxCoeff() : 0.0;

    QEquilibrium out;
    out.origin_branch = q_fixed_point(M, k, v, Vector::Zero(n), "origin", opts);

    std::string seed_name = "uniform";
    double seed_level = (scale_m + std::sqrt(k * vmax)) / k;
    if (is_metzler(M) && is_irreducible(M) && n > 0) {
        const PerronPair fp = frobenius_perron(M);
        if (fp.lambda > 0) {
            seed_level = fp.lambda / k;
            seed_name = "perron";
        }
    }
    if (!(seed_level > 0)) seed_level = 1.0;
    out.positive_branch = q_fixed_point(M, k, v, Vector::Constant(n, seed_level), seed_name, opts);

    // Iterates that decay toward zero stop at a tiny level set by the step tolerance.
    const double threshold = 1e-7 * std::max(1.0, seed_level);
    for (EquilibriumResult *r : {&out.origin_branch, &*out.positive_branch}) {
        r->classification = classify(r->x_star, threshold);
        if (r->classification == EquilibriumClass::Origin && vmax == 0.0) {
            r->x_star.setZero();
            r->residual = 0.0;
        }
    }
    out.selected = out.positive_branch->classification == EquilibriumClass::Positive ? *out.positive_branch
                                                                                      : out.origin_branch;
    return out;
}

bool descartes_condition(double d1, double d2, double c1, double c2) { return c2 * c1 > d2 * d1; }

namespace {

Vector pre_integrate(const VectorField &f, const Vector &r, Vector x, double horizon) {
    OdeSystem sys;
    sys.rhs = [&](const Vector &y, Vector &dy) { dy = f(y, r); };
    OdeOptions opts;
    opts.rel_tol = 1e-8;
    opts.abs_tol = 1e-12;
    OdeSolver solver(sys, opts);
    solver.advance(x, 0.0, horizon, [](double, const Vector &y) { return y.cwiseAbs().maxCoeff() < 1e9; });
    return x;
}

SeedOutcome newton(const VectorField &f, const Vector &r, Vector x, const std::string &seed,
                   const NewtonOptions &opts) {
    SeedOutcome out;
    out.seed = seed;
    Vector fx = f(x, r);
    double res = fx.cwiseAbs().maxCoeff();
    for (std::size_t it = 0; it < opts.max_iterations; ++it) {
        out.iterations = it;
        const double tol = opts.tol_residual * std::max(1.0, x.cwiseAbs().maxCoeff());
        if (res <= tol) {
            out.converged = true;
            break;
        }
        const Matrix Jx = f.jacobian(x);
        Eigen::FullPivLU<Matrix> lu(Jx);
        const Vector dx = lu.solve(-fx);
        if (!dx.allFinite()) break;
        double lambda = 1.0;
        bool improved = false;
        const double norm0 = fx.norm();
        for (int ls = 0; ls < 40; ++ls) {
            const Vector trial = x + lambda * dx;
            const Vector ft = f(trial, r);
            if (ft.allFinite() && ft.norm() < (1.0 - 1e-4 * lambda) * norm0) {
                x = trial;
                fx = ft;
                improved = true;
                break;
            }
            lambda *= 0.5;
        }
        if (!improved) {
            // Accept a full step once the residual is at round-off level.
            const Vector trial = x + dx;
            const Vector ft = f(trial, r);
            if (ft.allFinite() && ft.cwiseAbs().maxCoeff() <= 1e3 * tol) {
                x = trial;
                fx = ft;
                res = fx.cwiseAbs().maxCoeff();
                out.converged = res <= 1e3 * tol;
            }
            break;
        }
        res = fx.cwiseAbs().maxCoeff();
        out.iterations = it + 1;
    }
    if (!out.converged) {
        const double tol = opts.tol_residual * std::max(1.0, x.cwiseAbs().maxCoeff());
        out.converged = res <= tol;
    }
    out.x = x;
    out.residual = res;
    return out;
}

} // namespace

FullEquilibrium equilibrium_full(const Crn &crn, const Vector &r, const NewtonOptions &opts) {
    const VectorField f = mass_action_field(crn);
    const auto n = static_cast<Eigen::Index>(crn.n_species());
    const auto N = static_cast<Eigen::Index>(crn.n_base());
    if (r.size() != static_cast<Eigen::Index>(crn.n_input_rails())) throw Error("equilibrium_full: bad input size");

    FullEquilibrium out;
    std::vector<Vector> seeds;
    std::vector<std::string> names;
    seeds.push_back(Vector::Zero(n));
    names.push_back("origin");
    seeds.push_back(pre_integrate(f, r, Vector::Ones(n), opts.pre_integration_time));
    names.push_back("pre-integration tail");
    seeds.push_back(Vector::Ones(n));
    names.push_back("uniform");

    for (std::size_t i = 0; i < seeds.size(); ++i) {
        SeedOutcome o = newton(f, r, seeds[i], names[i], opts);
        if (o.converged) {
            const double tiny = 1e-9 * std::max(1.0, o.x.cwiseAbs().maxCoeff());
            if (o.x.minCoeff() < -tiny) {
                o.converged = false;
            } else {
                o.x = o.x.cwiseMax(0.0);
                o.residual = f(o.x, r).cwiseAbs().maxCoeff();
            }
        }
        out.seeds.push_back(std::move(o));
    }

    const SeedOutcome *chosen = nullptr;
    for (const auto &o : out.seeds) {
        if (!o.converged) continue;
        if (!chosen) chosen = &o;
        const bool nonzero = o.x.maxCoeff() > 1e-9;
        const bool chosen_nonzero = chosen->x.maxCoeff() > 1e-9;
        if (nonzero && !chosen_nonzero) chosen = &o;
    }
    if (!chosen) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto &o : out.seeds) best = std::min(best, o.residual);
        std::string what = "no nonnegative equilibrium found;";
        for (const auto &o : out.seeds) what += fmt::format(" {}: residual {:.3g};", o.seed, o.residual);
        throw NoConvergence(what, best);
    }

    EquilibriumResult &sel = out.selected;
    sel.x_star = chosen->x;
    sel.residual = chosen->residual;
    sel.converged = true;
    sel.iterations = chosen->iterations;
    sel.seed = chosen->seed;
    const Vector q = chosen->x.head(N) + chosen->x.tail(N);
    sel.classification = classify(q, 1e-9 * std::max(1.0, q.size() ? q.maxCoeff() : 0.0));
    return out;
}

Linearization linearize(const Crn &crn, const Vector &x_star) {
    const StructuredSystem s = extract_structure(crn);
    const Matrix J = annihilation_jacobian(x_star);
    return {s.A + s.eta * J, s.Wp * J};
}

// =============================================================================
// Certificates
// =============================================================================

double spectral_norm(const Matrix &M) {
    if (M.size() == 0) return 0.0;
    Eigen::JacobiSVD<Matrix> svd(M);
    return svd.singularValues()(0);
}

double boundedness_bound(const Matrix &R22, double eta, std::size_t N) {
    if (!(eta > 0)) throw Error("boundedness_bound: eta must be positive");
    return 2.0 * std::sqrt(static_cast<double>(N)) * spectral_norm(R22) / eta;
}

double forced_boundedness_bound(const Matrix &R22, double eta, std::size_t N, double v_l1) {
    if (!(eta > 0)) throw Error("forced_boundedness_bound: eta must be positive");
    const double k = eta / 2.0;
    const double a = std::sqrt(static_cast<double>(N)) * spectral_norm(R22);
    return (a + std::sqrt(a * a + 4.0 * k * v_l1)) / (2.0 * k);
}

DiagonalLyapunov diagonal_lyapunov(const Matrix &M) {
    DiagonalLyapunov out;
    const auto n = M.rows();
    if (n == 0 || !is_metzler(M)) return out;
    Eigen::PartialPivLU<Matrix> lu(M);
    const Vector v = -lu.solve(Vector::Ones(n));
    const Vector w = -Eigen::PartialPivLU<Matrix>(M.transpose()).solve(Vector::Ones(n));
    if (!v.allFinite() || !w.allFinite() || v.minCoeff() <= 0 || w.minCoeff() <= 0) return out;
    Vector d = w.cwiseQuotient(v);
    Matrix Q = M.transpose() * d.asDiagonal() + d.asDiagonal() * M;
    Eigen::SelfAdjointEigenSolver<Matrix> es(Q);
    const double top = es.eigenvalues().maxCoeff();
    if (!(top < 0)) return out;
    d /= -top;
    out.d = d;
    out.Q = M.transpose() * d.asDiagonal() + d.asDiagonal() * M;
    out.max_eigenvalue = Eigen::SelfAdjointEigenSolver<Matrix>(out.Q).eigenvalues().maxCoeff();
    out.valid = d.minCoeff() > 0 && out.max_eigenvalue <= -1.0 + 1e-9;
    return out;
}

double lyapunov_value(const Vector &d, const Vector &x) { return x.dot(d.cwiseProduct(x)); }

double lyapunov_derivative(const Vector &d, const Matrix &M, const Vector &x, const Vector &g) {
    return 2.0 * x.dot(d.cwiseProduct(M * x + x.cwiseProduct(g)));
}

// =============================================================================
// Report
// =============================================================================

std::string to_string(VerdictStatus s) {
    switch (s) {
    case VerdictStatus::Holds: return "holds";
    case VerdictStatus::Fails: return "fails";
    case VerdictStatus::NotApplicable: return "not-applicable";
    case VerdictStatus::Undecided: return "undecided";
    }
    return "?";
}

const NamedSpectrum *StabilityReport::find(const std::string &matrix) const {
    for (const auto &s : spectra)
        if (s.matrix == matrix) return &s;
    return nullptr;
}

const Verdict *StabilityReport::verdict(const std::string &id) const {
    for (const auto &v : verdicts)
        if (v.id == id) return &v;
    return nullptr;
}

bool StabilityReport::undecided() const { return overall == "undecided"; }

std::string format_eigenvalue(std::complex<double> z) {
    if (z.imag() == 0.0) return fmt::format("{:.6g}", z.real());
    return fmt::format("{:.6g}{:+.6g}i", z.real(), z.imag());
}

namespace {

json eigen_json(const Spectrum &s) {
    json j = json::array();
    for (const auto &z : s.eigenvalues) j.push_back({z.real(), z.imag()});
    return j;
}

std::string hurwitz_label(const Spectrum &s) {
    if (s.marginal) return "marginal";
    return s.is_hurwitz ? "H" : "not-H";
}

json spectrum_evidence(const NamedSpectrum *s) {
    if (!s) return nullptr;
    return json{{"matrix", s->matrix},
                {"abscissa", s->spectrum.abscissa},
                {"is_hurwitz", s->spectrum.is_hurwitz},
                {"marginal", s->spectrum.marginal}};
}

} // namespace

json to_json(const Spectrum &s) {
    json out;
    out["eigenvalues"] = eigen_json(s);
    json text = json::array();
    for (const auto &z : s.eigenvalues) text.push_back(format_eigenvalue(z));
    out["eigenvalues_text"] = text;
    out["spectral_abscissa"] = s.abscissa;
    out["dominant"] = format_eigenvalue(s.dominant());
    out["is_hurwitz"] = s.is_hurwitz;
    out["marginal"] = s.marginal;
    out["max_backward_error"] = s.max_backward_error;
    return out;
}

StabilityReport stability_report(const Crn &crn, const Vector &r) {
    StabilityReport rep;
    const StructuredSystem s = extract_structure(crn);
    const auto N = s.n_base;
    rep.symmetric = s.symmetric;
    rep.metzler = is_metzler(s.A);
    rep.cascaded = is_cascaded(crn);

    const Matrix R11 = s.symmetric ? *s.R11_bar : s.R11;
    const Matrix R22 = s.symmetric ? *s.R22_bar : s.R22;
    const std::string n11 = s.symmetric ? "R11_bar" : "R11";
    const std::string n22 = s.symmetric ? "R22_bar" : "R22";
    rep.irreducible = is_irreducible(R22);

    bool undecided = false;
    auto add_spectrum = [&](const std::string &name, const Matrix &M) {
        try {
            rep.spectra.push_back({name, eigenvalues(M)});
        } catch (const NoConvergence &e) {
            rep.notes.push_back(fmt::format("{}: {}", name, e.what()));
            undecided = true;
        }
    };
    add_spectrum(n11, R11);
    add_spectrum(n22, R22);
    add_spectrum("A", s.A);

    try {
        rep.equilibrium = equilibrium_full(crn, r);
        const Linearization lin = linearize(crn, rep.equilibrium->selected.x_star);
        add_spectrum("A_s", lin.A_s);
    } catch (const NoConvergence &e) {
        rep.notes.push_back(fmt::format("equilibrium: {}", e.what()));
        undecided = true;
    }
    rep.notes.push_back("A_s at the origin equals A; A_s is reported at the selected equilibrium");

    if (rep.irreducible) {
        try {
            rep.perron = frobenius_perron(R22);
        } catch (const Error &e) {
            rep.notes.push_back(fmt::format("Perron pair: {}", e.what()));
        }
    }
    const Vector v = s.Wq * s.B * r;
    const double v_l1 = v.cwiseAbs().sum();
    if (s.symmetric) {
        rep.bound = v_l1 > 0 ? forced_boundedness_bound(R22, s.eta, N, v_l1) : boundedness_bound(R22, s.eta, N);
    }

    const NamedSpectrum *sp11 = rep.find(n11);
    const NamedSpectrum *sp22 = rep.find(n22);
    const NamedSpectrum *spA = rep.find("A");
    const NamedSpectrum *spAs = rep.find("A_s");
    const bool r_zero = r.size() == 0 || r.cwiseAbs().maxCoeff() == 0.0;

    auto status_of = [](const NamedSpectrum *sp, bool premise) {
        if (!sp || sp->spectrum.marginal) return VerdictStatus::Undecided;
        return premise ? VerdictStatus::Holds : VerdictStatus::NotApplicable;
    };

    // I/O design
    {
        Verdict v{"io_stable", "I/O dynamics " + n11 + " Hurwitz", VerdictStatus::Undecided, {}};
        if (sp11 && !sp11->spectrum.marginal)
            v.status = sp11->spectrum.is_hurwitz ? VerdictStatus::Holds : VerdictStatus::Fails;
        v.evidence["spectrum"] = spectrum_evidence(sp11);
        rep.verdicts.push_back(v);
    }
    // (i)
    {
        Verdict v{"metzler_hurwitz", "A Metzler and Hurwitz implies the origin is GAS", VerdictStatus::Undecided, {}};
        const bool premise = spA && rep.metzler && spA->spectrum.is_hurwitz;
        v.status = status_of(spA, premise);
        v.evidence["metzler"] = rep.metzler;
        v.evidence["spectrum"] = spectrum_evidence(spA);
        if (premise) {
            const DiagonalLyapunov cert = diagonal_lyapunov(s.A);
            v.evidence["certificate_valid"] = cert.valid;
            v.evidence["certificate_max_eigenvalue"] = cert.max_eigenvalue;
            if (!cert.valid) v.status = VerdictStatus::Undecided;
        }
        rep.verdicts.push_back(v);
    }
    // (ii)
    {
        Verdict v{"cascade_gas", "cascaded network with stable I/O design has GAS unforced dynamics",
                  VerdictStatus::Undecided, {}};
        const bool io = sp11 && sp11->spectrum.is_hurwitz;
        v.status = status_of(sp11, rep.cascaded && io);
        v.evidence["cascaded"] = rep.cascaded;
        v.evidence["spectrum"] = spectrum_evidence(sp11);
        rep.verdicts.push_back(v);
    }
    // (iii)
    {
        Verdict v{"positive_equilibrium", "irreducible non-Hurwitz " + n22 + ": origin unstable, positive equilibrium",
                  VerdictStatus::Undecided, {}};
        const bool premise = s.symmetric && rep.irreducible && sp22 && !sp22->spectrum.is_hurwitz;
        v.status = status_of(sp22, premise);
        v.evidence["symmetric"] = s.symmetric;
        v.evidence["irreducible"] = rep.irreducible;
        v.evidence["spectrum"] = spectrum_evidence(sp22);
        if (rep.perron) {
            v.evidence["lambda_F"] = rep.perron->lambda;
            v.evidence["w_F"] = std::vector<double>(rep.perron->w.data(), rep.perron->w.data() + rep.perron->w.size());
        }
        if (premise && r_zero) {
            if (rep.equilibrium) {
                const auto cls = rep.equilibrium->selected.classification;
                v.evidence["equilibrium_classification"] = to_string(cls);
                if (cls != EquilibriumClass::Positive) v.status = VerdictStatus::Undecided;
            } else {
                v.status = VerdictStatus::Undecided;
            }
        }
        rep.verdicts.push_back(v);
    }
    // (iv)
    {
        Verdict v{"symmetric_bounded", "symmetric network is bounded", VerdictStatus::NotApplicable, {}};
        if (s.symmetric) {
            v.status = VerdictStatus::Holds;
            v.evidence["bound_q_2norm_nM"] = *rep.bound;
            v.evidence["forced"] = v_l1 > 0;
            v.evidence["sigma_max_R22"] = spectral_norm(R22);
            v.evidence["eta"] = s.eta;
        }
        v.evidence["symmetric"] = s.symmetric;
        rep.verdicts.push_back(v);
    }
    // (v)
    {
        Verdict v{"asymmetric", "asymmetric network: stability decided by A_s only", VerdictStatus::NotApplicable,
                  {}};
        v.evidence["symmetric"] = s.symmetric;
        if (!s.symmetric) {
            if (!spAs || spAs->spectrum.marginal) {
                v.status = VerdictStatus::Undecided;
            } else {
                v.status = spAs->spectrum.is_hurwitz ? VerdictStatus::Holds : VerdictStatus::Fails;
            }
            v.evidence["spectrum"] = spectrum_evidence(spAs);
            v.evidence["note"] = "A stable I/O dynamics R11 in H no longer provides guarantees";
        }
        rep.verdicts.push_back(v);
    }
    // Local stability of the equilibrium used
    {
        Verdict v{"local_stability", "A_s Hurwitz at the selected equilibrium", VerdictStatus::Undecided, {}};
        if (spAs && !spAs->spectrum.marginal)
            v.status = spAs->spectrum.is_hurwitz ? VerdictStatus::Holds : VerdictStatus::Fails;
        v.evidence["spectrum"] = spectrum_evidence(spAs);
        if (rep.equilibrium) {
            v.evidence["equilibrium_classification"] = to_string(rep.equilibrium->selected.classification);
            v.evidence["equilibrium_seed"] = rep.equilibrium->selected.seed;
        }
        rep.verdicts.push_back(v);
    }

    auto status = [&](const std::string &id) { return rep.verdict(id)->status; };
    if (status("metzler_hurwitz") == VerdictStatus::Holds || status("cascade_gas") == VerdictStatus::Holds) {
        rep.overall = "stable";
    } else if (undecided || status("local_stability") == VerdictStatus::Undecided) {
        rep.overall = "undecided";
    } else {
        rep.overall = status("local_stability") == VerdictStatus::Holds ? "stable" : "unstable";
    }
    return rep;
}

json to_json(const StabilityReport &rep) {
    json out;
    out["structure"] = {{"metzler", rep.metzler},
                        {"irreducible", rep.irreducible},
                        {"cascaded", rep.cascaded},
                        {"symmetric", rep.symmetric}};
    json spectra = json::object();
    for (const auto &s : rep.spectra) spectra[s.matrix] = to_json(s.spectrum);
    out["spectra"] = spectra;
    if (rep.equilibrium) {
        const auto &e = rep.equilibrium->selected;
        json eq;
        eq["x_star"] = std::vector<double>(e.x_star.data(), e.x_star.data() + e.x_star.size());
        eq["residual"] = e.residual;
        eq["classification"] = to_string(e.classification);
        eq["seed"] = e.seed;
        json seeds = json::array();
        for (const auto &o : rep.equilibrium->seeds) {
            seeds.push_back({{"seed", o.seed},
                             {"converged", o.converged},
                             {"residual", o.residual},
                             {"iterations", o.iterations},
                             {"x", std::vector<double>(o.x.data(), o.x.data() + o.x.size())}});
        }
        eq["seeds"] = seeds;
        out["equilibrium"] = eq;
    } else {
        out["equilibrium"] = nullptr;
    }
    if (rep.perron) {
        out["perron"] = {{"lambda_F", rep.perron->lambda},
                         {"w_F", std::vector<double>(rep.perron->w.data(),
                                                     rep.perron->w.data() + rep.perron->w.size())}};
    } else {
        out["perron"] = nullptr;
    }
    out["bound_nM"] = rep.bound ? json(*rep.bound) : json(nullptr);
    json verdicts = json::array();
    for (const auto &v : rep.verdicts) {
        verdicts.push_back({{"id", v.id}, {"claim", v.claim}, {"status", to_string(v.status)}, {"evidence", v.evidence}});
    }
    out["verdicts"] = verdicts;
    out["notes"] = rep.notes;
    out["overall"] = rep.overall;
    return out;
}

std::string format_table(const StabilityReport &rep) {
    std::string out = fmt::format("{:<10} {:<34} {}\n", "matrix", "poles with maximum real part", "Hurwitz");
    for (const auto &s : rep.spectra) {
        const auto z = s.spectrum.dominant();
        std::string poles = z.imag() == 0.0 ? fmt::format("{:.6g}", z.real())
                                            : fmt::format("{:.6g} ± i{:.6g}", z.real(), std::abs(z.imag()));
        out += fmt::format("{:<10} {:<34} {}\n", s.matrix, poles, hurwitz_label(s.spectrum));
    }
    out += fmt::format("overall: {}\n", rep.overall);
    return out;
}

} // namespace crnctl
