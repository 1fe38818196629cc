#include "crnctl/ode.hpp"

#include "crnctl/errors.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace crnctl {

namespace {

using Vec = Eigen::VectorXd;

// Dormand-Prince 5(4) tableau
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784, a76 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200, e6 = 22.0 / 525,
                 e7 = -1.0 / 40;

// Rosenbrock 2(3) constants
const double kRosD = 1.0 / (2.0 + std::sqrt(2.0));
const double kRosE32 = 6.0 + std::sqrt(2.0);

constexpr double kSafety = 0.9;
constexpr double kMinFactor = 0.2;
constexpr double kMaxFactor = 5.0;

} // namespace

OdeSolver::OdeSolver(OdeSystem system, OdeOptions options) : system_(std::move(system)), options_(options) {
    if (!system_.rhs) throw Error("ODE system has no right-hand side");
    if (options_.method == OdeMethod::Rosenbrock23 && !system_.jacobian) {
        throw Error("Rosenbrock23 requires a Jacobian");
    }
    if (options_.initial_step > 0) h_ = options_.initial_step;
}

void OdeSolver::eval(const Vec &x, Vec &dx) {
    system_.rhs(x, dx);
    ++stats_.rhs_evaluations;
}

double OdeSolver::error_norm(const Vec &err, const Vec &x0, const Vec &x1) const {
    const auto n = err.size();
    if (n == 0) return 0.0;
    double acc = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double sc = options_.abs_tol + options_.rel_tol * std::max(std::abs(x0[i]), std::abs(x1[i]));
        const double r = err[i] / sc;
        acc += r * r;
    }
    return std::sqrt(acc / static_cast<double>(n));
}

double OdeSolver::initial_step(const Vec &x, const Vec &f0, double span) {
    const Vec zero = Vec::Zero(x.size());
    const double d0 = error_norm(x, x, zero);
    const double d1 = error_norm(f0, x, zero);
    double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    h0 = std::min(h0, span);
    Vec x1 = x + h0 * f0;
    Vec f1(x.size());
    eval(x1, f1);
    const double d2 = error_norm(f1 - f0, x, zero) / h0;
    const double order = options_.method == OdeMethod::Dopri5 ? 5.0 : 2.0;
    const double dm = std::max(d1, d2);
    const double h1 = dm <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dm, 1.0 / order);
    return std::min({100 * h0, h1, span, options_.max_step});
}

bool OdeSolver::accept(Vec &x) {
    ++stats_.accepted;
    bool clipped = false;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        if (x[i] < 0) {
            stats_.min_raw = std::min(stats_.min_raw, x[i]);
            if (options_.clip_negative) {
                x[i] = 0.0;
                clipped = true;
            }
        }
    }
    if (clipped) ++stats_.clip_events;
    return clipped;
}

double OdeSolver::advance(Vec &x, double t0, double t1, const Observer &observer) {
    if (!(t1 >= t0)) throw Error("integration interval is reversed");
    if (t1 == t0) return t0;
    if (!x.allFinite()) throw StepUnderflow(t0, std::vector<double>(x.data(), x.data() + x.size()));

    const Eigen::Index n = x.size();
    Vec k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), y(n), xnew(n), err(n);
    Eigen::MatrixXd J(n, n), Wm(n, n);
    Eigen::PartialPivLU<Eigen::MatrixXd> lu;

    double t = t0;
    eval(x, k1);
    if (h_ <= 0) h_ = initial_step(x, k1, t1 - t0);
    bool jac_fresh = false;

    std::size_t steps = 0;
    while (t < t1) {
        if (++steps > options_.max_steps) {
            throw StepUnderflow(t, std::vector<double>(x.data(), x.data() + x.size()), "step budget exhausted");
        }
        double h = std::min(h_, options_.max_step);
        bool last = false;
        if (t + h >= t1 || t + 1.01 * h >= t1) {
            h = t1 - t;
            last = true;
        }
        if (h <= 16 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(t))) {
            throw StepUnderflow(t, std::vector<double>(x.data(), x.data() + x.size()));
        }

        double errn = 0.0;
        double order = 5.0;
        if (options_.method == OdeMethod::Dopri5) {
            y = x + h * a21 * k1;
            eval(y, k2);
            y = x + h * (a31 * k1 + a32 * k2);
            eval(y, k3);
            y = x + h * (a41 * k1 + a42 * k2 + a43 * k3);
            eval(y, k4);
            y = x + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
            eval(y, k5);
            y = x + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
            eval(y, k6);
            xnew = x + h * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
            eval(xnew, k7);
            err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
            errn = error_norm(err, x, xnew);
        } else {
            order = 3.0;
            if (!jac_fresh) {
                system_.jacobian(x, J);
                ++stats_.jacobian_evaluations;
                jac_fresh = true;
            }
            Wm = -h * kRosD * J;
            Wm.diagonal().array() += 1.0;
            lu.compute(Wm);
            // k1 holds F0 = f(x)
            k2 = lu.solve(k1);                       // stage 1
            y = x + 0.5 * h * k2;
            eval(y, k3);                             // F1
            k4 = lu.solve(k3 - k2) + k2;             // stage 2
            xnew = x + h * k4;
            eval(xnew, k5);                          // F2
            k6 = lu.solve(k5 - kRosE32 * (k4 - k3) - 2.0 * (k2 - k1)); // stage 3
            err = (h / 6.0) * (k2 - 2.0 * k4 + k6);
            errn = error_norm(err, x, xnew);
        }

        if (!std::isfinite(errn) || !xnew.allFinite()) {
            ++stats_.rejected;
            h_ = h * kMinFactor;
            continue;
        }

        if (errn <= 1.0) {
            t = last ? t1 : t + h;
            x = xnew;
            const bool clipped = accept(x);
            if (options_.method == OdeMethod::Dopri5) {
                if (clipped) {
                    eval(x, k1);
                } else {
                    k1 = k7;
                }
            } else {
                eval(x, k1);
                jac_fresh = false;
            }
            double fac = errn == 0.0 ? kMaxFactor : kSafety * std::pow(errn, -1.0 / order);
            fac = std::clamp(fac, kMinFactor, kMaxFactor);
            // A step shortened to land on t1 does not shrink the next one.
            h_ = last ? std::max(h_, h * fac) : h * fac;
            if (observer && !observer(t, x)) return t;
        } else {
            ++stats_.rejected;
            double fac = kSafety * std::pow(errn, -1.0 / order);
            h_ = h * std::clamp(fac, kMinFactor, 1.0);
        }
    }
    return t;
}

} // namespace crnctl
