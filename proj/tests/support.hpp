#pragma once

// =============================================================================
// Test oracles, random generators and property checks
// =============================================================================
// Oracles here are deliberately independent of the library: characteristic
// polynomials by Faddeev-LeVerrier, roots by Durand-Kerner, reachability by
// transitive closure, fluxes summed reaction by reaction.
// =============================================================================

#include "crnctl/analysis.hpp"
#include "crnctl/crn.hpp"
#include "crnctl/frontend.hpp"
#include "crnctl/sim.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <random>
#include <string>
#include <vector>

namespace testsupport {

using crnctl::Matrix;
using crnctl::Vector;
using cplx = std::complex<double>;

// =============================================================================
// Polynomial oracles
// =============================================================================

/// Monic characteristic polynomial coefficients c[0..n], c[0] = 1, of det(lambda I - M).
inline std::vector<long double> charpoly(const Matrix &M) {
    const auto n = M.rows();
    using LMat = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
    const LMat A = M.cast<long double>();
    LMat Mk = LMat::Zero(n, n);
    std::vector<long double> c(static_cast<std::size_t>(n) + 1, 0.0L);
    c[0] = 1.0L;
    for (Eigen::Index k = 1; k <= n; ++k) {
        Mk = A * Mk + c[static_cast<std::size_t>(k - 1)] * LMat::Identity(n, n);
        c[static_cast<std::size_t>(k)] = -(A * Mk).trace() / static_cast<long double>(k);
    }
    return c;
}

/// All roots of a monic polynomial by Durand-Kerner, polished by Newton.
inline std::vector<cplx> poly_roots(const std::vector<long double> &c) {
    using lc = std::complex<long double>;
    const std::size_t n = c.size() - 1;
    auto eval = [&](lc z) {
        lc p = 1.0L;
        for (std::size_t i = 1; i <= n; ++i) p = p * z + c[i];
        return p;
    };
    auto deriv = [&](lc z) {
        lc p = 0.0L;
        for (std::size_t i = 0; i < n; ++i) p = p * z + static_cast<long double>(n - i) * c[i];
        return p;
    };
    long double radius = 1.0L;
    for (std::size_t i = 1; i <= n; ++i) radius = std::max(radius, 1.0L + std::abs(c[i]));
    std::vector<lc> z(n);
    const lc seed(0.4L, 0.9L);
    for (std::size_t i = 0; i < n; ++i) z[i] = std::pow(seed, static_cast<long double>(i)) * (radius / 2);
    for (int it = 0; it < 5000; ++it) {
        long double change = 0.0L;
        for (std::size_t i = 0; i < n; ++i) {
            lc den = 1.0L;
            for (std::size_t j = 0; j < n; ++j)
                if (j != i) den *= z[i] - z[j];
            const lc dz = eval(z[i]) / den;
            z[i] -= dz;
            change = std::max(change, std::abs(dz));
        }
        if (change < 1e-18L * radius) break;
    }
    std::vector<cplx> out;
    for (auto r : z) {
        for (int k = 0; k < 3; ++k) {
            const lc d = deriv(r);
            if (std::abs(d) == 0.0L) break;
            r -= eval(r) / d;
        }
        out.emplace_back(static_cast<double>(r.real()), static_cast<double>(r.imag()));
    }
    return out;
}

/// Largest distance after greedily pairing each computed value with the nearest unused oracle value.
inline double match_distance(const std::vector<cplx> &a, std::vector<cplx> b) {
    double worst = 0.0;
    for (const auto &z : a) {
        auto it = std::min_element(b.begin(), b.end(),
                                   [&](const cplx &u, const cplx &v) { return std::abs(u - z) < std::abs(v - z); });
        worst = std::max(worst, std::abs(*it - z));
        b.erase(it);
    }
    return worst;
}

/// Root of a continuous f on [lo, hi] with a sign change, to width tol.
template <class F> double bisect(F f, double lo, double hi, double tol = 1e-15) {
    double flo = f(lo);
    while (hi - lo > tol * std::max(1.0, std::abs(lo))) {
        const double mid = 0.5 * (lo + hi);
        const double fm = f(mid);
        if ((fm < 0) == (flo < 0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

// =============================================================================
// Graph oracle
// =============================================================================

/// Strong connectivity by transitive closure (Floyd-Warshall) of off-diagonal positives.
inline bool strongly_connected(const Matrix &M) {
    const auto n = M.rows();
    std::vector<std::vector<bool>> reach(static_cast<std::size_t>(n), std::vector<bool>(static_cast<std::size_t>(n)));
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            reach[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = i == j || (M(i, j) > 0);
    for (std::size_t k = 0; k < static_cast<std::size_t>(n); ++k)
        for (std::size_t i = 0; i < static_cast<std::size_t>(n); ++i)
            for (std::size_t j = 0; j < static_cast<std::size_t>(n); ++j)
                if (reach[i][k] && reach[k][j]) reach[i][j] = true;
    for (const auto &row : reach)
        for (bool b : row)
            if (!b) return false;
    return true;
}

// =============================================================================
// Flux oracle
// =============================================================================

/// dx/dt summed reaction by reaction from the reaction list.
inline Vector flux_sum(const crnctl::Crn &crn, const Vector &x, const Vector &r) {
    Vector dx = Vector::Zero(x.size());
    auto val = [&](const crnctl::SpeciesRef &s) { return s.is_input ? r[static_cast<Eigen::Index>(s.index)]
                                                                      : x[static_cast<Eigen::Index>(s.index)]; };
    for (const auto &rx : crn.reactions) {
        switch (rx.kind) {
        case crnctl::ReactionKind::Catalysis:
            dx[static_cast<Eigen::Index>(rx.second.index)] += rx.rate * val(rx.first);
            break;
        case crnctl::ReactionKind::Degradation:
            dx[static_cast<Eigen::Index>(rx.first.index)] -= rx.rate * val(rx.first);
            break;
        case crnctl::ReactionKind::Annihilation: {
            const double f = rx.rate * val(rx.first) * val(rx.second);
            dx[static_cast<Eigen::Index>(rx.first.index)] -= f;
            dx[static_cast<Eigen::Index>(rx.second.index)] -= f;
            break;
        }
        }
    }
    return dx;
}

// =============================================================================
// Random instances
// =============================================================================

using Rng = std::mt19937_64;

inline double uniform(Rng &rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
inline int uniform_int(Rng &rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

struct DiagramOptions {
    int min_blocks = 1;
    int max_blocks = 5;
    bool symmetric = false;
    /// Wires only come from earlier blocks or the reference (acyclic catalysis graph).
    bool cascade = false;
    bool allow_integrator = true;
    double rate_lo = 0.1;
    double rate_hi = 2.0;
    double eta_lo = 0.1; // 1/(nM*s)
    double eta_hi = 2.0;
};

inline crnctl::BlockDiagram random_diagram(Rng &rng, const DiagramOptions &o = {}) {
    using namespace crnctl;
    const std::vector<BlockKind> kinds_all = {BlockKind::Gain, BlockKind::Integrator, BlockKind::Summation,
                                              BlockKind::Subtraction, BlockKind::FirstOrderPlant};
    std::vector<BlockKind> kinds;
    for (auto k : kinds_all)
        if (o.allow_integrator || k != BlockKind::Integrator) kinds.push_back(k);

    BlockDiagram d;
    d.references = {"r"};
    d.eta_per_molar_second = uniform(rng, o.eta_lo, o.eta_hi) / kPerMolarToPerNanomolar;
    const int n = uniform_int(rng, o.min_blocks, o.max_blocks);
    int sym = 0;
    for (int b = 0; b < n; ++b) {
        // A block with no candidate block source cannot realise a negated port.
        const bool no_block_source = o.cascade ? b == 0 : n == 1;
        Block blk;
        blk.id = "B" + std::to_string(b + 1);
        do {
            blk.kind = kinds[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(kinds.size()) - 1))];
        } while (no_block_source && blk.kind == BlockKind::Subtraction);
        for (auto role : roles_of(blk.kind)) {
            const double p = uniform(rng, o.rate_lo, o.rate_hi);
            const double m = o.symmetric ? p : uniform(rng, o.rate_lo, o.rate_hi);
            blk.rates.push_back({std::string(role), "s" + std::to_string(++sym), {p, m}});
        }
        d.blocks.push_back(blk);
    }
    for (int b = 0; b < n; ++b) {
        const Block &blk = d.blocks[static_cast<std::size_t>(b)];
        for (const auto &port : ports_of(blk.kind)) {
            std::vector<std::string> sources;
            if (!port.crossed_rails) sources.push_back("r");
            const int hi = o.cascade ? b - 1 : n - 1;
            for (int s = 0; s <= hi; ++s)
                if (s != b) sources.push_back(d.blocks[static_cast<std::size_t>(s)].id);
            d.wires.push_back(
                {sources[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(sources.size()) - 1))],
                 blk.id, std::string(port.port)});
        }
    }
    d.output = d.blocks.back().id;
    return d;
}

inline Vector random_state(Rng &rng, Eigen::Index n, double lo = 0.0, double hi = 2.0) {
    Vector x(n);
    for (Eigen::Index i = 0; i < n; ++i) x[i] = uniform(rng, lo, hi);
    return x;
}

/// Random Metzler matrix with off-diagonal density `density`.
inline Matrix random_metzler(Rng &rng, Eigen::Index n, double density = 0.6) {
    Matrix M = Matrix::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) {
            if (i == j)
                M(i, j) = -uniform(rng, 0.1, 2.0);
            else if (uniform(rng, 0, 1) < density)
                M(i, j) = uniform(rng, 0.05, 1.5);
        }
    return M;
}

/// Random irreducible Metzler matrix: a directed cycle plus random extra edges.
inline Matrix random_irreducible_metzler(Rng &rng, Eigen::Index n, double density = 0.4) {
    Matrix M = random_metzler(rng, n, density);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::Index j = (i + 1) % n;
        if (n > 1 && M(i, j) == 0.0) M(i, j) = uniform(rng, 0.05, 1.5);
    }
    return M;
}

} // namespace testsupport
