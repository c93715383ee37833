#pragma once

#include <array>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include "fpp_analysis.hpp"

namespace fpp {

namespace detail {

/// BFS distance from `root` along positive-probability edges; -1 when unreached.
inline std::vector<long> bfs_levels(const SparseRowMatrix &p, NodeId root, bool reverse) {
    const auto n = static_cast<std::size_t>(p.rows());
    std::vector<std::vector<NodeId>> adj(n);
    for (Eigen::Index x = 0; x < p.outerSize(); ++x)
        for (SparseRowMatrix::InnerIterator it(p, x); it; ++it)
            if (it.value() > 0.0) {
                if (reverse) adj[it.col()].push_back(static_cast<NodeId>(x));
                else adj[x].push_back(static_cast<NodeId>(it.col()));
            }
    std::vector<long> level(n, -1);
    std::vector<NodeId> frontier{root};
    level[root] = 0;
    for (std::size_t head = 0; head < frontier.size(); ++head) {
        NodeId x = frontier[head];
        for (NodeId y : adj[x])
            if (level[y] < 0) level[y] = level[x] + 1, frontier.push_back(y);
    }
    return level;
}

} // namespace detail

inline bool is_strongly_connected(const DiscreteModel &model) {
    auto fwd = detail::bfs_levels(model.p, 0, false);
    auto bwd = detail::bfs_levels(model.p, 0, true);
    for (std::size_t i = 0; i < fwd.size(); ++i)
        if (fwd[i] < 0 || bwd[i] < 0) return false;
    return true;
}

/// Period of an irreducible chain: gcd of level(x) + 1 - level(y) over edges.
inline long chain_period(const DiscreteModel &model) {
    auto level = detail::bfs_levels(model.p, 0, false);
    long g = 0;
    for (Eigen::Index x = 0; x < model.p.outerSize(); ++x)
        for (SparseRowMatrix::InnerIterator it(model.p, x); it; ++it)
            if (it.value() > 0.0 && level[x] >= 0 && level[it.col()] >= 0)
                g = std::gcd(g, std::abs(level[x] + 1 - level[it.col()]));
    return g;
}

inline bool is_aperiodic(const DiscreteModel &model) { return chain_period(model) == 1; }

struct ErgodicOptions {
    /// Irreducibility alone fixes m and the rate; aperiodicity is what makes
    /// the long-run stationary run converge in distribution.
    bool require_aperiodic = true;
};

/// Invariant probability m with m P = m.
inline std::vector<double> invariant_measure(const DiscreteModel &model, const ErgodicOptions &opt = {}) {
    const auto n = static_cast<Eigen::Index>(model.node_count());
    if (!is_strongly_connected(model)) throw ValidationError("chain is not irreducible");
    if (opt.require_aperiodic && !is_aperiodic(model))
        throw ValidationError("chain is periodic with period " + std::to_string(chain_period(model)));

    // (I - P)^T m = 0 with the last equation replaced by sum m = 1.
    std::vector<Eigen::Triplet<double>> trips;
    for (Eigen::Index x = 0; x < n; ++x) {
        if (x != n - 1) trips.emplace_back(x, x, 1.0);
        for (SparseRowMatrix::InnerIterator it(model.p, x); it; ++it)
            if (it.col() != n - 1) trips.emplace_back(it.col(), x, -it.value());
    }
    for (Eigen::Index x = 0; x < n; ++x) trips.emplace_back(n - 1, x, 1.0);
    Eigen::SparseMatrix<double> a(n, n);
    a.setFromTriplets(trips.begin(), trips.end());
    a.makeCompressed();
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
    rhs[n - 1] = 1.0;

    auto residual = [&](const std::vector<double> &m) {
        double r = 0.0;
        std::vector<double> mp(static_cast<std::size_t>(n), 0.0);
        for (Eigen::Index x = 0; x < n; ++x)
            for (SparseRowMatrix::InnerIterator it(model.p, x); it; ++it) mp[it.col()] += m[x] * it.value();
        for (Eigen::Index x = 0; x < n; ++x) r = std::max(r, std::abs(mp[x] - m[x]));
        return r;
    };

    std::vector<double> m(static_cast<std::size_t>(n), 0.0);
    Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
    lu.compute(a);
    if (lu.info() == Eigen::Success) {
        Eigen::VectorXd v = lu.solve(rhs);
        for (Eigen::Index x = 0; x < n; ++x) m[x] = std::max(0.0, v[x]);
        double s = std::accumulate(m.begin(), m.end(), 0.0);
        for (double &v2 : m) v2 /= s;
        if (residual(m) <= tol::residual) return m;
    }
    // Fallback: power iteration on the lazy chain (P + I) / 2.
    std::fill(m.begin(), m.end(), 1.0 / static_cast<double>(n));
    for (int iter = 0; iter < 1000000; ++iter) {
        std::vector<double> next(m.size(), 0.0);
        for (Eigen::Index x = 0; x < n; ++x) {
            next[x] += 0.5 * m[x];
            for (SparseRowMatrix::InnerIterator it(model.p, x); it; ++it) next[it.col()] += 0.5 * m[x] * it.value();
        }
        double diff = 0.0;
        for (std::size_t i = 0; i < m.size(); ++i) diff = std::max(diff, std::abs(next[i] - m[i]));
        m.swap(next);
        if (diff < 1e-15 && residual(m) <= tol::residual) return m;
    }
    throw NumericalError("invariant measure did not converge");
}

/// Time-reversed chain p-(y|x) = m(y) p(x|y) / m(x).
inline DiscreteModel reversed_chain(const DiscreteModel &model, const std::vector<double> &m) {
    const auto n = static_cast<Eigen::Index>(model.node_count());
    std::vector<Eigen::Triplet<double>> trips;
    for (Eigen::Index y = 0; y < n; ++y)
        for (SparseRowMatrix::InnerIterator it(model.p, y); it; ++it)
            trips.emplace_back(it.col(), y, m[y] * it.value() / m[it.col()]);
    DiscreteModel r;
    r.p.resize(n, n);
    r.p.setFromTriplets(trips.begin(), trips.end());
    r.p.makeCompressed();
    r.kappa = model.kappa;
    r.origin = model.origin;
    return r;
}

/// Backward committor: probability that the stationary chain last came from A rather than B.
inline std::vector<double> backward_committor(const DiscreteModel &model, const std::vector<double> &m,
                                              const ProblemSets &sets) {
    return harmonic_solve(reversed_chain(model, m).p, sets.b(), sets.a());
}

/// Detailed balance m(x) p(y|x) = m(y) p(x|y) within `tolerance`.
inline bool is_reversible(const DiscreteModel &model, const std::vector<double> &m, double tolerance = 1e-12) {
    for (Eigen::Index x = 0; x < model.p.outerSize(); ++x)
        for (SparseRowMatrix::InnerIterator it(model.p, x); it; ++it)
            if (std::abs(m[x] * it.value() - m[it.col()] * model.p.coeff(it.col(), x)) > tolerance) return false;
    return true;
}

/// The four equivalent expressions for the stationary A -> B transition
/// probability per step.
inline std::array<double, 4> normalization_z(const DiscreteModel &model, const std::vector<double> &m,
                                             const std::vector<double> &q, const std::vector<double> &q_minus,
                                             const ProblemSets &sets) {
    std::array<double, 4> z{0.0, 0.0, 0.0, 0.0};
    for (Eigen::Index y = 0; y < model.p.outerSize(); ++y)
        for (SparseRowMatrix::InnerIterator it(model.p, y); it; ++it) {
            const auto x = static_cast<NodeId>(it.col());
            const double w = m[y] * it.value();
            if (sets.a().contains(x)) z[0] += w * (1.0 - q_minus[y]);
            if (sets.b().contains(x)) z[1] += w * q_minus[y];
            if (sets.a().contains(static_cast<NodeId>(y))) z[2] += w * q[x];
            if (sets.b().contains(static_cast<NodeId>(y))) z[3] += w * (1.0 - q[x]);
        }
    return z;
}

struct ErgodicEnsemble {
    std::vector<double> m;
    std::vector<double> q;
    std::vector<double> q_minus;
    std::array<double, 4> z;
    double z_spread;                      ///< max |Z_i - Z_j|
    std::vector<double> mu_eq;            ///< equilibrium start distribution on A
    std::vector<double> theta;            ///< closed form on B^c, zero on B
    std::vector<double> theta_bar;        ///< closed form
    std::vector<double> mu_r;             ///< closed form
    std::optional<double> rate;           ///< k_AB, needs kappa
    std::optional<std::vector<double>> pi; ///< continuous-time stationary law
    bool reversible;
};

/// Closed-form statistics for the ergodic embedding.
inline ErgodicEnsemble ergodic_ensemble(const DiscreteModel &model, const ProblemSets &sets,
                                        const ErgodicOptions &opt = {}) {
    const std::size_t n = model.node_count();
    ErgodicEnsemble e;
    e.m = invariant_measure(model, opt);
    e.q = solve_committor(model, sets);
    e.q_minus = backward_committor(model, e.m, sets);
    e.z = normalization_z(model, e.m, e.q, e.q_minus, sets);
    e.z_spread = 0.0;
    for (double a : e.z)
        for (double b : e.z) e.z_spread = std::max(e.z_spread, std::abs(a - b));
    if (e.z_spread > tol::residual)
        throw NumericalError("normalization expressions disagree by " + std::to_string(e.z_spread));
    const double z = e.z[2];
    if (!(z > 0.0)) throw NumericalError("normalization constant is zero");

    e.mu_eq.assign(n, 0.0);
    for (Eigen::Index y = 0; y < model.p.outerSize(); ++y)
        for (SparseRowMatrix::InnerIterator it(model.p, y); it; ++it)
            if (sets.a().contains(static_cast<NodeId>(it.col())))
                e.mu_eq[it.col()] += e.m[y] * (1.0 - e.q_minus[y]) * it.value() / z;
    double s = 0.0;
    for (double v : e.mu_eq) s += v;
    for (double &v : e.mu_eq) v /= s; // removes roundoff so the sets validate

    e.theta.assign(n, 0.0);
    e.theta_bar.assign(n, 0.0);
    e.mu_r.assign(n, 0.0);
    for (std::size_t x = 0; x < n; ++x) {
        const auto id = static_cast<NodeId>(x);
        if (sets.b().contains(id)) continue;
        e.theta[x] = e.m[x] * e.q_minus[x] / z;
        e.theta_bar[x] = e.theta[x] * (1.0 - e.q[x]);
        if (sets.a().contains(id)) e.mu_r[x] = e.m[x] * model.expect_next(id, e.q) / z;
    }
    if (model.has_kappa()) {
        double mk = 0.0;
        for (std::size_t x = 0; x < n; ++x) mk += e.m[x] * (*model.kappa)[x];
        e.rate = z / mk;
        std::vector<double> pi(n);
        for (std::size_t x = 0; x < n; ++x) pi[x] = e.m[x] * (*model.kappa)[x] / mk;
        e.pi = std::move(pi);
    }
    e.reversible = is_reversible(model, e.m);
    return e;
}

/// Largest entrywise gap between closed forms and the generic pipeline run
/// with mu = mu_eq (theta and theta_bar on B^c, mu_r on A).
inline double ergodic_cross_check(const ErgodicEnsemble &e, const EnsembleStats &s, const ProblemSets &sets) {
    double d = 0.0;
    for (NodeId x : sets.b().complement()) {
        d = std::max(d, std::abs(e.theta[x] - s.theta[x]));
        d = std::max(d, std::abs(e.theta_bar[x] - s.segments.theta_bar[x]));
    }
    for (NodeId x : sets.a()) d = std::max(d, std::abs(e.mu_r[x] - s.segments.mu_r[x]));
    return d;
}

} // namespace fpp
