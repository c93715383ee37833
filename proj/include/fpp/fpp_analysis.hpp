#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "graph_model.hpp"
#include "linear_solve.hpp"

namespace fpp {

/// Solves sum_y p(y|x) u(y) = u(x) on (zero u one)^c with u = 0 on `zero`
/// and u = 1 on `one`.
inline std::vector<double> harmonic_solve(const SparseRowMatrix &p, const NodeSet &zero, const NodeSet &one) {
    const std::size_t n = static_cast<std::size_t>(p.rows());
    const NodeSet free = zero.united(one).complement();
    RestrictedSystem sys(p, free);
    std::vector<double> rhs(n, 0.0);
    for (NodeId x : free)
        for (SparseRowMatrix::InnerIterator it(p, x); it; ++it)
            if (one.contains(static_cast<NodeId>(it.col()))) rhs[x] += it.value();
    std::vector<double> u = sys.solve(rhs);
    for (NodeId x : one) u[x] = 1.0;
    for (NodeId x : zero) u[x] = 0.0;
    for (double &v : u) v = std::clamp(v, 0.0, 1.0);
    for (NodeId x : free) {
        double r = -u[x];
        for (SparseRowMatrix::InnerIterator it(p, x); it; ++it) r += it.value() * u[it.col()];
        if (std::abs(r) > tol::residual)
            throw NumericalError("harmonic residual " + std::to_string(r) + " at node " + std::to_string(x));
    }
    return u;
}

/// Forward committor q(x) = P(tau_B < tau_A).
inline std::vector<double> solve_committor(const DiscreteModel &model, const ProblemSets &sets) {
    return harmonic_solve(model.p, sets.a(), sets.b());
}

/// I - p restricted to B^c; shared by the mfpt, visit-count and last-exit solves.
inline RestrictedSystem absorbing_system(const DiscreteModel &model, const ProblemSets &sets) {
    return RestrictedSystem(model.p, sets.b().complement());
}

inline void require_b_reachable(const DiscreteModel &model, const ProblemSets &sets) {
    const NodeSet reach = reachable_to_set(model, sets.b(), NodeSet(model.node_count()));
    std::vector<NodeId> bad;
    for (NodeId x : sets.b().complement())
        if (!reach.contains(x)) bad.push_back(x);
    if (!bad.empty()) throw ValidationError("mfpt undefined: B is unreachable from nodes " + join_ids(bad));
}

/// Mean first hitting time of B.
inline std::vector<double> solve_mfpt(const DiscreteModel &model, const ProblemSets &sets,
                                      const RestrictedSystem &sys) {
    require_b_reachable(model, sets);
    std::vector<double> ones(model.node_count(), 0.0);
    for (NodeId x : sys.subset()) ones[x] = 1.0;
    return sys.solve(ones);
}

inline std::vector<double> solve_mfpt(const DiscreteModel &model, const ProblemSets &sets) {
    require_b_reachable(model, sets);
    return solve_mfpt(model, sets, absorbing_system(model, sets));
}

/// Expected visits theta(x) of the first passage path started from mu.
inline std::vector<double> solve_theta(const DiscreteModel &model, const ProblemSets &sets,
                                       const RestrictedSystem &sys) {
    std::vector<double> theta = sys.solve_transposed(sets.mu());
    const NodeSet &b = sets.b();
    std::vector<double> into_b(model.node_count(), 0.0);
    for (NodeId y : sys.subset())
        for (SparseRowMatrix::InnerIterator it(model.p, y); it; ++it)
            if (b.contains(static_cast<NodeId>(it.col()))) into_b[it.col()] += theta[y] * it.value();
    double mass = 0.0;
    for (NodeId x : b) theta[x] = into_b[x], mass += into_b[x];
    if (std::abs(mass - 1.0) > tol::residual)
        throw NumericalError("theta mass on B is " + std::to_string(mass) + ", expected 1");
    return theta;
}

inline std::vector<double> solve_theta(const DiscreteModel &model, const ProblemSets &sets) {
    return solve_theta(model, sets, absorbing_system(model, sets));
}

struct SegmentStats {
    std::vector<double> theta_bar;       ///< nonreactive visits, end node included
    std::vector<double> theta_bar_prime; ///< nonreactive visits, end node excluded
    std::vector<double> theta_tilde;     ///< reactive visits
    std::vector<double> mu_r;            ///< last-exit distribution on A
};

inline SegmentStats segment_stats(const DiscreteModel &model, const ProblemSets &sets, const std::vector<double> &q,
                                  const std::vector<double> &theta) {
    const std::size_t n = model.node_count();
    SegmentStats s{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0), std::vector<double>(n, 0.0),
                   std::vector<double>(n, 0.0)};
    for (std::size_t x = 0; x < n; ++x) s.theta_bar[x] = theta[x] * (1.0 - q[x]);
    double mass = 0.0;
    for (NodeId x : sets.a()) {
        s.mu_r[x] = s.theta_bar[x] * model.expect_next(x, q);
        mass += s.mu_r[x];
    }
    if (std::abs(mass - 1.0) > tol::residual)
        throw NumericalError("last-exit distribution sums to " + std::to_string(mass));
    for (std::size_t x = 0; x < n; ++x) {
        s.theta_bar_prime[x] = s.theta_bar[x] - s.mu_r[x];
        s.theta_tilde[x] = sets.b().contains(static_cast<NodeId>(x)) ? theta[x] : theta[x] * q[x] + s.mu_r[x];
    }
    return s;
}

/// Transition matrices of the nonreactive chain (on V- plus an end node with
/// index node_count) and the reactive chain (on V+ u B).
struct SegmentChains {
    SparseRowMatrix p_bar;
    SparseRowMatrix p_tilde;
    NodeId end_node;
};

inline SegmentChains segment_chains(const DiscreteModel &model, const ProblemSets &sets, const std::vector<double> &q,
                                    const SupportSets &support) {
    const auto n = static_cast<NodeId>(model.node_count());
    std::vector<Eigen::Triplet<double>> bar, tilde;
    for (NodeId y : support.v_minus) {
        const double denom = 1.0 - q[y];
        if (denom < tol::denominator) throw NumericalError("nonreactive chain row " + std::to_string(y) + " degenerate");
        for (SparseRowMatrix::InnerIterator it(model.p, y); it; ++it) {
            const auto x = static_cast<NodeId>(it.col());
            if (support.v_minus.contains(x) && it.value() > 0.0)
                bar.emplace_back(y, x, it.value() * (1.0 - q[x]) / denom);
        }
        if (sets.a().contains(y)) {
            const double exit = model.expect_next(y, q);
            if (exit > 0.0) bar.emplace_back(y, n, exit);
        }
    }
    bar.emplace_back(n, n, 1.0);
    for (NodeId y : support.v_plus) {
        const double denom = sets.a().contains(y) ? model.expect_next(y, q) : q[y];
        if (denom < tol::denominator) throw NumericalError("reactive chain row " + std::to_string(y) + " degenerate");
        for (SparseRowMatrix::InnerIterator it(model.p, y); it; ++it) {
            const auto x = static_cast<NodeId>(it.col());
            if (q[x] > 0.0 && it.value() > 0.0 && (support.v_plus.contains(x) || sets.b().contains(x)))
                tilde.emplace_back(y, x, it.value() * q[x] / denom);
        }
    }
    for (NodeId y : sets.b()) tilde.emplace_back(y, y, 1.0);

    SegmentChains c{SparseRowMatrix(n + 1, n + 1), SparseRowMatrix(n, n), n};
    c.p_bar.setFromTriplets(bar.begin(), bar.end());
    c.p_tilde.setFromTriplets(tilde.begin(), tilde.end());
    c.p_bar.makeCompressed();
    c.p_tilde.makeCompressed();

    auto check_rows = [](const SparseRowMatrix &m, const std::vector<NodeId> &rows, const char *name) {
        for (NodeId y : rows) {
            double s = 0.0;
            for (SparseRowMatrix::InnerIterator it(m, y); it; ++it) s += it.value();
            if (std::abs(s - 1.0) > tol::row_sum)
                throw NumericalError(std::string(name) + " row " + std::to_string(y) + " sums to " + std::to_string(s));
        }
    };
    check_rows(c.p_bar, support.v_minus.members(), "nonreactive chain");
    check_rows(c.p_tilde, support.v_plus.members(), "reactive chain");
    return c;
}

/// Per-edge flux fields aligned with graph.edges().
struct FluxFields {
    std::vector<double> total;
    std::vector<double> nonreactive;
    std::vector<double> reactive;
};

inline FluxFields fluxes(const DirectedGraph &g, const DiscreteModel &model, const ProblemSets &sets,
                         const std::vector<double> &theta, const SegmentStats &seg, const SegmentChains &chains,
                         const SupportSets &support) {
    const std::size_t m = g.edge_count();
    const std::size_t n = g.node_count();
    FluxFields f{std::vector<double>(m, 0.0), std::vector<double>(m, 0.0), std::vector<double>(m, 0.0)};
    for (std::size_t e = 0; e < m; ++e) {
        const auto [x, y] = g.edge(e);
        if (sets.b().contains(x)) continue;
        f.total[e] = theta[x] * model.prob(x, y);
        if (support.v_minus.contains(x) && support.v_minus.contains(y))
            f.nonreactive[e] = seg.theta_bar[x] * chains.p_bar.coeff(x, y);
        if (support.v_plus.contains(x) && (support.v_plus.contains(y) || sets.b().contains(y)))
            f.reactive[e] = seg.theta_tilde[x] * chains.p_tilde.coeff(x, y);
    }

    double scale = 1.0;
    for (double v : theta) scale = std::max(scale, std::abs(v));
    const double bound = tol::conservation * scale;
    std::vector<double> bar_in(n, 0.0), bar_out(n, 0.0), til_in(n, 0.0), til_out(n, 0.0);
    double from_a = 0.0, into_b = 0.0;
    for (std::size_t e = 0; e < m; ++e) {
        const auto [x, y] = g.edge(e);
        bar_out[x] += f.nonreactive[e];
        bar_in[y] += f.nonreactive[e];
        til_out[x] += f.reactive[e];
        til_in[y] += f.reactive[e];
        if (sets.a().contains(x)) from_a += f.reactive[e];
        if (sets.b().contains(y)) into_b += f.reactive[e];
        if (std::abs(f.total[e] - f.nonreactive[e] - f.reactive[e]) > bound)
            throw NumericalError("flux split J = J_bar + J_tilde violated on edge " + std::to_string(e));
    }
    auto fail = [](const std::string &what, NodeId x) {
        throw NumericalError("flux conservation violated (" + what + ") at node " + std::to_string(x));
    };
    for (NodeId x : support.v_minus) {
        const double src = sets.a().contains(x) ? sets.mu()[x] : 0.0;
        if (std::abs(bar_in[x] - (seg.theta_bar[x] - src)) > bound) fail("nonreactive inflow", x);
        if (std::abs(bar_out[x] - seg.theta_bar_prime[x]) > bound) fail("nonreactive outflow", x);
    }
    for (NodeId x : support.v_plus)
        if (std::abs(til_out[x] - seg.theta_tilde[x]) > bound) fail("reactive outflow", x);
    for (std::size_t i = 0; i < n; ++i) {
        const auto y = static_cast<NodeId>(i);
        if (sets.a().contains(y) || !(support.v_plus.contains(y) || sets.b().contains(y))) continue;
        if (std::abs(til_in[y] - seg.theta_tilde[y]) > bound) fail("reactive inflow", y);
    }
    if (std::abs(from_a - 1.0) > bound || std::abs(into_b - 1.0) > bound)
        throw NumericalError("reactive flux out of A / into B is not one");
    return f;
}

/// Mean segment lengths in jumps, summed over B^c.
struct PathLengths {
    double nonreactive;   ///< sum theta_bar' = <sigma>
    double reactive;      ///< sum theta_tilde = <tau_B - sigma>
    double total;         ///< sum theta = <tau_B>
    double mean_hitting;  ///< sum_A mu f
};

inline PathLengths path_lengths(const ProblemSets &sets, const std::vector<double> &theta, const SegmentStats &seg,
                                const std::vector<double> &f) {
    PathLengths L{0.0, 0.0, 0.0, 0.0};
    for (NodeId x : sets.b().complement()) {
        L.nonreactive += seg.theta_bar_prime[x];
        L.reactive += seg.theta_tilde[x];
        L.total += theta[x];
    }
    for (NodeId x : sets.a()) L.mean_hitting += sets.mu()[x] * f[x];
    const double bound = tol::conservation * std::max(1.0, L.total);
    if (std::abs(L.mean_hitting - L.total) > bound || std::abs(L.total - L.nonreactive - L.reactive) > bound)
        throw NumericalError("path length identity sum mu f = L_bar + L_tilde violated");
    return L;
}

/// Mean clock time spent per node by each ensemble.
///
/// With destination-independent holding times T_bar = kappa theta_bar' and
/// T_tilde = kappa theta_tilde. When the model carries per-jump holding times
/// (competing clocks without proportional hazards) the time at x is tied to
/// the edge that fires, so each jump is weighted by its own conditioned mean:
/// T_bar(x) = sum_y J_bar(x, y) t(x, y), likewise for T_tilde. T = kappa theta
/// holds in both cases.
struct TimeStats {
    std::vector<double> nonreactive; ///< T_bar on V-
    std::vector<double> reactive;    ///< T_tilde on V+
    std::vector<double> total;       ///< T = kappa theta on B^c
    double nonreactive_sum = 0.0;    ///< <t_sigma>
    double reactive_sum = 0.0;       ///< <t_tau_B - t_sigma>
    double total_sum = 0.0;          ///< <t_tau_B>
    bool jump_weighted = false;      ///< split used per-jump holding times
};

/// `g` and `flux` are needed only when the model has per-jump holding times.
inline TimeStats time_stats(const DiscreteModel &model, const ProblemSets &sets, const std::vector<double> &theta,
                            const SegmentStats &seg, const SupportSets &support, const DirectedGraph *g = nullptr,
                            const FluxFields *flux = nullptr) {
    if (!model.has_kappa()) throw ValidationError("time statistics require a continuous-time model");
    if (model.jump_time && !(g && flux))
        throw ValidationError("per-jump holding times need the graph and flux fields");
    const auto &kappa = *model.kappa;
    const std::size_t n = model.node_count();
    TimeStats t{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
    for (NodeId x : sets.b().complement()) {
        if (!std::isfinite(kappa[x])) {
            if (theta[x] == 0.0) continue;
            throw ValidationError("mean holding time undefined at visited node " + std::to_string(x));
        }
        if (!model.jump_time) {
            if (support.v_minus.contains(x)) t.nonreactive[x] = kappa[x] * seg.theta_bar_prime[x];
            if (support.v_plus.contains(x)) t.reactive[x] = kappa[x] * seg.theta_tilde[x];
        }
        t.total[x] = kappa[x] * theta[x];
    }
    if (model.jump_time) {
        t.jump_weighted = true;
        for (std::size_t e = 0; e < g->edge_count(); ++e) {
            const auto [x, y] = g->edge(e);
            if (sets.b().contains(x) || !std::isfinite(kappa[x])) continue;
            const double w = model.jump_time->coeff(x, y);
            t.nonreactive[x] += flux->nonreactive[e] * w;
            t.reactive[x] += flux->reactive[e] * w;
        }
        double scale = 1.0;
        for (double v : t.total) scale = std::max(scale, std::abs(v));
        for (NodeId x : sets.b().complement())
            if (std::abs(t.nonreactive[x] + t.reactive[x] - t.total[x]) > tol::conservation * scale)
                throw NumericalError("time split T = T_bar + T_tilde violated at node " + std::to_string(x));
    }
    for (NodeId x : sets.b().complement()) {
        t.nonreactive_sum += t.nonreactive[x];
        t.reactive_sum += t.reactive[x];
        t.total_sum += t.total[x];
    }
    return t;
}

/// Last-exit distribution via omega(x, y) = P(x_sigma = y | x_0 = x).
inline std::vector<double> mu_r_via_omega(const DiscreteModel &model, const ProblemSets &sets,
                                          const std::vector<double> &q, const RestrictedSystem &sys) {
    std::vector<double> mu_r(model.node_count(), 0.0);
    // One solve per A-node; columns are independent.
    for (NodeId y : sets.a()) {
        std::vector<double> rhs(model.node_count(), 0.0);
        rhs[y] = model.expect_next(y, q);
        const std::vector<double> omega = sys.solve(rhs);
        double v = 0.0;
        for (NodeId x : sets.a()) v += sets.mu()[x] * omega[x];
        mu_r[y] = v;
    }
    return mu_r;
}

inline std::vector<double> mu_r_via_omega(const DiscreteModel &model, const ProblemSets &sets,
                                          const std::vector<double> &q) {
    return mu_r_via_omega(model, sets, q, absorbing_system(model, sets));
}

/// Everything Algorithm-style analysis produces for one (model, A, B, mu).
struct EnsembleStats {
    std::vector<double> q;
    std::vector<double> f;
    std::vector<double> theta;
    SegmentStats segments;
    SupportSets support;
    SegmentChains chains;
    FluxFields flux;
    PathLengths lengths;
    std::optional<TimeStats> times;
    ValidationReport validation;
};

/// Full pipeline: validate, committor and visit counts, segment statistics,
/// segment chains, fluxes, path lengths and (when kappa is present) times.
inline EnsembleStats analyze(const DirectedGraph &g, const DiscreteModel &model, const ProblemSets &sets) {
    ValidationReport report = validate_assumption_1(g, model, sets);
    if (!report.ok) throw ValidationError(report.describe());
    auto q = solve_committor(model, sets);
    const RestrictedSystem sys = absorbing_system(model, sets);
    auto theta = solve_theta(model, sets, sys);
    auto f = solve_mfpt(model, sets, sys);
    auto seg = segment_stats(model, sets, q, theta);
    auto support = v_minus_v_plus(model, sets, q);
    auto chains = segment_chains(model, sets, q, support);
    auto flux = fluxes(g, model, sets, theta, seg, chains, support);
    auto lengths = path_lengths(sets, theta, seg, f);
    std::optional<TimeStats> times;
    if (model.has_kappa()) times = time_stats(model, sets, theta, seg, support, &g, &flux);
    return EnsembleStats{std::move(q),      std::move(f),     std::move(theta),   std::move(seg),
                         std::move(support), std::move(chains), std::move(flux), lengths,
                         std::move(times),  std::move(report)};
}

/// Named maximum deviation of one identity.
struct IdentityCheck {
    std::string name;
    double deviation;
};

/// Re-derives the ensemble identities from an EnsembleStats and reports the
/// largest violation of each. Used for self-checks and acceptance runs.
inline std::vector<IdentityCheck> verify_identities(const DirectedGraph &g, const DiscreteModel &model,
                                                    const ProblemSets &sets, const EnsembleStats &s) {
    const std::size_t n = model.node_count();
    const auto &seg = s.segments;
    std::vector<IdentityCheck> out;
    auto add = [&](std::string name, double d) { out.push_back({std::move(name), d}); };

    double d = 0.0;
    for (std::size_t x = 0; x < n; ++x) d = std::max({d, -s.q[x], s.q[x] - 1.0});
    for (NodeId x : sets.a()) d = std::max(d, std::abs(s.q[x]));
    for (NodeId x : sets.b()) d = std::max(d, std::abs(s.q[x] - 1.0));
    add("committor bounds and boundary values", d);

    d = 0.0;
    for (NodeId x : sets.interior()) d = std::max(d, std::abs(model.expect_next(x, s.q) - s.q[x]));
    add("committor harmonic residual", d);

    double sb = 0.0, sbt = 0.0, sa = 0.0;
    for (NodeId x : sets.b()) sb += s.theta[x], sbt += seg.theta_tilde[x];
    for (NodeId x : sets.a()) sa += seg.mu_r[x];
    add("sum_B theta = 1", std::abs(sb - 1.0));
    add("sum_B theta_tilde = 1", std::abs(sbt - 1.0));
    add("sum_A mu_r = 1", std::abs(sa - 1.0));

    double d1 = 0.0, d2 = 0.0;
    for (std::size_t x = 0; x < n; ++x) {
        d1 = std::max(d1, std::abs(seg.theta_bar[x] - s.theta[x] * (1.0 - s.q[x])));
        if (!sets.b().contains(static_cast<NodeId>(x)))
            d2 = std::max(d2, std::abs(s.theta[x] - seg.theta_bar_prime[x] - seg.theta_tilde[x]));
    }
    add("theta_bar = theta (1 - q)", d1);
    add("theta = theta_bar' + theta_tilde", d2);

    d = 0.0;
    for (std::size_t e = 0; e < g.edge_count(); ++e)
        d = std::max(d, std::abs(s.flux.total[e] - s.flux.nonreactive[e] - s.flux.reactive[e]));
    add("J = J_bar + J_tilde", d);

    // theta_bar(x) = mu(x) 1_A(x) + sum_y theta_bar(y) p_bar(x|y) on V-
    std::vector<double> push_bar(n + 1, 0.0), push_til(n, 0.0);
    for (NodeId y : s.support.v_minus)
        for (SparseRowMatrix::InnerIterator it(s.chains.p_bar, y); it; ++it) push_bar[it.col()] += seg.theta_bar[y] * it.value();
    for (NodeId y : s.support.v_plus)
        for (SparseRowMatrix::InnerIterator it(s.chains.p_tilde, y); it; ++it) push_til[it.col()] += seg.theta_tilde[y] * it.value();
    d = 0.0;
    for (NodeId x : s.support.v_minus)
        d = std::max(d, std::abs(seg.theta_bar[x] - sets.mu()[x] - push_bar[x]));
    add("nonreactive visit equation", d);
    d = 0.0;
    for (std::size_t x = 0; x < n; ++x)
        if (!sets.a().contains(static_cast<NodeId>(x))) d = std::max(d, std::abs(seg.theta_tilde[x] - push_til[x]));
    add("reactive visit equation", d);

    // sum_A theta_bar(x) sum_z p(z|x) q(z) = 1
    double exit = 0.0;
    for (NodeId x : sets.a()) exit += seg.theta_bar[x] * model.expect_next(x, s.q);
    add("sum_A theta_bar * exit probability = 1", std::abs(exit - 1.0));

    std::vector<double> bar_in(n, 0.0), bar_out(n, 0.0), til_in(n, 0.0), til_out(n, 0.0);
    double from_a = 0.0, into_b = 0.0;
    for (std::size_t e = 0; e < g.edge_count(); ++e) {
        const auto [x, y] = g.edge(e);
        bar_out[x] += s.flux.nonreactive[e];
        bar_in[y] += s.flux.nonreactive[e];
        til_out[x] += s.flux.reactive[e];
        til_in[y] += s.flux.reactive[e];
        if (sets.a().contains(x)) from_a += s.flux.reactive[e];
        if (sets.b().contains(y)) into_b += s.flux.reactive[e];
    }
    d = 0.0;
    for (NodeId x : s.support.v_minus) {
        d = std::max(d, std::abs(bar_in[x] - (seg.theta_bar[x] - sets.mu()[x])));
        d = std::max(d, std::abs(bar_out[x] - seg.theta_bar_prime[x]));
    }
    add("nonreactive flux conservation", d);
    d = std::max(std::abs(from_a - 1.0), std::abs(into_b - 1.0));
    for (NodeId x : s.support.v_plus) d = std::max(d, std::abs(til_out[x] - seg.theta_tilde[x]));
    for (std::size_t i = 0; i < n; ++i) {
        const auto y = static_cast<NodeId>(i);
        if (!sets.a().contains(y) && (s.support.v_plus.contains(y) || sets.b().contains(y)))
            d = std::max(d, std::abs(til_in[y] - seg.theta_tilde[y]));
    }
    add("reactive flux conservation", d);

    double mf = 0.0, tb = 0.0;
    for (NodeId x : sets.a()) mf += sets.mu()[x] * s.f[x];
    for (NodeId x : sets.b().complement()) tb += s.theta[x];
    add("sum mu f = sum_{B^c} theta", std::abs(mf - tb));

    if (s.times) {
        d = std::abs(s.times->nonreactive_sum + s.times->reactive_sum - s.times->total_sum);
        for (NodeId x : sets.b().complement())
            d = std::max(d, std::abs(s.times->nonreactive[x] + s.times->reactive[x] - s.times->total[x]));
        add("T = T_bar + T_tilde", d);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Ranking

struct Ranking {
    std::string metric;
    std::vector<std::size_t> order; ///< node ids or edge indices, best first
    std::vector<double> value;      ///< metric value per entry of order
};

struct RankReport {
    std::vector<Ranking> nodes;
    std::vector<Ranking> edges;
};

/// Indices sorted by value descending; ties by ascending index.
inline std::vector<std::size_t> rank_descending(const std::vector<double> &values, std::size_t top_k) {
    std::vector<std::size_t> idx(values.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
    if (idx.size() > top_k) idx.resize(top_k);
    return idx;
}

inline RankReport rank_report(const EnsembleStats &s, std::size_t top_k) {
    RankReport r;
    auto add = [top_k](std::vector<Ranking> &into, std::string name, const std::vector<double> &v) {
        Ranking k{std::move(name), rank_descending(v, top_k), {}};
        for (std::size_t i : k.order) k.value.push_back(v[i]);
        into.push_back(std::move(k));
    };
    add(r.nodes, "q", s.q);
    add(r.nodes, "theta", s.theta);
    add(r.nodes, "theta_bar_prime", s.segments.theta_bar_prime);
    add(r.nodes, "theta_tilde", s.segments.theta_tilde);
    if (s.times) {
        add(r.nodes, "T", s.times->total);
        add(r.nodes, "T_bar", s.times->nonreactive);
        add(r.nodes, "T_tilde", s.times->reactive);
    }
    add(r.edges, "J", s.flux.total);
    add(r.edges, "J_bar", s.flux.nonreactive);
    add(r.edges, "J_tilde", s.flux.reactive);
    return r;
}

} // namespace fpp
