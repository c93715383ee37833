#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "graph_model.hpp"
#include "rng.hpp"

namespace fpp {

// ---------------------------------------------------------------------------
// Laws

struct Exponential {
    double rate;
};

struct Weibull {
    double shape;
    double rate;
};

/// psi(t) = alpha (1 + t)^-(alpha + 1)
struct PowerLaw {
    double exponent;
};

/// Piecewise-linear density through (t_i, psi_i), zero past the last knot.
/// Stored normalized so the trapezoid integral is exactly one.
struct Tabulated {
    std::vector<double> t;
    std::vector<double> psi;
    std::vector<double> cumulative; ///< integral of psi over [0, t_i]
};

using WaitingTimeLaw = std::variant<Exponential, Weibull, PowerLaw, Tabulated>;

inline WaitingTimeLaw exponential_law(double rate) {
    if (!(rate > 0.0) || !std::isfinite(rate)) throw ValidationError("exponential rate must be positive");
    return Exponential{rate};
}

inline WaitingTimeLaw weibull_law(double shape, double rate) {
    if (!(shape > 0.0) || !std::isfinite(shape)) throw ValidationError("Weibull shape must be positive");
    if (!(rate > 0.0) || !std::isfinite(rate)) throw ValidationError("Weibull rate must be positive");
    return Weibull{shape, rate};
}

inline WaitingTimeLaw power_law(double exponent) {
    if (!(exponent > 1.0) || !std::isfinite(exponent)) throw ValidationError("power-law exponent must exceed 1");
    return PowerLaw{exponent};
}

inline WaitingTimeLaw tabulated_law(std::vector<double> t, std::vector<double> psi) {
    if (t.size() != psi.size()) throw ValidationError("tabulated law: t and psi differ in length");
    if (t.size() < 2) throw ValidationError("tabulated law needs at least two knots");
    if (t.front() != 0.0) throw ValidationError("tabulated law must start at t = 0");
    for (std::size_t i = 1; i < t.size(); ++i)
        if (!(t[i] > t[i - 1])) throw ValidationError("tabulated law: t must be strictly increasing");
    for (double v : psi)
        if (!(v >= 0.0) || !std::isfinite(v)) throw ValidationError("tabulated law: psi must be non-negative");
    std::vector<double> cum(t.size(), 0.0);
    for (std::size_t i = 1; i < t.size(); ++i) cum[i] = cum[i - 1] + 0.5 * (psi[i] + psi[i - 1]) * (t[i] - t[i - 1]);
    const double total = cum.back();
    if (std::abs(total - 1.0) > 1e-6)
        throw ValidationError("tabulated law integrates to " + std::to_string(total) + ", expected 1");
    for (double &v : psi) v /= total;
    for (double &v : cum) v /= total;
    return Tabulated{std::move(t), std::move(psi), std::move(cum)};
}

inline std::string family_name(const WaitingTimeLaw &law) {
    return std::visit(
        [](const auto &l) -> std::string {
            using L = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<L, Exponential>) return "exp";
            else if constexpr (std::is_same_v<L, Weibull>) return "weibull";
            else if constexpr (std::is_same_v<L, PowerLaw>) return "powerlaw";
            else return "table";
        },
        law);
}

namespace detail {

inline std::size_t table_segment(const Tabulated &l, double t) {
    auto it = std::upper_bound(l.t.begin(), l.t.end(), t);
    return static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, (it - l.t.begin()) - 1));
}

} // namespace detail

/// psi(t)
inline double density(const WaitingTimeLaw &law, double t) {
    if (t < 0.0 || std::isinf(t)) return 0.0;
    return std::visit(
        [t](const auto &l) -> double {
            using L = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<L, Exponential>) {
                return l.rate * std::exp(-l.rate * t);
            } else if constexpr (std::is_same_v<L, Weibull>) {
                const double s = l.rate * t;
                if (s == 0.0) {
                    if (l.shape < 1.0) return std::numeric_limits<double>::infinity();
                    return l.shape == 1.0 ? l.rate : 0.0;
                }
                const double e = std::exp(-std::pow(s, l.shape));
                return e == 0.0 ? 0.0 : l.shape * l.rate * std::pow(s, l.shape - 1.0) * e;
            } else if constexpr (std::is_same_v<L, PowerLaw>) {
                return l.exponent * std::pow(1.0 + t, -(l.exponent + 1.0));
            } else {
                if (t >= l.t.back()) return t == l.t.back() ? l.psi.back() : 0.0;
                const std::size_t i = detail::table_segment(l, t);
                const double w = (t - l.t[i]) / (l.t[i + 1] - l.t[i]);
                return l.psi[i] + w * (l.psi[i + 1] - l.psi[i]);
            }
        },
        law);
}

/// Survival integral int_t^inf psi(u) du.
inline double survival(const WaitingTimeLaw &law, double t) {
    if (t <= 0.0) return 1.0;
    return std::visit(
        [t](const auto &l) -> double {
            using L = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<L, Exponential>) {
                return std::exp(-l.rate * t);
            } else if constexpr (std::is_same_v<L, Weibull>) {
                return std::exp(-std::pow(l.rate * t, l.shape));
            } else if constexpr (std::is_same_v<L, PowerLaw>) {
                return std::pow(1.0 + t, -l.exponent);
            } else {
                if (t >= l.t.back()) return 0.0;
                const std::size_t i = detail::table_segment(l, t);
                const double h = l.t[i + 1] - l.t[i];
                const double d = t - l.t[i];
                const double slope = (l.psi[i + 1] - l.psi[i]) / h;
                const double c = l.cumulative[i] + l.psi[i] * d + 0.5 * slope * d * d;
                return std::clamp(1.0 - c, 0.0, 1.0);
            }
        },
        law);
}

/// Draws a waiting time by inverting the survival function at u in (0, 1].
inline double invert_survival(const WaitingTimeLaw &law, double u) {
    return std::visit(
        [u](const auto &l) -> double {
            using L = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<L, Exponential>) {
                return -std::log(u) / l.rate;
            } else if constexpr (std::is_same_v<L, Weibull>) {
                return std::pow(-std::log(u), 1.0 / l.shape) / l.rate;
            } else if constexpr (std::is_same_v<L, PowerLaw>) {
                return std::pow(u, -1.0 / l.exponent) - 1.0;
            } else {
                // Solve cumulative(t) = 1 - u within the bracketing segment.
                const double c = 1.0 - u;
                auto it = std::upper_bound(l.cumulative.begin(), l.cumulative.end(), c);
                if (it == l.cumulative.end()) return l.t.back();
                std::size_t i = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, (it - l.cumulative.begin()) - 1));
                const double h = l.t[i + 1] - l.t[i];
                const double slope = (l.psi[i + 1] - l.psi[i]) / h;
                const double r = c - l.cumulative[i];
                double d;
                if (std::abs(slope) < 1e-300) {
                    d = l.psi[i] > 0.0 ? r / l.psi[i] : 0.0;
                } else {
                    // 0.5 slope d^2 + psi_i d - r = 0, stable root
                    const double disc = std::max(0.0, l.psi[i] * l.psi[i] + 2.0 * slope * r);
                    d = 2.0 * r / (l.psi[i] + std::sqrt(disc));
                }
                return l.t[i] + std::clamp(d, 0.0, h);
            }
        },
        law);
}

// ---------------------------------------------------------------------------
// Per-node quantities. `out` holds the laws on the out-edges of one node.

/// a(t|x): probability of still waiting at x after time t.
inline double survival_a(std::span<const WaitingTimeLaw> out, double t) {
    if (out.empty()) throw ValidationError("no out-edges");
    double a = 1.0;
    for (const auto &law : out) a *= survival(law, t);
    return a;
}

/// b(t, x->y_j): density of leaving x along out-edge j at time t.
inline double jump_density_b(std::span<const WaitingTimeLaw> out, std::size_t j, double t) {
    if (j >= out.size()) throw ValidationError("out-edge index out of range");
    double b = density(out[j], t);
    if (b == 0.0) return 0.0;
    for (std::size_t z = 0; z < out.size(); ++z)
        if (z != j) b *= survival(out[z], t);
    return b;
}

struct NodeEmbedding {
    std::vector<double> p; ///< jump probabilities per out-edge
    double kappa;          ///< mean holding time
    /// Mean holding time given the jump leaves through out-edge j. Empty when
    /// it equals kappa for every j (proportional hazards).
    std::vector<double> jump_time = {};
};

/// Closed forms for nodes whose out-edges share one family (and one Weibull
/// shape). Returns nullopt when the laws are mixed or tabulated.
inline std::optional<NodeEmbedding> embed_node_closed_form(std::span<const WaitingTimeLaw> out) {
    if (out.empty()) throw ValidationError("no out-edges");
    NodeEmbedding e{std::vector<double>(out.size()), 0.0};
    if (std::all_of(out.begin(), out.end(), [](const auto &l) { return std::holds_alternative<Exponential>(l); })) {
        double total = 0.0;
        for (const auto &l : out) total += std::get<Exponential>(l).rate;
        for (std::size_t j = 0; j < out.size(); ++j) e.p[j] = std::get<Exponential>(out[j]).rate / total;
        e.kappa = 1.0 / total;
        return e;
    }
    if (std::all_of(out.begin(), out.end(), [](const auto &l) { return std::holds_alternative<Weibull>(l); })) {
        const double k = std::get<Weibull>(out[0]).shape;
        if (!std::all_of(out.begin(), out.end(), [k](const auto &l) { return std::get<Weibull>(l).shape == k; }))
            return std::nullopt;
        double total = 0.0;
        for (const auto &l : out) total += std::pow(std::get<Weibull>(l).rate, k);
        for (std::size_t j = 0; j < out.size(); ++j) e.p[j] = std::pow(std::get<Weibull>(out[j]).rate, k) / total;
        e.kappa = std::tgamma(1.0 / k) / (k * std::pow(total, 1.0 / k));
        return e;
    }
    if (std::all_of(out.begin(), out.end(), [](const auto &l) { return std::holds_alternative<PowerLaw>(l); })) {
        double total = 0.0;
        for (const auto &l : out) total += std::get<PowerLaw>(l).exponent;
        if (total <= 1.0) throw NumericalError("infinite mean holding time");
        for (std::size_t j = 0; j < out.size(); ++j) e.p[j] = std::get<PowerLaw>(out[j]).exponent / total;
        e.kappa = 1.0 / (total - 1.0);
        return e;
    }
    return std::nullopt;
}

namespace detail {

/// Breakpoints for piecewise quadrature on [0, horizon]: geometric panels
/// plus the knots of every tabulated law, so panels contain no kinks.
inline std::vector<double> quadrature_breakpoints(std::span<const WaitingTimeLaw> out, double horizon) {
    std::vector<double> bp{0.0};
    for (double t = 1.0 / 64.0; t < horizon; t *= 2.0) bp.push_back(t);
    bp.push_back(horizon);
    for (const auto &l : out)
        if (const auto *tab = std::get_if<Tabulated>(&l))
            for (double t : tab->t)
                if (t > 0.0 && t < horizon) bp.push_back(t);
    std::sort(bp.begin(), bp.end());
    bp.erase(std::unique(bp.begin(), bp.end()), bp.end());
    return bp;
}

/// Smallest doubling horizon with a(T|x) below 1e-13, capped at 2^40.
inline double quadrature_horizon(std::span<const WaitingTimeLaw> out) {
    double horizon = 1.0;
    for (const auto &l : out)
        if (const auto *tab = std::get_if<Tabulated>(&l)) horizon = std::max(horizon, tab->t.back());
    while (survival_a(out, horizon) > 1e-13 && horizon < 0x1.0p40) horizon *= 2.0;
    return horizon;
}

template <typename F>
double integrate_panels(F f, const std::vector<double> &bp) {
    using boost::math::quadrature::gauss_kronrod;
    using boost::math::quadrature::tanh_sinh;
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < bp.size(); ++i) {
        const double lo = bp[i];
        const double hi = bp[i + 1];
        double err = 0.0;
        double v;
        if (i == 0) {
            // Origin panel may carry an integrable t^(k-1) singularity.
            static thread_local tanh_sinh<double> ts;
            v = ts.integrate(f, lo, hi, 1e-12, &err);
        } else {
            v = gauss_kronrod<double, 31>::integrate(f, lo, hi, 20, 1e-13, &err);
        }
        if (!std::isfinite(v)) throw NumericalError("quadrature produced a non-finite value");
        total += v;
    }
    return total;
}

template <typename F>
double integrate_tail(F f, double from) {
    if (f(from) == 0.0) return 0.0;
    static thread_local boost::math::quadrature::exp_sinh<double> es;
    try {
        double err = 0.0;
        const double v = es.integrate(f, from, std::numeric_limits<double>::infinity(), 1e-10, &err);
        if (!std::isfinite(v)) throw NumericalError("tail quadrature produced a non-finite value");
        return v;
    } catch (const std::exception &ex) {
        throw NumericalError(std::string("tail quadrature did not converge: ") + ex.what());
    }
}

} // namespace detail

/// p(y_j|x) = int b(u, x->y_j) du and kappa(x) = int a(u|x) du by adaptive
/// quadrature. Rows are renormalized when the drift is below 1e-8.
inline NodeEmbedding embed_node_quadrature(std::span<const WaitingTimeLaw> out) {
    if (out.empty()) throw ValidationError("no out-edges");
    const double horizon = detail::quadrature_horizon(out);
    const auto bp = detail::quadrature_breakpoints(out, horizon);
    NodeEmbedding e{std::vector<double>(out.size()), 0.0};
    auto a = [&](double t) { return survival_a(out, t); };
    e.kappa = detail::integrate_panels(a, bp) + detail::integrate_tail(a, horizon);
    if (!std::isfinite(e.kappa)) throw NumericalError("infinite mean holding time");
    double sum = 0.0;
    e.jump_time.assign(out.size(), e.kappa);
    double mean = 0.0;
    for (std::size_t j = 0; j < out.size(); ++j) {
        auto b = [&, j](double t) { return jump_density_b(out, j, t); };
        auto tb = [&, j](double t) {
            const double v = jump_density_b(out, j, t);
            return v == 0.0 ? 0.0 : t * v;
        };
        e.p[j] = detail::integrate_panels(b, bp) + detail::integrate_tail(b, horizon);
        sum += e.p[j];
        if (e.p[j] > 0.0) {
            const double first = detail::integrate_panels(tb, bp) + detail::integrate_tail(tb, horizon);
            e.jump_time[j] = first / e.p[j];
            mean += first;
        }
    }
    if (std::abs(sum - 1.0) > 1e-8)
        throw NumericalError("quadrature jump probabilities sum to " + std::to_string(sum) + " (drift above 1e-8)");
    for (double &v : e.p) v /= sum;
    // int t b_j summed over j is int a, so the conditioned means average to kappa.
    if (!std::isfinite(mean) || std::abs(mean - e.kappa) > 1e-7 * std::max(1.0, e.kappa))
        throw NumericalError("per-jump holding times do not average to kappa");
    mean = 0.0;
    for (std::size_t j = 0; j < out.size(); ++j) mean += e.p[j] * e.jump_time[j];
    for (double &v : e.jump_time) v *= e.kappa / mean;
    return e;
}

// ---------------------------------------------------------------------------
// Networks

/// A graph with one waiting-time law per edge (aligned with graph.edges()).
struct ContinuousNetwork {
    DirectedGraph graph;
    std::vector<WaitingTimeLaw> laws;

    ContinuousNetwork(DirectedGraph g, std::vector<WaitingTimeLaw> l) : graph(std::move(g)), laws(std::move(l)) {
        if (laws.size() != graph.edge_count()) throw ValidationError("law count does not match edge count");
    }

    std::span<const WaitingTimeLaw> out_laws(NodeId x) const {
        auto [first, last] = graph.out_range(x);
        return std::span<const WaitingTimeLaw>(laws).subspan(first, last - first);
    }

    double survival_a(NodeId x, double t) const {
        if (graph.is_sink(x)) throw ValidationError("no out-edges at node " + graph.label(x));
        return fpp::survival_a(out_laws(x), t);
    }

    double jump_density_b(NodeId x, NodeId y, double t) const {
        auto e = graph.edge_index(x, y);
        if (!e) throw ValidationError("(" + graph.label(x) + ", " + graph.label(y) + ") is not an edge");
        return fpp::jump_density_b(out_laws(x), *e - graph.out_range(x).first, t);
    }
};

struct EmbedOptions {
    bool force_quadrature = false;
};

/// Embedded jump chain p and mean holding times kappa of a continuous network.
inline DiscreteModel embed_discrete(const ContinuousNetwork &net, EmbedOptions opts = {}) {
    const DirectedGraph &g = net.graph;
    std::vector<double> prob(g.edge_count(), 0.0);
    std::vector<double> kappa(g.node_count(), std::numeric_limits<double>::quiet_NaN());
    std::vector<double> jump_time(g.edge_count(), 0.0);
    bool destination_dependent = false;
    for (std::size_t i = 0; i < g.node_count(); ++i) {
        const auto x = static_cast<NodeId>(i);
        if (g.is_sink(x)) continue;
        auto out = net.out_laws(x);
        std::optional<NodeEmbedding> e;
        if (!opts.force_quadrature) e = embed_node_closed_form(out);
        if (!e) e = embed_node_quadrature(out);
        const std::size_t first = g.out_range(x).first;
        for (std::size_t j = 0; j < out.size(); ++j) {
            prob[first + j] = e->p[j];
            jump_time[first + j] = e->jump_time.empty() ? e->kappa : e->jump_time[j];
            if (!e->jump_time.empty() && std::abs(e->jump_time[j] - e->kappa) > 1e-9 * e->kappa)
                destination_dependent = true;
        }
        kappa[i] = e->kappa;
    }
    std::optional<std::vector<double>> jt;
    if (destination_dependent) jt = std::move(jump_time);
    return make_discrete_model(g, prob, std::move(kappa), ModelOrigin::EmbeddedFromContinuous, std::move(jt));
}

/// Draws one clock per out-edge and returns the earliest (time, out-edge index).
template <typename Engine>
std::pair<double, std::size_t> sample_holding(std::span<const WaitingTimeLaw> out, Engine &eng) {
    if (out.empty()) throw ValidationError("no out-edges");
    double best = std::numeric_limits<double>::infinity();
    std::size_t choice = 0;
    for (std::size_t j = 0; j < out.size(); ++j) {
        const double t = invert_survival(out[j], uniform_open0(eng));
        if (t < best) best = t, choice = j;
    }
    return {best, choice};
}

// ---------------------------------------------------------------------------
// Arrival densities along a fixed node sequence

struct ArrivalDensities {
    double step;
    std::vector<std::vector<double>> r; ///< r[k-1][i] = r_k(i * step), k = 1..N
    std::vector<double> eta;            ///< eta(i * step)
};

/// r_1 = b_0, r_k = r_{k-1} * b_{k-1} (trapezoid convolution on a uniform
/// grid), eta = r_N * a(.|x_N). The last node may be a sink, in which case
/// eta is left empty.
inline ArrivalDensities arrival_density_rk(const ContinuousNetwork &net, const std::vector<NodeId> &sequence,
                                           double step, std::size_t intervals) {
    if (sequence.size() < 2) throw ValidationError("node sequence needs at least one jump");
    if (!(step > 0.0)) throw ValidationError("grid step must be positive");
    const std::size_t pts = intervals + 1;
    const std::size_t jumps = sequence.size() - 1;
    std::vector<std::vector<double>> b(jumps, std::vector<double>(pts));
    for (std::size_t k = 0; k < jumps; ++k) {
        const NodeId x = sequence[k];
        const NodeId y = sequence[k + 1];
        if (!net.graph.has_edge(x, y))
            throw ValidationError("(" + net.graph.label(x) + ", " + net.graph.label(y) + ") is not an edge");
        for (std::size_t i = 0; i < pts; ++i) b[k][i] = net.jump_density_b(x, y, static_cast<double>(i) * step);
    }
    auto convolve = [&](const std::vector<double> &f, const std::vector<double> &g) {
        std::vector<double> out(pts, 0.0);
        for (std::size_t i = 1; i < pts; ++i) {
            double s = 0.5 * (f[0] * g[i] + f[i] * g[0]);
            for (std::size_t j = 1; j < i; ++j) s += f[j] * g[i - j];
            out[i] = s * step;
        }
        return out;
    };
    ArrivalDensities res{step, {}, {}};
    res.r.push_back(b[0]);
    for (std::size_t k = 1; k < jumps; ++k) res.r.push_back(convolve(res.r.back(), b[k]));
    const NodeId last = sequence.back();
    if (!net.graph.is_sink(last)) {
        std::vector<double> a(pts);
        for (std::size_t i = 0; i < pts; ++i) a[i] = net.survival_a(last, static_cast<double>(i) * step);
        res.eta = convolve(res.r.back(), a);
    }
    return res;
}

/// Trapezoid integral of samples on a uniform grid.
inline double trapezoid(const std::vector<double> &f, double step) {
    if (f.size() < 2) return 0.0;
    double s = 0.5 * (f.front() + f.back());
    for (std::size_t i = 1; i + 1 < f.size(); ++i) s += f[i];
    return s * step;
}

} // namespace fpp
