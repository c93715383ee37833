#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/SparseCore>

#include "core.hpp"

namespace fpp {

struct Edge {
    NodeId from;
    NodeId to;
    friend bool operator==(const Edge &, const Edge &) = default;
    friend auto operator<=>(const Edge &, const Edge &) = default;
};

/// Immutable directed graph without self-loops or duplicate edges.
///
/// Edges are stored sorted lexicographically; the position of an edge in
/// edges() is its edge index, which keys every per-edge field (fluxes,
/// waiting-time laws). Out-neighbours are contiguous ranges of that list.
class DirectedGraph {
  public:
    DirectedGraph() = default;

    DirectedGraph(std::size_t node_count, std::vector<Edge> edges, std::vector<std::string> labels = {})
        : n_(node_count), edges_(std::move(edges)), labels_(std::move(labels)) {
        if (n_ == 0) throw ValidationError("graph must have at least one node");
        if (!labels_.empty() && labels_.size() != n_)
            throw ValidationError("label count does not match node count");
        for (const Edge &e : edges_) {
            if (e.from < 0 || e.to < 0 || static_cast<std::size_t>(e.from) >= n_ ||
                static_cast<std::size_t>(e.to) >= n_)
                throw ValidationError("edge (" + std::to_string(e.from) + "," + std::to_string(e.to) +
                                      ") references a node outside [0, node_count)");
            if (e.from == e.to) throw ValidationError("self-loop on node " + std::to_string(e.from));
        }
        std::sort(edges_.begin(), edges_.end());
        auto dup = std::adjacent_find(edges_.begin(), edges_.end());
        if (dup != edges_.end())
            throw ValidationError("duplicate edge (" + std::to_string(dup->from) + "," + std::to_string(dup->to) + ")");
        offsets_.assign(n_ + 1, 0);
        for (const Edge &e : edges_) ++offsets_[e.from + 1];
        for (std::size_t i = 0; i < n_; ++i) offsets_[i + 1] += offsets_[i];
    }

    std::size_t node_count() const { return n_; }
    std::size_t edge_count() const { return edges_.size(); }
    const std::vector<Edge> &edges() const { return edges_; }
    const Edge &edge(std::size_t i) const { return edges_[i]; }

    /// Edge indices [first, last) leaving x.
    std::pair<std::size_t, std::size_t> out_range(NodeId x) const { return {offsets_[x], offsets_[x + 1]}; }
    std::size_t out_degree(NodeId x) const { return offsets_[x + 1] - offsets_[x]; }
    bool is_sink(NodeId x) const { return out_degree(x) == 0; }

    std::optional<std::size_t> edge_index(NodeId x, NodeId y) const {
        if (x < 0 || static_cast<std::size_t>(x) >= n_) return std::nullopt;
        auto first = edges_.begin() + static_cast<std::ptrdiff_t>(offsets_[x]);
        auto last = edges_.begin() + static_cast<std::ptrdiff_t>(offsets_[x + 1]);
        auto it = std::lower_bound(first, last, Edge{x, y});
        if (it == last || it->to != y) return std::nullopt;
        return static_cast<std::size_t>(it - edges_.begin());
    }

    bool has_edge(NodeId x, NodeId y) const { return edge_index(x, y).has_value(); }

    NodeSet sinks() const {
        NodeSet s(n_);
        for (std::size_t x = 0; x < n_; ++x)
            if (is_sink(static_cast<NodeId>(x))) s.insert(static_cast<NodeId>(x));
        return s;
    }

    bool has_labels() const { return !labels_.empty(); }
    std::string label(NodeId x) const { return labels_.empty() ? std::to_string(x) : labels_[x]; }
    const std::vector<std::string> &labels() const { return labels_; }

    std::optional<NodeId> find_label(const std::string &name) const {
        for (std::size_t i = 0; i < n_; ++i)
            if (label(static_cast<NodeId>(i)) == name) return static_cast<NodeId>(i);
        return std::nullopt;
    }

  private:
    std::size_t n_ = 0;
    std::vector<Edge> edges_;
    std::vector<std::string> labels_;
    std::vector<std::size_t> offsets_;
};

enum class ModelOrigin { GivenDiscrete, EmbeddedFromContinuous, EstimatedFromData };

inline const char *to_string(ModelOrigin o) {
    switch (o) {
    case ModelOrigin::GivenDiscrete: return "given-discrete";
    case ModelOrigin::EmbeddedFromContinuous: return "embedded-from-continuous";
    case ModelOrigin::EstimatedFromData: return "estimated-from-data";
    }
    return "unknown";
}

using SparseRowMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Discrete-time jump chain p(y|x) with optional mean holding times.
///
/// Sink rows are delta rows p(x|x) = 1. kappa, when present, holds NaN on
/// nodes where the holding time is undefined (sinks, data endpoints in B).
struct DiscreteModel {
    SparseRowMatrix p;
    std::optional<std::vector<double>> kappa;
    /// Mean holding time at x given that the jump goes to y; same pattern as
    /// p. Absent when the holding time does not depend on the destination.
    std::optional<SparseRowMatrix> jump_time;
    ModelOrigin origin = ModelOrigin::GivenDiscrete;

    std::size_t node_count() const { return static_cast<std::size_t>(p.rows()); }
    bool has_kappa() const { return kappa.has_value(); }

    double prob(NodeId x, NodeId y) const { return p.coeff(x, y); }

    /// sum_z p(z|x) v(z)
    template <typename Vec>
    double expect_next(NodeId x, const Vec &v) const {
        double s = 0.0;
        for (SparseRowMatrix::InnerIterator it(p, x); it; ++it) s += it.value() * v[it.col()];
        return s;
    }
};

/// Builds a model from per-edge probabilities aligned with graph.edges().
/// Sinks get delta rows. Rows must already sum to one within tol::row_sum.
inline DiscreteModel make_discrete_model(const DirectedGraph &g, const std::vector<double> &edge_prob,
                                         std::optional<std::vector<double>> kappa = std::nullopt,
                                         ModelOrigin origin = ModelOrigin::GivenDiscrete,
                                         std::optional<std::vector<double>> edge_time = std::nullopt) {
    if (edge_prob.size() != g.edge_count()) throw ValidationError("edge probability count does not match edge count");
    if (edge_time && !kappa) throw ValidationError("per-jump holding times need kappa");
    if (edge_time && edge_time->size() != g.edge_count()) throw ValidationError("edge time count does not match edge count");
    const std::size_t n = g.node_count();
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(g.edge_count() + n);
    for (std::size_t x = 0; x < n; ++x) {
        const auto id = static_cast<NodeId>(x);
        if (g.is_sink(id)) {
            trips.emplace_back(id, id, 1.0);
            continue;
        }
        auto [first, last] = g.out_range(id);
        double sum = 0.0;
        for (std::size_t e = first; e < last; ++e) {
            if (!(edge_prob[e] >= 0.0)) throw ValidationError("negative or NaN probability on edge leaving node " + g.label(id));
            sum += edge_prob[e];
            if (edge_prob[e] != 0.0) trips.emplace_back(id, g.edge(e).to, edge_prob[e]);
        }
        if (std::abs(sum - 1.0) > tol::row_sum)
            throw ValidationError("transition probabilities leaving node " + g.label(id) + " sum to " +
                                  std::to_string(sum));
    }
    if (kappa && kappa->size() != n) throw ValidationError("kappa length does not match node count");
    DiscreteModel m;
    m.p.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    m.p.setFromTriplets(trips.begin(), trips.end());
    m.p.makeCompressed();
    if (edge_time) {
        // sum_y p(y|x) t(x, y) must reproduce kappa(x).
        std::vector<Eigen::Triplet<double>> tt;
        for (std::size_t e = 0; e < g.edge_count(); ++e) {
            const auto [x, y] = g.edge(e);
            if (edge_prob[e] == 0.0) continue;
            if (!(std::isfinite((*edge_time)[e]) && (*edge_time)[e] >= 0.0))
                throw ValidationError("per-jump holding time on edge " + g.label(x) + " -> " + g.label(y) + " is not finite");
            tt.emplace_back(x, y, (*edge_time)[e]);
        }
        SparseRowMatrix t(m.p.rows(), m.p.cols());
        t.setFromTriplets(tt.begin(), tt.end());
        t.makeCompressed();
        for (std::size_t x = 0; x < n; ++x) {
            if (g.is_sink(static_cast<NodeId>(x))) continue;
            double mean = 0.0;
            for (SparseRowMatrix::InnerIterator it(t, static_cast<Eigen::Index>(x)); it; ++it)
                mean += m.p.coeff(static_cast<Eigen::Index>(x), it.col()) * it.value();
            const double k = (*kappa)[x];
            if (std::isfinite(k) && std::abs(mean - k) > 1e-8 * std::max(1.0, k))
                throw ValidationError("per-jump holding times at node " + g.label(static_cast<NodeId>(x)) +
                                      " do not average to kappa");
        }
        m.jump_time = std::move(t);
    }
    m.kappa = std::move(kappa);
    m.origin = origin;
    return m;
}

/// Uniform random walk over out-edges.
inline DiscreteModel uniform_walk(const DirectedGraph &g) {
    std::vector<double> prob(g.edge_count());
    for (std::size_t e = 0; e < g.edge_count(); ++e) prob[e] = 1.0 / static_cast<double>(g.out_degree(g.edge(e).from));
    return make_discrete_model(g, prob);
}

/// Source set A, target set B and initial distribution mu on A.
class ProblemSets {
  public:
    ProblemSets(NodeSet a, NodeSet b, std::vector<double> mu) : a_(std::move(a)), b_(std::move(b)), mu_(std::move(mu)) {
        if (a_.empty()) throw ValidationError("set A is empty");
        if (b_.empty()) throw ValidationError("set B is empty");
        if (a_.universe() != b_.universe()) throw ValidationError("sets A and B live on different node sets");
        if (a_.intersects(b_)) throw ValidationError("sets A and B intersect");
        if (mu_.size() != a_.universe()) throw ValidationError("mu length does not match node count");
        double sum = 0.0;
        for (std::size_t x = 0; x < mu_.size(); ++x) {
            if (!(mu_[x] >= 0.0)) throw ValidationError("mu has a negative entry at node " + std::to_string(x));
            if (mu_[x] != 0.0 && !a_.contains(static_cast<NodeId>(x)))
                throw ValidationError("mu puts mass outside A at node " + std::to_string(x));
            sum += mu_[x];
        }
        if (std::abs(sum - 1.0) > tol::distribution) throw ValidationError("mu sums to " + std::to_string(sum));
    }

    /// Uniform mu on A.
    static ProblemSets uniform(NodeSet a, NodeSet b) {
        std::vector<double> mu(a.universe(), 0.0);
        for (NodeId x : a) mu[x] = 1.0 / static_cast<double>(a.size());
        return ProblemSets(std::move(a), std::move(b), std::move(mu));
    }

    const NodeSet &a() const { return a_; }
    const NodeSet &b() const { return b_; }
    const std::vector<double> &mu() const { return mu_; }
    std::size_t node_count() const { return a_.universe(); }

    /// (A u B)^c
    NodeSet interior() const { return a_.united(b_).complement(); }

    ProblemSets with_mu(std::vector<double> mu) const { return ProblemSets(a_, b_, std::move(mu)); }

  private:
    NodeSet a_;
    NodeSet b_;
    std::vector<double> mu_;
};

/// All x from which `target` is reached along positive-probability edges
/// whose interior nodes avoid target u avoid. Target nodes are included.
inline NodeSet reachable_to_set(const DiscreteModel &model, const NodeSet &target, const NodeSet &avoid) {
    const std::size_t n = model.node_count();
    if (target.intersects(avoid)) throw ValidationError("reachability target and avoid sets intersect");
    // Reverse adjacency of the positive-probability subgraph.
    std::vector<std::vector<NodeId>> preds(n);
    for (Eigen::Index x = 0; x < model.p.outerSize(); ++x)
        for (SparseRowMatrix::InnerIterator it(model.p, x); it; ++it)
            if (it.value() > 0.0 && it.col() != x) preds[it.col()].push_back(static_cast<NodeId>(x));

    NodeSet result(n);
    std::deque<NodeId> queue;
    for (NodeId t : target) {
        result.insert(t);
        queue.push_back(t);
    }
    while (!queue.empty()) {
        NodeId y = queue.front();
        queue.pop_front();
        for (NodeId x : preds[y]) {
            if (result.contains(x)) continue;
            result.insert(x);
            if (!avoid.contains(x)) queue.push_back(x);
        }
    }
    return result;
}

struct ValidationReport {
    bool ok = true;
    bool complement_empty = false;
    std::vector<NodeId> interior_unreaching;   ///< x in (A u B)^c reaching neither A nor B
    std::vector<NodeId> sources_missing_target; ///< x in A from which B is unreachable
    std::vector<NodeId> sinks_outside_target;   ///< sinks not in B

    std::string describe() const {
        if (ok) return "assumption satisfied";
        std::ostringstream os;
        if (!interior_unreaching.empty())
            os << "nodes reaching neither A nor B: " << join_ids(interior_unreaching) << "; ";
        if (!sources_missing_target.empty())
            os << "A-nodes from which B is unreachable: " << join_ids(sources_missing_target) << "; ";
        if (!sinks_outside_target.empty()) os << "sinks outside B: " << join_ids(sinks_outside_target) << "; ";
        std::string s = os.str();
        if (s.size() >= 2) s.resize(s.size() - 2);
        return s;
    }
};

/// Checks that every interior node reaches A or B, that B is reachable from
/// every A-node, and that every sink lies in B. An empty (A u B)^c is
/// recorded but does not fail the check.
inline ValidationReport validate_assumption_1(const DirectedGraph &g, const DiscreteModel &model,
                                              const ProblemSets &sets) {
    if (g.node_count() != model.node_count() || sets.node_count() != g.node_count())
        throw ValidationError("graph, model and sets disagree on node count");
    ValidationReport r;
    const NodeSet &a = sets.a();
    const NodeSet &b = sets.b();
    const NodeSet none(g.node_count());
    const NodeSet reach_a = reachable_to_set(model, a, b);
    const NodeSet reach_b = reachable_to_set(model, b, a);
    const NodeSet interior = sets.interior();
    r.complement_empty = interior.empty();
    for (NodeId x : interior)
        if (!reach_a.contains(x) && !reach_b.contains(x)) r.interior_unreaching.push_back(x);
    // From an A-node, B must be reachable allowing intermediate A-visits; an
    // A-node whose successors all lie in A is legal and simply never exits.
    const NodeSet reach_b_free = reachable_to_set(model, b, none);
    for (NodeId x : a)
        if (!reach_b_free.contains(x)) r.sources_missing_target.push_back(x);
    for (std::size_t x = 0; x < g.node_count(); ++x) {
        const auto id = static_cast<NodeId>(x);
        bool sink = g.is_sink(id) || model.prob(id, id) == 1.0;
        if (sink && !b.contains(id)) r.sinks_outside_target.push_back(id);
    }
    r.ok = r.interior_unreaching.empty() && r.sources_missing_target.empty() && r.sinks_outside_target.empty();
    return r;
}

inline void require_assumption_1(const DirectedGraph &g, const DiscreteModel &model, const ProblemSets &sets) {
    auto report = validate_assumption_1(g, model, sets);
    if (!report.ok) throw ValidationError(report.describe());
}

struct SupportSets {
    NodeSet v_minus; ///< B^c nodes from which A is reachable (q < 1)
    NodeSet v_plus;  ///< B^c nodes from which B is reachable (sum_z p q > 0)
};

/// V-/V+ from the committor, cross-checked against graph reachability.
inline SupportSets v_minus_v_plus(const DiscreteModel &model, const ProblemSets &sets, const std::vector<double> &q) {
    const std::size_t n = model.node_count();
    SupportSets s{NodeSet(n), NodeSet(n)};
    for (std::size_t i = 0; i < n; ++i) {
        const auto x = static_cast<NodeId>(i);
        if (sets.b().contains(x)) continue;
        if (q[i] < 1.0 - tol::membership) s.v_minus.insert(x);
        if (model.expect_next(x, q) > tol::membership) s.v_plus.insert(x);
    }
    const NodeSet reach_a = reachable_to_set(model, sets.a(), sets.b());
    const NodeSet reach_b = reachable_to_set(model, sets.b(), sets.a());
    std::vector<NodeId> bad;
    for (std::size_t i = 0; i < n; ++i) {
        const auto x = static_cast<NodeId>(i);
        if (sets.b().contains(x)) continue;
        if (s.v_minus.contains(x) != reach_a.contains(x) || s.v_plus.contains(x) != reach_b.contains(x))
            bad.push_back(x);
    }
    if (!bad.empty())
        throw NumericalError("committor-based V-/V+ disagree with graph reachability at nodes " + join_ids(bad));
    return s;
}

} // namespace fpp
