#pragma once

#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "fpp_analysis.hpp"

namespace fpp {

/// One observed path x_0 .. x_tau, optionally with jump times t_0 = 0 < t_1 < ...
struct Trajectory {
    std::vector<NodeId> nodes;
    std::vector<double> times; ///< empty for discrete-time data

    std::size_t tau() const { return nodes.size() - 1; }
};

/// Trajectories over a label universe. Node ids index `labels`.
struct TrajectoryDataset {
    std::vector<std::string> labels;
    std::vector<Trajectory> trajectories;
    bool timed = false;

    std::size_t node_count() const { return labels.size(); }
    std::size_t size() const { return trajectories.size(); }
};

/// Index of the last A-visit.
inline std::size_t last_exit_index(const Trajectory &tr, const NodeSet &a) {
    for (std::size_t l = tr.nodes.size(); l-- > 0;)
        if (a.contains(tr.nodes[l])) return l;
    throw ValidationError("trajectory never visits A");
}

/// Checks the first-passage shape of every trajectory; errors name the index.
inline void validate_dataset(const TrajectoryDataset &data, const NodeSet &a, const NodeSet &b) {
    if (data.trajectories.empty()) throw ValidationError("dataset contains no trajectories");
    for (std::size_t i = 0; i < data.size(); ++i) {
        const Trajectory &tr = data.trajectories[i];
        auto fail = [i](const std::string &why) {
            throw ValidationError("trajectory " + std::to_string(i) + ": " + why);
        };
        if (tr.nodes.size() < 2) fail("needs at least two steps");
        for (NodeId x : tr.nodes)
            if (x < 0 || static_cast<std::size_t>(x) >= data.node_count()) fail("node id out of range");
        if (!a.contains(tr.nodes.front())) fail("does not start in A");
        if (!b.contains(tr.nodes.back())) fail("does not end in B");
        for (std::size_t l = 0; l + 1 < tr.nodes.size(); ++l) {
            if (b.contains(tr.nodes[l])) fail("visits B before its last step");
            if (tr.nodes[l] == tr.nodes[l + 1]) fail("repeats node " + data.labels[tr.nodes[l]] + " (self-loop)");
        }
        if (data.timed) {
            if (tr.times.size() != tr.nodes.size()) fail("time and node counts differ");
            if (tr.times.front() != 0.0) fail("times must start at 0");
            for (std::size_t l = 0; l + 1 < tr.times.size(); ++l)
                if (!(tr.times[l + 1] > tr.times[l])) fail("times are not strictly increasing");
        } else if (!tr.times.empty()) {
            fail("carries times in a discrete-time dataset");
        }
    }
}

// ---------------------------------------------------------------------------
// JSON lines

/// Parses `{"steps":[[t,"label"],...]}` or `{"steps":["label",...]}` per line.
/// Labels are numbered in order of first appearance unless `known` is given.
inline TrajectoryDataset read_trajectories(std::istream &in, const std::vector<std::string> &known = {}) {
    TrajectoryDataset data;
    data.labels = known;
    std::unordered_map<std::string, NodeId> index;
    for (std::size_t i = 0; i < known.size(); ++i) index.emplace(known[i], static_cast<NodeId>(i));
    auto id_of = [&](const nlohmann::json &v, std::size_t line) -> NodeId {
        std::string name;
        if (v.is_string()) name = v.get<std::string>();
        else if (v.is_number_integer()) name = std::to_string(v.get<long long>());
        else throw ValidationError("line " + std::to_string(line) + ": node label must be a string or integer");
        auto it = index.find(name);
        if (it != index.end()) return it->second;
        if (!known.empty()) throw ValidationError("line " + std::to_string(line) + ": unknown node label " + name);
        const auto id = static_cast<NodeId>(data.labels.size());
        data.labels.push_back(name);
        index.emplace(name, id);
        return id;
    };

    std::optional<bool> timed;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json doc;
        try {
            doc = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error &e) {
            throw ValidationError("line " + std::to_string(lineno) + ": " + e.what());
        }
        if (!doc.is_object() || !doc.contains("steps") || !doc["steps"].is_array())
            throw ValidationError("line " + std::to_string(lineno) + ": expected an object with a \"steps\" array");
        Trajectory tr;
        for (const auto &step : doc["steps"]) {
            const bool is_timed = step.is_array();
            if (!timed) timed = is_timed;
            if (*timed != is_timed)
                throw ValidationError("line " + std::to_string(lineno) + ": timed and untimed steps are mixed");
            if (is_timed) {
                if (step.size() != 2 || !step[0].is_number())
                    throw ValidationError("line " + std::to_string(lineno) + ": timed steps are [time, label]");
                tr.times.push_back(step[0].get<double>());
                tr.nodes.push_back(id_of(step[1], lineno));
            } else {
                tr.nodes.push_back(id_of(step, lineno));
            }
        }
        data.trajectories.push_back(std::move(tr));
    }
    if (data.trajectories.empty()) throw ValidationError("trajectory file contains no trajectories");
    data.timed = timed.value_or(false);
    return data;
}

inline void write_trajectories(std::ostream &out, const TrajectoryDataset &data) {
    for (const Trajectory &tr : data.trajectories) {
        nlohmann::json steps = nlohmann::json::array();
        for (std::size_t l = 0; l < tr.nodes.size(); ++l) {
            if (data.timed) steps.push_back({tr.times[l], data.labels[tr.nodes[l]]});
            else steps.push_back(data.labels[tr.nodes[l]]);
        }
        out << nlohmann::json{{"steps", steps}}.dump() << '\n';
    }
}

/// Resolves label names to a NodeSet over `labels`; unknown names are skipped
/// and reported through `missing`.
inline NodeSet label_set(const std::vector<std::string> &labels, const std::vector<std::string> &names,
                         std::vector<std::string> *missing = nullptr) {
    NodeSet s(labels.size());
    for (const std::string &name : names) {
        auto it = std::find(labels.begin(), labels.end(), name);
        if (it == labels.end()) {
            if (missing) missing->push_back(name);
            continue;
        }
        s.insert(static_cast<NodeId>(it - labels.begin()));
    }
    return s;
}

// ---------------------------------------------------------------------------
// Estimators

/// Model induced by the data on the visited nodes only.
struct EstimatedModel {
    DirectedGraph graph;
    DiscreteModel model;
    ProblemSets sets;
    std::vector<NodeId> source; ///< estimated id -> dataset id
    std::vector<NodeId> target; ///< dataset id -> estimated id, -1 if dropped
    std::vector<double> departures; ///< number of counted departures per node
};

/// Ratio estimators for p, kappa and the per-jump holding times, start
/// frequency for mu. Nodes seen only as B-endpoints become sinks with
/// undefined kappa.
inline EstimatedModel estimate_model(const TrajectoryDataset &data, const NodeSet &a, const NodeSet &b) {
    validate_dataset(data, a, b);
    const std::size_t n0 = data.node_count();
    std::vector<char> visited(n0, 0);
    for (const auto &tr : data.trajectories)
        for (NodeId x : tr.nodes) visited[x] = 1;
    std::vector<NodeId> source, target(n0, -1);
    std::vector<std::string> labels;
    for (std::size_t x = 0; x < n0; ++x)
        if (visited[x]) {
            target[x] = static_cast<NodeId>(source.size());
            source.push_back(static_cast<NodeId>(x));
            labels.push_back(data.labels[x]);
        }
    const std::size_t n = source.size();

    std::map<std::pair<NodeId, NodeId>, double> jumps, jump_holding;
    std::vector<double> departures(n, 0.0), holding(n, 0.0), starts(n, 0.0);
    for (const auto &tr : data.trajectories) {
        starts[target[tr.nodes.front()]] += 1.0;
        for (std::size_t l = 0; l < tr.tau(); ++l) {
            const NodeId x = target[tr.nodes[l]], y = target[tr.nodes[l + 1]];
            jumps[{x, y}] += 1.0;
            departures[x] += 1.0;
            if (data.timed) {
                holding[x] += tr.times[l + 1] - tr.times[l];
                jump_holding[{x, y}] += tr.times[l + 1] - tr.times[l];
            }
        }
    }
    std::vector<Edge> edges;
    for (const auto &[xy, c] : jumps) edges.push_back({xy.first, xy.second});
    DirectedGraph g(n, edges, labels);
    std::vector<double> prob(g.edge_count());
    for (std::size_t e = 0; e < g.edge_count(); ++e) {
        const Edge &ed = g.edge(e);
        prob[e] = jumps.at({ed.from, ed.to}) / departures[ed.from];
    }
    std::optional<std::vector<double>> kappa, edge_time;
    if (data.timed) {
        kappa.emplace(n, std::numeric_limits<double>::quiet_NaN());
        for (std::size_t x = 0; x < n; ++x)
            if (departures[x] > 0.0) (*kappa)[x] = holding[x] / departures[x];
        edge_time.emplace(g.edge_count());
        for (std::size_t e = 0; e < g.edge_count(); ++e) {
            const Edge &ed = g.edge(e);
            (*edge_time)[e] = jump_holding.at({ed.from, ed.to}) / jumps.at({ed.from, ed.to});
        }
    }
    auto model = make_discrete_model(g, prob, std::move(kappa), ModelOrigin::EstimatedFromData, std::move(edge_time));

    NodeSet ea(n), eb(n);
    for (NodeId x : a)
        if (target[x] >= 0) ea.insert(target[x]);
    for (NodeId x : b)
        if (target[x] >= 0) eb.insert(target[x]);
    std::vector<double> mu(n, 0.0);
    const auto m = static_cast<double>(data.size());
    for (std::size_t x = 0; x < n; ++x) mu[x] = starts[x] / m;
    ProblemSets sets(std::move(ea), std::move(eb), std::move(mu));
    return {std::move(g), std::move(model), std::move(sets), std::move(source), std::move(target),
            std::move(departures)};
}

/// Visit and jump counts per trajectory, in the estimated model's indexing.
struct CountingStats {
    std::vector<double> theta; ///< mean visits over l = 0..tau (endpoint included)
    std::vector<double> flux;  ///< mean jumps over l < tau, per estimated edge
    double mean_length;        ///< mean tau
};

inline CountingStats counting_stats(const TrajectoryDataset &data, const EstimatedModel &est) {
    const std::size_t n = est.graph.node_count();
    CountingStats c{std::vector<double>(n, 0.0), std::vector<double>(est.graph.edge_count(), 0.0), 0.0};
    for (const auto &tr : data.trajectories) {
        for (std::size_t l = 0; l <= tr.tau(); ++l) c.theta[est.target[tr.nodes[l]]] += 1.0;
        for (std::size_t l = 0; l < tr.tau(); ++l) {
            auto e = est.graph.edge_index(est.target[tr.nodes[l]], est.target[tr.nodes[l + 1]]);
            c.flux[*e] += 1.0;
        }
        c.mean_length += static_cast<double>(tr.tau());
    }
    const auto m = static_cast<double>(data.size());
    for (double &v : c.theta) v /= m;
    for (double &v : c.flux) v /= m;
    c.mean_length /= m;
    return c;
}

/// The naive per-node counting estimators. These are biased: they ignore
/// that the reactive segment can revisit nodes also seen before the last
/// A-exit. Kept for comparison only.
struct NaiveStats {
    std::vector<double> q_data;         ///< visits after sigma / all visits
    std::vector<double> theta_bar_data; ///< mean visits over l <= sigma
    std::vector<double> q_gap;          ///< q_data - q (model)
    std::vector<double> theta_bar_gap;  ///< theta_bar_data - theta_bar (model)
    double max_q_gap = 0.0;
    double max_theta_bar_gap = 0.0;
    static constexpr const char *tag = "biased - see documentation";
};

inline NaiveStats naive_stats(const TrajectoryDataset &data, const EstimatedModel &est, const EnsembleStats &model) {
    const std::size_t n = est.graph.node_count();
    std::vector<double> after(n, 0.0), all(n, 0.0), before(n, 0.0);
    NodeSet a_data(data.node_count());
    for (NodeId x : est.sets.a()) a_data.insert(est.source[x]);
    for (const auto &tr : data.trajectories) {
        const std::size_t sigma = last_exit_index(tr, a_data);
        for (std::size_t l = 0; l <= tr.tau(); ++l) {
            const NodeId x = est.target[tr.nodes[l]];
            all[x] += 1.0;
            if (l > sigma) after[x] += 1.0;
            else before[x] += 1.0;
        }
    }
    NaiveStats s;
    s.q_data.resize(n);
    s.theta_bar_data.resize(n);
    s.q_gap.resize(n);
    s.theta_bar_gap.resize(n);
    const auto m = static_cast<double>(data.size());
    for (std::size_t x = 0; x < n; ++x) {
        s.q_data[x] = all[x] > 0.0 ? after[x] / all[x] : 0.0;
        s.theta_bar_data[x] = before[x] / m;
        s.q_gap[x] = s.q_data[x] - model.q[x];
        s.theta_bar_gap[x] = s.theta_bar_data[x] - model.segments.theta_bar[x];
        s.max_q_gap = std::max(s.max_q_gap, std::abs(s.q_gap[x]));
        s.max_theta_bar_gap = std::max(s.max_theta_bar_gap, std::abs(s.theta_bar_gap[x]));
    }
    return s;
}

} // namespace fpp
