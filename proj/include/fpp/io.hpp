#pragma once

// JSON and DOT formats shared by the command-line tool.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ergodic_tpt.hpp"
#include "fpp_analysis.hpp"
#include "monte_carlo.hpp"
#include "trajectory_data.hpp"
#include "waiting_time.hpp"

namespace fpp::io {

inline constexpr const char *tool_version = "0.1.0";
inline constexpr int schema_version = 1;

/// Insertion-ordered so output documents are stable.
using json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Graph input

/// Everything a graph document describes. `net` is set when edges carry
/// waiting-time laws; `model` is then its embedded chain.
struct GraphInput {
    DirectedGraph graph;
    std::optional<ContinuousNetwork> net;
    DiscreteModel model;
    ProblemSets sets;
};

inline double number_field(const nlohmann::json &j, const char *key, const std::string &where) {
    if (!j.contains(key) || !j.at(key).is_number()) throw ValidationError(where + ": missing number '" + key + "'");
    return j.at(key).get<double>();
}

inline std::string label_of(const nlohmann::json &j, const std::string &where) {
    if (j.is_string()) return j.get<std::string>();
    if (j.is_number_integer()) return std::to_string(j.get<long long>());
    throw ValidationError(where + ": node labels must be strings or integers");
}

/// {"type":"exp","lambda":..} | weibull k, lambda | powerlaw alpha | table t, psi
inline WaitingTimeLaw parse_law(const nlohmann::json &j, const std::string &where) {
    if (!j.is_object() || !j.contains("type") || !j.at("type").is_string())
        throw ValidationError(where + ": law must be an object with a 'type'");
    const std::string type = j.at("type").get<std::string>();
    if (type == "exp") return exponential_law(number_field(j, "lambda", where));
    if (type == "weibull") return weibull_law(number_field(j, "k", where), number_field(j, "lambda", where));
    if (type == "powerlaw") return power_law(number_field(j, "alpha", where));
    if (type == "table") {
        auto vec = [&](const char *key) {
            if (!j.contains(key) || !j.at(key).is_array()) throw ValidationError(where + ": missing array '" + key + "'");
            std::vector<double> v;
            for (const auto &x : j.at(key)) {
                if (!x.is_number()) throw ValidationError(where + ": '" + key + "' must hold numbers");
                v.push_back(x.get<double>());
            }
            return v;
        };
        return tabulated_law(vec("t"), vec("psi"));
    }
    throw ValidationError(where + ": unknown law type '" + type + "'");
}

inline json law_json(const WaitingTimeLaw &law) {
    return std::visit(
        [](const auto &l) -> json {
            using L = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<L, Exponential>) return {{"type", "exp"}, {"lambda", l.rate}};
            else if constexpr (std::is_same_v<L, Weibull>) return {{"type", "weibull"}, {"k", l.shape}, {"lambda", l.rate}};
            else if constexpr (std::is_same_v<L, PowerLaw>) return {{"type", "powerlaw"}, {"alpha", l.exponent}};
            else return {{"type", "table"}, {"t", l.t}, {"psi", l.psi}};
        },
        law);
}

/// Set from a label list.
inline NodeSet parse_label_set(const nlohmann::json &j, const DirectedGraph &g, const std::string &name) {
    if (!j.is_array()) throw ValidationError("'" + name + "' must be a list of node labels");
    NodeSet s(g.node_count());
    for (const auto &x : j) {
        const std::string l = label_of(x, name);
        auto id = g.find_label(l);
        if (!id) throw ValidationError("'" + name + "' names unknown node '" + l + "'");
        s.insert(*id);
    }
    return s;
}

/// Graph document: nodes, edges {from, to, law | p}, A, B, optional mu
/// (label -> probability) and optional kappa (label -> mean holding time,
/// discrete models only). Edges with neither law nor p give a uniform walk.
inline GraphInput parse_graph(const nlohmann::json &doc) {
    if (!doc.is_object()) throw ValidationError("graph document must be a JSON object");
    if (!doc.contains("nodes") || !doc.at("nodes").is_array()) throw ValidationError("graph document needs a 'nodes' list");
    if (!doc.contains("edges") || !doc.at("edges").is_array()) throw ValidationError("graph document needs an 'edges' list");
    std::vector<std::string> labels;
    std::map<std::string, NodeId> index;
    for (const auto &x : doc.at("nodes")) {
        std::string l = label_of(x, "nodes");
        if (!index.emplace(l, static_cast<NodeId>(labels.size())).second) throw ValidationError("duplicate node label '" + l + "'");
        labels.push_back(std::move(l));
    }
    auto node = [&](const nlohmann::json &e, const char *key, std::size_t k) {
        const std::string where = "edge " + std::to_string(k);
        if (!e.contains(key)) throw ValidationError(where + ": missing '" + key + "'");
        const std::string l = label_of(e.at(key), where);
        auto it = index.find(l);
        if (it == index.end()) throw ValidationError(where + ": unknown node '" + l + "'");
        return it->second;
    };
    std::vector<Edge> edges;
    const auto &raw = doc.at("edges");
    std::size_t with_law = 0, with_p = 0;
    for (std::size_t k = 0; k < raw.size(); ++k) {
        const auto &e = raw[k];
        if (!e.is_object()) throw ValidationError("edge " + std::to_string(k) + ": must be an object");
        edges.push_back({node(e, "from", k), node(e, "to", k)});
        with_law += e.contains("law");
        with_p += e.contains("p");
    }
    if (with_law && with_p) throw ValidationError("edges mix waiting-time laws and probabilities");
    if ((with_law && with_law != raw.size()) || (with_p && with_p != raw.size()))
        throw ValidationError("either every edge or no edge must carry a law (or p)");

    DirectedGraph g(labels.size(), edges, labels);
    auto slot = [&](std::size_t k) { return *g.edge_index(edges[k].from, edges[k].to); };

    std::optional<ContinuousNetwork> net;
    DiscreteModel model;
    if (with_law) {
        if (doc.contains("kappa")) throw ValidationError("'kappa' is derived from the laws and cannot be given");
        std::vector<WaitingTimeLaw> laws(g.edge_count(), exponential_law(1.0));
        for (std::size_t k = 0; k < raw.size(); ++k) laws[slot(k)] = parse_law(raw[k].at("law"), "edge " + std::to_string(k));
        net.emplace(g, std::move(laws));
        model = embed_discrete(*net);
    } else {
        std::vector<double> prob(g.edge_count());
        if (with_p) {
            for (std::size_t k = 0; k < raw.size(); ++k) prob[slot(k)] = number_field(raw[k], "p", "edge " + std::to_string(k));
        } else {
            for (std::size_t e = 0; e < g.edge_count(); ++e)
                prob[e] = 1.0 / static_cast<double>(g.out_degree(g.edge(e).from));
        }
        std::optional<std::vector<double>> kappa;
        if (doc.contains("kappa")) {
            const auto &kj = doc.at("kappa");
            if (!kj.is_object()) throw ValidationError("'kappa' must map node labels to mean holding times");
            kappa.emplace(g.node_count(), std::numeric_limits<double>::quiet_NaN());
            for (const auto &[l, v] : kj.items()) {
                auto id = g.find_label(l);
                if (!id) throw ValidationError("'kappa' names unknown node '" + l + "'");
                if (!v.is_number() || !(v.get<double>() > 0.0)) throw ValidationError("'kappa' values must be positive numbers");
                (*kappa)[*id] = v.get<double>();
            }
            for (std::size_t x = 0; x < g.node_count(); ++x)
                if (!g.is_sink(static_cast<NodeId>(x)) && std::isnan((*kappa)[x]))
                    throw ValidationError("'kappa' missing for node '" + g.label(static_cast<NodeId>(x)) + "'");
        }
        model = make_discrete_model(g, prob, std::move(kappa));
    }

    if (!doc.contains("A") || !doc.contains("B")) throw ValidationError("graph document needs 'A' and 'B'");
    NodeSet a = parse_label_set(doc.at("A"), g, "A");
    NodeSet b = parse_label_set(doc.at("B"), g, "B");
    std::optional<ProblemSets> sets;
    if (doc.contains("mu")) {
        const auto &mj = doc.at("mu");
        if (!mj.is_object()) throw ValidationError("'mu' must map node labels to probabilities");
        std::vector<double> mu(g.node_count(), 0.0);
        for (const auto &[l, v] : mj.items()) {
            auto id = g.find_label(l);
            if (!id) throw ValidationError("'mu' names unknown node '" + l + "'");
            if (!v.is_number()) throw ValidationError("'mu' values must be numbers");
            mu[*id] = v.get<double>();
        }
        sets.emplace(std::move(a), std::move(b), std::move(mu));
    } else {
        sets.emplace(ProblemSets::uniform(std::move(a), std::move(b)));
    }
    return GraphInput{std::move(g), std::move(net), std::move(model), std::move(*sets)};
}

inline nlohmann::json read_json_file(const std::string &path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open '" + path + "'");
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error &e) {
        throw ValidationError("'" + path + "' is not valid JSON: " + e.what());
    }
}

inline GraphInput read_graph_file(const std::string &path) { return parse_graph(read_json_file(path)); }

/// The inverse of parse_graph for discrete models and continuous networks.
inline json graph_json(const DirectedGraph &g, const DiscreteModel &model, const ProblemSets &sets,
                       const ContinuousNetwork *net = nullptr) {
    json doc;
    json nodes = json::array();
    for (std::size_t x = 0; x < g.node_count(); ++x) nodes.push_back(g.label(static_cast<NodeId>(x)));
    doc["nodes"] = std::move(nodes);
    json edges = json::array();
    for (std::size_t e = 0; e < g.edge_count(); ++e) {
        const auto [x, y] = g.edge(e);
        json ej{{"from", g.label(x)}, {"to", g.label(y)}};
        if (net) ej["law"] = law_json(net->laws[e]);
        else ej["p"] = model.prob(x, y);
        edges.push_back(std::move(ej));
    }
    doc["edges"] = std::move(edges);
    auto labels = [&](const NodeSet &s) {
        json a = json::array();
        for (NodeId x : s) a.push_back(g.label(x));
        return a;
    };
    doc["A"] = labels(sets.a());
    doc["B"] = labels(sets.b());
    json mu = json::object();
    for (NodeId x : sets.a()) mu[g.label(x)] = sets.mu()[x];
    doc["mu"] = std::move(mu);
    if (!net && model.kappa) {
        json k = json::object();
        for (std::size_t x = 0; x < g.node_count(); ++x)
            if (std::isfinite((*model.kappa)[x])) k[g.label(static_cast<NodeId>(x))] = (*model.kappa)[x];
        doc["kappa"] = std::move(k);
    }
    return doc;
}

// ---------------------------------------------------------------------------
// Manifest

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(const std::string &s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

/// `config` holds every flag that affects the output; its hash identifies
/// the run. Wall-clock time is added only on request so outputs stay
/// byte-identical by default.
inline json manifest(const std::string &command, const std::vector<std::string> &inputs, const json &config,
                     std::optional<std::uint64_t> seed, std::optional<double> wall_seconds = std::nullopt) {
    json m;
    m["command"] = command;
    m["inputs"] = inputs;
    m["config"] = config;
    m["config_hash"] = hex64(fnv1a(config.dump()));
    if (seed) m["seed"] = *seed;
    else m["seed"] = nullptr;
    m["tool_version"] = tool_version;
    if (wall_seconds) m["wall_clock_seconds"] = *wall_seconds;
    return m;
}

// ---------------------------------------------------------------------------
// Statistics documents

inline json labels_json(const DirectedGraph &g) {
    json a = json::array();
    for (std::size_t x = 0; x < g.node_count(); ++x) a.push_back(g.label(static_cast<NodeId>(x)));
    return a;
}

inline json edges_json(const DirectedGraph &g) {
    json a = json::array();
    for (std::size_t e = 0; e < g.edge_count(); ++e) a.push_back({g.label(g.edge(e).from), g.label(g.edge(e).to)});
    return a;
}

inline json set_json(const DirectedGraph &g, const NodeSet &s) {
    json a = json::array();
    for (NodeId x : s) a.push_back(g.label(x));
    return a;
}

/// Per-edge p values following the graph edge index.
inline std::vector<double> edge_probabilities(const DirectedGraph &g, const DiscreteModel &model) {
    std::vector<double> p(g.edge_count());
    for (std::size_t e = 0; e < g.edge_count(); ++e) p[e] = model.prob(g.edge(e).from, g.edge(e).to);
    return p;
}

inline json model_json(const DirectedGraph &g, const DiscreteModel &model, const ProblemSets &sets) {
    json m;
    m["origin"] = to_string(model.origin);
    m["nodes"] = labels_json(g);
    m["edges"] = edges_json(g);
    m["p"] = edge_probabilities(g, model);
    if (model.kappa) m["kappa"] = *model.kappa; // NaN is written as null
    if (model.jump_time) {
        std::vector<double> t(g.edge_count());
        for (std::size_t e = 0; e < g.edge_count(); ++e) t[e] = model.jump_time->coeff(g.edge(e).from, g.edge(e).to);
        m["jump_time"] = std::move(t);
    }
    m["A"] = set_json(g, sets.a());
    m["B"] = set_json(g, sets.b());
    m["mu"] = sets.mu();
    return m;
}

inline json validation_json(const DirectedGraph &g, const ValidationReport &r) {
    auto names = [&](const std::vector<NodeId> &ids) {
        json a = json::array();
        for (NodeId x : ids) a.push_back(g.label(x));
        return a;
    };
    return {{"ok", r.ok},
            {"complement_empty", r.complement_empty},
            {"interior_unreaching", names(r.interior_unreaching)},
            {"sinks_outside_target", names(r.sinks_outside_target)},
            {"sources_missing_target", names(r.sources_missing_target)}};
}

inline json stats_json(const DirectedGraph &g, const DiscreteModel &model, const ProblemSets &sets,
                       const EnsembleStats &s, const std::vector<IdentityCheck> &identities) {
    json d;
    d["model"] = model_json(g, model, sets);
    d["validation"] = validation_json(g, s.validation);
    json n;
    n["q"] = s.q;
    n["f"] = s.f;
    n["theta"] = s.theta;
    n["theta_bar"] = s.segments.theta_bar;
    n["theta_bar_prime"] = s.segments.theta_bar_prime;
    n["theta_tilde"] = s.segments.theta_tilde;
    n["mu_r"] = s.segments.mu_r;
    n["V_minus"] = set_json(g, s.support.v_minus);
    n["V_plus"] = set_json(g, s.support.v_plus);
    d["nodes"] = std::move(n);
    json e;
    e["J"] = s.flux.total;
    e["J_bar"] = s.flux.nonreactive;
    e["J_tilde"] = s.flux.reactive;
    d["edges"] = std::move(e);
    d["lengths"] = {{"L", s.lengths.total},
                    {"L_bar", s.lengths.nonreactive},
                    {"L_tilde", s.lengths.reactive},
                    {"mean_hitting", s.lengths.mean_hitting}};
    if (s.times) {
        d["times"] = {{"T", s.times->total},
                      {"T_bar", s.times->nonreactive},
                      {"T_tilde", s.times->reactive},
                      {"t_tau", s.times->total_sum},
                      {"t_sigma", s.times->nonreactive_sum},
                      {"t_reactive", s.times->reactive_sum},
                      {"jump_weighted", s.times->jump_weighted}};
    } else {
        d["times"] = nullptr;
    }
    json ids = json::array();
    for (const auto &c : identities) ids.push_back({{"name", c.name}, {"deviation", c.deviation}});
    d["identities"] = std::move(ids);
    return d;
}

inline json ergodic_json(const ErgodicEnsemble &e) {
    json j;
    j["m"] = e.m;
    j["q_minus"] = e.q_minus;
    j["Z"] = {{"value", e.z[0]}, {"expressions", e.z}, {"residual", e.z_spread}};
    j["mu_eq"] = e.mu_eq;
    if (e.rate) j["k_ab"] = *e.rate;
    else j["k_ab"] = nullptr;
    if (e.pi) j["pi"] = *e.pi;
    else j["pi"] = nullptr;
    j["reversible"] = e.reversible;
    return j;
}

inline json estimate_json(const Estimate &e) { return {{"mean", e.mean}, {"stderr", e.se}}; }

inline json scalar_json(const Estimate &e) { return {{"mean", e.mean[0]}, {"stderr", e.se[0]}}; }

inline json rejections_json(const RejectionSummary &r) {
    json j{{"attempted", r.attempted}, {"rejected", r.rejected}};
    if (r.warning) j["warning"] = *r.warning;
    else j["warning"] = nullptr;
    return j;
}

/// Mirrors stats_json with a mean and stderr per field.
inline json empirical_json(const DirectedGraph &g, const EmpiricalStats &s) {
    json d;
    d["paths"] = s.paths;
    d["rejections"] = rejections_json(s.rejections);
    d["node_labels"] = labels_json(g);
    d["edge_list"] = edges_json(g);
    d["nodes"] = {{"theta", estimate_json(s.theta)},
                  {"theta_bar", estimate_json(s.theta_bar)},
                  {"theta_bar_prime", estimate_json(s.theta_bar_prime)},
                  {"theta_tilde", estimate_json(s.theta_tilde)},
                  {"mu_r", estimate_json(s.mu_r)}};
    d["edges"] = {{"J", estimate_json(s.flux)}, {"J_bar", estimate_json(s.flux_bar)}, {"J_tilde", estimate_json(s.flux_tilde)}};
    d["lengths"] = {{"sigma", scalar_json(s.sigma)}, {"tau", scalar_json(s.tau)}};
    if (s.time) {
        d["times"] = {{"T", estimate_json(*s.time)},
                      {"T_bar", estimate_json(*s.time_bar)},
                      {"T_tilde", estimate_json(*s.time_tilde)},
                      {"t_sigma", scalar_json(*s.t_sigma)},
                      {"t_tau", scalar_json(*s.t_tau)}};
    } else {
        d["times"] = nullptr;
    }
    return d;
}

inline json stationary_json(const DirectedGraph &g, const StationaryStats &s) {
    json d;
    d["steps"] = s.steps;
    d["transitions"] = s.transitions;
    d["cycles"] = s.cycles;
    d["total_time"] = s.total_time;
    d["Z"] = {{"mean", s.z}, {"stderr", s.z_se}};
    if (s.rate) d["k_ab"] = {{"mean", *s.rate}, {"stderr", *s.rate_se}};
    else d["k_ab"] = nullptr;
    d["node_labels"] = labels_json(g);
    d["nodes"] = {{"mu", estimate_json(s.mu)},
                  {"mu_r", estimate_json(s.mu_r)},
                  {"theta", estimate_json(s.theta)},
                  {"theta_bar", estimate_json(s.theta_bar)}};
    return d;
}

inline json naive_json(const NaiveStats &n) {
    return {{"tag", NaiveStats::tag},
            {"q_data", n.q_data},
            {"theta_bar_data", n.theta_bar_data},
            {"q_gap", n.q_gap},
            {"theta_bar_gap", n.theta_bar_gap},
            {"max_q_gap", n.max_q_gap},
            {"max_theta_bar_gap", n.max_theta_bar_gap}};
}

inline json rank_json(const DirectedGraph &g, const RankReport &r) {
    json d;
    json nodes = json::object();
    for (const auto &k : r.nodes) {
        json a = json::array();
        for (std::size_t i = 0; i < k.order.size(); ++i)
            a.push_back({{"node", g.label(static_cast<NodeId>(k.order[i]))}, {"value", k.value[i]}});
        nodes[k.metric] = std::move(a);
    }
    json edges = json::object();
    for (const auto &k : r.edges) {
        json a = json::array();
        for (std::size_t i = 0; i < k.order.size(); ++i) {
            const Edge e = g.edge(k.order[i]);
            a.push_back({{"from", g.label(e.from)}, {"to", g.label(e.to)}, {"value", k.value[i]}});
        }
        edges[k.metric] = std::move(a);
    }
    d["nodes"] = std::move(nodes);
    d["edges"] = std::move(edges);
    return d;
}

/// Wraps a body with the schema version, kind and manifest.
inline json document(const std::string &kind, json manifest_block, json body) {
    json d;
    d["schema_version"] = schema_version;
    d["kind"] = kind;
    d["manifest"] = std::move(manifest_block);
    for (auto &[k, v] : body.items()) d[k] = std::move(v);
    return d;
}

/// Stable text form: two-space indent, trailing newline.
inline std::string dump(const json &d) { return d.dump(2) + "\n"; }

// ---------------------------------------------------------------------------
// DOT

enum class FluxKind { Reactive, Nonreactive, Total };

inline FluxKind parse_flux_kind(const std::string &s) {
    if (s == "reactive") return FluxKind::Reactive;
    if (s == "nonreactive") return FluxKind::Nonreactive;
    if (s == "total") return FluxKind::Total;
    throw ValidationError("--dot expects reactive, nonreactive or total");
}

inline std::string dot_escape(const std::string &s) {
    std::string out;
    for (char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        out += c;
    }
    return out;
}

inline std::string dot_quote(const std::string &s) { return "\"" + dot_escape(s) + "\""; }

inline std::string short_number(double v) {
    std::ostringstream os;
    os << std::setprecision(4) << v;
    return os.str();
}

/// Nodes ascending, edges in edge-index (lexicographic) order. Pen width is
/// proportional to the chosen flux (widest edge 8); node labels carry the
/// matching visit count.
inline std::string to_dot(const DirectedGraph &g, const ProblemSets &sets, const EnsembleStats &s, FluxKind kind) {
    const std::vector<double> &flux =
        kind == FluxKind::Reactive ? s.flux.reactive : kind == FluxKind::Nonreactive ? s.flux.nonreactive : s.flux.total;
    const std::vector<double> &theta = kind == FluxKind::Reactive      ? s.segments.theta_tilde
                                       : kind == FluxKind::Nonreactive ? s.segments.theta_bar
                                                                       : s.theta;
    const char *theta_name = kind == FluxKind::Reactive ? "theta_tilde" : kind == FluxKind::Nonreactive ? "theta_bar" : "theta";
    double top = 0.0;
    for (double v : flux) top = std::max(top, v);
    std::ostringstream os;
    os << "digraph fpp {\n  node [shape=circle];\n";
    for (std::size_t i = 0; i < g.node_count(); ++i) {
        const auto x = static_cast<NodeId>(i);
        os << "  " << dot_quote(g.label(x)) << " [label=\"" << dot_escape(g.label(x)) << "\\n"
           << theta_name << "=" << short_number(theta[x]) << '"';
        if (sets.a().contains(x)) os << ", shape=box";
        if (sets.b().contains(x)) os << ", shape=doublecircle";
        os << "];\n";
    }
    for (std::size_t e = 0; e < g.edge_count(); ++e) {
        const auto [x, y] = g.edge(e);
        const double w = top > 0.0 ? 8.0 * flux[e] / top : 0.0;
        os << "  " << dot_quote(g.label(x)) << " -> " << dot_quote(g.label(y)) << " [penwidth=" << short_number(std::max(w, 0.1))
           << ", label=" << dot_quote(short_number(flux[e]));
        if (flux[e] == 0.0) os << ", style=dotted";
        os << "];\n";
    }
    os << "}\n";
    return os.str();
}

} // namespace fpp::io
