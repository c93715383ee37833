#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "ergodic_tpt.hpp"
#include "rng.hpp"
#include "trajectory_data.hpp"
#include "waiting_time.hpp"

namespace fpp {

struct SimulationConfig {
    std::size_t samples = 10000;
    std::size_t max_steps = 1000000;
    std::uint64_t seed = 1;
    unsigned threads = 0; ///< 0 = hardware concurrency; results do not depend on it
};

/// One jump from a node: chosen edge index and holding time (0 when untimed).
struct Jump {
    std::size_t edge;
    double time;
};

/// Draws jumps either from a discrete chain (optionally with deterministic
/// holding times kappa) or from per-edge competing clocks.
class PathSampler {
  public:
    PathSampler(const DirectedGraph &g, const DiscreteModel &model, bool use_kappa_as_time = false)
        : graph_(&g), model_(&model), timed_(use_kappa_as_time && model.has_kappa()) {
        if (g.node_count() != model.node_count()) throw ValidationError("graph and model disagree on node count");
        cumulative_.resize(g.edge_count());
        for (std::size_t x = 0; x < g.node_count(); ++x) {
            auto [first, last] = g.out_range(static_cast<NodeId>(x));
            double c = 0.0;
            for (std::size_t e = first; e < last; ++e) cumulative_[e] = (c += model.prob(static_cast<NodeId>(x), g.edge(e).to));
        }
    }

    explicit PathSampler(const ContinuousNetwork &net) : graph_(&net.graph), net_(&net), timed_(true) {}

    const DirectedGraph &graph() const { return *graph_; }
    bool timed() const { return timed_; }

    template <typename Engine>
    Jump step(NodeId x, Engine &eng) const {
        auto [first, last] = graph_->out_range(x);
        if (first == last) throw ValidationError("walk reached sink " + graph_->label(x) + " outside B");
        if (net_) {
            auto [t, j] = sample_holding(net_->out_laws(x), eng);
            return {first + j, t};
        }
        const double u = uniform_open0(eng) * cumulative_[last - 1];
        std::size_t e = first;
        while (e + 1 < last && cumulative_[e] < u) ++e;
        return {e, timed_ ? (*model_->kappa)[x] : 0.0};
    }

  private:
    const DirectedGraph *graph_;
    const DiscreteModel *model_ = nullptr;
    const ContinuousNetwork *net_ = nullptr;
    bool timed_;
    std::vector<double> cumulative_;
};

/// Samples a start node from mu restricted to A.
template <typename Engine>
NodeId sample_start(const ProblemSets &sets, Engine &eng) {
    const double u = uniform_open0(eng);
    double c = 0.0;
    NodeId last = sets.a().members().back();
    for (NodeId x : sets.a()) {
        c += sets.mu()[x];
        if (sets.mu()[x] > 0.0) last = x;
        if (u <= c && sets.mu()[x] > 0.0) return x;
    }
    return last;
}

/// Samples path `index` of a run. Returns false when max_steps is hit.
inline bool sample_path(const PathSampler &sampler, const ProblemSets &sets, std::uint64_t seed, std::uint64_t index,
                        std::size_t max_steps, Trajectory &out, std::vector<std::size_t> *edges = nullptr) {
    auto eng = stream_engine(seed, index);
    out.nodes.clear();
    out.times.clear();
    if (edges) edges->clear();
    NodeId x = sample_start(sets, eng);
    double t = 0.0;
    out.nodes.push_back(x);
    if (sampler.timed()) out.times.push_back(0.0);
    for (std::size_t l = 0; l < max_steps; ++l) {
        const Jump j = sampler.step(x, eng);
        x = sampler.graph().edge(j.edge).to;
        t += j.time;
        out.nodes.push_back(x);
        if (sampler.timed()) out.times.push_back(t);
        if (edges) edges->push_back(j.edge);
        if (sets.b().contains(x)) return true;
    }
    return false;
}

struct RejectionSummary {
    std::size_t attempted = 0;
    std::size_t rejected = 0;
    std::optional<std::string> warning;

    double fraction() const { return attempted ? static_cast<double>(rejected) / static_cast<double>(attempted) : 0.0; }
};

inline RejectionSummary summarize_rejections(std::size_t attempted, std::size_t rejected) {
    RejectionSummary r{attempted, rejected, std::nullopt};
    if (r.fraction() > 0.5)
        throw NumericalError("max_steps too small: " + std::to_string(rejected) + " of " + std::to_string(attempted) +
                             " paths rejected");
    if (r.fraction() > 0.01)
        r.warning = std::to_string(rejected) + " of " + std::to_string(attempted) + " paths hit max_steps and were rejected";
    return r;
}

struct SampledDataset {
    TrajectoryDataset data;
    RejectionSummary rejections;
};

/// First passage paths from mu, stored in full. Labels are the graph labels.
inline SampledDataset sample_first_passage(const PathSampler &sampler, const ProblemSets &sets,
                                           const SimulationConfig &cfg) {
    if (cfg.samples == 0 || cfg.max_steps == 0) throw ValidationError("samples and max_steps must be positive");
    SampledDataset s;
    const DirectedGraph &g = sampler.graph();
    for (std::size_t x = 0; x < g.node_count(); ++x) s.data.labels.push_back(g.label(static_cast<NodeId>(x)));
    s.data.timed = sampler.timed();
    std::size_t rejected = 0;
    Trajectory tr;
    for (std::size_t i = 0; i < cfg.samples; ++i) {
        if (sample_path(sampler, sets, cfg.seed, i, cfg.max_steps, tr)) s.data.trajectories.push_back(tr);
        else ++rejected;
    }
    s.rejections = summarize_rejections(cfg.samples, rejected);
    return s;
}

// ---------------------------------------------------------------------------
// Empirical statistics

/// Sample mean and its standard error.
struct Estimate {
    std::vector<double> mean;
    std::vector<double> se;
};

struct EmpiricalStats {
    std::size_t paths = 0;
    RejectionSummary rejections;
    Estimate theta, theta_bar, theta_bar_prime, theta_tilde, mu_r;
    Estimate flux, flux_bar, flux_tilde;
    std::optional<Estimate> time, time_bar, time_tilde;
    Estimate sigma, tau;                     ///< single entries
    std::optional<Estimate> t_sigma, t_tau;  ///< single entries
};

namespace detail {

/// Running sums and sums of squares of per-path totals.
struct Moments {
    std::vector<double> s1, s2;
    explicit Moments(std::size_t n = 0) : s1(n, 0.0), s2(n, 0.0) {}

    void merge(const Moments &o) {
        for (std::size_t i = 0; i < s1.size(); ++i) s1[i] += o.s1[i], s2[i] += o.s2[i];
    }

    Estimate finish(std::size_t m) const {
        Estimate e{std::vector<double>(s1.size()), std::vector<double>(s1.size())};
        const auto M = static_cast<double>(m);
        for (std::size_t i = 0; i < s1.size(); ++i) {
            const double mean = s1[i] / M;
            const double var = m > 1 ? std::max(0.0, (s2[i] - M * mean * mean) / (M - 1.0)) : 0.0;
            e.mean[i] = mean;
            e.se[i] = std::sqrt(var / M);
        }
        return e;
    }
};

/// Per-path scratch: dense buffer plus a list of touched indices.
struct Scratch {
    std::vector<double> v;
    std::vector<std::size_t> touched;
    explicit Scratch(std::size_t n = 0) : v(n, 0.0) {}

    void add(std::size_t i, double w) {
        if (v[i] == 0.0) touched.push_back(i);
        v[i] += w;
        if (v[i] == 0.0) v[i] = std::numeric_limits<double>::denorm_min(); // keep it touched
    }

    void flush(Moments &m) {
        for (std::size_t i : touched) {
            const double w = v[i] == std::numeric_limits<double>::denorm_min() ? 0.0 : v[i];
            m.s1[i] += w;
            m.s2[i] += w * w;
            v[i] = 0.0;
        }
        touched.clear();
    }
};

enum Slot { Theta, ThetaBar, ThetaBarPrime, ThetaTilde, MuR, Time, TimeBar, TimeTilde, NodeSlots };
enum EdgeSlot { Flux, FluxBar, FluxTilde, EdgeSlots };
enum ScalarSlot { Sigma, Tau, TSigma, TTau, ScalarSlots };

struct Accumulator {
    std::vector<Moments> node, edge;
    Moments scalar;
    std::size_t paths = 0, rejected = 0;

    Accumulator(std::size_t n, std::size_t m)
        : node(NodeSlots, Moments(n)), edge(EdgeSlots, Moments(m)), scalar(ScalarSlots) {}

    void merge(const Accumulator &o) {
        for (std::size_t k = 0; k < node.size(); ++k) node[k].merge(o.node[k]);
        for (std::size_t k = 0; k < edge.size(); ++k) edge[k].merge(o.edge[k]);
        scalar.merge(o.scalar);
        paths += o.paths;
        rejected += o.rejected;
    }
};

/// Splits one path at its last A-visit sigma and adds every per-path total.
inline void count_path(const Trajectory &tr, const std::vector<std::size_t> &edges, const NodeSet &a, bool timed,
                       std::vector<Scratch> &ns, std::vector<Scratch> &es, Accumulator &acc) {
    const std::size_t tau = tr.tau();
    const std::size_t sigma = last_exit_index(tr, a);
    for (std::size_t l = 0; l <= tau; ++l) {
        const auto x = static_cast<std::size_t>(tr.nodes[l]);
        ns[Theta].add(x, 1.0);
        if (l <= sigma) ns[ThetaBar].add(x, 1.0);
        if (l < sigma) ns[ThetaBarPrime].add(x, 1.0);
        else ns[ThetaTilde].add(x, 1.0);
        if (l < tau) {
            const std::size_t e = edges[l];
            es[Flux].add(e, 1.0);
            es[l < sigma ? FluxBar : FluxTilde].add(e, 1.0);
            if (timed) {
                const double h = tr.times[l + 1] - tr.times[l];
                ns[Time].add(x, h);
                ns[l < sigma ? TimeBar : TimeTilde].add(x, h);
            }
        }
    }
    ns[MuR].add(static_cast<std::size_t>(tr.nodes[sigma]), 1.0);
    for (auto &s : ns) s.flush(acc.node[&s - ns.data()]);
    for (auto &s : es) s.flush(acc.edge[&s - es.data()]);
    const double sc[ScalarSlots] = {static_cast<double>(sigma), static_cast<double>(tau),
                                    timed ? tr.times[sigma] : 0.0, timed ? tr.times[tau] : 0.0};
    for (std::size_t k = 0; k < ScalarSlots; ++k) acc.scalar.s1[k] += sc[k], acc.scalar.s2[k] += sc[k] * sc[k];
    ++acc.paths;
}

inline EmpiricalStats finish(const Accumulator &acc, bool timed) {
    EmpiricalStats s;
    s.paths = acc.paths;
    s.rejections = summarize_rejections(acc.paths + acc.rejected, acc.rejected);
    const std::size_t m = acc.paths;
    s.theta = acc.node[Theta].finish(m);
    s.theta_bar = acc.node[ThetaBar].finish(m);
    s.theta_bar_prime = acc.node[ThetaBarPrime].finish(m);
    s.theta_tilde = acc.node[ThetaTilde].finish(m);
    s.mu_r = acc.node[MuR].finish(m);
    s.flux = acc.edge[Flux].finish(m);
    s.flux_bar = acc.edge[FluxBar].finish(m);
    s.flux_tilde = acc.edge[FluxTilde].finish(m);
    Estimate sc = acc.scalar.finish(m);
    auto pick = [&](std::size_t k) { return Estimate{{sc.mean[k]}, {sc.se[k]}}; };
    s.sigma = pick(Sigma);
    s.tau = pick(Tau);
    if (timed) {
        s.time = acc.node[Time].finish(m);
        s.time_bar = acc.node[TimeBar].finish(m);
        s.time_tilde = acc.node[TimeTilde].finish(m);
        s.t_sigma = pick(TSigma);
        s.t_tau = pick(TTau);
    }
    return s;
}

} // namespace detail

/// Segments stored paths at sigma and averages the per-path counts. Edge
/// fields follow `g`'s edge indexing; labels of `data` must match `g`.
inline EmpiricalStats segment_and_count(const TrajectoryDataset &data, const DirectedGraph &g, const NodeSet &a) {
    if (data.node_count() != g.node_count()) throw ValidationError("dataset and graph disagree on node count");
    if (data.trajectories.empty()) throw ValidationError("dataset contains no trajectories");
    const std::size_t n = g.node_count(), m = g.edge_count();
    detail::Accumulator acc(n, m);
    std::vector<detail::Scratch> ns(detail::NodeSlots, detail::Scratch(n)), es(detail::EdgeSlots, detail::Scratch(m));
    std::vector<std::size_t> edges;
    for (const auto &tr : data.trajectories) {
        edges.clear();
        for (std::size_t l = 0; l < tr.tau(); ++l) {
            auto e = g.edge_index(tr.nodes[l], tr.nodes[l + 1]);
            if (!e) throw ValidationError("trajectory uses a jump that is not a graph edge");
            edges.push_back(*e);
        }
        detail::count_path(tr, edges, a, data.timed, ns, es, acc);
    }
    return detail::finish(acc, data.timed);
}

/// Streams first passage paths straight into the accumulators without
/// storing them. Paths are processed in fixed blocks that are merged in
/// block order, so the result is bit-identical for any thread count.
inline EmpiricalStats simulate_first_passage_stats(const PathSampler &sampler, const ProblemSets &sets,
                                                   const SimulationConfig &cfg) {
    if (cfg.samples == 0 || cfg.max_steps == 0) throw ValidationError("samples and max_steps must be positive");
    const DirectedGraph &g = sampler.graph();
    const std::size_t n = g.node_count(), m = g.edge_count();
    constexpr std::size_t block = 1024;
    const std::size_t blocks = (cfg.samples + block - 1) / block;
    std::vector<std::optional<detail::Accumulator>> parts(blocks);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        std::vector<detail::Scratch> ns(detail::NodeSlots, detail::Scratch(n)), es(detail::EdgeSlots, detail::Scratch(m));
        Trajectory tr;
        std::vector<std::size_t> edges;
        for (std::size_t b; (b = next.fetch_add(1)) < blocks;) {
            detail::Accumulator acc(n, m);
            const std::size_t end = std::min(cfg.samples, (b + 1) * block);
            for (std::size_t i = b * block; i < end; ++i) {
                if (sample_path(sampler, sets, cfg.seed, i, cfg.max_steps, tr, &edges))
                    detail::count_path(tr, edges, sets.a(), sampler.timed(), ns, es, acc);
                else
                    ++acc.rejected;
            }
            parts[b].emplace(std::move(acc));
        }
    };
    unsigned threads = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, blocks));
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    }
    detail::Accumulator total(n, m);
    for (auto &p : parts) total.merge(*p);
    if (total.paths == 0) throw NumericalError("max_steps too small: every path was rejected");
    return detail::finish(total, sampler.timed());
}

// ---------------------------------------------------------------------------
// Long stationary run

struct StationaryConfig {
    std::size_t steps = 1000000;
    std::uint64_t seed = 1;
    std::size_t batches = 100;
};

struct StationaryStats {
    std::size_t steps = 0;
    std::size_t transitions = 0; ///< completed A -> B transitions M
    std::size_t cycles = 0;      ///< complete B -> A -> B cycles used for the per-cycle averages
    double total_time = 0.0;     ///< t_N, zero when untimed
    double z, z_se;              ///< M / N
    std::optional<double> rate, rate_se; ///< M / t_N
    Estimate mu;                 ///< entry point into A per cycle
    Estimate mu_r;               ///< last A-visit per transition
    Estimate theta;              ///< visits over [tau_A, tau_B] per cycle, B^c part
    Estimate theta_bar;          ///< visits over [tau_A, sigma] per cycle
};

/// One N-step trajectory started from m. Successive A -> B transitions are
/// cut at tau_A (first A-entry after B), sigma (last A-visit before B) and
/// tau_B. Z and k_AB errors use batch means; the per-cycle averages use the
/// spread across cycles.
inline StationaryStats stationary_run(const PathSampler &sampler, const DiscreteModel &model, const ProblemSets &sets,
                                      const StationaryConfig &cfg, const ErgodicOptions &opt = {}) {
    if (cfg.steps == 0 || cfg.batches == 0 || cfg.batches > cfg.steps)
        throw ValidationError("stationary run needs steps >= batches >= 1");
    const std::vector<double> m = invariant_measure(model, opt);
    const DirectedGraph &g = sampler.graph();
    const std::size_t n = g.node_count();
    auto eng = stream_engine(cfg.seed, 0);

    NodeId x = 0;
    {
        const double u = uniform_open0(eng);
        double c = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            if ((c += m[i]) >= u || i + 1 == n) {
                x = static_cast<NodeId>(i);
                break;
            }
    }

    enum class Last { None, A, B };
    Last last = sets.a().contains(x) ? Last::A : sets.b().contains(x) ? Last::B : Last::None;
    bool cycle_valid = false; // current cycle began with an A-entry after a B-visit
    std::vector<NodeId> segment;  // nodes since the current tau_A
    std::size_t sigma_in_segment = 0;
    NodeId last_a_node = last == Last::A ? x : -1;

    detail::Moments mu(n), mu_r(n), theta(n), theta_bar(n);
    detail::Scratch sc_theta(n), sc_bar(n);
    std::size_t cycles = 0, transitions = 0;
    std::vector<double> batch_m(cfg.batches, 0.0), batch_t(cfg.batches, 0.0);
    const std::size_t per_batch = cfg.steps / cfg.batches;
    double t = 0.0;

    for (std::size_t step = 0; step < cfg.steps; ++step) {
        const std::size_t bidx = std::min(cfg.batches - 1, step / per_batch);
        const Jump j = sampler.step(x, eng);
        t += j.time;
        batch_t[bidx] += j.time;
        const NodeId y = g.edge(j.edge).to;
        if (cycle_valid) segment.push_back(y);
        if (sets.a().contains(y)) {
            if (last == Last::B) {
                cycle_valid = true;
                segment.assign(1, y);
            }
            if (cycle_valid) sigma_in_segment = segment.size() - 1;
            last = Last::A;
            last_a_node = y;
        } else if (sets.b().contains(y)) {
            if (last == Last::A) {
                ++transitions;
                batch_m[bidx] += 1.0;
                mu_r.s1[last_a_node] += 1.0, mu_r.s2[last_a_node] += 1.0;
                if (cycle_valid) {
                    // Visits on B^c over [tau_A, tau_B).
                    for (std::size_t l = 0; l + 1 < segment.size(); ++l) {
                        sc_theta.add(static_cast<std::size_t>(segment[l]), 1.0);
                        if (l <= sigma_in_segment) sc_bar.add(static_cast<std::size_t>(segment[l]), 1.0);
                    }
                    mu.s1[segment.front()] += 1.0, mu.s2[segment.front()] += 1.0;
                    sc_theta.flush(theta);
                    sc_bar.flush(theta_bar);
                    ++cycles;
                }
            }
            cycle_valid = false;
            segment.clear();
            last = Last::B;
        }
        x = y;
    }
    if (transitions == 0) throw NumericalError("N too small: no completed A -> B transition");

    StationaryStats s;
    s.steps = cfg.steps;
    s.transitions = transitions;
    s.cycles = cycles;
    s.total_time = t;
    const auto N = static_cast<double>(cfg.steps);
    s.z = static_cast<double>(transitions) / N;
    // Batch means for Z (per-step rate) and the ratio estimator M / t.
    const auto B = static_cast<double>(cfg.batches);
    std::vector<double> batch_n(cfg.batches, static_cast<double>(per_batch));
    batch_n.back() = N - static_cast<double>(per_batch) * (B - 1.0);
    double vz = 0.0;
    for (std::size_t b = 0; b < cfg.batches; ++b) {
        const double d = batch_m[b] / batch_n[b] - s.z;
        vz += d * d;
    }
    s.z_se = std::sqrt(vz / (B - 1.0) / B);
    if (sampler.timed()) {
        s.rate = static_cast<double>(transitions) / t;
        const double tbar = t / B;
        double vr = 0.0;
        for (std::size_t b = 0; b < cfg.batches; ++b) {
            const double d = batch_m[b] - *s.rate * batch_t[b];
            vr += d * d;
        }
        s.rate_se = std::sqrt(vr / (B - 1.0) / B) / tbar;
    }
    if (cycles > 0) {
        s.mu = mu.finish(cycles);
        s.theta = theta.finish(cycles);
        s.theta_bar = theta_bar.finish(cycles);
    }
    s.mu_r = mu_r.finish(transitions);
    return s;
}

} // namespace fpp
