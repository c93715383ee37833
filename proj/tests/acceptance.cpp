// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails.

#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/quadrature/tanh_sinh.hpp>

#include "dense_oracle.hpp"
#include "instances.hpp"
#include "mc_gate.hpp"

using namespace fpp;
using namespace fpp::testing;

namespace {

/// Collects failed checks; the first few are kept for the report.
class Checks {
  public:
    void expect(bool ok, const std::string &what) {
        ++total_;
        if (ok) return;
        if (failed_.size() < 5) failed_.push_back(what);
        ++fails_;
    }
    void near(double a, double b, double tol, const std::string &what) {
        std::ostringstream os;
        os << what << ": " << a << " vs " << b << " (tol " << tol << ")";
        expect(std::abs(a - b) <= tol, os.str());
    }
    void note(const std::string &s) { notes_ += (notes_.empty() ? "" : "; ") + s; }
    bool ok() const { return fails_ == 0; }
    std::string summary() const {
        std::ostringstream os;
        os << total_ << " checks";
        if (fails_) {
            os << ", " << fails_ << " failed:";
            for (const auto &f : failed_) os << " [" << f << "]";
        }
        if (!notes_.empty()) os << "; " << notes_;
        return os.str();
    }

  private:
    std::size_t total_ = 0, fails_ = 0;
    std::vector<std::string> failed_;
    std::string notes_;
};

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(3);
    os << v;
    return os.str();
}

// Figure instance and the four-node counterexample.
void p1(Checks &c) {
    auto inst = figure_instance();
    auto s = analyze(inst.graph, inst.model, inst.sets);
    auto omega = mu_r_via_omega(inst.model, inst.sets, s.q);
    c.near(s.segments.mu_r[0], 0.0, 1e-10, "mu_r(1) segment route");
    c.near(s.segments.mu_r[1], 1.0, 1e-10, "mu_r(2) segment route");
    c.near(omega[0], 0.0, 1e-10, "mu_r(1) omega route");
    c.near(omega[1], 1.0, 1e-10, "mu_r(2) omega route");

    std::istringstream in("{\"steps\":[\"0\",\"1\",\"2\",\"3\"]}\n{\"steps\":[\"0\",\"2\",\"0\",\"2\",\"3\"]}\n");
    auto data = read_trajectories(in);
    auto est = estimate_model(data, label_set(data.labels, {"0"}), label_set(data.labels, {"3"}));
    auto m = analyze(est.graph, est.model, est.sets);
    auto naive = naive_stats(data, est, m);
    c.expect(naive.q_data[1] == 1.0, "naive q(1) == 1");
    c.expect(naive.theta_bar_data[1] == 0.0, "naive theta_bar(1) == 0");
    c.expect(m.q[1] < 1.0, "model q(1) < 1");
    c.expect(m.segments.theta_bar[1] > 0.0, "model theta_bar(1) > 0");
    c.note("model q(1) = " + fmt(m.q[1]) + ", theta_bar(1) = " + fmt(m.segments.theta_bar[1]));
}

// Identity suite on random discrete instances, plus a dense-solve oracle.
void p2(Checks &c) {
    std::mt19937_64 rng(2024);
    std::size_t smallest = 1000000, largest = 0;
    const int count = 24;
    for (int i = 0; i < count; ++i) {
        auto inst = random_discrete_instance(rng);
        smallest = std::min(smallest, inst.graph.node_count());
        largest = std::max(largest, inst.graph.node_count());
        auto s = analyze(inst.graph, inst.model, inst.sets);
        for (const auto &id : verify_identities(inst.graph, inst.model, inst.sets, s))
            c.expect(id.deviation <= 1e-8, id.name + " on instance " + std::to_string(i) + ": " + fmt(id.deviation));
        auto q = dense_committor(inst.model, inst.sets);
        double dq = 0.0;
        for (std::size_t x = 0; x < q.size(); ++x) dq = std::max(dq, std::abs(q[x] - s.q[x]));
        c.expect(dq <= 1e-8, "dense committor oracle on instance " + std::to_string(i) + ": " + fmt(dq));
    }
    c.note(std::to_string(count) + " instances, " + std::to_string(smallest) + "-" + std::to_string(largest) + " nodes");
}

// Monte Carlo against the exact pipeline for each waiting-time family.
void p3(Checks &c) {
    std::mt19937_64 rng(303);
    const std::size_t paths = 100000;
    std::size_t entries = 0;
    double worst = 0.0;
    for (auto family : {LawFamily::Exponential, LawFamily::Weibull, LawFamily::PowerLaw, LawFamily::Mixed}) {
        for (int i = 0; i < 5; ++i) {
            auto inst = random_continuous_instance(rng, family, {5, 12, 2, true});
            auto exact = analyze(inst.net.graph, inst.model, inst.sets);
            PathSampler sampler(inst.net);
            auto emp = simulate_first_passage_stats(sampler, inst.sets, {paths, 1000000, 1000u + i, 0});
            auto r = compare_with_exact(emp, exact);
            entries += r.entries;
            worst = std::max(worst, r.max_z);
            c.expect(r.pass, std::string(family_label(family)) + " instance " + std::to_string(i) + ": " + r.describe());
        }
    }
    c.note("20 instances, " + std::to_string(entries) + " compared entries, max |z| " + fmt(worst));
}

// Closed-form embedding against quadrature, the survival identity, and
// Weibull shape one against the exponential chain.
void p4(Checks &c) {
    std::mt19937_64 rng(404);
    std::uniform_real_distribution<double> rate(0.3, 3.0), shape(0.6, 3.0), expo(1.5, 6.0);
    for (int trial = 0; trial < 30; ++trial) {
        const int deg = 1 + trial % 4;
        std::vector<WaitingTimeLaw> out;
        const double k = shape(rng);
        for (int j = 0; j < deg; ++j) {
            switch (trial % 3) {
            case 0: out.push_back(exponential_law(rate(rng))); break;
            case 1: out.push_back(weibull_law(k, rate(rng))); break;
            default: out.push_back(power_law(expo(rng))); break;
            }
        }
        auto closed = embed_node_closed_form(out);
        c.expect(closed.has_value(), "closed form exists for trial " + std::to_string(trial));
        if (!closed) continue;
        auto quad = embed_node_quadrature(out);
        for (int j = 0; j < deg; ++j) c.near(closed->p[j], quad.p[j], 1e-6, "p trial " + std::to_string(trial));
        c.near(closed->kappa, quad.kappa, 1e-6, "kappa trial " + std::to_string(trial));
    }

    // a(t) = 1 - sum_j int_0^t b_j, pieces split at the table knots.
    std::vector<WaitingTimeLaw> out{exponential_law(0.7), weibull_law(0.8, 1.5), power_law(3.0),
                                    tabulated_law({0.0, 1.0, 4.0}, {1.2, 0.2, 0.0})};
    boost::math::quadrature::tanh_sinh<double> ts;
    double worst = 0.0;
    for (int i = 1; i <= 40; ++i) {
        const double t = 0.25 * i;
        std::vector<double> cuts{0.0};
        for (double k : {1.0, 4.0})
            if (k < t) cuts.push_back(k);
        cuts.push_back(t);
        double mass = 0.0;
        for (std::size_t j = 0; j < out.size(); ++j)
            for (std::size_t s = 0; s + 1 < cuts.size(); ++s)
                mass += ts.integrate([&](double u) { return jump_density_b(out, j, u); }, cuts[s], cuts[s + 1]);
        worst = std::max(worst, std::abs(survival_a(out, t) - (1.0 - mass)));
    }
    c.expect(worst <= 1e-6, "survival identity " + fmt(worst));

    for (int trial = 0; trial < 10; ++trial) {
        std::vector<WaitingTimeLaw> w, x;
        for (int j = 0; j < 1 + trial % 4; ++j) {
            const double r = rate(rng);
            w.push_back(weibull_law(1.0, r));
            x.push_back(exponential_law(r));
        }
        auto a = embed_node_closed_form(w), b = embed_node_closed_form(x);
        for (std::size_t j = 0; j < w.size(); ++j) c.near(a->p[j], b->p[j], 1e-10, "weibull k=1 p");
        c.near(a->kappa, b->kappa, 1e-10, "weibull k=1 kappa");
    }
    c.note("survival identity max gap " + fmt(worst));
}

// Ergodic closed forms, rate against a long stationary run, reversibility.
void p5(Checks &c) {
    std::mt19937_64 rng(505);
    double spread = 0.0, cross = 0.0, worst_z = 0.0;
    for (int i = 0; i < 5; ++i) {
        auto inst = random_ergodic_network(rng, i % 2 ? LawFamily::Mixed : LawFamily::Exponential, 5, 15);
        auto e = ergodic_ensemble(inst.model, inst.sets);
        spread = std::max(spread, e.z_spread);
        c.expect(e.z_spread <= 1e-10, "Z expressions instance " + std::to_string(i) + ": " + fmt(e.z_spread));
        auto sets = inst.sets.with_mu(e.mu_eq);
        auto s = analyze(inst.net.graph, inst.model, sets);
        const double d = ergodic_cross_check(e, s, sets);
        cross = std::max(cross, d);
        c.expect(d <= 1e-8, "closed forms vs pipeline instance " + std::to_string(i) + ": " + fmt(d));
        PathSampler sampler(inst.net);
        auto st = stationary_run(sampler, inst.model, inst.sets, StationaryConfig{10000000, 50u + i, 100});
        const double z = std::abs(*st.rate - *e.rate) / *st.rate_se;
        worst_z = std::max(worst_z, z);
        c.expect(z <= 3.0, "k_AB instance " + std::to_string(i) + ": " + fmt(*st.rate) + " vs " + fmt(*e.rate) +
                               ", z = " + fmt(z));
    }
    for (int i = 0; i < 5; ++i) {
        auto inst = reversible_instance(rng, 6 + 5 * i);
        auto e = ergodic_ensemble(inst.model, inst.sets);
        c.expect(e.reversible, "reversible instance detected");
        for (std::size_t x = 0; x < e.q.size(); ++x) c.near(e.q_minus[x], 1.0 - e.q[x], 1e-10, "q_minus = 1 - q");
    }
    c.note("Z spread " + fmt(spread) + ", cross-check " + fmt(cross) + ", k_AB max |z| " + fmt(worst_z));
}

// Counting identity and convergence of the estimated chain.
void p6(Checks &c) {
    std::mt19937_64 rng(606);
    for (int i = 0; i < 5; ++i) {
        auto inst = random_continuous_instance(rng, LawFamily::Mixed, {5, 40, 3, true});
        PathSampler sampler(inst.net);
        auto sample = sample_first_passage(sampler, inst.sets, {500, 1000000, 60u + i, 1});
        auto est = estimate_model(sample.data, inst.sets.a(), inst.sets.b());
        auto s = analyze(est.graph, est.model, est.sets);
        auto cs = counting_stats(sample.data, est);
        double d = 0.0;
        for (std::size_t x = 0; x < cs.theta.size(); ++x) d = std::max(d, std::abs(cs.theta[x] - s.theta[x]));
        for (std::size_t e = 0; e < cs.flux.size(); ++e) d = std::max(d, std::abs(cs.flux[e] - s.flux.total[e]));
        c.expect(d <= 1e-10, "counting identity dataset " + std::to_string(i) + ": " + fmt(d));
    }

    auto inst = random_discrete_instance(rng, {20, 20, 2, true});
    auto truth = analyze(inst.graph, inst.model, inst.sets);
    PathSampler sampler(inst.graph, inst.model);
    double err_small = 0.0, err_large = 0.0;
    for (std::size_t samples : {std::size_t{1000}, std::size_t{100000}}) {
        auto sample = sample_first_passage(sampler, inst.sets, {samples, 1000000, samples, 1});
        auto est = estimate_model(sample.data, inst.sets.a(), inst.sets.b());
        auto s = analyze(est.graph, est.model, est.sets);
        // Estimated statistics back on the original ids; dropped nodes and edges are zero.
        std::vector<double> theta(inst.graph.node_count(), 0.0), flux(inst.graph.edge_count(), 0.0);
        for (std::size_t x = 0; x < est.source.size(); ++x) theta[est.source[x]] = s.theta[x];
        for (std::size_t e = 0; e < est.graph.edge_count(); ++e) {
            const Edge ed = est.graph.edge(e);
            auto orig = inst.graph.edge_index(est.source[ed.from], est.source[ed.to]);
            if (orig) flux[*orig] = s.flux.total[e];
        }
        double err = 0.0;
        for (std::size_t x = 0; x < theta.size(); ++x) err = std::max(err, std::abs(theta[x] - truth.theta[x]));
        (samples == 1000 ? err_small : err_large) = err;
        if (samples == 100000) {
            auto emp = segment_and_count(sample.data, inst.graph, inst.sets.a());
            McGate gate(samples);
            for (std::size_t x = 0; x < theta.size(); ++x) gate.add("theta", theta[x], emp.theta.se[x], truth.theta[x]);
            for (std::size_t e = 0; e < flux.size(); ++e) gate.add("J", flux[e], emp.flux.se[e], truth.flux.total[e]);
            auto r = gate.result();
            c.expect(r.pass, "estimate within 3 sigma at 1e5: " + r.describe());
            c.note("3 sigma gate: " + r.describe());
        }
    }
    c.expect(err_large < err_small, "max error 1e5 (" + fmt(err_large) + ") < 1e3 (" + fmt(err_small) + ")");
    c.note("max theta error " + fmt(err_small) + " at 1e3, " + fmt(err_large) + " at 1e5");
}

// Arrival densities on a grid.
void p7(Checks &c) {
    DirectedGraph g(5, {{0, 1}, {0, 4}, {1, 2}, {1, 4}, {2, 3}, {2, 4}});
    ContinuousNetwork net(g, {exponential_law(1.0), exponential_law(0.5), weibull_law(2.0, 1.0),
                              weibull_law(2.0, 0.6), power_law(4.0), power_law(2.5)});
    auto m = embed_discrete(net);
    const double prod = m.prob(0, 1) * m.prob(1, 2) * m.prob(2, 3);
    const double h = 1e-3;
    auto r = arrival_density_rk(net, {0, 1, 2, 3}, h, 30000);
    const double mass = trapezoid(r.r.back(), h);
    c.near(mass, prod, 1e-4, "integral of r_3 vs product of p");

    DirectedGraph two(3, {{0, 1}, {1, 2}});
    ContinuousNetwork chain(two, {exponential_law(1.0), exponential_law(1.0)});
    auto r2 = arrival_density_rk(chain, {0, 1, 2}, h, 20000);
    double sup = 0.0;
    for (std::size_t i = 0; i < r2.r[1].size(); ++i) {
        const double t = static_cast<double>(i) * h;
        sup = std::max(sup, std::abs(r2.r[1][i] - t * std::exp(-t)));
    }
    c.expect(sup <= 1e-4, "r_2 sup-norm " + fmt(sup));
    c.note("mass gap " + fmt(std::abs(mass - prod)) + ", r_2 sup-norm " + fmt(sup));
}

// 30 x 30 maze through the full pipeline.
void p8(Checks &c) {
    std::mt19937_64 rng(808);
    auto inst = maze_instance(rng, 30, 30);
    require_assumption_1(inst.graph, inst.model, inst.sets);
    auto s = analyze(inst.graph, inst.model, inst.sets);
    double worst = 0.0;
    for (const auto &id : verify_identities(inst.graph, inst.model, inst.sets, s)) {
        worst = std::max(worst, id.deviation);
        c.expect(id.deviation <= 1e-8, id.name + ": " + fmt(id.deviation));
    }
    c.note(std::to_string(inst.graph.node_count()) + " nodes, mean length " + fmt(s.lengths.mean_hitting) +
           ", worst identity " + fmt(worst));
}

struct Criterion {
    const char *id;
    double limit_seconds; ///< 0 = no runtime limit
    std::function<void(Checks &)> run;
};

} // namespace

int main() {
    const std::vector<Criterion> criteria{
        {"P1", 1.0, p1},   {"P2", 30.0, p2}, {"P3", 300.0, p3}, {"P4", 0.0, p4},
        {"P5", 300.0, p5}, {"P6", 0.0, p6},  {"P7", 0.0, p7},   {"P8", 10.0, p8},
    };
    bool all = true;
    for (const auto &cr : criteria) {
        Checks c;
        const auto start = std::chrono::steady_clock::now();
        try {
            cr.run(c);
        } catch (const std::exception &e) {
            c.expect(false, std::string("exception: ") + e.what());
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        bool ok = c.ok();
        std::string timing = fmt(secs) + " s";
        if (cr.limit_seconds > 0.0) {
            timing += " of " + fmt(cr.limit_seconds) + " s";
            ok = ok && secs < cr.limit_seconds;
        }
        all = all && ok;
        std::cout << cr.id << ' ' << (ok ? "PASS" : "FAIL") << " (" << timing << ") " << c.summary() << std::endl;
    }
    return all ? 0 : 1;
}
