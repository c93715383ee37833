// fpp_cli: analyze, ergodic, estimate, simulate, rank.
//
// Exit codes: 0 ok, 2 validation or usage error, 3 numerical/runtime error.

#include <CLI11.hpp>

#include <chrono>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "fpp/fpp.hpp"

namespace {

using fpp::io::json;

struct Common {
    std::string graph;
    std::string out;
    bool record_timing = false;
};

class Timer {
  public:
    explicit Timer(bool on) : on_(on), start_(std::chrono::steady_clock::now()) {}
    std::optional<double> seconds() const {
        if (!on_) return std::nullopt;
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

  private:
    bool on_;
    std::chrono::steady_clock::time_point start_;
};

void write_text(const std::string &path, const std::string &text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw fpp::ValidationError("cannot write '" + path + "'");
    out << text;
}

std::string dot_path(const std::string &dot_out, const std::string &out) {
    if (!dot_out.empty()) return dot_out;
    if (out.empty() || out == "-") throw fpp::ValidationError("--dot needs --dot-out or --out to name the DOT file");
    return out + ".dot";
}

/// Throws with the failing node labels.
void require_valid(const fpp::io::GraphInput &in) {
    auto report = fpp::validate_assumption_1(in.graph, in.model, in.sets);
    if (!report.ok) {
        std::string names;
        auto list = [&](const char *what, const std::vector<fpp::NodeId> &ids) {
            if (ids.empty()) return;
            names += std::string(what) + ":";
            for (auto x : ids) names += " " + in.graph.label(x);
            names += "; ";
        };
        list("nodes reaching neither A nor B", report.interior_unreaching);
        list("A-nodes that cannot reach B", report.sources_missing_target);
        list("sinks outside B", report.sinks_outside_target);
        throw fpp::ValidationError("graph fails validation: " + names);
    }
}

fpp::EnsembleStats analyze_or_report(const fpp::io::GraphInput &in) {
    require_valid(in);
    return fpp::analyze(in.graph, in.model, in.sets);
}

int run_analyze(const Common &c, const std::string &dot, const std::string &dot_out) {
    Timer timer(c.record_timing);
    auto in = fpp::io::read_graph_file(c.graph);
    auto s = analyze_or_report(in);
    auto ids = fpp::verify_identities(in.graph, in.model, in.sets, s);
    json config{{"dot", dot}};
    auto body = fpp::io::stats_json(in.graph, in.model, in.sets, s, ids);
    auto doc = fpp::io::document("ensemble_stats", fpp::io::manifest("analyze", {c.graph}, config, std::nullopt, timer.seconds()),
                                 std::move(body));
    if (!dot.empty()) {
        const auto kind = fpp::io::parse_flux_kind(dot);
        write_text(dot_path(dot_out, c.out), fpp::io::to_dot(in.graph, in.sets, s, kind));
    }
    write_text(c.out, fpp::io::dump(doc));
    return 0;
}

int run_ergodic(const Common &c, bool cross_check, bool allow_periodic) {
    Timer timer(c.record_timing);
    auto in = fpp::io::read_graph_file(c.graph);
    const fpp::ErgodicOptions opt{!allow_periodic};
    auto e = fpp::ergodic_ensemble(in.model, in.sets, opt);
    auto sets = in.sets.with_mu(e.mu_eq);
    auto s = analyze_or_report({in.graph, std::nullopt, in.model, sets});
    auto body = fpp::io::stats_json(in.graph, in.model, sets, s, fpp::verify_identities(in.graph, in.model, sets, s));
    body["ergodic"] = fpp::io::ergodic_json(e);
    if (cross_check) body["ergodic"]["cross_check_max_deviation"] = fpp::ergodic_cross_check(e, s, sets);
    json config{{"cross_check", cross_check}, {"allow_periodic", allow_periodic}};
    auto doc = fpp::io::document("ergodic_stats", fpp::io::manifest("ergodic", {c.graph}, config, std::nullopt, timer.seconds()),
                                 std::move(body));
    write_text(c.out, fpp::io::dump(doc));
    return 0;
}

int run_estimate(const Common &c, const std::string &path, const std::vector<std::string> &a_names,
                 const std::vector<std::string> &b_names) {
    Timer timer(c.record_timing);
    std::ifstream file(path);
    if (!file) throw fpp::ValidationError("cannot open '" + path + "'");
    auto data = fpp::read_trajectories(file);
    std::vector<std::string> missing;
    auto a = fpp::label_set(data.labels, a_names, &missing);
    auto b = fpp::label_set(data.labels, b_names, &missing);
    if (!missing.empty()) throw fpp::ValidationError("label '" + missing.front() + "' never occurs in the trajectories");
    auto est = fpp::estimate_model(data, a, b);
    auto s = analyze_or_report({est.graph, std::nullopt, est.model, est.sets});
    auto naive = fpp::naive_stats(data, est, s);
    auto counts = fpp::counting_stats(data, est);
    auto body = fpp::io::stats_json(est.graph, est.model, est.sets, s, fpp::verify_identities(est.graph, est.model, est.sets, s));
    body["trajectories"] = data.size();
    body["counting"] = {{"theta", counts.theta}, {"J", counts.flux}, {"mean_length", counts.mean_length}};
    body["naive"] = fpp::io::naive_json(naive);
    json config{{"A", a_names}, {"B", b_names}};
    auto doc = fpp::io::document("estimate", fpp::io::manifest("estimate", {path}, config, std::nullopt, timer.seconds()),
                                 std::move(body));
    write_text(c.out, fpp::io::dump(doc));
    return 0;
}

struct SimulateFlags {
    std::string mode = "first-passage";
    std::size_t samples = 10000;
    std::size_t max_steps = 1000000;
    std::uint64_t seed = 1;
    unsigned threads = 0;
    std::size_t length = 1000000;
    std::size_t batches = 100;
    std::string trajectories_out;
    bool allow_periodic = false;
};

int run_simulate(const Common &c, const SimulateFlags &f) {
    Timer timer(c.record_timing);
    auto in = fpp::io::read_graph_file(c.graph);
    std::optional<fpp::PathSampler> sampler;
    if (in.net) sampler.emplace(*in.net);
    else sampler.emplace(in.graph, in.model, true);
    // threads is left out of the config: results do not depend on it.
    json config{{"mode", f.mode}};
    json body;
    std::string kind;
    if (f.mode == "first-passage") {
        config["samples"] = f.samples;
        config["max_steps"] = f.max_steps;
        require_valid(in);
        const fpp::SimulationConfig cfg{f.samples, f.max_steps, f.seed, f.threads};
        fpp::EmpiricalStats s;
        if (!f.trajectories_out.empty()) {
            auto sampled = fpp::sample_first_passage(*sampler, in.sets, cfg);
            std::ostringstream os;
            fpp::write_trajectories(os, sampled.data);
            write_text(f.trajectories_out, os.str());
            s = fpp::segment_and_count(sampled.data, in.graph, in.sets.a());
            s.rejections = sampled.rejections;
        } else {
            s = fpp::simulate_first_passage_stats(*sampler, in.sets, cfg);
        }
        if (s.rejections.warning) std::cerr << "warning: " << *s.rejections.warning << "\n";
        body = fpp::io::empirical_json(in.graph, s);
        kind = "empirical_stats";
    } else if (f.mode == "stationary") {
        config["length"] = f.length;
        config["batches"] = f.batches;
        config["allow_periodic"] = f.allow_periodic;
        const fpp::StationaryConfig cfg{f.length, f.seed, f.batches};
        auto s = fpp::stationary_run(*sampler, in.model, in.sets, cfg, fpp::ErgodicOptions{!f.allow_periodic});
        body = fpp::io::stationary_json(in.graph, s);
        kind = "stationary_stats";
    } else {
        throw fpp::ValidationError("--mode expects first-passage or stationary");
    }
    auto doc = fpp::io::document(kind, fpp::io::manifest("simulate", {c.graph}, config, f.seed, timer.seconds()), std::move(body));
    write_text(c.out, fpp::io::dump(doc));
    return 0;
}

int run_rank(const Common &c, std::size_t top_k) {
    Timer timer(c.record_timing);
    auto in = fpp::io::read_graph_file(c.graph);
    auto s = analyze_or_report(in);
    json config{{"top_k", top_k}};
    auto doc = fpp::io::document("ranking", fpp::io::manifest("rank", {c.graph}, config, std::nullopt, timer.seconds()),
                                 fpp::io::rank_json(in.graph, fpp::rank_report(s, top_k)));
    write_text(c.out, fpp::io::dump(doc));
    return 0;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"First passage path ensemble statistics on directed graphs"};
    app.require_subcommand(1);
    Common common;
    auto shared = [&](CLI::App *sub, bool needs_graph) {
        if (needs_graph) sub->add_option("--graph", common.graph, "graph JSON document")->required();
        sub->add_option("--out", common.out, "output path (stdout when omitted)");
        sub->add_flag("--record-timing", common.record_timing, "add wall-clock seconds to the manifest");
    };

    std::string dot, dot_out;
    auto *analyze = app.add_subcommand("analyze", "exact ensemble statistics");
    shared(analyze, true);
    analyze->add_option("--dot", dot, "also write a DOT graph weighted by this flux")
        ->check(CLI::IsMember({"reactive", "nonreactive", "total"}));
    analyze->add_option("--dot-out", dot_out, "DOT output path (default: <out>.dot)");

    bool cross_check = false, allow_periodic = false;
    auto *ergodic = app.add_subcommand("ergodic", "equilibrium ensemble of an ergodic chain");
    shared(ergodic, true);
    ergodic->add_flag("--cross-check", cross_check, "compare closed forms with the generic pipeline at mu = mu_eq");
    ergodic->add_flag("--allow-periodic", allow_periodic, "accept irreducible periodic chains");

    std::string traj;
    std::vector<std::string> a_names, b_names;
    auto *estimate = app.add_subcommand("estimate", "estimate a model from first passage trajectories");
    shared(estimate, false);
    estimate->add_option("--trajectories", traj, "JSON-lines trajectory file")->required();
    estimate->add_option("--A", a_names, "source labels")->required()->delimiter(',');
    estimate->add_option("--B", b_names, "target labels")->required()->delimiter(',');

    SimulateFlags sim;
    auto *simulate = app.add_subcommand("simulate", "Monte Carlo sampling");
    shared(simulate, true);
    simulate->add_option("--mode", sim.mode, "first-passage or stationary")
        ->check(CLI::IsMember({"first-passage", "stationary"}));
    simulate->add_option("--samples", sim.samples, "first passage paths")->check(CLI::PositiveNumber);
    simulate->add_option("--max-steps", sim.max_steps, "jump cap per path")->check(CLI::PositiveNumber);
    simulate->add_option("--seed", sim.seed, "random seed");
    simulate->add_option("--threads", sim.threads, "worker threads (0 = all cores); output does not depend on it");
    simulate->add_option("--length", sim.length, "stationary run length in jumps")->check(CLI::PositiveNumber);
    simulate->add_option("--batches", sim.batches, "batches for stationary standard errors")->check(CLI::PositiveNumber);
    simulate->add_option("--trajectories-out", sim.trajectories_out, "also write the sampled paths as JSON lines");
    simulate->add_flag("--allow-periodic", sim.allow_periodic, "accept irreducible periodic chains (stationary mode)");

    std::size_t top_k = 10;
    auto *rank = app.add_subcommand("rank", "top nodes and edges per statistic");
    shared(rank, true);
    rank->add_option("--top-k", top_k, "entries per metric")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp &e) {
        return app.exit(e);
    } catch (const CLI::ParseError &e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*analyze) return run_analyze(common, dot, dot_out);
        if (*ergodic) return run_ergodic(common, cross_check, allow_periodic);
        if (*estimate) return run_estimate(common, traj, a_names, b_names);
        if (*simulate) return run_simulate(common, sim);
        if (*rank) return run_rank(common, top_k);
    } catch (const fpp::ValidationError &e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return 2;
    } catch (const fpp::NumericalError &e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 2;
}
