// Command-line front end: one-shot estimation, per-update tracking, lemma
// verification suites and space/throughput grids, all with reproducible
// JSON reports. Reports are byte-stable across reruns and thread counts;
// wall-clock fields stay zero unless --timing is passed.

#include <chrono>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "f0/harness.hpp"
#include "f0/stream.hpp"

using json = nlohmann::ordered_json;
using namespace f0;

namespace {

struct CommonOpts {
    double eps = 0.1;
    double delta = 1.0 / 128;
    int universe_bits = 32;
    std::string mode = "high-accuracy";
    std::uint64_t seed = 1;
    std::size_t trials = 1;
    int threads = 1;
    bool timing = false;
    bool json_stdout = false;
    std::string report_path;
    std::string input_path;
    std::string format = "text-lines";
    // generated stream shape
    std::uint64_t distinct = 10000;
    std::string dup = "none";
    std::uint32_t dup_k = 3;
    double zipf_s = 1.1;
    std::string order = "shuffled";
    bool no_exact = false;
};

void add_common(CLI::App* cmd, CommonOpts& o, bool with_algo = true) {
    if (with_algo) {
        cmd->add_option("--eps", o.eps, "accuracy parameter");
        cmd->add_option("--delta", o.delta, "failure probability");
        cmd->add_option("--mode", o.mode, "estimator: constant|high-accuracy|strong-tracking")
            ->check(CLI::IsMember({"constant", "high-accuracy", "strong-tracking"}));
    }
    cmd->add_option("--universe-bits", o.universe_bits, "log2 of the element universe");
    cmd->add_option("--seed", o.seed, "master seed");
    cmd->add_option("--trials", o.trials, "number of independent trials");
    cmd->add_option("--threads", o.threads, "worker threads (results are identical at any level)");
    cmd->add_flag("--timing", o.timing, "include measured wall-clock fields in reports");
    cmd->add_flag("--json", o.json_stdout, "print the JSON report to stdout");
    cmd->add_option("--report", o.report_path, "write the JSON report to this file");
    cmd->add_option("--input", o.input_path, "read the stream from a file instead of generating");
    cmd->add_option("--format", o.format, "input format: text-lines|u64le")
        ->check(CLI::IsMember({"text-lines", "u64le"}));
    cmd->add_option("--distinct", o.distinct, "distinct elements in the generated stream");
    cmd->add_option("--dup", o.dup, "duplication: none|uniform|zipf")
        ->check(CLI::IsMember({"none", "uniform", "zipf"}));
    cmd->add_option("--dup-k", o.dup_k, "copies per element for --dup uniform");
    cmd->add_option("--zipf-s", o.zipf_s, "zipf exponent for --dup zipf");
    cmd->add_option("--order", o.order, "arrival order: sequential|shuffled|adversarial")
        ->check(CLI::IsMember({"sequential", "shuffled", "adversarial"}));
    cmd->add_flag("--no-exact", o.no_exact, "skip the exact oracle");
}

AlgoMode parse_mode(const std::string& m) {
    if (m == "constant") return AlgoMode::constant;
    if (m == "strong-tracking") return AlgoMode::strong_tracking;
    return AlgoMode::high_accuracy;
}

StreamSpec stream_spec(const CommonOpts& o) {
    StreamSpec s;
    s.universe_bits = o.universe_bits;
    s.distinct_count = o.distinct;
    s.duplication = o.dup == "uniform" ? Duplication::uniform_k
                    : o.dup == "zipf"  ? Duplication::zipf
                                       : Duplication::none;
    s.dup_k = o.dup_k;
    s.zipf_s = o.zipf_s;
    s.order = o.order == "sequential"    ? Order::sequential
              : o.order == "adversarial" ? Order::adversarial_blocks
                                         : Order::shuffled;
    return s;
}

std::vector<std::uint64_t> read_stream_file(const std::string& path, const std::string& format) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open input file: " + path);
    std::vector<std::uint64_t> out;
    if (format == "u64le") {
        char buf[8];
        while (in.read(buf, 8)) {
            std::uint64_t v = 0;
            for (int i = 0; i < 8; ++i)
                v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[i])) << (8 * i);
            out.push_back(v);
        }
    } else {
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            out.push_back(std::stoull(line));
        }
    }
    return out;
}

json config_json(const CommonOpts& o, bool with_algo = true) {
    json c;
    if (with_algo) {
        c["mode"] = o.mode;
        c["eps"] = o.eps;
        c["delta"] = o.delta;
    }
    c["universe_bits"] = o.universe_bits;
    c["trials"] = o.trials;
    if (!o.input_path.empty()) {
        c["input"] = o.input_path;
        c["format"] = o.format;
    } else {
        c["stream"] = {{"distinct", o.distinct},
                       {"dup", o.dup},
                       {"dup_k", o.dup_k},
                       {"zipf_s", o.zipf_s},
                       {"order", o.order}};
    }
    return c;
}

void emit_report(const CommonOpts& o, const json& report) {
    std::string text = report.dump(2);
    text.push_back('\n');
    if (!o.report_path.empty()) {
        std::ofstream out(o.report_path, std::ios::binary);
        out << text;
    }
    if (o.json_stdout || o.report_path.empty()) std::cout << text;
}

json trace_json(const std::vector<std::pair<std::uint64_t, std::uint64_t>>& trace) {
    json t = json::array();
    for (auto& [tt, bits] : trace) t.push_back({tt, bits});
    return t;
}

class Stopwatch {
public:
    explicit Stopwatch(bool enabled) : enabled_(enabled), start_(clock::now()) {}
    std::uint64_t ms() const {
        if (!enabled_) return 0;
        return static_cast<std::uint64_t>(
            std::chrono::duration_cast<std::chrono::milliseconds>(clock::now() - start_)
                .count());
    }

private:
    using clock = std::chrono::steady_clock;
    bool enabled_;
    clock::time_point start_;
};

int cmd_estimate(const CommonOpts& o) {
    Stopwatch watch(o.timing);
    AlgoConfig cfg;
    cfg.mode = parse_mode(o.mode);
    cfg.eps = o.eps;
    cfg.delta = o.delta;
    cfg.universe_bits = o.universe_bits;

    json report;
    report["command"] = "estimate";
    report["config"] = config_json(o);
    report["seeds"] = {{"master", o.seed}};

    if (!o.input_path.empty()) {
        std::vector<std::uint64_t> stream = read_stream_file(o.input_path, o.format);
        double estimate = 0.0;
        std::size_t space_bits = 0;
        if (cfg.mode == AlgoMode::constant) {
            TrackerConfig tc;
            tc.universe_bits = o.universe_bits;
            tc.delta = o.delta;
            ConstantTracker t(tc, o.seed);
            for (auto x : stream) t.update(x);
            estimate = t.query();
            space_bits = t.persisted_bits();
        } else if (cfg.mode == AlgoMode::high_accuracy) {
            HighAccuracyEstimator h(o.eps, o.delta, o.universe_bits, o.seed);
            for (auto x : stream) h.update(x);
            estimate = h.query();
            space_bits = h.serialized_bits();
        } else {
            StrongTracker t(o.eps, o.delta, o.universe_bits, o.seed);
            double rep = 0;
            for (auto x : stream) rep = t.update_and_report(x).reported;
            estimate = rep;
            space_bits = t.serialized_bits();
        }
        report["estimate"] = estimate;
        report["space_bits"] = space_bits;
        if (!o.no_exact) {
            std::uint64_t exact = exact_f0(stream);
            report["exact"] = exact;
            report["final_rel_error"] =
                exact == 0 ? estimate : std::abs(estimate - double(exact)) / double(exact);
        }
    } else {
        AggregateReport agg = run_trials(cfg, stream_spec(o), o.trials, o.seed, o.threads);
        const TrialReport& first = agg.per_trial.front();
        report["estimate"] = first.estimate;
        report["exact"] = first.exact;
        report["max_rel_error"] = agg.max_rel_error_max;
        report["final_rel_error"] = first.final_rel_error;
        report["failure_rate"] = agg.failure_rate;
        report["wilson_ci"] = {agg.wilson.lo, agg.wilson.hi};
        report["space_bits_trace"] = trace_json(first.space_trace);
        report["space_bits_max"] = agg.space_bits_max;
        report["success_tolerance"] = cfg.derived_tolerance();
        report["monotone"] = agg.all_monotone;
    }
    report["runtime_ms"] = watch.ms();
    emit_report(o, report);
    return 0;
}

int cmd_track(const CommonOpts& o) {
    std::vector<std::uint64_t> stream = !o.input_path.empty()
                                            ? read_stream_file(o.input_path, o.format)
                                            : [&] {
                                                  StreamSpec s = stream_spec(o);
                                                  s.seed = derive_seed(o.seed, 0x51);
                                                  return gen_stream(s);
                                              }();
    std::uint64_t algo_seed = derive_seed(o.seed, 0x52);
    std::ostream* out = &std::cout;
    std::ofstream file;
    if (!o.report_path.empty()) {
        file.open(o.report_path, std::ios::binary);
        out = &file;
    }
    std::unordered_set<std::uint64_t> seen;
    auto line = [&](std::uint64_t t, double estimate, double raw) {
        json l;
        l["t"] = t;
        l["estimate"] = estimate;
        if (raw >= 0) l["raw_median"] = raw;
        if (!o.no_exact) l["exact"] = seen.size();
        (*out) << l.dump() << "\n";
    };

    AlgoMode mode = parse_mode(o.mode);
    std::uint64_t t = 0;
    if (mode == AlgoMode::constant) {
        TrackerConfig tc;
        tc.universe_bits = o.universe_bits;
        tc.delta = o.delta;
        ConstantTracker tracker(tc, algo_seed);
        for (auto x : stream) {
            ++t;
            seen.insert(x);
            tracker.update(x);
            line(t, tracker.query(), -1);
        }
    } else if (mode == AlgoMode::strong_tracking) {
        StrongTracker tracker(o.eps, o.delta, o.universe_bits, algo_seed);
        for (auto x : stream) {
            ++t;
            seen.insert(x);
            auto rep = tracker.update_and_report(x);
            line(t, rep.reported, rep.raw_median);
        }
    } else {
        HighAccuracyEstimator h(o.eps, o.delta, o.universe_bits, algo_seed);
        for (auto x : stream) {
            ++t;
            seen.insert(x);
            h.update(x);
            line(t, h.query(), -1);
        }
    }
    return 0;
}

int cmd_verify(const CommonOpts& o, const std::string& suite, std::uint64_t walk_T,
               std::size_t walk_trials, std::uint64_t bb_K, std::uint64_t bb_R, int bb_q,
               std::size_t bb_trials, std::size_t phi_trials, std::size_t tail_seeds) {
    Stopwatch watch(o.timing);
    json report;
    report["command"] = "verify";
    report["suite"] = suite;
    report["seeds"] = {{"master", o.seed}};

    if (suite == "phi" || suite == "all") {
        json rows = json::array();
        for (auto [k, t] : std::vector<std::pair<std::uint64_t, std::uint64_t>>{
                 {100, 5}, {1000, 50}, {10000, 500}}) {
            auto [mean, se] = phi_mc_oracle(k, t, phi_trials, derive_seed(o.seed, k), o.threads);
            OccupancyModel m(k);
            double closed = m.phi(double(t));
            rows.push_back({{"K", k},
                            {"t", t},
                            {"closed_form", closed},
                            {"mc_mean", mean},
                            {"mc_se", se},
                            {"within_3se", std::abs(closed - mean) <= 3 * se}});
        }
        report["phi"] = rows;
    }
    if (suite == "random-walk" || suite == "all") {
        auto rows = verify_random_walk_lemma(walk_T, walk_trials, {2, 4, 8},
                                             derive_seed(o.seed, 2), o.threads);
        json jr = json::array();
        double c = 0;
        for (const auto& r : rows) {
            c = std::max(c, r.fitted_c);
            jr.push_back({{"lambda", r.lambda}, {"exceed", r.exceed}, {"rate", r.rate}});
        }
        report["random_walk"] = {{"T", walk_T}, {"trials", walk_trials}, {"rows", jr},
                                 {"fitted_c", c}};
    }
    if (suite == "balls-bins" || suite == "all") {
        auto res = verify_balls_bins(bb_K, bb_R, bb_q, bb_trials, derive_seed(o.seed, 3),
                                     o.threads);
        report["balls_bins"] = {{"K", bb_K},
                                {"R", bb_R},
                                {"q", bb_q},
                                {"trials", bb_trials},
                                {"p75_scaled", res.p75_scaled},
                                {"p75_scaled_baseline", res.p75_scaled_baseline}};
    }
    if (suite == "subexp" || suite == "all") {
        auto rows = verify_subexp_tails(std::uint64_t(1) << 14, tail_seeds, 2, 8,
                                        derive_seed(o.seed, 4), o.threads);
        json jr = json::array();
        bool ok = true;
        for (const auto& r : rows) {
            ok &= r.rate <= r.bound;
            jr.push_back({{"lambda", r.lambda}, {"rate", r.rate}, {"bound", r.bound}});
        }
        report["subexp_tails"] = {{"f0", std::uint64_t(1) << 14},
                                  {"seeds", tail_seeds},
                                  {"rows", jr},
                                  {"within_bound", ok}};
    }
    report["runtime_ms"] = watch.ms();
    emit_report(o, report);
    return 0;
}

int cmd_bench(const CommonOpts& o, std::vector<double> eps_list,
              std::vector<double> delta_list) {
    Stopwatch watch(o.timing);
    if (eps_list.empty()) eps_list = {0.2, 0.1};
    if (delta_list.empty()) delta_list = {1.0 / 8, 1.0 / 32, 1.0 / 128};
    json rows = json::array();
    StreamSpec base = stream_spec(o);
    for (double eps : eps_list) {
        for (double delta : delta_list) {
            AlgoMode mode = parse_mode(o.mode);
            std::uint64_t total_updates = 0;
            std::uint64_t size_bits = 0;
            Stopwatch inner(o.timing);
            for (std::size_t t = 0; t < o.trials; ++t) {
                StreamSpec s = base;
                s.seed = derive_seed(o.seed, 1000 * t + 7);
                std::vector<std::uint64_t> stream = gen_stream(s);
                total_updates += stream.size();
                std::uint64_t aseed = derive_seed(o.seed, 1000 * t + 8);
                if (mode == AlgoMode::constant) {
                    TrackerConfig tc;
                    tc.universe_bits = o.universe_bits;
                    tc.delta = delta;
                    ConstantTracker tr(tc, aseed);
                    for (auto x : stream) tr.update(x);
                    size_bits += tr.persisted_bits();
                } else if (mode == AlgoMode::strong_tracking) {
                    StrongTracker tr(eps, delta, o.universe_bits, aseed);
                    for (auto x : stream) tr.update_and_report(x);
                    size_bits += tr.serialized_bits();
                } else {
                    HighAccuracyEstimator h(eps, delta, o.universe_bits, aseed);
                    for (auto x : stream) h.update(x);
                    size_bits += h.serialized_bits();
                }
            }
            double mupds = 0.0;
            if (o.timing) {
                double secs = double(inner.ms()) / 1000.0;
                if (secs > 0) mupds = double(total_updates) / 1e6 / secs;
            }
            rows.push_back({{"eps", eps},
                            {"delta", delta},
                            {"mean_serialized_bits", size_bits / o.trials},
                            {"updates", total_updates},
                            {"mupdates_per_sec", mupds}});
        }
    }
    json report;
    report["command"] = "bench";
    report["config"] = config_json(o);
    report["seeds"] = {{"master", o.seed}};
    report["rows"] = rows;
    report["runtime_ms"] = watch.ms();
    emit_report(o, report);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"distinct-elements sketching: estimation, tracking, verification"};
    app.require_subcommand(1);

    CommonOpts eo, to, vo, bo;
    CLI::App* estimate = app.add_subcommand("estimate", "one-shot estimate over a stream");
    add_common(estimate, eo);

    CLI::App* track = app.add_subcommand("track", "per-update estimates as JSON lines");
    add_common(track, to);

    CLI::App* verify = app.add_subcommand("verify", "probabilistic building-block suites");
    add_common(verify, vo, false);
    std::string suite = "all";
    std::uint64_t walk_T = 1 << 14, bb_K = 10000, bb_R = 500;
    std::size_t walk_trials = 10000, bb_trials = 2000, phi_trials = 100000, tail_seeds = 1000;
    int bb_q = 16;
    verify->add_option("--suite", suite, "phi|random-walk|balls-bins|subexp|all")
        ->check(CLI::IsMember({"phi", "random-walk", "balls-bins", "subexp", "all"}));
    verify->add_option("--walk-T", walk_T, "random-walk horizon (power of two)");
    verify->add_option("--walk-trials", walk_trials, "random-walk trials");
    verify->add_option("--bb-K", bb_K, "balls-and-bins bins");
    verify->add_option("--bb-R", bb_R, "balls-and-bins throws (<= K/20)");
    verify->add_option("--bb-q", bb_q, "balls-and-bins independence degree");
    verify->add_option("--bb-trials", bb_trials, "balls-and-bins trials");
    verify->add_option("--phi-trials", phi_trials, "occupancy oracle trials");
    verify->add_option("--tail-seeds", tail_seeds, "hash seeds for the tail suite");

    CLI::App* bench = app.add_subcommand("bench", "space and throughput over a config grid");
    add_common(bench, bo);
    std::vector<double> eps_list, delta_list;
    bench->add_option("--eps-list", eps_list, "grid of accuracy parameters")->delimiter(',');
    bench->add_option("--delta-list", delta_list, "grid of failure probabilities")
        ->delimiter(',');

    CLI11_PARSE(app, argc, argv);

    try {
        if (estimate->parsed()) return cmd_estimate(eo);
        if (track->parsed()) return cmd_track(to);
        if (verify->parsed())
            return cmd_verify(vo, suite, walk_T, walk_trials, bb_K, bb_R, bb_q, bb_trials,
                              phi_trials, tail_seeds);
        if (bench->parsed()) return cmd_bench(bo, eps_list, delta_list);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
