// Command-line front end: run a scenario, sweep offered loads, execute the
// tail-at-scale and power-management experiments, or desk-validate the
// engine against closed forms.
//
// Exit codes: 0 success, 1 configuration problems, 2 runtime errors.
// UQSIM_LOG={info,debug} adds progress output on stderr.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "uqsim/uqsim.hpp"

namespace {

int log_level() {
    const char* v = std::getenv("UQSIM_LOG");
    if (!v) return 0;
    std::string s(v);
    if (s == "debug") return 2;
    if (s == "info") return 1;
    return 0;
}

void log_info(const std::string& msg) {
    if (log_level() >= 1) std::cerr << "[uqsim] " << msg << "\n";
}

struct ScenarioArgs {
    std::string dir;
    std::string builtin;
};

uqsim::Scenario resolve_scenario(const ScenarioArgs& args) {
    if (!args.dir.empty() && !args.builtin.empty())
        throw uqsim::InvalidParameterError("--scenario and --builtin are mutually exclusive");
    if (!args.dir.empty()) {
        log_info("loading scenario from " + args.dir);
        return uqsim::load_scenario(args.dir);
    }
    if (!args.builtin.empty()) {
        log_info("generating builtin scenario " + args.builtin);
        return uqsim::generate_builtin_scenario(uqsim::parse_builtin(args.builtin));
    }
    throw uqsim::InvalidParameterError("one of --scenario or --builtin is required");
}

void add_scenario_flags(CLI::App* cmd, ScenarioArgs& args) {
    cmd->add_option("--scenario", args.dir, "Scenario directory (five JSON inputs)");
    cmd->add_option("--builtin", args.builtin,
                    "Builtin scenario: two_tier, three_tier, rpc_echo, social_network, "
                    "load_balance:K, fanout:K, tail_at_scale:N,FRAC,FACTOR");
}

void write_output(const std::string& text, const std::string& out_path) {
    if (out_path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw uqsim::IoError("cannot write " + out_path);
    out << text;
}

std::string render(const uqsim::SweepResult& result, const std::string& format) {
    if (format == "json") return uqsim::sweep_to_json(result).dump(2) + "\n";
    return uqsim::sweep_to_csv(result);
}

int cmd_run(const ScenarioArgs& sargs, std::uint64_t seed, bool seed_set, double duration,
            double qps, const std::string& out, const std::string& format) {
    uqsim::Scenario s = resolve_scenario(sargs);
    if (qps > 0) s.client.load_pattern = {uqsim::LoadPattern::Kind::constant, qps, "", {}};
    uqsim::RunOptions opts;
    if (seed_set) opts.seed = seed;
    if (duration > 0) {
        opts.duration_s = duration;
        opts.warmup_s = 0.1 * duration;
    }
    uqsim::RunReport rep = uqsim::Simulation(std::move(s), opts).run();
    log_info("events=" + std::to_string(rep.events_processed) +
             " completed=" + std::to_string(rep.jobs_completed));
    uqsim::SweepResult result;
    result.tier_names = rep.tier_names;
    result.rows.push_back(rep.to_row());
    write_output(render(result, format), out);
    return 0;
}

int cmd_sweep(const ScenarioArgs& sargs, std::uint64_t seed, bool seed_set,
              const std::vector<double>& rates, double per_rate_duration, const std::string& out,
              const std::string& format) {
    uqsim::Scenario s = resolve_scenario(sargs);
    uqsim::RunOptions opts;
    if (seed_set) opts.seed = seed;
    uqsim::SweepResult result = uqsim::sweep(s, rates, per_rate_duration, opts);
    write_output(render(result, format), out);
    return 0;
}

int cmd_tailscale(const std::vector<int>& n_list, double slow_frac, double slow_factor,
                  std::uint64_t seed, bool seed_set, double qps, double duration,
                  const std::string& out, const std::string& format) {
    nlohmann::json jrows = nlohmann::json::array();
    std::string csv =
        "n,offered_qps,requests,frac_slow_touched,expected_frac,p99_ms,clean_p99_oracle_ms\n";
    for (int n : n_list) {
        uqsim::BuiltinSpec b;
        b.kind = uqsim::BuiltinSpec::Kind::tail_at_scale;
        b.n = n;
        b.slow_frac = slow_frac;
        b.slow_factor = slow_factor;
        uqsim::Scenario s = uqsim::generate_builtin_scenario(b);
        s.client.load_pattern.qps = qps;
        s.client.duration_s = duration;
        s.client.warmup_s = 0.05 * duration;
        uqsim::RunOptions opts;
        opts.record_per_tier = false;
        if (seed_set) opts.seed = seed;
        log_info("tail_at_scale n=" + std::to_string(n));
        uqsim::RunReport rep = uqsim::Simulation(std::move(s), opts).run();
        double expected = 1.0 - std::pow(1.0 - slow_frac, n);
        // Leaves serve with mean 1ms; the clean-fanout oracle is the p99 of
        // the max of n exponentials plus the tiny proxy hops.
        double clean = uqsim::oracle_fanout_max(1.0 / 1000.0, n, 0.99) / 1000.0 + 0.02;
        char buf[256];
        std::snprintf(buf, sizeof(buf), "%d,%.6f,%llu,%.6f,%.6f,%.6f,%.6f\n", n, rep.offered_qps,
                      static_cast<unsigned long long>(rep.recorder.completed()),
                      rep.tracked_fraction(), expected, rep.p99_ms(), clean);
        csv += buf;
        jrows.push_back({{"n", n},
                         {"offered_qps", rep.offered_qps},
                         {"requests", rep.recorder.completed()},
                         {"frac_slow_touched", rep.tracked_fraction()},
                         {"expected_frac", expected},
                         {"p99_ms", rep.p99_ms()},
                         {"clean_p99_oracle_ms", clean}});
    }
    write_output(format == "json" ? nlohmann::json{{"results", jrows}}.dump(2) + "\n" : csv, out);
    return 0;
}

int cmd_power(const ScenarioArgs& sargs, std::uint64_t seed, bool seed_set, double interval_s,
              double qos_ms, double duration, const std::string& out, const std::string& format) {
    uqsim::Scenario s = resolve_scenario(sargs);
    if (s.instances.size() < 2)
        throw uqsim::ConfigError("power management needs a scenario with >= 2 tiers");
    if (!s.client.power_manager) {
        if (interval_s <= 0 || qos_ms <= 0)
            throw uqsim::ConfigError(
                "scenario has no power_manager block; provide --interval-s and --qos-ms");
        uqsim::PmConfig pm;
        s.client.power_manager = pm;
    }
    uqsim::RunOptions opts;
    if (seed_set) opts.seed = seed;
    if (interval_s > 0) opts.pm_interval_s = interval_s;
    if (qos_ms > 0) opts.pm_qos_ms = qos_ms;
    if (duration > 0) {
        opts.duration_s = duration;
        opts.warmup_s = 0.1 * duration;
    }
    uqsim::RunReport rep = uqsim::Simulation(std::move(s), opts).run();

    if (!out.empty()) {
        std::ofstream f(out, std::ios::binary);
        if (!f) throw uqsim::IoError("cannot write " + out);
        f << uqsim::pm_trace_to_csv(rep.pm_trace);
    }
    if (format == "json") {
        nlohmann::json summary = {{"windows", rep.pm_windows},
                                  {"violations", rep.pm_violations},
                                  {"violation_rate", rep.violation_rate()},
                                  {"energy_proxy", rep.energy_proxy},
                                  {"energy_proxy_always_max", rep.energy_proxy_baseline},
                                  {"p99_ms", rep.p99_ms()}};
        std::cout << summary.dump(2) << "\n";
    } else {
        std::printf("windows,violations,violation_rate,energy_proxy,energy_proxy_always_max,p99_ms\n");
        std::printf("%llu,%llu,%.6f,%.6f,%.6f,%.6f\n",
                    static_cast<unsigned long long>(rep.pm_windows),
                    static_cast<unsigned long long>(rep.pm_violations), rep.violation_rate(),
                    rep.energy_proxy, rep.energy_proxy_baseline, rep.p99_ms());
    }
    return 0;
}

int cmd_validate(const ScenarioArgs& sargs) {
    bool all_ok = true;
    auto report = [&](const std::string& name, bool ok, const std::string& detail) {
        std::printf("[%s] %s: %s\n", ok ? "ok" : "FAIL", name.c_str(), detail.c_str());
        all_ok &= ok;
    };

    if (!sargs.dir.empty() || !sargs.builtin.empty()) {
        uqsim::Scenario s = resolve_scenario(sargs);
        report("config", true,
               std::to_string(s.services.size()) + " services, " +
                   std::to_string(s.instances.size()) + " instances, " +
                   std::to_string(s.inter_paths.size()) + " paths");
    }

    {  // M/M/1 at rho = 0.5 against 1/(mu-lambda) and -ln(0.01)/(mu-lambda).
        auto s = uqsim::single_queue_scenario(1000.0, 1, 1, uqsim::ExecModel::simple, 500.0, 440.0);
        uqsim::RunReport rep = uqsim::Simulation(std::move(s), {}).run();
        auto [mean_us, p99_us] = uqsim::oracle_mm1(0.0005, 0.001);
        double em = std::abs(rep.mean_ms() * 1000.0 - mean_us) / mean_us;
        double ep = std::abs(rep.p99_ms() * 1000.0 - p99_us) / p99_us;
        report("mm1", em < 0.05 && ep < 0.05,
               "mean err " + std::to_string(em * 100.0) + "%, p99 err " + std::to_string(ep * 100.0) +
                   "% (" + std::to_string(rep.recorder.completed()) + " jobs)");
    }
    {  // M/M/2 wait probability against Erlang-C.
        auto s = uqsim::single_queue_scenario(1000.0, 2, 2, uqsim::ExecModel::multi_threaded, 1000.0,
                                              220.0);
        uqsim::RunReport rep = uqsim::Simulation(std::move(s), {}).run();
        double sim = rep.recorder.wait_fraction(0);
        double c = uqsim::oracle_erlang_c(0.001, 0.001, 2);
        double err = std::abs(sim - c) / c;
        report("erlang_c", err < 0.05,
               "wait prob " + std::to_string(sim) + " vs " + std::to_string(c));
    }
    {  // Fanout(8) tail against the max-of-exponentials law.
        uqsim::BuiltinSpec b;
        b.kind = uqsim::BuiltinSpec::Kind::fanout;
        b.k = 8;
        auto s = uqsim::generate_builtin_scenario(b);
        s.client.load_pattern.qps = 100.0;
        s.client.duration_s = 600.0;
        s.client.warmup_s = 10.0;
        uqsim::RunOptions opts;
        opts.record_per_tier = false;
        uqsim::RunReport rep = uqsim::Simulation(std::move(s), opts).run();
        double oracle_us = uqsim::oracle_fanout_max(1.0 / 1000.0, 8, 0.99) + 20.0;
        double err = std::abs(rep.p99_ms() * 1000.0 - oracle_us) / oracle_us;
        report("fanout_max", err < 0.05,
               "p99 " + std::to_string(rep.p99_ms()) + "ms vs oracle " +
                   std::to_string(oracle_us / 1000.0) + "ms");
    }
    return all_ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Queueing-network simulator for interactive cloud microservices"};
    app.require_subcommand(1);

    ScenarioArgs run_s, sweep_s, power_s, val_s;
    std::uint64_t seed = 0;
    bool seed_set = false;
    double duration = 0.0, qps = 0.0;
    std::string out, format = "csv";
    std::vector<double> rates;
    double per_rate_duration = 20.0;
    std::vector<int> n_list{5, 100, 1000};
    double slow_frac = 0.01, slow_factor = 10.0, ts_qps = 50.0, ts_duration = 100.0;
    double interval_s = 0.0, qos_ms = 0.0;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--seed", seed, "Master rng seed")->each([&](const std::string&) {
            seed_set = true;
        });
        cmd->add_option("--out", out, "Output path (default: stdout)");
        cmd->add_option("--format", format, "Output format")
            ->check(CLI::IsMember({"csv", "json"}));
    };

    CLI::App* run = app.add_subcommand("run", "Run one scenario and export summary stats");
    add_scenario_flags(run, run_s);
    add_common(run);
    run->add_option("--duration-s", duration, "Override simulated duration");
    run->add_option("--qps", qps, "Override the client's constant arrival rate");

    CLI::App* sw = app.add_subcommand("sweep", "Load-latency sweep across offered rates");
    add_scenario_flags(sw, sweep_s);
    add_common(sw);
    sw->add_option("--rates", rates, "Offered rates (QPS), strictly increasing")
        ->required()
        ->delimiter(',');
    sw->add_option("--per-rate-duration-s", per_rate_duration, "Simulated seconds per rate");

    CLI::App* ts = app.add_subcommand("tailscale", "Tail-at-scale fanout experiment");
    add_common(ts);
    ts->add_option("--n-list", n_list, "Cluster sizes")->delimiter(',');
    ts->add_option("--slow-frac", slow_frac, "Per-request probability a leaf is slow");
    ts->add_option("--slow-factor", slow_factor, "Slow-path service-time multiplier");
    ts->add_option("--qps", ts_qps, "Offered rate");
    ts->add_option("--duration-s", ts_duration, "Simulated seconds per cluster size");

    CLI::App* pw = app.add_subcommand("power", "Run the QoS-aware power manager");
    add_scenario_flags(pw, power_s);
    add_common(pw);
    pw->add_option("--interval-s", interval_s, "Decision interval override");
    pw->add_option("--qos-ms", qos_ms, "End-to-end p99 QoS target override");
    pw->add_option("--duration-s", duration, "Override simulated duration");

    CLI::App* val = app.add_subcommand("validate", "Config checks plus the closed-form oracle suite");
    add_scenario_flags(val, val_s);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        if (run->parsed()) return cmd_run(run_s, seed, seed_set, duration, qps, out, format);
        if (sw->parsed())
            return cmd_sweep(sweep_s, seed, seed_set, rates, per_rate_duration, out, format);
        if (ts->parsed())
            return cmd_tailscale(n_list, slow_frac, slow_factor, seed, seed_set, ts_qps, ts_duration,
                                 out, format);
        if (pw->parsed())
            return cmd_power(power_s, seed, seed_set, interval_s, qos_ms, duration, out, format);
        if (val->parsed()) return cmd_validate(val_s);
    } catch (const uqsim::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
