#include <catch_amalgamated.hpp>

#include "helpers.hpp"
#include "uqsim/uqsim.hpp"

using namespace uqsim;

namespace {

PmConfig pm_cfg() {
    PmConfig c;
    c.qos_target_ms = 5.0;
    c.decision_interval_s = 0.1;
    return c;
}

PowerManager two_tier_pm() {
    std::vector<double> ladder{1.2, 1.4, 1.6, 1.8, 2.0, 2.2, 2.4, 2.6};
    return PowerManager(pm_cfg(), {ladder, ladder});
}

}  // namespace

TEST_CASE("meeting windows slow down exactly the slackest tier", "[power]") {
    PowerManager pm = two_tier_pm();
    RngStream rng(1);
    std::string action;
    // First meeting window sets the target: tuple {1,1} at e2e 2ms scaled to
    // the margin-discounted budget 0.55*5ms gives per-tier targets
    // {1.375, 1.375}. Slack ties break to the first tier, which drops a level.
    auto first = pm.step({2.0, {1.0, 1.0}}, rng, action);
    REQUIRE(pm.has_target());
    REQUIRE(pm.target_tuple()[0] == Catch::Approx(0.55 * 5.0 / 2.0));
    REQUIRE(first.size() == 1);
    REQUIRE(first[0].tier == 0);
    REQUIRE(pm.freq_ghz(0) == Catch::Approx(2.4));

    // Tier 1 now has 2.0ms slack, tier 0 only 0.5ms: exactly tier 1 slows.
    auto actions = pm.step({2.0, {2.0, 0.5}}, rng, action);
    REQUIRE(actions.size() == 1);
    REQUIRE(actions[0].tier == 1);
    REQUIRE(actions[0].new_level == 6);
    REQUIRE(action == "slow_down:1");
    REQUIRE(pm.freq_ghz(1) == Catch::Approx(2.4));
}

TEST_CASE("no positive slack means no slow-down", "[power]") {
    PowerManager pm = two_tier_pm();
    RngStream rng(2);
    std::string action;
    pm.step({2.0, {1.0, 1.0}}, rng, action);  // target {2.5, 2.5}
    auto actions = pm.step({4.9, {2.5, 2.5}}, rng, action);
    REQUIRE(actions.empty());
    REQUIRE(action == "none");
}

TEST_CASE("violations record the failing target and speed up lagging tiers", "[power]") {
    PowerManager pm = two_tier_pm();
    RngStream rng(3);
    std::string action;
    pm.step({2.0, {1.0, 1.0}}, rng, action);  // target {1.375, 1.375} in bucket 2; tier 0 -> 2.4
    pm.step({2.0, {0.5, 2.0}}, rng, action);  // tier 0 -> 2.2
    int target_bucket = pm.target_bucket();
    double pref_before = pm.buckets()[target_bucket].preference;
    double f0_before = pm.freq_ghz(0);
    REQUIRE(f0_before == Catch::Approx(2.2));

    auto actions = pm.step({6.0, {3.0, 1.0}}, rng, action);  // violation, tier 0 lags
    const auto& bucket = pm.buckets()[target_bucket];
    REQUIRE(bucket.failing_list.size() == 1);
    REQUIRE(bucket.failing_list[0][0] == Catch::Approx(1.375));
    REQUIRE(bucket.preference == Catch::Approx(pref_before * 0.5));
    REQUIRE(actions.size() == 1);
    REQUIRE(actions[0].tier == 0);
    REQUIRE(pm.freq_ghz(0) == Catch::Approx(2.4));  // one level up per violating window
    REQUIRE(action == "speed_up:0");
}

TEST_CASE("tuples dominated by a failing entry are never admitted", "[power]") {
    PowerManager pm = two_tier_pm();
    RngStream rng(4);
    std::string action;
    pm.preload_failing(2, {1.5, 1.5});
    pm.step({2.0, {1.6, 1.6}}, rng, action);  // dominated: {1.5,1.5} <= {1.6,1.6}
    REQUIRE(pm.buckets()[2].tuples.empty());
    pm.step({2.0, {1.0, 1.6}}, rng, action);  // not dominated on tier 0
    REQUIRE(pm.buckets()[2].tuples.size() == 1);
}

TEST_CASE("bucket choice follows preference weights", "[power]") {
    PowerManager pm = two_tier_pm();
    pm.preload_bucket(1, {0.5, 0.5}, 0.6, 2.0);
    pm.preload_bucket(3, {1.5, 1.5}, 1.6, 1.0);
    RngStream rng(5);
    int first = 0;
    const int n = 100'000;
    for (int i = 0; i < n; ++i) {
        REQUIRE(pm.choose_target(rng));
        if (pm.target_bucket() == 1) ++first;
    }
    REQUIRE(static_cast<double>(first) / n == Catch::Approx(2.0 / 3.0).margin(0.02));
}

TEST_CASE("single populated bucket is always chosen", "[power]") {
    PowerManager pm = two_tier_pm();
    pm.preload_bucket(4, {2.0, 2.0}, 4.0, 1.0);
    RngStream rng(6);
    for (int i = 0; i < 100; ++i) {
        REQUIRE(pm.choose_target(rng));
        REQUIRE(pm.target_bucket() == 4);
    }
}

TEST_CASE("empty buckets force the max-frequency fallback", "[power]") {
    PowerManager pm = two_tier_pm();
    RngStream rng(7);
    REQUIRE_FALSE(pm.choose_target(rng));  // nothing learned yet

    // A learned tuple that later becomes dominated: step() falls back to max.
    pm.preload_bucket(2, {9.0, 9.0}, 2.4, 1.0);
    std::string action;
    pm.step({2.4, {9.0, 9.0}}, rng, action);  // acquires the target
    // slow-down may have fired; now poison the bucket and violate.
    pm.preload_failing(2, {0.1, 0.1});
    auto actions = pm.step({7.0, {9.0, 9.0}}, rng, action);
    REQUIRE(action == "fallback_max");
    REQUIRE_FALSE(pm.has_target());
    for (std::size_t t = 0; t < pm.tier_count(); ++t)
        REQUIRE(pm.freq_ghz(t) == Catch::Approx(2.6));
}

TEST_CASE("apply_frequency rescales subsequent processing times", "[power]") {
    Scenario s = test::chain_scenario({100.0}, true, 1000.0, 0.002);
    s.machines[0].dvfs_levels = {1.2, 2.6};
    Simulation sim(s, {});
    sim.apply_frequency("S0", 1.2);
    RunReport r = sim.run();
    for (double v : r.recorder.e2e_us())
        REQUIRE(v == Catch::Approx(100.0 * 2.6 / 1.2));
}

TEST_CASE("setting the current level is a no-op event", "[power]") {
    Scenario s = test::chain_scenario({100.0}, true, 1000.0, 0.002);
    Simulation sim(s, {});
    sim.apply_frequency("S0", 2.6);
    RunReport r = sim.run();
    REQUIRE(r.recorder.e2e_us().front() == Catch::Approx(100.0));
}

TEST_CASE("frequencies outside the ladder are invalid", "[power]") {
    Scenario s = test::chain_scenario({100.0}, true, 1000.0, 0.002);
    Simulation sim(s, {});
    REQUIRE_THROWS_AS(sim.apply_frequency("S0", 3.0), InvalidLevelError);
}

TEST_CASE("generous QoS yields zero violations", "[power]") {
    Scenario s = load_scenario(test::scenario_dir("diurnal_two_tier").string());
    RunOptions o;
    o.duration_s = 20.0;
    o.warmup_s = 2.0;
    o.pm_qos_ms = 1e6;
    RunReport r = Simulation(s, o).run();
    REQUIRE(r.pm_windows > 100);
    REQUIRE(r.pm_violations == 0);
    REQUIRE(r.violation_rate() == 0.0);
}

TEST_CASE("with infinite QoS frequencies never increase", "[power]") {
    Scenario s = load_scenario(test::scenario_dir("diurnal_two_tier").string());
    RunOptions o;
    o.duration_s = 30.0;
    o.warmup_s = 2.0;
    o.pm_qos_ms = 1e6;
    RunReport r = Simulation(s, o).run();
    REQUIRE(r.pm_trace.rows.size() > 10);
    for (std::size_t t = 0; t < r.pm_trace.tier_names.size(); ++t) {
        double prev = 1e9;
        for (const auto& row : r.pm_trace.rows) {
            REQUIRE(row.tier_freq_ghz[t] <= prev + 1e-12);
            prev = row.tier_freq_ghz[t];
        }
    }
    REQUIRE(r.energy_proxy < r.energy_proxy_baseline);
}

TEST_CASE("pm trace exports the declared columns", "[power]") {
    PmTrace t;
    t.tier_names = {"Cache", "Web"};
    t.rows.push_back({0.1, 1.25, {0.5, 0.75}, {2.6, 2.4}, "slow_down:1"});
    std::string csv = pm_trace_to_csv(t);
    REQUIRE(csv.rfind("window_end_s,e2e_p99_ms,Cache_p99_ms,Web_p99_ms,"
                      "Cache_freq_ghz,Web_freq_ghz,action\n", 0) == 0);
    REQUIRE(csv.find("slow_down:1") != std::string::npos);
}
