#include <catch_amalgamated.hpp>

#include "helpers.hpp"
#include "uqsim/uqsim.hpp"

using namespace uqsim;

TEST_CASE("exponential arrivals hit the configured rate", "[workload]") {
    LoadPattern p{LoadPattern::Kind::constant, 1000.0, "", {}};
    ArrivalProcess ap(p, InterarrivalKind::exponential, 11, 1e9);
    double prev = 0.0, acc = 0.0;
    const int n = 1'000'000;
    for (int i = 0; i < n; ++i) {
        double t = ap.next_arrival();
        acc += t - prev;
        prev = t;
    }
    REQUIRE(acc / n == Catch::Approx(1000.0).epsilon(0.005));  // mean gap 1000us
}

TEST_CASE("deterministic arrivals are exactly periodic", "[workload]") {
    LoadPattern p{LoadPattern::Kind::constant, 100.0, "", {}};
    ArrivalProcess ap(p, InterarrivalKind::deterministic, 1, 1.0);
    REQUIRE(ap.next_arrival() == Catch::Approx(10000.0));
    REQUIRE(ap.next_arrival() == Catch::Approx(20000.0));
    REQUIRE(ap.next_arrival() == Catch::Approx(30000.0));
}

TEST_CASE("exhausted pattern raises EndOfTrace", "[workload]") {
    LoadPattern p{LoadPattern::Kind::constant, 100.0, "", {}};
    ArrivalProcess ap(p, InterarrivalKind::deterministic, 1, 0.025);
    REQUIRE_NOTHROW(ap.next_arrival());
    REQUIRE_NOTHROW(ap.next_arrival());
    REQUIRE_THROWS_AS(ap.next_arrival(), EndOfTraceError);
}

TEST_CASE("trace rates apply piecewise", "[workload]") {
    LoadPattern p;
    p.kind = LoadPattern::Kind::trace;
    p.points = {{0.0, 100.0}, {10.0, 200.0}};
    REQUIRE(p.rate_at(0.0) == 100.0);
    REQUIRE(p.rate_at(9.99) == 100.0);
    REQUIRE(p.rate_at(10.0) == 200.0);
    REQUIRE(p.rate_at(50.0) == 200.0);

    // Empirical rate on the second plateau.
    ArrivalProcess ap(p, InterarrivalKind::exponential, 5, 20.0);
    int in_window = 0;
    while (auto t = ap.try_next())
        if (*t >= 10e6) ++in_window;
    REQUIRE(static_cast<double>(in_window) == Catch::Approx(2000.0).epsilon(0.05));
}

TEST_CASE("load_trace parses the CSV interface", "[workload]") {
    auto dir = test::fresh_dir("trace");
    test::write_file(dir / "t.csv", "time_s,qps\n0,100\n10,200\n");
    LoadPattern p = load_trace((dir / "t.csv").string());
    REQUIRE(p.points.size() == 2);
    REQUIRE(p.rate_at(3.0) == 100.0);
    REQUIRE(p.rate_at(12.0) == 200.0);

    test::write_file(dir / "empty.csv", "");
    REQUIRE_THROWS_AS(load_trace((dir / "empty.csv").string()), SchemaError);
    test::write_file(dir / "hdr_only.csv", "time_s,qps\n");
    REQUIRE_THROWS_AS(load_trace((dir / "hdr_only.csv").string()), SchemaError);
}

TEST_CASE("interarrival gaps pass a KS test against the exponential", "[workload]") {
    LoadPattern p{LoadPattern::Kind::constant, 1000.0, "", {}};
    ArrivalProcess ap(p, InterarrivalKind::exponential, 17, 1e9);
    std::vector<double> gaps;
    double prev = 0.0;
    for (int i = 0; i < 100'000; ++i) {
        double t = ap.next_arrival();
        gaps.push_back(t - prev);
        prev = t;
    }
    double d = test::ks_statistic_exponential(gaps, 1000.0);
    double critical = 1.628 / std::sqrt(static_cast<double>(gaps.size()));  // alpha = 0.01
    REQUIRE(d < critical);
}

TEST_CASE("arrivals are open-loop: independent of downstream service rates", "[workload]") {
    auto fast = single_queue_scenario(10.0, 1, 1, ExecModel::simple, 500.0, 4.0);
    auto slow = single_queue_scenario(1900.0, 1, 1, ExecModel::simple, 500.0, 4.0);
    fast.client.warmup_s = 0.0;
    slow.client.warmup_s = 0.0;
    RunReport a = Simulation(fast, {}).run();
    RunReport b = Simulation(slow, {}).run();
    REQUIRE(a.jobs_injected == b.jobs_injected);
    auto arr_a = a.recorder.arrival_us();
    auto arr_b = b.recorder.arrival_us();
    std::sort(arr_a.begin(), arr_a.end());
    std::sort(arr_b.begin(), arr_b.end());
    REQUIRE(arr_a == arr_b);
}
