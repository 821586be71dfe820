#include <catch_amalgamated.hpp>

#include "helpers.hpp"
#include "uqsim/uqsim.hpp"

using namespace uqsim;

TEST_CASE("processing time adds per-event slope once per invocation", "[service_model]") {
    ProcessingSpec det;
    det.analytic = {AnalyticKind::deterministic, 5.0, 0.0};
    HistogramTable none;
    RngStream r(1);
    // epoll-style: base 5us, 1us per returned event, batch of 4 -> 9us.
    double t = sample_processing_time(det, none, "svc", 0, 2.6, 2.6, 1.0, 0.0, 4, 612, r);
    REQUIRE(t == Catch::Approx(9.0));
}

TEST_CASE("processing time adds per-byte slope for the whole batch", "[service_model]") {
    ProcessingSpec det;
    det.analytic = {AnalyticKind::deterministic, 10.0, 0.0};
    HistogramTable none;
    RngStream r(1);
    double t = sample_processing_time(det, none, "svc", 0, 2.6, 2.6, 0.0, 0.01, 2, 612, r);
    REQUIRE(t == Catch::Approx(10.0 + 0.01 * 2 * 612));
}

TEST_CASE("frequency scaling falls back to the nominal histogram", "[service_model]") {
    HistogramTable table;
    HistogramPdf pdf;
    pdf.upper_bound_us = {100.0};
    pdf.probability = {1.0};
    pdf.finalize();
    table[{"svc", 0, 2.6}] = pdf;
    ProcessingSpec hist;
    hist.kind = ProcessingSpec::Kind::histogram;

    RngStream r1(2), r2(2);
    double at_nominal = sample_processing_time(hist, table, "svc", 0, 2.6, 2.6, 0, 0, 1, 0, r1);
    double at_low = sample_processing_time(hist, table, "svc", 0, 1.2, 2.6, 0, 0, 1, 0, r2);
    REQUIRE(at_low == Catch::Approx(at_nominal * 2.6 / 1.2));

    REQUIRE_THROWS_AS(sample_processing_time(hist, table, "svc", 1, 2.6, 2.6, 0, 0, 1, 0, r1),
                      MissingDistributionError);
}

TEST_CASE("exact-frequency histograms take precedence over scaling", "[service_model]") {
    HistogramTable table;
    HistogramPdf nominal, low;
    nominal.upper_bound_us = {100.0};
    nominal.probability = {1.0};
    nominal.finalize();
    low.upper_bound_us = {299.0, 300.0};  // profiled mass entirely in (299, 300]
    low.probability = {0.0, 1.0};
    low.finalize();
    table[{"svc", 0, 2.6}] = nominal;
    table[{"svc", 0, 1.2}] = low;
    ProcessingSpec hist;
    hist.kind = ProcessingSpec::Kind::histogram;
    RngStream r(3);
    for (int i = 0; i < 100; ++i) {
        double t = sample_processing_time(hist, table, "svc", 0, 1.2, 2.6, 0, 0, 1, 0, r);
        REQUIRE(t <= 300.0);
        REQUIRE(t > 299.0);  // the profile, not the scaled nominal (<= 216.7)
    }
}

TEST_CASE("jobs advance through every stage of the execution path", "[service_model]") {
    // Four deterministic stages on one instance: e2e is the exact sum.
    Scenario s = test::chain_scenario({1.0}, true, 100.0, 0.05);
    ServiceSpec& svc = s.services[0];
    svc.stages.clear();
    for (int i = 0; i < 4; ++i) {
        StageSpec st;
        st.stage_name = "s" + std::to_string(i);
        st.stage_id = i;
        st.processing.analytic = {AnalyticKind::deterministic, 10.0 * (i + 1), 0.0};
        svc.stages.push_back(st);
    }
    svc.paths = {{0, "p", {0, 1, 2, 3}, {}}};
    RunReport r = Simulation(s, {}).run();
    REQUIRE(r.recorder.completed() > 0);
    for (double v : r.recorder.e2e_us()) REQUIRE(v == Catch::Approx(100.0));
}

TEST_CASE("per-path processing overrides give distinct distributions", "[service_model]") {
    // Same stages, different per-path processing: write path is 10x.
    auto build = [](int fixed_path) {
        Scenario s = test::chain_scenario({50.0}, true, 100.0, 0.05);
        ServiceSpec& svc = s.services[0];
        ExecutionPathSpec write{1, "write", {0}, {}};
        write.processing_overrides[0] = {ProcessingSpec::Kind::analytic,
                                         {AnalyticKind::deterministic, 500.0, 0.0},
                                         {}};
        svc.paths.push_back(write);
        s.inter_paths[0].nodes[0].execution_path = fixed_path;
        return s;
    };
    RunReport read = Simulation(build(0), {}).run();
    RunReport write = Simulation(build(1), {}).run();
    REQUIRE(read.recorder.e2e_us().front() == Catch::Approx(50.0));
    REQUIRE(write.recorder.e2e_us().front() == Catch::Approx(500.0));
}

TEST_CASE("probabilistic path selection converges and reproduces", "[service_model]") {
    Scenario s = test::chain_scenario({100.0}, false, 20000.0, 5.0);
    s.client.interarrival = InterarrivalKind::exponential;
    ServiceSpec& svc = s.services[0];
    ExecutionPathSpec miss{1, "miss", {0}, {}};
    svc.paths.push_back(miss);
    svc.path_probabilities = {{0, 0.9}, {1, 0.1}};
    s.inter_paths[0].nodes[0].execution_path.reset();
    s.machines[0].cores = 64;  // keep the queue empty
    s.client.tracked_path_name = "miss";
    s.client.connections = 8;

    RunReport a = Simulation(s, {}).run();
    REQUIRE(a.recorder.completed() > 90000);
    REQUIRE(a.tracked_fraction() == Catch::Approx(0.1).margin(0.01));

    RunReport b = Simulation(s, {}).run();
    REQUIRE(a.tracked_fraction() == b.tracked_fraction());  // same seed, same draws
}

TEST_CASE("multi_threaded jobs wait for an idle thread", "[service_model]") {
    // 1 thread, deterministic 100us service, arrivals every 10us: strict serialization.
    Scenario s = test::chain_scenario({100.0}, true, 100000.0, 0.000035, -1.0, 4);
    s.instances[0].exec_model = ExecModel::multi_threaded;
    s.instances[0].threads = 1;
    RunReport r = Simulation(s, {}).run();
    REQUIRE(r.recorder.completed() == 3);
    auto e2e = r.recorder.e2e_us();
    std::sort(e2e.begin(), e2e.end());
    // arrivals at 10, 20, 30us; completions at 110, 210, 310.
    REQUIRE(e2e[0] == Catch::Approx(100.0));
    REQUIRE(e2e[1] == Catch::Approx(190.0));
    REQUIRE(e2e[2] == Catch::Approx(280.0));
}

TEST_CASE("oversubscribed threads pay the context-switch cost", "[service_model]") {
    // 2 threads on 1 core: a resume with queued work behind it is charged 5us.
    Scenario s = test::chain_scenario({100.0}, true, 100000.0, 0.000035, -1.0, 1);
    s.instances[0].exec_model = ExecModel::multi_threaded;
    s.instances[0].threads = 2;
    RunReport r = Simulation(s, {}).run();
    auto e2e = r.recorder.e2e_us();
    std::sort(e2e.begin(), e2e.end());
    REQUIRE(e2e.size() == 3);
    // j1: 10->110. j2 resumes at 110 with j3 still queued: +5us -> 215.
    // j3 resumes at 215 with nothing queued: no surcharge -> 315.
    REQUIRE(e2e[0] == Catch::Approx(100.0));
    REQUIRE(e2e[1] == Catch::Approx(195.0));
    REQUIRE(e2e[2] == Catch::Approx(285.0));
}

TEST_CASE("connection pool limits outstanding downstream requests", "[service_model]") {
    // Front (det 10us) -> Back (det 500us), pool capacity 1, arrivals at
    // 100us and 200us: the second delivery waits for the first lease.
    Scenario s = test::chain_scenario({10.0, 500.0}, true, 10000.0, 0.00025);
    s.instances[0].connection_pools["S1"] = 1;
    RunReport r = Simulation(s, {}).run();
    auto e2e = r.recorder.e2e_us();
    std::sort(e2e.begin(), e2e.end());
    REQUIRE(e2e.size() == 2);
    REQUIRE(e2e[0] == Catch::Approx(510.0));
    REQUIRE(e2e[1] == Catch::Approx(910.0));  // lease released at t=610
}

TEST_CASE("pool waiters are served in FIFO order", "[service_model]") {
    Scenario s = test::chain_scenario({10.0, 500.0}, true, 10000.0, 0.00035);
    s.instances[0].connection_pools["S1"] = 1;
    RunReport r = Simulation(s, {}).run();
    // Three arrivals at 100/200/300us; back-to-back 500us services from 110.
    auto completion = r.recorder.completion_us();
    std::sort(completion.begin(), completion.end());
    REQUIRE(completion.size() == 3);
    REQUIRE(completion[0] == Catch::Approx(610.0));
    REQUIRE(completion[1] == Catch::Approx(1110.0));
    REQUIRE(completion[2] == Catch::Approx(1610.0));
}
