#include <catch_amalgamated.hpp>

#include "helpers.hpp"
#include "uqsim/uqsim.hpp"

using namespace uqsim;

TEST_CASE("event queue pops in (timestamp, sequence) order", "[engine]") {
    EventQueue eq;
    eq.schedule(5.0, EventKind::job_arrival, 1);
    eq.schedule(3.0, EventKind::job_arrival, 2);
    eq.schedule(5.0, EventKind::thread_wakeup, 3);  // same ts: scheduling order wins
    eq.schedule(4.0, EventKind::job_arrival, 4);

    REQUIRE(eq.pop().a == 2);
    REQUIRE(eq.pop().a == 4);
    Event e1 = eq.pop();
    Event e2 = eq.pop();
    REQUIRE(e1.a == 1);
    REQUIRE(e2.a == 3);
    REQUIRE(e1.seq < e2.seq);
}

TEST_CASE("scheduling in the past raises CausalityError", "[engine]") {
    EventQueue eq;
    eq.schedule(10.0, EventKind::job_arrival);
    eq.pop();
    eq.schedule(10.0, EventKind::job_arrival);  // same time is fine
    REQUIRE_THROWS_AS(eq.schedule(9.0, EventKind::job_arrival), CausalityError);
}

TEST_CASE("scenario with no arrivals terminates immediately", "[engine]") {
    auto s = single_queue_scenario(1000.0, 1, 1, ExecModel::simple, 1000.0, 1e-9);
    s.client.warmup_s = 0.0;
    RunReport r = Simulation(s, {}).run();
    REQUIRE(r.events_processed == 0);
    REQUIRE(r.jobs_injected == 0);
}

TEST_CASE("same seed reproduces the event trace bit-for-bit", "[engine]") {
    auto s = single_queue_scenario(1000.0, 1, 1, ExecModel::simple, 500.0, 5.0);
    RunReport a = Simulation(s, {}).run();
    RunReport b = Simulation(s, {}).run();
    REQUIRE(a.events_processed == b.events_processed);
    REQUIRE(a.trace_hash == b.trace_hash);

    RunOptions other;
    other.seed = 99;
    RunReport c = Simulation(s, other).run();
    REQUIRE(a.trace_hash != c.trace_hash);
}

TEST_CASE("adding an idle instance does not perturb existing streams", "[engine]") {
    auto s = single_queue_scenario(1000.0, 1, 1, ExecModel::simple, 500.0, 5.0);
    RunReport a = Simulation(s, {}).run();

    auto s2 = s;
    ServiceSpec idle;
    idle.service_name = "idle";
    idle.stages.push_back(s.services[0].stages[0]);
    idle.paths = {{0, "p", {0}, {}}};
    s2.services.push_back(idle);
    s2.machines.push_back(s.machines[0]);
    s2.machines.back().machine_id = "m_idle";
    InstanceSpec inst;
    inst.instance_name = "Idle";
    inst.service_name = "idle";
    inst.machine_id = "m_idle";
    s2.instances.push_back(inst);
    RunReport b = Simulation(s2, {}).run();

    REQUIRE(a.recorder.e2e_us() == b.recorder.e2e_us());
}

TEST_CASE("two_tier at 1% of saturation matches the series closed form", "[engine]") {
    auto s = generate_builtin_scenario(parse_builtin("two_tier"));
    s.client.load_pattern.qps = 240.0;
    s.client.duration_s = 10.0;
    s.client.warmup_s = 1.0;
    RunReport r = Simulation(s, {}).run();
    // Stage means along the path, batch size 1, plus one rx hop per
    // cross-machine delivery (client->front, front->back, back->front).
    double expected_us = (30.0 + 1.0) + 150.0 + (20.0 + 1.0) + (10.0 + 0.01 * 612) + 50.0 + 20.0 +
                         150.0 + 3 * 10.0;
    REQUIRE(r.mean_ms() * 1000.0 == Catch::Approx(expected_us).epsilon(0.05));
}

TEST_CASE("event cap raises LivelockError", "[engine]") {
    auto s = single_queue_scenario(1000.0, 1, 1, ExecModel::simple, 1000.0, 10.0);
    RunOptions o;
    o.max_events = 50;
    REQUIRE_THROWS_AS(Simulation(s, o).run(), LivelockError);
}

TEST_CASE("horizon stop leaves jobs in flight but conserves them", "[engine]") {
    auto s = single_queue_scenario(1000.0, 1, 1, ExecModel::simple, 900.0, 10.0);
    RunOptions o;
    o.horizon_s = 2.0;
    RunReport r = Simulation(s, o).run();
    REQUIRE(r.jobs_injected > 0);
    REQUIRE(r.jobs_injected == r.jobs_completed + r.jobs_in_flight);
    REQUIRE(r.jobs_in_flight > 0);  // open queue cut mid-flight

    RunReport full = Simulation(s, {}).run();
    REQUIRE(full.jobs_in_flight == 0);
    REQUIRE(full.jobs_injected == full.jobs_completed);
}
