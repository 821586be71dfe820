#ifndef UQSIM_TESTS_PROPERTY_SUITES_HPP
#define UQSIM_TESTS_PROPERTY_SUITES_HPP

// Generative suites over randomized small scenarios. Shared between the
// unit tests and the acceptance run.

#include <deque>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "uqsim/uqsim.hpp"

namespace props {

struct SuiteResult {
    int cases = 0;
    int violations = 0;
    std::string first_failure;

    void fail(const std::string& what) {
        ++violations;
        if (first_failure.empty()) first_failure = what;
    }
};

inline std::uint32_t model_front(const std::vector<std::deque<std::uint32_t>>& model) {
    // Single queues interleave all connections by arrival order == id order.
    std::uint32_t best = UINT32_MAX;
    for (const auto& d : model)
        if (!d.empty()) best = std::min(best, d.front());
    return best;
}

inline void pop_id(std::vector<std::deque<std::uint32_t>>& model, std::uint32_t id) {
    for (auto& d : model)
        if (!d.empty() && d.front() == id) {
            d.pop_front();
            return;
        }
}

inline int conn_of(const std::vector<std::deque<std::uint32_t>>& model, std::uint32_t id) {
    for (std::size_t k = 0; k < model.size(); ++k)
        if (!model[k].empty() && model[k].front() == id) return static_cast<int>(k);
    return -1;
}

// No job loss, per-connection batch bound, epoll fairness, FIFO order.
inline SuiteResult queue_invariants(int cases, std::uint64_t seed = 2024) {
    SuiteResult res;
    uqsim::RngStream rng(seed);
    for (int c = 0; c < cases; ++c) {
        ++res.cases;
        uqsim::QueueType type = static_cast<uqsim::QueueType>(rng.uniform_below(3));
        int bound = 1 + static_cast<int>(rng.uniform_below(4));
        int conns = 1 + static_cast<int>(rng.uniform_below(3));
        uqsim::StageQueue q(type, bound);
        std::vector<std::deque<std::uint32_t>> model(conns);
        std::uint32_t next_id = 0;
        std::size_t resident = 0, enqueued = 0, dequeued = 0;

        for (int op = 0; op < 60; ++op) {
            bool do_enqueue = resident == 0 || rng.uniform_below(100) < 60;
            if (do_enqueue) {
                int conn = static_cast<int>(rng.uniform_below(conns));
                q.enqueue(next_id, conn);
                model[conn].push_back(next_id);
                ++next_id;
                ++resident;
                ++enqueued;
                continue;
            }
            std::vector<int> active;
            for (int k = 0; k < conns; ++k)
                if (!model[k].empty()) active.push_back(k);
            auto batch = q.dequeue_batch();
            dequeued += batch.size();
            resident -= batch.size();
            if (batch.empty()) res.fail("empty batch from non-empty queue");

            if (type == uqsim::QueueType::single) {
                if (batch.size() != 1 || batch[0] != model_front(model))
                    res.fail("single queue did not serve the FIFO head");
                pop_id(model, batch[0]);
            } else if (type == uqsim::QueueType::epoll) {
                // min(bound, len) from every active subqueue, in order.
                std::vector<std::uint32_t> expect;
                for (int k : active) {
                    int take = std::min<int>(bound, static_cast<int>(model[k].size()));
                    for (int i = 0; i < take; ++i) {
                        expect.push_back(model[k].front());
                        model[k].pop_front();
                    }
                }
                if (batch != expect) res.fail("epoll batch skipped or reordered a subqueue");
            } else {
                if (static_cast<int>(batch.size()) > bound)
                    res.fail("socket batch exceeds the bound");
                int conn = conn_of(model, batch[0]);
                if (conn < 0) {
                    res.fail("socket batch contains an unknown job");
                    continue;
                }
                for (std::uint32_t id : batch) {
                    if (model[conn].empty() || model[conn].front() != id) {
                        res.fail("socket batch not a FIFO prefix of one connection");
                        break;
                    }
                    model[conn].pop_front();
                }
            }
        }
        std::size_t model_resident = 0;
        for (const auto& d : model) model_resident += d.size();
        if (enqueued != dequeued + resident || model_resident != resident || q.size() != resident)
            res.fail("job conservation broken");
    }
    return res;
}

// Fan-in executes exactly once after all parents; copies created equal the
// edges traversed; everything drains.
inline SuiteResult fanin_copy_conservation(int cases, std::uint64_t seed = 7777) {
    using namespace uqsim;
    SuiteResult res;
    RngStream rng(seed);
    for (int c = 0; c < cases; ++c) {
        ++res.cases;
        int n_services = 1 + static_cast<int>(rng.uniform_below(5));
        int n_machines = 1 + static_cast<int>(rng.uniform_below(2));
        Scenario s;
        for (int m = 0; m < n_machines; ++m) {
            MachineSpec mac;
            mac.machine_id = "m" + std::to_string(m);
            mac.cores = 1 + static_cast<int>(rng.uniform_below(2));
            mac.network_cores = static_cast<int>(rng.uniform_below(2));
            mac.dvfs_levels = {2.6};
            s.machines.push_back(mac);
        }
        for (int i = 0; i < n_services; ++i) {
            ServiceSpec svc;
            svc.service_name = "svc" + std::to_string(i);
            StageSpec st;
            st.stage_name = "s";
            st.stage_id = 0;
            st.processing.analytic = {AnalyticKind::exponential,
                                      20.0 + static_cast<double>(rng.uniform_below(180)), 0.0};
            svc.stages = {st};
            svc.paths = {{0, "p", {0}, {}}};
            s.services.push_back(svc);
            InstanceSpec inst;
            inst.instance_name = "I" + std::to_string(i);
            inst.service_name = svc.service_name;
            inst.machine_id = "m" + std::to_string(rng.uniform_below(n_machines));
            s.instances.push_back(inst);
        }

        // Random rooted DAG: every non-entry node picks parents among its
        // predecessors; childless nodes feed the terminal.
        int internals = 1 + static_cast<int>(rng.uniform_below(6));
        InterPathSpec path;
        path.path_id = 0;
        path.probability = 1.0;
        path.entry = 0;
        std::vector<std::set<int>> children(internals);
        for (int i = 1; i < internals; ++i) {
            bool any = false;
            for (int p = 0; p < i; ++p) {
                if (rng.uniform_below(100) < 40) {
                    children[p].insert(i);
                    any = true;
                }
            }
            if (!any) children[rng.uniform_below(i)].insert(i);
        }
        int terminal = internals;
        std::size_t edges = 0;
        for (int i = 0; i < internals; ++i) {
            PathNodeSpec n;
            n.node_id = i;
            n.service = "I" + std::to_string(rng.uniform_below(n_services));
            n.execution_path = 0;
            if (children[i].empty()) children[i].insert(terminal);
            n.childs.assign(children[i].begin(), children[i].end());
            edges += n.childs.size();
            path.nodes.push_back(n);
        }
        PathNodeSpec t;
        t.node_id = terminal;
        t.service = "client";
        path.nodes.push_back(t);

        if (rng.uniform_below(2) == 0 && internals > 1) {
            // http-style pairing: block on entry, release on a descendant.
            path.nodes[0].enter_op = {PathOp::block_recv_connection};
            int y = 1 + static_cast<int>(rng.uniform_below(internals - 1));
            path.nodes[y].leave_op = {PathOp::unblock_connection};
            path.nodes[y].causal_node_id = 0;
        }
        s.inter_paths = {path};

        s.client.load_pattern = {LoadPattern::Kind::constant,
                                 500.0 + static_cast<double>(rng.uniform_below(2000)), "", {}};
        s.client.duration_s = 0.08;
        s.client.warmup_s = 0.0;
        s.client.rng_seed = rng.next_u64();
        s.client.connections = 1 + static_cast<int>(rng.uniform_below(3));

        try {
            RunReport r = Simulation(s, {}).run();
            if (r.jobs_in_flight != 0) res.fail("copies left in flight after drain");
            if (r.copies_created != r.jobs_completed * edges)
                res.fail("copies != requests * edges");
        } catch (const std::exception& e) {
            res.fail(std::string("run failed: ") + e.what());
        }
    }
    return res;
}

// Controller invariants under random window sequences: preference bounds,
// at most one slow-down per interval, failing-list admission soundness.
inline SuiteResult failing_list_soundness(int cases, std::uint64_t seed = 31337) {
    using namespace uqsim;
    SuiteResult res;
    RngStream rng(seed);
    for (int c = 0; c < cases; ++c) {
        ++res.cases;
        int tiers = 2 + static_cast<int>(rng.uniform_below(2));
        PmConfig cfg;
        cfg.qos_target_ms = 5.0;
        std::vector<std::vector<double>> ladders(tiers, {1.2, 1.6, 2.0, 2.6});
        PowerManager pm(cfg, ladders);
        std::vector<std::size_t> tuple_counts(cfg.bucket_count, 0);

        for (int stepi = 0; stepi < 30; ++stepi) {
            PmWindowStats w;
            w.e2e_p99_ms = 0.5 + 11.5 * rng.uniform01();
            for (int t = 0; t < tiers; ++t) w.tier_p99_ms.push_back(0.2 + 7.8 * rng.uniform01());
            std::vector<int> before;
            for (int t = 0; t < tiers; ++t) before.push_back(pm.level(t));
            bool violating = w.e2e_p99_ms >= cfg.qos_target_ms;

            std::string action;
            auto actions = pm.step(w, rng, action);

            int slow = 0, fast = 0;
            for (const auto& a : actions) {
                if (a.new_level < before[a.tier]) ++slow;
                if (a.new_level > before[a.tier]) ++fast;
            }
            if (slow > 1) res.fail("more than one slow-down in one interval");
            if (!violating && fast > 0 && action != "fallback_max")
                res.fail("speed-up outside a violating interval");

            const auto& buckets = pm.buckets();
            for (int b = 0; b < cfg.bucket_count; ++b) {
                if (buckets[b].preference < cfg.preference_min - 1e-12 ||
                    buckets[b].preference > cfg.preference_max + 1e-12)
                    res.fail("preference out of bounds");
                // Tuples admitted this step must clear the failing list.
                for (std::size_t k = tuple_counts[b]; k < buckets[b].tuples.size(); ++k) {
                    for (const auto& f : buckets[b].failing_list) {
                        bool dominated = true;
                        for (int t = 0; t < tiers; ++t)
                            if (f[t] > buckets[b].tuples[k].tier_p99_ms[t]) dominated = false;
                        if (dominated) res.fail("admitted a tuple dominated by a failing entry");
                    }
                }
                tuple_counts[b] = buckets[b].tuples.size();
            }
        }
    }
    return res;
}

inline SuiteResult percentile_monotonicity(int cases, std::uint64_t seed = 555) {
    SuiteResult res;
    uqsim::RngStream rng(seed);
    for (int c = 0; c < cases; ++c) {
        ++res.cases;
        int n = 1 + static_cast<int>(rng.uniform_below(300));
        std::vector<double> samples(n);
        for (auto& v : samples) v = rng.exponential(100.0 * (1.0 + rng.uniform01()));
        double p = 0.1 + 99.0 * rng.uniform01();
        double q = p + (99.9 - p) * rng.uniform01();
        if (uqsim::percentile(samples, p) > uqsim::percentile(samples, q))
            res.fail("percentile(p) > percentile(q) with p <= q");
    }
    return res;
}

}  // namespace props

#endif
