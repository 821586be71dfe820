#ifndef UQSIM_SIMULATION_HPP
#define UQSIM_SIMULATION_HPP

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstring>
#include <deque>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "uqsim/config.hpp"
#include "uqsim/engine.hpp"
#include "uqsim/errors.hpp"
#include "uqsim/power.hpp"
#include "uqsim/queueing.hpp"
#include "uqsim/rng.hpp"
#include "uqsim/service_model.hpp"
#include "uqsim/stats.hpp"
#include "uqsim/workload.hpp"

namespace uqsim {

struct RunOptions {
    std::optional<std::uint64_t> seed;    // overrides client.rng_seed
    std::optional<double> duration_s;     // overrides client.duration_s
    std::optional<double> warmup_s;       // overrides client.warmup_s
    std::optional<double> horizon_s;      // stop processing events past this time (default: drain)
    std::uint64_t max_events = 1'000'000'000;
    bool record_per_tier = true;
    bool pm_enabled = true;               // honor client.power_manager when present
    std::optional<double> pm_interval_s;  // overrides the scenario's decision interval
    std::optional<double> pm_qos_ms;      // overrides the scenario's QoS target
    double context_switch_us = 5.0;       // charged when a thread resumes oversubscribed
};

struct MachineUtil {
    std::string machine_id;
    double app_util = 0.0;  // busy core-time / (cores * elapsed)
    double net_util = 0.0;
};

struct RunReport {
    std::uint64_t events_processed = 0;
    std::uint64_t jobs_injected = 0;
    std::uint64_t jobs_completed = 0;   // root requests with every copy merged or terminal
    std::uint64_t jobs_in_flight = 0;   // injected - completed at stop
    std::uint64_t copies_created = 0;   // one per path-tree edge traversed
    std::uint64_t max_outstanding = 0;  // peak concurrently admitted root requests
    std::uint64_t trace_hash = 0;       // FNV over the (timestamp, sequence, kind) stream
    double duration_s = 0.0;
    double warmup_s = 0.0;
    double offered_qps = 0.0;
    double achieved_qps = 0.0;
    std::vector<std::string> tier_names;  // instance names, sorted
    std::vector<MachineUtil> machine_utils;
    LatencyRecorder recorder;

    // Power management accounting (empty unless the run had PM enabled).
    PmTrace pm_trace;
    std::uint64_t pm_windows = 0;
    std::uint64_t pm_violations = 0;
    double energy_proxy = 0.0;           // sum over windows and tiers of f/f_max
    double energy_proxy_baseline = 0.0;  // same windows at always-max (= windows * tiers)

    double mean_ms() const { return recorder.e2e_mean() / 1000.0; }
    double p99_ms() const { return recorder.e2e_percentile(99.0) / 1000.0; }
    double percentile_ms(double p) const { return recorder.e2e_percentile(p) / 1000.0; }

    double tier_p99_ms(std::size_t tier) const {
        const auto& v = recorder.tier_us(tier);
        return v.empty() ? 0.0 : percentile(v, 99.0) / 1000.0;
    }

    double violation_rate() const {
        return pm_windows == 0 ? 0.0 : static_cast<double>(pm_violations) / pm_windows;
    }

    // Fraction of completed requests that selected the tracked execution
    // path at least once (e.g. the slow path in the fanout experiments).
    double tracked_fraction() const {
        return recorder.completed() == 0
                   ? 0.0
                   : static_cast<double>(recorder.tracked_hits()) / recorder.completed();
    }

    SweepRow to_row() const {
        SweepRow row;
        row.offered_qps = offered_qps;
        row.achieved_qps = achieved_qps;
        row.mean_ms = mean_ms();
        row.p95_ms = percentile_ms(95.0);
        row.p99_ms = p99_ms();
        for (std::size_t t = 0; t < tier_names.size(); ++t) row.tier_p99_ms.push_back(tier_p99_ms(t));
        return row;
    }
};

// One discrete-event run over an immutable scenario. Strictly
// single-threaded; independent runs share no mutable state.
class Simulation {
  public:
    explicit Simulation(Scenario scenario, RunOptions opts = {})
        : scenario_(std::move(scenario)), opts_(opts) {
        if (opts_.duration_s) scenario_.client.duration_s = *opts_.duration_s;
        if (opts_.warmup_s) scenario_.client.warmup_s = *opts_.warmup_s;
        if (opts_.pm_interval_s && scenario_.client.power_manager)
            scenario_.client.power_manager->decision_interval_s = *opts_.pm_interval_s;
        if (opts_.pm_qos_ms && scenario_.client.power_manager)
            scenario_.client.power_manager->qos_target_ms = *opts_.pm_qos_ms;
        validate_scenario(scenario_);
        bind();
    }

    RunReport run() {
        seed_initial_events();
        const double horizon_us = opts_.horizon_s ? *opts_.horizon_s * 1e6 : -1.0;
        while (!eq_.empty()) {
            if (horizon_us >= 0.0 && eq_.peek().ts > horizon_us) break;
            Event e = eq_.pop();
            now_ = e.ts;
            if (++events_ > opts_.max_events)
                throw LivelockError("event count exceeded cap of " + std::to_string(opts_.max_events));
            hash_event(e);
            dispatch(e);
        }
        return make_report();
    }

    // Schedules a dvfs_change for the named instance. The level must be one
    // of the hosting machine's dvfs_levels.
    void apply_frequency(const std::string& instance_name, double ghz) {
        int idx = instance_index(instance_name);
        const RtMachine& m = machines_[instances_[idx].machine];
        for (std::size_t l = 0; l < m.levels.size(); ++l) {
            if (m.levels[l] == ghz) {
                eq_.schedule(now_, EventKind::dvfs_change, static_cast<std::uint32_t>(idx),
                             static_cast<std::uint32_t>(l));
                return;
            }
        }
        throw InvalidLevelError("frequency " + detail::format_double(ghz) +
                                "GHz is not a dvfs level of machine " + m.id);
    }

    double current_freq_ghz(const std::string& instance_name) const {
        const RtInstance& inst = instances_[instance_index(instance_name)];
        return machines_[inst.machine].levels[inst.level];
    }

    const std::vector<std::string>& tier_names() const { return tier_names_; }

  private:
    // ------------------------------------------------------------------
    // Compiled runtime state
    // ------------------------------------------------------------------
    struct RtStageCfg {
        QueueType qtype = QueueType::single;
        int bound = 1;
        double slope_event = 0.0;
        double slope_byte = 0.0;
        int stage_id = 0;
    };

    // Processing source resolved against one machine ladder: for each dvfs
    // level, either an exact-frequency histogram or a scaled base source.
    struct ProcSource {
        const HistogramPdf* hist = nullptr;  // exact or nominal histogram
        const AnalyticDist* analytic = nullptr;
        double scale = 1.0;  // f_nominal / f
    };

    struct RtPathCfg {
        int path_id = 0;
        std::vector<int> stages;                        // dense stage indices, execution order
        std::vector<const ProcessingSpec*> processing;  // per position (override or stage default)
    };

    struct RtService {
        const ServiceSpec* spec = nullptr;
        std::vector<RtStageCfg> stages;
        std::map<int, int> stage_idx;  // stage_id -> dense
        std::vector<RtPathCfg> paths;
        std::map<int, int> path_idx;  // path_id -> dense
        std::vector<std::pair<double, int>> path_cdf;  // cumulative prob -> dense path
        int tracked_path = -1;
    };

    struct ConnState {
        bool blocked = false;
        std::deque<std::uint32_t> pending;  // jobs parked while receive-blocked
    };

    struct Pool {
        int capacity = 0;
        int in_use = 0;
        std::vector<char> slot_used;
        std::deque<std::uint32_t> waiters;

        int claim() {
            for (std::size_t s = 0; s < slot_used.size(); ++s) {
                if (!slot_used[s]) {
                    slot_used[s] = 1;
                    ++in_use;
                    return static_cast<int>(s);
                }
            }
            return -1;
        }
        void release(int slot) {
            slot_used[slot] = 0;
            --in_use;
        }
    };

    struct RtInstance {
        std::string name;
        int svc = 0;
        int machine = 0;
        int tier = 0;  // index into sorted tier_names_
        ExecModel model = ExecModel::simple;
        int threads = 1;
        int level = 0;  // dvfs level index
        std::vector<StageQueue> queues;
        int busy_threads = 0;
        int blocked_threads = 0;
        bool dispatch_queued = false;
        std::unordered_map<std::uint64_t, int> conn_ids;  // (src, slot) -> dense conn
        std::vector<ConnState> conns;
        std::unordered_map<int, int> pool_for_peer;  // dst instance -> pools_ index
    };

    struct RtMachine {
        std::string id;
        int cores = 1;
        int net_cores = 0;
        std::vector<double> levels;
        AnalyticDist rx;
        double rx_per_byte = 0.0;
        int busy = 0;
        std::vector<int> instance_ids;  // instances deployed here
        std::deque<int> dispatch_q;
        int net_busy = 0;
        std::deque<std::uint32_t> net_pending;
        // busy-time integrals for utilization reporting
        double app_integral = 0.0, net_integral = 0.0;
        double app_last = 0.0, net_last = 0.0;
    };

    struct CompiledNode {
        int node_id = 0;
        int inst = -1;  // -1: client terminal
        int fixed_path = -1;
        int slice_begin = 0, slice_end = 0;  // positions within the fixed path
        std::vector<int> children;
        std::uint16_t parent_count = 0;
        std::vector<PathOp> enter_ops, leave_ops;
        int causal = -1;
    };

    struct CompiledPath {
        double probability = 1.0;
        int entry = 0;
        std::vector<CompiledNode> nodes;
    };

    struct Job {
        std::uint32_t ctx = 0;
        std::uint16_t node = 0;
        std::uint16_t exec_path = 0;
        std::uint16_t pos = 0;       // current position in the execution path
        std::uint16_t end_pos = 0;   // last position to run at this node
        int from_inst = -1;          // -1: from the client
        int conn_slot = 0;           // source-side slot (client rr index or pool slot)
        int conn = -1;               // dense inbound connection at the destination
        int pool = -1;               // pools_ index of the held lease
        double enter_ts = 0.0;       // arrival at the instance (post network rx)
        bool first_stage_pending = false;
    };

    struct Ctx {
        double arrival_ts = 0.0;
        int path = 0;  // dense inter-path index
        std::uint32_t live_copies = 0;
        bool gauge_counted = false;
        bool tracked_hit = false;
        std::vector<std::uint16_t> fanin;   // remaining parent completions per node
        std::vector<char> executed;
        std::vector<double> tier_sojourn;   // per tier, accumulated us
        // Blocking registry: (node, instance, conn) / (node, instance).
        std::vector<std::array<int, 3>> blocked_conns;
        std::vector<std::array<int, 2>> blocked_thread_slots;
    };

    // ------------------------------------------------------------------
    // Binding: resolve names to dense indices once, before the run.
    // ------------------------------------------------------------------
    void bind() {
        const ClientSpec& c = scenario_.client;
        master_seed_ = opts_.seed ? *opts_.seed : c.rng_seed;
        duration_us_ = c.duration_s * 1e6;
        warmup_us_ = c.warmup_s * 1e6;

        // Services.
        for (const auto& svc : scenario_.services) {
            RtService rs;
            rs.spec = &svc;
            for (const auto& st : svc.stages) {
                rs.stage_idx[st.stage_id] = static_cast<int>(rs.stages.size());
                rs.stages.push_back({st.queue_type, st.batch_bound(), st.slope_us_per_event,
                                     st.slope_us_per_byte, st.stage_id});
            }
            for (const auto& p : svc.paths) {
                RtPathCfg pc;
                pc.path_id = p.path_id;
                for (int sid : p.stages) {
                    pc.stages.push_back(rs.stage_idx.at(sid));
                    auto ov = p.processing_overrides.find(sid);
                    pc.processing.push_back(ov != p.processing_overrides.end()
                                                ? &ov->second
                                                : &svc.find_stage(sid)->processing);
                }
                rs.path_idx[p.path_id] = static_cast<int>(rs.paths.size());
                if (!c.tracked_path_name.empty() && p.path_name == c.tracked_path_name)
                    rs.tracked_path = static_cast<int>(rs.paths.size());
                rs.paths.push_back(std::move(pc));
            }
            if (!svc.path_probabilities.empty()) {
                double acc = 0.0;
                for (const auto& [pid, prob] : svc.path_probabilities) {
                    acc += prob;
                    rs.path_cdf.emplace_back(acc, rs.path_idx.at(pid));
                }
            }
            svc_idx_[svc.service_name] = static_cast<int>(services_.size());
            services_.push_back(std::move(rs));
        }

        // Machines.
        for (const auto& m : scenario_.machines) {
            RtMachine rm;
            rm.id = m.machine_id;
            rm.cores = m.cores;
            rm.net_cores = m.network_cores;
            rm.levels = m.dvfs_levels;
            rm.rx = m.network_rx;
            rm.rx_per_byte = m.network_rx_us_per_byte;
            machine_idx_[m.machine_id] = static_cast<int>(machines_.size());
            machines_.push_back(std::move(rm));
        }

        // Instances; tiers are instances sorted by name.
        for (const auto& i : scenario_.instances) tier_names_.push_back(i.instance_name);
        std::sort(tier_names_.begin(), tier_names_.end());
        for (const auto& i : scenario_.instances) {
            RtInstance ri;
            ri.name = i.instance_name;
            ri.svc = svc_idx_.at(i.service_name);
            ri.machine = machine_idx_.at(i.machine_id);
            ri.tier = static_cast<int>(
                std::lower_bound(tier_names_.begin(), tier_names_.end(), i.instance_name) -
                tier_names_.begin());
            ri.model = i.exec_model;
            ri.threads = i.threads;
            ri.level = static_cast<int>(machines_[ri.machine].levels.size()) - 1;
            for (const auto& st : services_[ri.svc].stages)
                ri.queues.emplace_back(st.qtype, st.bound);
            inst_idx_[i.instance_name] = static_cast<int>(instances_.size());
            machines_[ri.machine].instance_ids.push_back(static_cast<int>(instances_.size()));
            instances_.push_back(std::move(ri));
        }
        for (const auto& i : scenario_.instances) {
            RtInstance& ri = instances_[inst_idx_.at(i.instance_name)];
            for (const auto& [peer, cap] : i.connection_pools) {
                Pool p;
                p.capacity = cap;
                p.slot_used.assign(cap, 0);
                ri.pool_for_peer[inst_idx_.at(peer)] = static_cast<int>(pools_.size());
                pools_.push_back(std::move(p));
            }
        }

        // Inter-microservice paths.
        double acc = 0.0;
        for (const auto& p : scenario_.inter_paths) {
            CompiledPath cp;
            cp.probability = p.probability;
            std::map<int, int> id2idx;
            for (const auto& n : p.nodes) id2idx[n.node_id] = static_cast<int>(id2idx.size());
            cp.entry = id2idx.at(p.entry);
            cp.nodes.resize(p.nodes.size());
            for (const auto& n : p.nodes) {
                CompiledNode cn;
                cn.node_id = n.node_id;
                if (!n.is_client()) {
                    cn.inst = inst_idx_.at(n.service);
                    const RtService& rs = services_[instances_[cn.inst].svc];
                    if (n.execution_path) {
                        cn.fixed_path = rs.path_idx.at(*n.execution_path);
                        const auto& stages = rs.spec->find_path(*n.execution_path)->stages;
                        auto pos_of = [&](int sid) {
                            return static_cast<int>(std::find(stages.begin(), stages.end(), sid) -
                                                    stages.begin());
                        };
                        cn.slice_begin = n.start_stage ? pos_of(*n.start_stage) : 0;
                        cn.slice_end =
                            n.end_stage ? pos_of(*n.end_stage) : static_cast<int>(stages.size()) - 1;
                    }
                }
                for (int ch : n.childs) cn.children.push_back(id2idx.at(ch));
                cn.enter_ops = n.enter_op;
                cn.leave_ops = n.leave_op;
                if (n.causal_node_id) cn.causal = id2idx.at(*n.causal_node_id);
                cp.nodes[id2idx.at(n.node_id)] = std::move(cn);
            }
            for (const auto& n : cp.nodes)
                for (int ch : n.children) ++cp.nodes[ch].parent_count;
            acc += p.probability;
            path_cdf_.emplace_back(acc, static_cast<int>(cpaths_.size()));
            cpaths_.push_back(std::move(cp));
        }

        // Named rng streams: one per (role, entity).
        rng_path_ = RngStream(derive_stream_seed(master_seed_, "path"));
        rng_pm_ = RngStream(derive_stream_seed(master_seed_, "pm"));
        for (const auto& i : instances_) {
            rng_xpath_.emplace_back(derive_stream_seed(master_seed_, "xpath:" + i.name));
            rng_proc_.emplace_back(derive_stream_seed(master_seed_, "proc:" + i.name));
        }
        for (const auto& m : machines_)
            rng_net_.emplace_back(derive_stream_seed(master_seed_, "net:" + m.id));

        arrivals_ = ArrivalProcess(c.load_pattern, c.interarrival,
                                   derive_stream_seed(master_seed_, "arrival"), c.duration_s);

        recorder_ = LatencyRecorder(warmup_us_, duration_us_, tier_names_.size(), opts_.record_per_tier);

        if (opts_.pm_enabled && c.power_manager) {
            pm_cfg_ = *c.power_manager;
            std::vector<std::vector<double>> ladders;
            for (const auto& name : tier_names_)
                ladders.push_back(machines_[instances_[inst_idx_.at(name)].machine].levels);
            pm_ = PowerManager(pm_cfg_, std::move(ladders));
            pm_active_ = true;
            pm_trace_.tier_names = tier_names_;
            recorder_.set_window_active(true);
        }
    }

    int instance_index(const std::string& name) const {
        auto it = inst_idx_.find(name);
        if (it == inst_idx_.end()) throw DanglingReferenceError(name, "instance");
        return it->second;
    }

    // ------------------------------------------------------------------
    // Job / context pools
    // ------------------------------------------------------------------
    std::uint32_t alloc_job() {
        if (!free_jobs_.empty()) {
            std::uint32_t id = free_jobs_.back();
            free_jobs_.pop_back();
            jobs_[id] = Job{};
            return id;
        }
        jobs_.emplace_back();
        return static_cast<std::uint32_t>(jobs_.size() - 1);
    }
    void free_job(std::uint32_t id) { free_jobs_.push_back(id); }

    std::uint32_t alloc_ctx() {
        std::uint32_t id;
        if (!free_ctxs_.empty()) {
            id = free_ctxs_.back();
            free_ctxs_.pop_back();
        } else {
            ctxs_.emplace_back();
            id = static_cast<std::uint32_t>(ctxs_.size() - 1);
        }
        return id;
    }
    void free_ctx(std::uint32_t id) {
        Ctx& c = ctxs_[id];
        c.blocked_conns.clear();
        c.blocked_thread_slots.clear();
        c.gauge_counted = false;
        c.tracked_hit = false;
        c.live_copies = 0;
        free_ctxs_.push_back(id);
    }

    // ------------------------------------------------------------------
    // Request lifecycle
    // ------------------------------------------------------------------
    void seed_initial_events() {
        if (auto t = arrivals_.try_next()) eq_.schedule(*t, EventKind::client_arrival_tick);
        if (pm_active_) {
            double first = warmup_us_ > 0.0 ? warmup_us_ : pm_cfg_.decision_interval_s * 1e6;
            if (first <= duration_us_) eq_.schedule(first, EventKind::pm_decision_tick);
        }
    }

    void dispatch(const Event& e) {
        switch (e.kind) {
            case EventKind::client_arrival_tick:
                inject_request();
                if (auto t = arrivals_.try_next()) eq_.schedule(*t, EventKind::client_arrival_tick);
                break;
            case EventKind::job_arrival:
                admit(e.a);
                break;
            case EventKind::network_rx_complete:
                on_rx_complete(e.a, e.b);
                break;
            case EventKind::stage_batch_complete:
                on_invocation_complete(e.a);
                break;
            case EventKind::thread_wakeup: {
                RtInstance& inst = instances_[e.a];
                request_dispatch(static_cast<int>(e.a));
                machine_pump(inst.machine);
                break;
            }
            case EventKind::dvfs_change:
                instances_[e.a].level = static_cast<int>(e.b);
                break;
            case EventKind::pm_decision_tick:
                on_pm_tick();
                break;
        }
    }

    void inject_request() {
        std::uint32_t cid = alloc_ctx();
        Ctx& c = ctxs_[cid];
        c.arrival_ts = now_;
        c.path = pick_inter_path();
        const CompiledPath& cp = cpaths_[c.path];
        c.fanin.assign(cp.nodes.size(), 0);
        for (std::size_t i = 0; i < cp.nodes.size(); ++i) c.fanin[i] = cp.nodes[i].parent_count;
        c.executed.assign(cp.nodes.size(), 0);
        c.tier_sojourn.assign(tier_names_.size(), 0.0);
        ++jobs_injected_;

        std::uint32_t jid = make_job(cid, cp.entry);
        Job& j = jobs_[jid];
        j.from_inst = -1;
        j.conn_slot = client_rr_++ % scenario_.client.connections;
        deliver(jid);
    }

    int pick_inter_path() {
        if (cpaths_.size() == 1) return 0;
        double u = rng_path_.uniform01();
        for (const auto& [cum, idx] : path_cdf_)
            if (u <= cum) return idx;
        return path_cdf_.back().second;
    }

    std::uint32_t make_job(std::uint32_t cid, int node_idx) {
        Ctx& c = ctxs_[cid];
        const CompiledNode& n = cpaths_[c.path].nodes[node_idx];
        if (c.executed[node_idx])
            throw Error("path node " + std::to_string(n.node_id) + " executed twice for one request");
        c.executed[node_idx] = 1;
        ++c.live_copies;
        std::uint32_t jid = alloc_job();
        Job& j = jobs_[jid];
        j.ctx = cid;
        j.node = static_cast<std::uint16_t>(node_idx);
        return jid;
    }

    // Route a job to its node's instance: acquire a connection-pool lease on
    // instance-to-instance hops, then cross the network if machines differ.
    void deliver(std::uint32_t jid) {
        Job& j = jobs_[jid];
        const CompiledNode& n = node_of(j);
        if (n.inst < 0) {
            complete_terminal(jid);
            return;
        }
        if (j.from_inst >= 0 && j.pool < 0) {
            auto it = instances_[j.from_inst].pool_for_peer.find(n.inst);
            if (it != instances_[j.from_inst].pool_for_peer.end()) {
                Pool& p = pools_[it->second];
                int slot = p.claim();
                if (slot < 0) {
                    p.waiters.push_back(jid);
                    return;
                }
                j.pool = it->second;
                j.conn_slot = slot;
            }
        }
        int src_machine = j.from_inst >= 0 ? instances_[j.from_inst].machine : -1;
        int dst_machine = instances_[n.inst].machine;
        if (src_machine != dst_machine && machines_[dst_machine].net_cores > 0)
            net_enqueue(dst_machine, jid);
        else
            eq_.schedule(now_, EventKind::job_arrival, jid);
    }

    // ------------------------------------------------------------------
    // Network processing: a standalone per-machine service with dedicated
    // interrupt cores; every cross-machine hop pays rx at the destination.
    // ------------------------------------------------------------------
    void net_enqueue(int mi, std::uint32_t jid) {
        RtMachine& m = machines_[mi];
        if (m.net_busy < m.net_cores)
            net_start(mi, jid);
        else
            m.net_pending.push_back(jid);
    }

    void net_start(int mi, std::uint32_t jid) {
        RtMachine& m = machines_[mi];
        net_busy_change(m, +1);
        double dur = m.rx.sample(rng_net_[mi]) + m.rx_per_byte * scenario_.client.request_size_bytes;
        eq_.schedule(now_ + dur, EventKind::network_rx_complete, jid, static_cast<std::uint32_t>(mi));
    }

    void on_rx_complete(std::uint32_t jid, std::uint32_t mi) {
        RtMachine& m = machines_[mi];
        net_busy_change(m, -1);
        if (!m.net_pending.empty()) {
            std::uint32_t next = m.net_pending.front();
            m.net_pending.pop_front();
            net_start(static_cast<int>(mi), next);
        }
        admit(jid);
    }

    // ------------------------------------------------------------------
    // Admission into a microservice instance
    // ------------------------------------------------------------------
    int inbound_conn(RtInstance& inst, int src, int slot) {
        std::uint64_t key = (static_cast<std::uint64_t>(static_cast<std::uint32_t>(src)) << 32) |
                            static_cast<std::uint32_t>(slot);
        auto it = inst.conn_ids.find(key);
        if (it != inst.conn_ids.end()) return it->second;
        int id = static_cast<int>(inst.conns.size());
        inst.conn_ids.emplace(key, id);
        inst.conns.emplace_back();
        return id;
    }

    void admit(std::uint32_t jid) {
        Job& j = jobs_[jid];
        const CompiledNode& n = node_of(j);
        RtInstance& inst = instances_[n.inst];
        int conn = inbound_conn(inst, j.from_inst, j.conn_slot);
        if (j.conn < 0) j.enter_ts = now_;  // first arrival at this instance (parking included)
        j.conn = conn;
        if (inst.conns[conn].blocked) {
            inst.conns[conn].pending.push_back(jid);
            return;
        }
        admit_unparked(jid);
    }

    void admit_unparked(std::uint32_t jid) {
        Job& j = jobs_[jid];
        const CompiledNode& n = node_of(j);
        RtInstance& inst = instances_[n.inst];
        Ctx& c = ctxs_[j.ctx];

        if (!c.gauge_counted) {
            c.gauge_counted = true;
            ++outstanding_;
            max_outstanding_ = std::max(max_outstanding_, outstanding_);
        }
        apply_ops(n.enter_ops, jid, n);

        const RtService& svc = services_[inst.svc];
        if (n.fixed_path >= 0) {
            j.exec_path = static_cast<std::uint16_t>(n.fixed_path);
            j.pos = static_cast<std::uint16_t>(n.slice_begin);
            j.end_pos = static_cast<std::uint16_t>(n.slice_end);
        } else {
            int p = select_execution_path(svc, rng_xpath_[n.inst]);
            j.exec_path = static_cast<std::uint16_t>(p);
            j.pos = 0;
            j.end_pos = static_cast<std::uint16_t>(svc.paths[p].stages.size() - 1);
        }
        if (svc.tracked_path >= 0 && j.exec_path == svc.tracked_path) c.tracked_hit = true;

        j.first_stage_pending = true;
        inst.queues[svc.paths[j.exec_path].stages[j.pos]].enqueue(jid, j.conn);
        request_dispatch(n.inst);
        machine_pump(inst.machine);
    }

    int select_execution_path(const RtService& svc, RngStream& rng) {
        if (svc.paths.size() == 1) return 0;  // no draw consumed
        if (svc.path_cdf.empty())
            throw Error("service \"" + svc.spec->service_name +
                        "\" needs path_probabilities for probabilistic selection");
        double u = rng.uniform01();
        for (const auto& [cum, idx] : svc.path_cdf)
            if (u <= cum) return idx;
        return svc.path_cdf.back().second;
    }

    // ------------------------------------------------------------------
    // Dispatch: FIFO grant of free cores to ready invocations. Within an
    // instance the deepest non-empty stage runs first (run-to-completion
    // pipeline draining).
    // ------------------------------------------------------------------
    // Running invocations plus waiting-but-ready thread demand on the
    // machine's multi-threaded instances.
    int runnable_threads(const RtMachine& m) const {
        int runnable = m.busy;
        for (int ii : m.instance_ids) {
            const RtInstance& inst = instances_[ii];
            if (inst.model != ExecModel::multi_threaded) continue;
            int idle = inst.threads - inst.busy_threads - inst.blocked_threads;
            if (idle <= 0) continue;
            int queued = 0;
            for (const auto& q : inst.queues) queued += static_cast<int>(q.size());
            runnable += std::min(idle, queued);
        }
        return runnable;
    }

    bool has_startable(const RtInstance& inst) const {
        if (inst.model == ExecModel::multi_threaded &&
            inst.busy_threads + inst.blocked_threads >= inst.threads)
            return false;
        for (const auto& q : inst.queues)
            if (!q.empty()) return true;
        return false;
    }

    void request_dispatch(int ii) {
        RtInstance& inst = instances_[ii];
        if (!inst.dispatch_queued && has_startable(inst)) {
            inst.dispatch_queued = true;
            machines_[inst.machine].dispatch_q.push_back(ii);
        }
    }

    void machine_pump(int mi) {
        RtMachine& m = machines_[mi];
        while (m.busy < m.cores && !m.dispatch_q.empty()) {
            int ii = m.dispatch_q.front();
            m.dispatch_q.pop_front();
            instances_[ii].dispatch_queued = false;
            bool started = try_start_one(ii);
            if (started) request_dispatch(ii);
        }
    }

    bool try_start_one(int ii) {
        RtInstance& inst = instances_[ii];
        RtMachine& m = machines_[inst.machine];
        if (inst.model == ExecModel::multi_threaded &&
            inst.busy_threads + inst.blocked_threads >= inst.threads)
            return false;
        int stage = -1;
        for (int s = static_cast<int>(inst.queues.size()) - 1; s >= 0; --s) {
            if (!inst.queues[s].empty()) {
                stage = s;
                break;
            }
        }
        if (stage < 0) return false;

        std::vector<std::uint32_t> batch = inst.queues[stage].dequeue_batch();
        if (inst.model == ExecModel::multi_threaded) ++inst.busy_threads;
        app_busy_change(m, +1);
        double dur = invocation_time(ii, stage, batch);
        // A thread resuming while runnable threads exceed the machine's
        // cores pays a context switch.
        if (inst.model == ExecModel::multi_threaded && runnable_threads(m) > m.cores)
            dur += opts_.context_switch_us;
        for (std::uint32_t jid : batch) {
            Job& j = jobs_[jid];
            if (j.first_stage_pending) {
                j.first_stage_pending = false;
                recorder_.record_wait(inst.tier, now_ - j.enter_ts);
            }
        }
        std::uint32_t inv = alloc_invocation(ii, stage, std::move(batch));
        eq_.schedule(now_ + dur, EventKind::stage_batch_complete, inv);
        return true;
    }

    // Whole-batch invocation cost; the batch completes together.
    double invocation_time(int ii, int stage, const std::vector<std::uint32_t>& batch) {
        RtInstance& inst = instances_[ii];
        const RtService& svc = services_[inst.svc];
        const Job& j0 = jobs_[batch.front()];
        const ProcessingSpec* proc = svc.paths[j0.exec_path].processing[j0.pos];
        const RtMachine& m = machines_[inst.machine];
        const RtStageCfg& sc = svc.stages[stage];
        return sample_processing_time(*proc, scenario_.histograms, svc.spec->service_name,
                                      sc.stage_id, m.levels[inst.level], m.levels.back(),
                                      sc.slope_event, sc.slope_byte, static_cast<int>(batch.size()),
                                      scenario_.client.request_size_bytes, rng_proc_[ii]);
    }

    std::uint32_t alloc_invocation(int ii, int stage, std::vector<std::uint32_t> batch) {
        std::uint32_t id;
        if (!free_invocations_.empty()) {
            id = free_invocations_.back();
            free_invocations_.pop_back();
        } else {
            invocations_.emplace_back();
            id = static_cast<std::uint32_t>(invocations_.size() - 1);
        }
        invocations_[id] = {ii, stage, std::move(batch)};
        return id;
    }

    void on_invocation_complete(std::uint32_t inv_id) {
        auto inv = std::move(invocations_[inv_id]);
        free_invocations_.push_back(inv_id);
        RtInstance& inst = instances_[inv.inst];
        RtMachine& m = machines_[inst.machine];
        app_busy_change(m, -1);
        if (inst.model == ExecModel::multi_threaded) --inst.busy_threads;

        for (std::uint32_t jid : inv.jobs) {
            Job& j = jobs_[jid];
            if (j.pos < j.end_pos) {
                ++j.pos;
                const RtService& svc = services_[inst.svc];
                inst.queues[svc.paths[j.exec_path].stages[j.pos]].enqueue(jid, j.conn);
            } else {
                on_node_complete(jid);
            }
        }
        request_dispatch(inv.inst);
        // Thread/core released; waiters wake at the same timestamp with a
        // later sequence number.
        if (m.busy < m.cores && !m.dispatch_q.empty())
            eq_.schedule(now_, EventKind::thread_wakeup, static_cast<std::uint32_t>(inv.inst));
    }

    struct Invocation {
        int inst = 0;
        int stage = 0;
        std::vector<std::uint32_t> jobs;
    };

    // ------------------------------------------------------------------
    // Path-tree traversal
    // ------------------------------------------------------------------
    const CompiledNode& node_of(const Job& j) const { return cpaths_[ctxs_[j.ctx].path].nodes[j.node]; }

    void on_node_complete(std::uint32_t jid) {
        Job j = jobs_[jid];  // copy; the job is freed below
        Ctx& c = ctxs_[j.ctx];
        const CompiledPath& cp = cpaths_[c.path];
        const CompiledNode& n = cp.nodes[j.node];
        RtInstance& inst = instances_[n.inst];

        c.tier_sojourn[inst.tier] += now_ - j.enter_ts;
        if (j.pool >= 0) release_pool_slot(j.pool, j.conn_slot);
        free_job(jid);

        // Children before leave ops, so a response reaching the client and
        // the unblock it causes land in that order at the same timestamp.
        for (int ch : n.children) {
            ++copies_created_;
            if (c.fanin[ch] == 0) throw Error("fan-in counter underflow");
            if (--c.fanin[ch] == 0) {
                std::uint32_t child = make_job(j.ctx, ch);
                jobs_[child].from_inst = n.inst;
                deliver(child);
            }
        }
        apply_ops(n.leave_ops, jid, n, j.ctx, j.node, j.conn);

        end_copy(j.ctx);
    }

    void complete_terminal(std::uint32_t jid) {
        Job j = jobs_[jid];
        Ctx& c = ctxs_[j.ctx];
        free_job(jid);
        double e2e = now_ - c.arrival_ts;
        recorder_.record_request(c.arrival_ts, now_, e2e, c.tier_sojourn, c.tracked_hit);
        if (c.gauge_counted) {
            c.gauge_counted = false;
            --outstanding_;
        }
        end_copy(j.ctx);
    }

    void end_copy(std::uint32_t cid) {
        Ctx& c = ctxs_[cid];
        if (--c.live_copies == 0) {
            ++jobs_completed_;
            free_ctx(cid);
        }
    }

    // Enter/leave blocking operations. Blocks register under (request,
    // node); unblocks resolve through causal_node_id against that registry.
    void apply_ops(const std::vector<PathOp>& ops, std::uint32_t jid, const CompiledNode& n,
                   std::uint32_t ctx_override = UINT32_MAX, int node_override = -1,
                   int conn_override = -1) {
        if (ops.empty()) return;
        std::uint32_t cid = ctx_override != UINT32_MAX ? ctx_override : jobs_[jid].ctx;
        int node_idx = node_override >= 0 ? node_override : jobs_[jid].node;
        int conn = conn_override >= 0 ? conn_override : jobs_[jid].conn;
        Ctx& c = ctxs_[cid];
        for (PathOp op : ops) {
            switch (op) {
                case PathOp::block_recv_connection: {
                    RtInstance& inst = instances_[n.inst];
                    inst.conns[conn].blocked = true;
                    c.blocked_conns.push_back({node_idx, n.inst, conn});
                    break;
                }
                case PathOp::block_thread: {
                    RtInstance& inst = instances_[n.inst];
                    ++inst.blocked_threads;
                    c.blocked_thread_slots.push_back({node_idx, n.inst});
                    break;
                }
                case PathOp::unblock_connection: {
                    bool found = false;
                    for (std::size_t i = 0; i < c.blocked_conns.size(); ++i) {
                        if (c.blocked_conns[i][0] == n.causal) {
                            int ii = c.blocked_conns[i][1];
                            int cc = c.blocked_conns[i][2];
                            c.blocked_conns.erase(c.blocked_conns.begin() + i);
                            unblock_connection(ii, cc);
                            found = true;
                            break;
                        }
                    }
                    if (!found)
                        throw DanglingCausalRefError(
                            "unblock_connection found no connection blocked at node " +
                            std::to_string(n.causal >= 0 ? cpaths_[c.path].nodes[n.causal].node_id
                                                         : -1));
                    break;
                }
                case PathOp::unblock_thread: {
                    bool found = false;
                    for (std::size_t i = 0; i < c.blocked_thread_slots.size(); ++i) {
                        if (c.blocked_thread_slots[i][0] == n.causal) {
                            int ii = c.blocked_thread_slots[i][1];
                            c.blocked_thread_slots.erase(c.blocked_thread_slots.begin() + i);
                            --instances_[ii].blocked_threads;
                            eq_.schedule(now_, EventKind::thread_wakeup,
                                         static_cast<std::uint32_t>(ii));
                            found = true;
                            break;
                        }
                    }
                    if (!found)
                        throw DanglingCausalRefError(
                            "unblock_thread found no thread blocked at node " +
                            std::to_string(n.causal >= 0 ? cpaths_[c.path].nodes[n.causal].node_id
                                                         : -1));
                    break;
                }
            }
        }
    }

    void unblock_connection(int ii, int conn) {
        RtInstance& inst = instances_[ii];
        inst.conns[conn].blocked = false;
        if (!inst.conns[conn].pending.empty()) {
            std::uint32_t next = inst.conns[conn].pending.front();
            inst.conns[conn].pending.pop_front();
            admit_unparked(next);
        }
    }

    void release_pool_slot(int pool, int slot) {
        Pool& p = pools_[pool];
        p.release(slot);
        if (!p.waiters.empty()) {
            std::uint32_t next = p.waiters.front();
            p.waiters.pop_front();
            deliver(next);
        }
    }

    // ------------------------------------------------------------------
    // Power-management decision ticks
    // ------------------------------------------------------------------
    void on_pm_tick() {
        auto w = recorder_.drain_window();
        const double interval_us = pm_cfg_.decision_interval_s * 1e6;
        // The tick at the warmup boundary only discards pre-warmup samples.
        if (now_ > warmup_us_ && !w.e2e_us.empty()) {
            PmWindowStats stats;
            stats.e2e_p99_ms = percentile(w.e2e_us, 99.0) / 1000.0;
            stats.tier_p99_ms.assign(tier_names_.size(), 0.0);
            for (std::size_t t = 0; t < tier_names_.size(); ++t)
                if (!w.tier_us[t].empty()) stats.tier_p99_ms[t] = percentile(w.tier_us[t], 99.0) / 1000.0;

            ++pm_windows_;
            if (stats.e2e_p99_ms >= pm_cfg_.qos_target_ms) ++pm_violations_;
            for (std::size_t t = 0; t < tier_names_.size(); ++t)
                energy_proxy_ += pm_->freq_ghz(t) / pm_->max_freq_ghz(t);
            energy_baseline_ += static_cast<double>(tier_names_.size());

            PmTraceRow row;
            row.window_end_s = now_ / 1e6;
            row.e2e_p99_ms = stats.e2e_p99_ms;
            row.tier_p99_ms = stats.tier_p99_ms;
            for (std::size_t t = 0; t < tier_names_.size(); ++t)
                row.tier_freq_ghz.push_back(pm_->freq_ghz(t));

            std::string action;
            auto actions = pm_->step(stats, rng_pm_, action);
            row.action = action;
            pm_trace_.rows.push_back(std::move(row));
            for (const auto& a : actions) {
                int ii = inst_idx_.at(tier_names_[a.tier]);
                eq_.schedule(now_, EventKind::dvfs_change, static_cast<std::uint32_t>(ii),
                             static_cast<std::uint32_t>(a.new_level));
            }
        }
        if (now_ + interval_us <= duration_us_ + 1e-9)
            eq_.schedule(now_ + interval_us, EventKind::pm_decision_tick);
    }

    // ------------------------------------------------------------------
    // Accounting
    // ------------------------------------------------------------------
    void app_busy_change(RtMachine& m, int delta) {
        m.app_integral += m.busy * (now_ - m.app_last);
        m.app_last = now_;
        m.busy += delta;
    }
    void net_busy_change(RtMachine& m, int delta) {
        m.net_integral += m.net_busy * (now_ - m.net_last);
        m.net_last = now_;
        m.net_busy += delta;
    }

    void hash_event(const Event& e) {
        std::uint64_t bits;
        static_assert(sizeof(bits) == sizeof(e.ts));
        std::memcpy(&bits, &e.ts, sizeof(bits));
        trace_hash_ ^= bits;
        trace_hash_ *= 0x100000001b3ull;
        trace_hash_ ^= e.seq;
        trace_hash_ *= 0x100000001b3ull;
        trace_hash_ ^= static_cast<std::uint64_t>(e.kind);
        trace_hash_ *= 0x100000001b3ull;
    }

    RunReport make_report() {
        RunReport r;
        r.events_processed = events_;
        r.jobs_injected = jobs_injected_;
        r.jobs_completed = jobs_completed_;
        r.jobs_in_flight = jobs_injected_ - jobs_completed_;
        r.copies_created = copies_created_;
        r.max_outstanding = max_outstanding_;
        r.trace_hash = trace_hash_;
        r.duration_s = scenario_.client.duration_s;
        r.warmup_s = scenario_.client.warmup_s;
        r.offered_qps = scenario_.client.load_pattern.mean_rate(scenario_.client.duration_s);
        double measured_s = scenario_.client.duration_s - scenario_.client.warmup_s;
        r.achieved_qps =
            measured_s > 0 ? static_cast<double>(recorder_.completed_in_horizon()) / measured_s : 0.0;
        r.tier_names = tier_names_;
        for (auto& m : machines_) {
            app_busy_change(m, 0);
            net_busy_change(m, 0);
            MachineUtil u;
            u.machine_id = m.id;
            double elapsed = now_ > 0 ? now_ : 1.0;
            u.app_util = m.app_integral / (m.cores * elapsed);
            u.net_util = m.net_cores > 0 ? m.net_integral / (m.net_cores * elapsed) : 0.0;
            r.machine_utils.push_back(u);
        }
        r.recorder = std::move(recorder_);
        r.pm_trace = std::move(pm_trace_);
        r.pm_windows = pm_windows_;
        r.pm_violations = pm_violations_;
        r.energy_proxy = energy_proxy_;
        r.energy_proxy_baseline = energy_baseline_;
        return r;
    }

    // ------------------------------------------------------------------
    Scenario scenario_;
    RunOptions opts_;
    std::uint64_t master_seed_ = 0;
    double duration_us_ = 0.0;
    double warmup_us_ = 0.0;

    EventQueue eq_;
    SimTime now_ = 0.0;
    std::uint64_t events_ = 0;
    std::uint64_t trace_hash_ = 0xcbf29ce484222325ull;

    std::vector<RtService> services_;
    std::vector<RtMachine> machines_;
    std::vector<RtInstance> instances_;
    std::vector<Pool> pools_;
    std::vector<CompiledPath> cpaths_;
    std::vector<std::pair<double, int>> path_cdf_;
    std::map<std::string, int> svc_idx_, machine_idx_, inst_idx_;
    std::vector<std::string> tier_names_;

    std::vector<Job> jobs_;
    std::vector<std::uint32_t> free_jobs_;
    std::vector<Ctx> ctxs_;
    std::vector<std::uint32_t> free_ctxs_;
    std::vector<Invocation> invocations_;
    std::vector<std::uint32_t> free_invocations_;

    ArrivalProcess arrivals_;
    RngStream rng_path_, rng_pm_;
    std::vector<RngStream> rng_xpath_, rng_proc_, rng_net_;
    LatencyRecorder recorder_;

    std::uint64_t jobs_injected_ = 0;
    std::uint64_t jobs_completed_ = 0;
    std::uint64_t copies_created_ = 0;
    std::uint64_t outstanding_ = 0;
    std::uint64_t max_outstanding_ = 0;
    std::uint64_t client_rr_ = 0;

    bool pm_active_ = false;
    PmConfig pm_cfg_;
    std::optional<PowerManager> pm_;
    PmTrace pm_trace_;
    std::uint64_t pm_windows_ = 0;
    std::uint64_t pm_violations_ = 0;
    double energy_proxy_ = 0.0;
    double energy_baseline_ = 0.0;
};

// Fresh independent run per offered rate, with per-rate seeds derived from
// the scenario's master seed. The saturated flag trips when achieved
// throughput falls below 95% of offered or p99 exceeds 100x the zero-load
// mean (taken from the first, lowest rate).
inline SweepResult sweep(const Scenario& base, const std::vector<double>& rates_qps,
                         double per_rate_duration_s, RunOptions opts = {}) {
    for (std::size_t i = 1; i < rates_qps.size(); ++i)
        if (rates_qps[i] <= rates_qps[i - 1])
            throw InvalidParameterError("sweep rates must be strictly increasing");
    SweepResult result;
    std::uint64_t master = opts.seed ? *opts.seed : base.client.rng_seed;
    double zero_load_mean_ms = 0.0;
    for (std::size_t i = 0; i < rates_qps.size(); ++i) {
        Scenario s = base;
        s.client.load_pattern = LoadPattern{LoadPattern::Kind::constant, rates_qps[i], "", {}};
        s.client.duration_s = per_rate_duration_s;
        s.client.warmup_s = 0.1 * per_rate_duration_s;
        RunOptions ro = opts;
        ro.seed = derive_stream_seed(master, "sweep:" + std::to_string(i));
        ro.duration_s.reset();
        ro.warmup_s.reset();
        RunReport rep = Simulation(std::move(s), ro).run();
        SweepRow row = rep.to_row();
        if (i == 0) zero_load_mean_ms = row.mean_ms;
        row.saturated = row.achieved_qps < 0.95 * row.offered_qps ||
                        row.p99_ms > 100.0 * zero_load_mean_ms;
        if (result.tier_names.empty()) result.tier_names = rep.tier_names;
        result.rows.push_back(std::move(row));
    }
    return result;
}

}  // namespace uqsim

#endif
