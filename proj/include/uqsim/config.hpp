#ifndef UQSIM_CONFIG_HPP
#define UQSIM_CONFIG_HPP

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "uqsim/distributions.hpp"
#include "uqsim/errors.hpp"

namespace uqsim {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Strict JSON helpers. Unknown fields are rejected so typos in op names or
// stage fields fail loudly instead of being silently ignored.
// ---------------------------------------------------------------------------
namespace detail {

inline void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& ctx) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (!allowed.count(it.key()))
            throw SchemaError(ctx + ": unknown field \"" + it.key() + "\"");
    }
}

inline const json& require(const json& obj, const std::string& key, const std::string& ctx) {
    auto it = obj.find(key);
    if (it == obj.end())
        throw SchemaError(ctx + ": missing field \"" + key + "\"");
    return *it;
}

inline double as_number(const json& v, const std::string& ctx) {
    if (!v.is_number())
        throw SchemaError(ctx + ": expected a number");
    return v.get<double>();
}

inline std::int64_t as_int(const json& v, const std::string& ctx) {
    if (!v.is_number_integer())
        throw SchemaError(ctx + ": expected an integer");
    return v.get<std::int64_t>();
}

inline std::string as_string(const json& v, const std::string& ctx) {
    if (!v.is_string())
        throw SchemaError(ctx + ": expected a string");
    return v.get<std::string>();
}

inline bool as_bool(const json& v, const std::string& ctx) {
    if (!v.is_boolean())
        throw SchemaError(ctx + ": expected a boolean");
    return v.get<bool>();
}

// Shortest exact decimal form, so CSV round-trips reproduce doubles bit-for-bit.
inline std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline json load_json_file(const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) throw MissingFileError(p.string());
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw SchemaError(p.string() + ": " + e.what());
    }
    return j;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

enum class QueueType { single, epoll, socket };
enum class ExecModel { simple, multi_threaded };
enum class InterarrivalKind { exponential, deterministic };
enum class PathOp { block_recv_connection, unblock_connection, block_thread, unblock_thread };

inline std::string to_string(QueueType q) {
    switch (q) {
        case QueueType::single: return "single";
        case QueueType::epoll: return "epoll";
        case QueueType::socket: return "socket";
    }
    return "?";
}

inline std::string to_string(ExecModel m) {
    return m == ExecModel::simple ? "simple" : "multi_threaded";
}

inline std::string to_string(PathOp op) {
    switch (op) {
        case PathOp::block_recv_connection: return "block_recv_connection";
        case PathOp::unblock_connection: return "unblock_connection";
        case PathOp::block_thread: return "block_thread";
        case PathOp::unblock_thread: return "unblock_thread";
    }
    return "?";
}

// Processing-time source for a stage: either an analytic law or a set of
// profiled histogram files keyed by frequency (GHz).
struct ProcessingSpec {
    enum class Kind { analytic, histogram };
    Kind kind = Kind::analytic;
    AnalyticDist analytic;
    std::map<std::string, std::string> histogram_files;  // freq key (e.g. "2.6") -> relative CSV path

    bool operator==(const ProcessingSpec&) const = default;
};

struct StageSpec {
    std::string stage_name;
    int stage_id = 0;
    QueueType queue_type = QueueType::single;
    bool batching = false;
    // Raw queue_parameter as written (e.g. [null, 64]); the batch bound is
    // the last non-null entry.
    std::optional<std::vector<std::optional<int>>> queue_parameter;
    ProcessingSpec processing;
    double slope_us_per_event = 0.0;
    double slope_us_per_byte = 0.0;

    int batch_bound() const {
        if (!batching || !queue_parameter) return 1;
        for (auto it = queue_parameter->rbegin(); it != queue_parameter->rend(); ++it)
            if (it->has_value()) return **it;
        return 1;
    }

    bool operator==(const StageSpec&) const = default;
};

struct ExecutionPathSpec {
    int path_id = 0;
    std::string path_name;
    std::vector<int> stages;  // stage ids, in execution order
    std::map<int, ProcessingSpec> processing_overrides;  // stage id -> source

    bool operator==(const ExecutionPathSpec&) const = default;
};

struct ServiceSpec {
    std::string service_name;
    std::vector<StageSpec> stages;
    std::vector<ExecutionPathSpec> paths;
    std::map<int, double> path_probabilities;  // optional; required iff a node leaves the path unspecified and paths > 1

    const StageSpec* find_stage(int id) const {
        for (const auto& s : stages)
            if (s.stage_id == id) return &s;
        return nullptr;
    }
    const ExecutionPathSpec* find_path(int id) const {
        for (const auto& p : paths)
            if (p.path_id == id) return &p;
        return nullptr;
    }

    bool operator==(const ServiceSpec&) const = default;
};

struct MachineSpec {
    std::string machine_id;
    int cores = 1;
    int network_cores = 0;  // 0 disables network modeling on this machine
    std::vector<double> dvfs_levels;  // GHz, strictly increasing
    AnalyticDist network_rx{AnalyticKind::exponential, 10.0, 0.0};
    double network_rx_us_per_byte = 0.0;

    double nominal_freq() const { return dvfs_levels.back(); }

    bool operator==(const MachineSpec&) const = default;
};

struct InstanceSpec {
    std::string instance_name;
    std::string service_name;
    std::string machine_id;
    int threads = 1;
    ExecModel exec_model = ExecModel::simple;
    std::map<std::string, int> connection_pools;  // peer instance -> pool size

    bool operator==(const InstanceSpec&) const = default;
};

struct PathNodeSpec {
    int node_id = 0;
    std::string service;  // instance name, or the reserved name "client" for the terminal node
    std::optional<int> execution_path;
    std::optional<int> start_stage;
    std::optional<int> end_stage;
    std::vector<int> childs;
    std::vector<PathOp> enter_op;
    std::vector<PathOp> leave_op;
    std::optional<int> causal_node_id;  // on unblock nodes: the ancestor that blocked

    bool is_client() const { return service == "client"; }

    bool operator==(const PathNodeSpec&) const = default;
};

struct InterPathSpec {
    int path_id = 0;
    double probability = 1.0;
    int entry = 0;
    std::vector<PathNodeSpec> nodes;

    const PathNodeSpec* find_node(int id) const {
        for (const auto& n : nodes)
            if (n.node_id == id) return &n;
        return nullptr;
    }

    bool operator==(const InterPathSpec&) const = default;
};

struct LoadPattern {
    enum class Kind { constant, trace };
    Kind kind = Kind::constant;
    double qps = 0.0;                                // constant
    std::string trace_file;                          // trace: relative CSV path
    std::vector<std::pair<double, double>> points;   // trace: (time_s, qps)

    double rate_at(double t_s) const {
        if (kind == Kind::constant) return qps;
        double r = points.front().second;
        for (const auto& [ts, q] : points) {
            if (ts <= t_s) r = q;
            else break;
        }
        return r;
    }

    // Time-average rate over [0, horizon_s), for reporting offered load.
    double mean_rate(double horizon_s) const {
        if (kind == Kind::constant) return qps;
        double acc = 0.0;
        for (std::size_t i = 0; i < points.size(); ++i) {
            double t0 = points[i].first;
            if (t0 >= horizon_s) break;
            double t1 = i + 1 < points.size() ? std::min(points[i + 1].first, horizon_s) : horizon_s;
            acc += points[i].second * (t1 - t0);
        }
        return acc / horizon_s;
    }

    bool operator==(const LoadPattern&) const = default;
};

struct PmConfig {
    double qos_target_ms = 5.0;
    double decision_interval_s = 0.1;
    int bucket_count = 10;
    int K = 10;  // successful cycles between target re-selection
    double preference_increase = 1.1;
    double preference_decrease = 0.5;
    double preference_min = 0.01;
    double preference_max = 100.0;
    // Per-tier targets aim at this fraction of the end-to-end QoS; the
    // headroom keeps exploratory slow-downs from hovering at the violation
    // boundary.
    double target_margin = 0.55;

    bool operator==(const PmConfig&) const = default;
};

struct ClientSpec {
    LoadPattern load_pattern;
    InterarrivalKind interarrival = InterarrivalKind::exponential;
    int request_size_bytes = 612;
    double duration_s = 10.0;
    double warmup_s = 1.0;
    std::uint64_t rng_seed = 1;
    int connections = 1;
    std::string tracked_path_name;  // optional: count requests that traverse this execution path
    std::optional<PmConfig> power_manager;

    bool operator==(const ClientSpec&) const = default;
};

// (service, stage, frequency) -> empirical processing-time PDF.
struct HistKey {
    std::string service;
    int stage_id = 0;
    double freq_ghz = 0.0;

    auto operator<=>(const HistKey&) const = default;

    std::string str() const {
        return service + "/stage" + std::to_string(stage_id) + "@" + detail::format_double(freq_ghz) + "GHz";
    }
};

using HistogramTable = std::map<HistKey, HistogramPdf>;

inline void validate_histograms(const HistogramTable& table) {
    std::string errors;
    for (const auto& [key, pdf] : table) {
        try {
            pdf.validate(key.str());
        } catch (const ConfigError& e) {
            if (!errors.empty()) errors += "; ";
            errors += e.what();
        }
    }
    if (!errors.empty()) throw ProbabilityError(errors);
}

// The fully cross-linked, validated scenario: everything a run needs.
struct Scenario {
    std::vector<ServiceSpec> services;
    std::vector<MachineSpec> machines;
    std::vector<InstanceSpec> instances;
    std::vector<InterPathSpec> inter_paths;
    ClientSpec client;
    HistogramTable histograms;

    const ServiceSpec* find_service(const std::string& n) const {
        for (const auto& s : services)
            if (s.service_name == n) return &s;
        return nullptr;
    }
    const MachineSpec* find_machine(const std::string& n) const {
        for (const auto& m : machines)
            if (m.machine_id == n) return &m;
        return nullptr;
    }
    const InstanceSpec* find_instance(const std::string& n) const {
        for (const auto& i : instances)
            if (i.instance_name == n) return &i;
        return nullptr;
    }

    bool operator==(const Scenario&) const = default;
};

// ---------------------------------------------------------------------------
// JSON parsing
// ---------------------------------------------------------------------------
namespace detail {

inline QueueType parse_queue_type(const std::string& s, const std::string& ctx) {
    if (s == "single") return QueueType::single;
    if (s == "epoll") return QueueType::epoll;
    if (s == "socket") return QueueType::socket;
    throw SchemaError(ctx + ": unknown queue_type \"" + s + "\"");
}

inline ExecModel parse_exec_model(const std::string& s, const std::string& ctx) {
    if (s == "simple") return ExecModel::simple;
    if (s == "multi_threaded") return ExecModel::multi_threaded;
    throw SchemaError(ctx + ": unknown exec_model \"" + s + "\"");
}

inline PathOp parse_path_op(const std::string& s, const std::string& ctx) {
    if (s == "block_recv_connection") return PathOp::block_recv_connection;
    if (s == "unblock_connection") return PathOp::unblock_connection;
    if (s == "block_thread") return PathOp::block_thread;
    if (s == "unblock_thread") return PathOp::unblock_thread;
    throw SchemaError(ctx + ": unknown op \"" + s + "\"");
}

inline AnalyticDist parse_analytic(const json& j, const std::string& ctx) {
    const std::string type = as_string(require(j, "type", ctx), ctx + ".type");
    AnalyticDist d;
    if (type == "exponential") {
        check_keys(j, {"type", "mean_us"}, ctx);
        d.kind = AnalyticKind::exponential;
        d.a = as_number(require(j, "mean_us", ctx), ctx + ".mean_us");
    } else if (type == "deterministic") {
        check_keys(j, {"type", "us"}, ctx);
        d.kind = AnalyticKind::deterministic;
        d.a = as_number(require(j, "us", ctx), ctx + ".us");
    } else if (type == "lognormal") {
        check_keys(j, {"type", "mu", "sigma"}, ctx);
        d.kind = AnalyticKind::lognormal;
        d.a = as_number(require(j, "mu", ctx), ctx + ".mu");
        d.b = as_number(require(j, "sigma", ctx), ctx + ".sigma");
    } else {
        throw SchemaError(ctx + ": unknown distribution type \"" + type + "\"");
    }
    return d;
}

inline ProcessingSpec parse_processing(const json& j, const std::string& ctx) {
    ProcessingSpec p;
    const std::string type = as_string(require(j, "type", ctx), ctx + ".type");
    if (type == "histogram") {
        check_keys(j, {"type", "files"}, ctx);
        p.kind = ProcessingSpec::Kind::histogram;
        const json& files = require(j, "files", ctx);
        if (!files.is_object() || files.empty())
            throw SchemaError(ctx + ".files: expected a non-empty object of freq -> path");
        for (auto it = files.begin(); it != files.end(); ++it)
            p.histogram_files[it.key()] = as_string(it.value(), ctx + ".files." + it.key());
    } else {
        p.kind = ProcessingSpec::Kind::analytic;
        p.analytic = parse_analytic(j, ctx);
    }
    return p;
}

inline double parse_freq_key(const std::string& key, const std::string& ctx) {
    try {
        std::size_t pos = 0;
        double f = std::stod(key, &pos);
        if (pos != key.size()) throw std::invalid_argument(key);
        return f;
    } catch (const std::exception&) {
        throw SchemaError(ctx + ": bad frequency key \"" + key + "\"");
    }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// JSON serialization (save_scenario / structural equality dumps)
// ---------------------------------------------------------------------------

inline void to_json(json& j, const AnalyticDist& d) {
    switch (d.kind) {
        case AnalyticKind::exponential: j = {{"type", "exponential"}, {"mean_us", d.a}}; break;
        case AnalyticKind::deterministic: j = {{"type", "deterministic"}, {"us", d.a}}; break;
        case AnalyticKind::lognormal: j = {{"type", "lognormal"}, {"mu", d.a}, {"sigma", d.b}}; break;
    }
}

inline void to_json(json& j, const ProcessingSpec& p) {
    if (p.kind == ProcessingSpec::Kind::histogram) {
        j = {{"type", "histogram"}, {"files", p.histogram_files}};
    } else {
        to_json(j, p.analytic);
    }
}

inline void to_json(json& j, const StageSpec& s) {
    j = json{{"stage_name", s.stage_name},
             {"stage_id", s.stage_id},
             {"queue_type", to_string(s.queue_type)},
             {"batching", s.batching},
             {"processing_time", s.processing}};
    if (s.queue_parameter) {
        json qp = json::array();
        for (const auto& v : *s.queue_parameter)
            qp.push_back(v ? json(*v) : json(nullptr));
        j["queue_parameter"] = qp;
    } else {
        j["queue_parameter"] = nullptr;
    }
    if (s.slope_us_per_event != 0.0) j["slope_us_per_event"] = s.slope_us_per_event;
    if (s.slope_us_per_byte != 0.0) j["slope_us_per_byte"] = s.slope_us_per_byte;
}

inline void to_json(json& j, const ExecutionPathSpec& p) {
    j = json{{"path_id", p.path_id}, {"path_name", p.path_name}, {"stages", p.stages}};
    if (!p.processing_overrides.empty()) {
        json ov = json::object();
        for (const auto& [sid, spec] : p.processing_overrides)
            ov[std::to_string(sid)] = spec;
        j["processing_overrides"] = ov;
    }
}

inline void to_json(json& j, const ServiceSpec& s) {
    j = json{{"service_name", s.service_name}, {"stages", s.stages}, {"paths", s.paths}};
    if (!s.path_probabilities.empty()) {
        json pp = json::object();
        for (const auto& [pid, prob] : s.path_probabilities)
            pp[std::to_string(pid)] = prob;
        j["path_probabilities"] = pp;
    }
}

inline void to_json(json& j, const MachineSpec& m) {
    j = json{{"machine_id", m.machine_id},
             {"cores", m.cores},
             {"network_cores", m.network_cores},
             {"dvfs_levels", m.dvfs_levels},
             {"network_rx", m.network_rx}};
    if (m.network_rx_us_per_byte != 0.0) j["network_rx_us_per_byte"] = m.network_rx_us_per_byte;
}

inline void to_json(json& j, const InstanceSpec& i) {
    j = json{{"instance_name", i.instance_name},
             {"service_name", i.service_name},
             {"machine_id", i.machine_id},
             {"threads", i.threads},
             {"exec_model", to_string(i.exec_model)}};
    if (!i.connection_pools.empty()) j["connection_pools"] = i.connection_pools;
}

inline void to_json(json& j, const PathNodeSpec& n) {
    auto opt_int = [](const std::optional<int>& v) { return v ? json(*v) : json(nullptr); };
    auto ops = [](const std::vector<PathOp>& v) {
        if (v.empty()) return json(nullptr);
        json a = json::array();
        for (auto op : v) a.push_back(to_string(op));
        return a;
    };
    j = json{{"node_id", n.node_id},
             {"service", n.service},
             {"execution_path", opt_int(n.execution_path)},
             {"start_stage", opt_int(n.start_stage)},
             {"end_stage", opt_int(n.end_stage)},
             {"childs", n.childs},
             {"enter_op", ops(n.enter_op)},
             {"leave_op", ops(n.leave_op)},
             {"causal_node_id", opt_int(n.causal_node_id)}};
}

inline void to_json(json& j, const InterPathSpec& p) {
    j = json{{"path_id", p.path_id}, {"probability", p.probability}, {"entry", p.entry}, {"nodes", p.nodes}};
}

inline void to_json(json& j, const LoadPattern& p) {
    if (p.kind == LoadPattern::Kind::constant) {
        j = json{{"type", "constant"}, {"qps", p.qps}};
    } else {
        j = json{{"type", "trace"}, {"file", p.trace_file}};
    }
}

inline void to_json(json& j, const PmConfig& c) {
    j = json{{"qos_target_ms", c.qos_target_ms},
             {"decision_interval_s", c.decision_interval_s},
             {"bucket_count", c.bucket_count},
             {"K", c.K},
             {"preference_increase", c.preference_increase},
             {"preference_decrease", c.preference_decrease},
             {"preference_min", c.preference_min},
             {"preference_max", c.preference_max},
             {"target_margin", c.target_margin}};
}

inline void to_json(json& j, const ClientSpec& c) {
    j = json{{"load_pattern", c.load_pattern},
             {"interarrival", c.interarrival == InterarrivalKind::exponential ? "exponential" : "deterministic"},
             {"request_size_bytes", c.request_size_bytes},
             {"duration_s", c.duration_s},
             {"warmup_s", c.warmup_s},
             {"rng_seed", c.rng_seed},
             {"connections", c.connections}};
    if (!c.tracked_path_name.empty()) j["tracked_path_name"] = c.tracked_path_name;
    if (c.power_manager) j["power_manager"] = *c.power_manager;
}

// Combined structural dump, including histogram contents and trace points.
// Used for round-trip equality checks and debugging.
inline json scenario_to_json(const Scenario& s) {
    json hist = json::array();
    for (const auto& [key, pdf] : s.histograms) {
        hist.push_back(json{{"service", key.service},
                            {"stage_id", key.stage_id},
                            {"freq_ghz", key.freq_ghz},
                            {"upper_bound_us", pdf.upper_bound_us},
                            {"probability", pdf.probability}});
    }
    return json{{"services", s.services},
                {"machines", s.machines},
                {"instances", s.instances},
                {"paths", s.inter_paths},
                {"client", s.client},
                {"trace_points", s.client.load_pattern.points},
                {"histograms", hist}};
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------
namespace detail {

inline void validate_service(const ServiceSpec& svc) {
    const std::string ctx = "service \"" + svc.service_name + "\"";
    if (svc.service_name.empty()) throw SchemaError("service with empty service_name");
    if (svc.service_name == "client") throw SchemaError("\"client\" is a reserved service name");
    if (svc.stages.empty()) throw SchemaError(ctx + ": no stages");
    if (svc.paths.empty()) throw SchemaError(ctx + ": no execution paths");

    std::set<int> stage_ids;
    for (const auto& st : svc.stages) {
        const std::string sctx = ctx + " stage \"" + st.stage_name + "\"";
        if (st.stage_id < 0) throw SchemaError(sctx + ": negative stage_id");
        if (!stage_ids.insert(st.stage_id).second)
            throw SchemaError(sctx + ": duplicate stage_id " + std::to_string(st.stage_id));
        if ((st.queue_type == QueueType::epoll || st.queue_type == QueueType::socket) && !st.batching)
            throw SchemaError(sctx + ": queue_type " + to_string(st.queue_type) + " requires batching");
        if (st.batching != st.queue_parameter.has_value())
            throw SchemaError(sctx + ": queue_parameter must be present iff batching");
        if (st.batching && st.batch_bound() < 1)
            throw SchemaError(sctx + ": batch bound must be >= 1");
        if (st.slope_us_per_event < 0 || st.slope_us_per_byte < 0)
            throw SchemaError(sctx + ": negative slope");
    }

    auto validate_processing = [&](const ProcessingSpec& p, const std::string& pctx) {
        if (p.kind == ProcessingSpec::Kind::analytic) {
            const auto& d = p.analytic;
            if (d.kind == AnalyticKind::exponential && d.a <= 0)
                throw SchemaError(pctx + ": exponential mean_us must be > 0");
            if (d.kind == AnalyticKind::deterministic && d.a <= 0)
                throw SchemaError(pctx + ": deterministic us must be > 0");
            if (d.kind == AnalyticKind::lognormal && d.b < 0)
                throw SchemaError(pctx + ": lognormal sigma must be >= 0");
        }
    };
    for (const auto& st : svc.stages)
        validate_processing(st.processing, ctx + " stage " + std::to_string(st.stage_id));

    std::set<int> path_ids;
    for (const auto& p : svc.paths) {
        const std::string pctx = ctx + " path " + std::to_string(p.path_id);
        if (!path_ids.insert(p.path_id).second) throw SchemaError(pctx + ": duplicate path_id");
        if (p.stages.empty()) throw SchemaError(pctx + ": empty stage list");
        for (int sid : p.stages)
            if (!stage_ids.count(sid))
                throw DanglingReferenceError(std::to_string(sid), pctx + " references unknown stage");
        for (const auto& [sid, spec] : p.processing_overrides) {
            if (!stage_ids.count(sid))
                throw DanglingReferenceError(std::to_string(sid), pctx + " override for unknown stage");
            validate_processing(spec, pctx + " override stage " + std::to_string(sid));
        }
    }

    if (!svc.path_probabilities.empty()) {
        double sum = 0.0;
        for (const auto& [pid, prob] : svc.path_probabilities) {
            if (!path_ids.count(pid))
                throw DanglingReferenceError(std::to_string(pid), ctx + " path_probabilities");
            if (prob < 0.0 || prob > 1.0)
                throw ProbabilityError(ctx + ": path probability out of [0,1]");
            sum += prob;
        }
        if (std::abs(sum - 1.0) > 1e-9)
            throw ProbabilityError(ctx + ": path probabilities sum to " + std::to_string(sum));
    }
}

inline void validate_inter_path(const InterPathSpec& path, const Scenario& s) {
    const std::string ctx = "path " + std::to_string(path.path_id);
    if (path.nodes.empty()) throw SchemaError(ctx + ": no nodes");
    if (path.probability < 0.0 || path.probability > 1.0)
        throw ProbabilityError(ctx + ": probability out of [0,1]");

    std::map<int, const PathNodeSpec*> by_id;
    for (const auto& n : path.nodes)
        if (!by_id.emplace(n.node_id, &n).second)
            throw SchemaError(ctx + ": duplicate node_id " + std::to_string(n.node_id));

    if (!by_id.count(path.entry))
        throw DanglingReferenceError(std::to_string(path.entry), ctx + " entry");

    int client_nodes = 0;
    std::map<int, int> indegree;
    for (const auto& n : path.nodes) indegree[n.node_id] = 0;
    for (const auto& n : path.nodes) {
        const std::string nctx = ctx + " node " + std::to_string(n.node_id);
        if (n.is_client()) {
            ++client_nodes;
            if (!n.childs.empty()) throw SchemaError(nctx + ": client node must be terminal");
            if (n.execution_path || !n.enter_op.empty() || !n.leave_op.empty())
                throw SchemaError(nctx + ": client node carries no execution");
        } else {
            const InstanceSpec* inst = s.find_instance(n.service);
            if (!inst) throw DanglingReferenceError(n.service, nctx);
            const ServiceSpec* svc = s.find_service(inst->service_name);
            if (n.execution_path) {
                const ExecutionPathSpec* ep = svc->find_path(*n.execution_path);
                if (!ep)
                    throw DanglingReferenceError(std::to_string(*n.execution_path),
                                                 nctx + " execution_path");
                auto in_path = [&](int sid) {
                    return std::find(ep->stages.begin(), ep->stages.end(), sid) != ep->stages.end();
                };
                if (n.start_stage && !in_path(*n.start_stage))
                    throw DanglingReferenceError(std::to_string(*n.start_stage), nctx + " start_stage");
                if (n.end_stage && !in_path(*n.end_stage))
                    throw DanglingReferenceError(std::to_string(*n.end_stage), nctx + " end_stage");
            } else {
                if (svc->paths.size() > 1 && svc->path_probabilities.empty())
                    throw SchemaError(nctx + ": execution_path is null but service \"" +
                                      svc->service_name + "\" has no path_probabilities");
                if (n.start_stage || n.end_stage)
                    throw SchemaError(nctx + ": start/end_stage require an explicit execution_path");
            }
        }
        bool has_unblock = false;
        for (auto op : n.enter_op)
            has_unblock |= (op == PathOp::unblock_connection || op == PathOp::unblock_thread);
        for (auto op : n.leave_op)
            has_unblock |= (op == PathOp::unblock_connection || op == PathOp::unblock_thread);
        if (has_unblock && !n.causal_node_id)
            throw SchemaError(nctx + ": unblock op requires causal_node_id");
        for (int c : n.childs) {
            if (!by_id.count(c)) throw DanglingReferenceError(std::to_string(c), nctx + " childs");
            ++indegree[c];
        }
    }
    if (client_nodes != 1)
        throw SchemaError(ctx + ": expected exactly one terminal \"client\" node, found " +
                          std::to_string(client_nodes));
    if (indegree[path.entry] != 0)
        throw SchemaError(ctx + ": entry node must have no parents");

    // Topological check: rooted DAG, every node reachable from the entry.
    {
        std::map<int, int> deg = indegree;
        std::vector<int> order{path.entry};
        std::size_t head = 0;
        while (head < order.size()) {
            const PathNodeSpec* n = by_id[order[head++]];
            for (int c : n->childs)
                if (--deg[c] == 0) order.push_back(c);
        }
        if (order.size() != path.nodes.size()) {
            for (const auto& [id, d] : deg)
                if (d > 0)
                    throw SchemaError(ctx + ": node " + std::to_string(id) +
                                      " unreachable from entry or on a cycle");
        }
    }

    // causal_node_id must name a strict ancestor.
    std::map<int, std::set<int>> ancestors;
    {
        // Parents per node, then transitive closure in topological order.
        std::map<int, std::vector<int>> parents;
        for (const auto& n : path.nodes)
            for (int c : n.childs) parents[c].push_back(n.node_id);
        // Repeated relaxation; path graphs are tiny.
        bool changed = true;
        while (changed) {
            changed = false;
            for (const auto& n : path.nodes) {
                auto& anc = ancestors[n.node_id];
                for (int p : parents[n.node_id]) {
                    if (anc.insert(p).second) changed = true;
                    for (int a : ancestors[p])
                        if (anc.insert(a).second) changed = true;
                }
            }
        }
    }
    for (const auto& n : path.nodes) {
        if (n.causal_node_id) {
            if (!by_id.count(*n.causal_node_id))
                throw DanglingReferenceError(std::to_string(*n.causal_node_id),
                                             ctx + " node " + std::to_string(n.node_id) + " causal_node_id");
            if (!ancestors[n.node_id].count(*n.causal_node_id))
                throw SchemaError(ctx + ": causal_node_id " + std::to_string(*n.causal_node_id) +
                                  " is not an ancestor of node " + std::to_string(n.node_id));
        }
    }
}

// Every (service, stage, frequency) demanded by the deployment must have a
// processing-time source: an exact-frequency histogram, a nominal-frequency
// histogram (scaled at runtime), or an analytic law. No silent defaults.
inline void validate_coverage(const Scenario& s) {
    for (const auto& inst : s.instances) {
        const ServiceSpec* svc = s.find_service(inst.service_name);
        const MachineSpec* mac = s.find_machine(inst.machine_id);
        auto check = [&](const ProcessingSpec& p, int stage_id) {
            if (p.kind == ProcessingSpec::Kind::analytic) return;
            for (double f : mac->dvfs_levels) {
                bool exact = s.histograms.count({svc->service_name, stage_id, f}) > 0;
                bool nominal = s.histograms.count({svc->service_name, stage_id, mac->nominal_freq()}) > 0;
                if (!exact && !nominal)
                    throw MissingDistributionError("no processing-time source for " +
                                                   HistKey{svc->service_name, stage_id, f}.str() +
                                                   " (instance \"" + inst.instance_name + "\")");
            }
        };
        for (const auto& st : svc->stages) check(st.processing, st.stage_id);
        for (const auto& p : svc->paths)
            for (const auto& [sid, spec] : p.processing_overrides) check(spec, sid);
    }
}

}  // namespace detail

// Cross-link and verify every invariant. Called by load_scenario and by
// generate_builtin_scenario; programmatically assembled scenarios should
// call it too.
inline void validate_scenario(const Scenario& s) {
    if (s.services.empty()) throw SchemaError("no services defined");
    if (s.machines.empty()) throw SchemaError("no machines defined");
    if (s.instances.empty()) throw SchemaError("no instances deployed");
    if (s.inter_paths.empty()) throw SchemaError("no inter-microservice paths defined");

    std::set<std::string> names;
    for (const auto& svc : s.services) {
        if (!names.insert(svc.service_name).second)
            throw SchemaError("duplicate service_name \"" + svc.service_name + "\"");
        detail::validate_service(svc);
    }

    names.clear();
    for (const auto& m : s.machines) {
        const std::string ctx = "machine \"" + m.machine_id + "\"";
        if (!names.insert(m.machine_id).second) throw SchemaError("duplicate machine_id \"" + m.machine_id + "\"");
        if (m.cores < 1) throw SchemaError(ctx + ": cores must be >= 1");
        if (m.network_cores < 0) throw SchemaError(ctx + ": network_cores must be >= 0");
        if (m.dvfs_levels.empty()) throw SchemaError(ctx + ": dvfs_levels must be non-empty");
        for (std::size_t i = 0; i < m.dvfs_levels.size(); ++i) {
            if (m.dvfs_levels[i] <= 0) throw SchemaError(ctx + ": dvfs level must be > 0");
            if (i > 0 && m.dvfs_levels[i] <= m.dvfs_levels[i - 1])
                throw SchemaError(ctx + ": dvfs_levels must be strictly increasing");
        }
    }

    names.clear();
    for (const auto& inst : s.instances) {
        const std::string ctx = "instance \"" + inst.instance_name + "\"";
        if (inst.instance_name == "client") throw SchemaError("\"client\" is a reserved instance name");
        if (!names.insert(inst.instance_name).second)
            throw SchemaError("duplicate instance_name \"" + inst.instance_name + "\"");
        if (!s.find_service(inst.service_name)) throw DanglingReferenceError(inst.service_name, ctx);
        if (!s.find_machine(inst.machine_id)) throw DanglingReferenceError(inst.machine_id, ctx);
        if (inst.exec_model == ExecModel::multi_threaded && inst.threads < 1)
            throw SchemaError(ctx + ": multi_threaded requires threads >= 1");
        for (const auto& [peer, cap] : inst.connection_pools) {
            if (!s.find_instance(peer)) throw DanglingReferenceError(peer, ctx + " connection_pools");
            if (cap < 1) throw SchemaError(ctx + ": connection pool to \"" + peer + "\" has capacity " +
                                           std::to_string(cap));
        }
    }

    double mass = 0.0;
    std::set<int> path_ids;
    for (const auto& p : s.inter_paths) {
        if (!path_ids.insert(p.path_id).second)
            throw SchemaError("duplicate inter-path id " + std::to_string(p.path_id));
        detail::validate_inter_path(p, s);
        mass += p.probability;
    }
    if (std::abs(mass - 1.0) > 1e-9)
        throw ProbabilityError("inter-path probabilities sum to " + std::to_string(mass));

    const ClientSpec& c = s.client;
    if (c.load_pattern.kind == LoadPattern::Kind::constant) {
        if (c.load_pattern.qps <= 0) throw SchemaError("client: qps must be > 0");
    } else {
        if (c.load_pattern.points.empty()) throw SchemaError("client: empty load trace");
        double prev = -1.0;
        for (const auto& [t, q] : c.load_pattern.points) {
            if (t <= prev) throw SchemaError("client trace: time_s must be strictly increasing");
            if (q <= 0) throw SchemaError("client trace: qps must be > 0 everywhere");
            prev = t;
        }
        if (c.load_pattern.points.front().first != 0.0)
            throw SchemaError("client trace: first row must start at time_s = 0");
    }
    if (c.duration_s <= 0) throw SchemaError("client: duration_s must be > 0");
    if (c.warmup_s < 0 || c.warmup_s >= c.duration_s)
        throw SchemaError("client: warmup_s must satisfy 0 <= warmup_s < duration_s");
    if (c.request_size_bytes < 1) throw SchemaError("client: request_size_bytes must be >= 1");
    if (c.connections < 1) throw SchemaError("client: connections must be >= 1");
    if (c.power_manager) {
        const auto& pm = *c.power_manager;
        if (pm.qos_target_ms <= 0 || pm.decision_interval_s <= 0 || pm.bucket_count < 1 || pm.K < 1 ||
            pm.preference_increase <= 0 || pm.preference_decrease <= 0 || pm.preference_min <= 0 ||
            pm.preference_max < pm.preference_min || pm.target_margin <= 0 || pm.target_margin > 1)
            throw SchemaError("client: invalid power_manager block");
    }

    validate_histograms(s.histograms);
    detail::validate_coverage(s);
}

// ---------------------------------------------------------------------------
// Loading
// ---------------------------------------------------------------------------
namespace detail {

inline HistogramPdf load_histogram_csv(const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) throw MissingFileError(p.string());
    std::string line;
    if (!std::getline(in, line)) throw SchemaError(p.string() + ": empty histogram file");
    if (line.size() && line.back() == '\r') line.pop_back();
    if (line != "upper_bound_us,probability")
        throw SchemaError(p.string() + ": expected header \"upper_bound_us,probability\"");
    HistogramPdf pdf;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.size() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string a, b;
        if (!std::getline(ss, a, ',') || !std::getline(ss, b))
            throw SchemaError(p.string() + ":" + std::to_string(lineno) + ": expected two columns");
        try {
            pdf.upper_bound_us.push_back(std::stod(a));
            pdf.probability.push_back(std::stod(b));
        } catch (const std::exception&) {
            throw SchemaError(p.string() + ":" + std::to_string(lineno) + ": bad number");
        }
    }
    if (pdf.upper_bound_us.empty()) throw SchemaError(p.string() + ": no data rows");
    pdf.finalize();
    return pdf;
}

inline std::vector<std::pair<double, double>> load_trace_csv(const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) throw MissingFileError(p.string());
    std::string line;
    if (!std::getline(in, line)) throw SchemaError(p.string() + ": empty trace file");
    if (line.size() && line.back() == '\r') line.pop_back();
    if (line != "time_s,qps")
        throw SchemaError(p.string() + ": expected header \"time_s,qps\"");
    std::vector<std::pair<double, double>> points;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.size() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string a, b;
        if (!std::getline(ss, a, ',') || !std::getline(ss, b))
            throw SchemaError(p.string() + ":" + std::to_string(lineno) + ": expected two columns");
        try {
            points.emplace_back(std::stod(a), std::stod(b));
        } catch (const std::exception&) {
            throw SchemaError(p.string() + ":" + std::to_string(lineno) + ": bad number");
        }
    }
    if (points.empty()) throw SchemaError(p.string() + ": no data rows");
    return points;
}

inline StageSpec parse_stage(const json& j, const std::string& ctx) {
    check_keys(j,
               {"stage_name", "stage_id", "queue_type", "batching", "queue_parameter",
                "processing_time", "slope_us_per_event", "slope_us_per_byte"},
               ctx);
    StageSpec st;
    st.stage_name = as_string(require(j, "stage_name", ctx), ctx + ".stage_name");
    st.stage_id = static_cast<int>(as_int(require(j, "stage_id", ctx), ctx + ".stage_id"));
    st.queue_type = parse_queue_type(as_string(require(j, "queue_type", ctx), ctx + ".queue_type"), ctx);
    st.batching = as_bool(require(j, "batching", ctx), ctx + ".batching");
    const json& qp = require(j, "queue_parameter", ctx);
    if (!qp.is_null()) {
        if (!qp.is_array()) throw SchemaError(ctx + ".queue_parameter: expected array or null");
        std::vector<std::optional<int>> vals;
        for (const auto& v : qp) {
            if (v.is_null()) vals.push_back(std::nullopt);
            else vals.push_back(static_cast<int>(as_int(v, ctx + ".queue_parameter")));
        }
        st.queue_parameter = std::move(vals);
    }
    st.processing = parse_processing(require(j, "processing_time", ctx), ctx + ".processing_time");
    if (j.contains("slope_us_per_event"))
        st.slope_us_per_event = as_number(j["slope_us_per_event"], ctx + ".slope_us_per_event");
    if (j.contains("slope_us_per_byte"))
        st.slope_us_per_byte = as_number(j["slope_us_per_byte"], ctx + ".slope_us_per_byte");
    return st;
}

inline ServiceSpec parse_service(const json& j) {
    std::string name = j.contains("service_name") && j["service_name"].is_string()
                           ? j["service_name"].get<std::string>()
                           : "?";
    const std::string ctx = "service \"" + name + "\"";
    check_keys(j, {"service_name", "stages", "paths", "path_probabilities"}, ctx);
    ServiceSpec svc;
    svc.service_name = as_string(require(j, "service_name", ctx), ctx + ".service_name");
    const json& stages = require(j, "stages", ctx);
    if (!stages.is_array()) throw SchemaError(ctx + ".stages: expected array");
    for (const auto& sj : stages) svc.stages.push_back(parse_stage(sj, ctx + " stage"));
    const json& paths = require(j, "paths", ctx);
    if (!paths.is_array()) throw SchemaError(ctx + ".paths: expected array");
    for (const auto& pj : paths) {
        const std::string pctx = ctx + " path";
        check_keys(pj, {"path_id", "path_name", "stages", "processing_overrides"}, pctx);
        ExecutionPathSpec ep;
        ep.path_id = static_cast<int>(as_int(require(pj, "path_id", pctx), pctx + ".path_id"));
        ep.path_name = as_string(require(pj, "path_name", pctx), pctx + ".path_name");
        const json& ps = require(pj, "stages", pctx);
        if (!ps.is_array()) throw SchemaError(pctx + ".stages: expected array");
        for (const auto& v : ps) ep.stages.push_back(static_cast<int>(as_int(v, pctx + ".stages")));
        if (pj.contains("processing_overrides")) {
            const json& ov = pj["processing_overrides"];
            if (!ov.is_object()) throw SchemaError(pctx + ".processing_overrides: expected object");
            for (auto it = ov.begin(); it != ov.end(); ++it) {
                int sid;
                try {
                    sid = std::stoi(it.key());
                } catch (const std::exception&) {
                    throw SchemaError(pctx + ".processing_overrides: bad stage id key \"" + it.key() + "\"");
                }
                ep.processing_overrides[sid] =
                    parse_processing(it.value(), pctx + ".processing_overrides." + it.key());
            }
        }
        svc.paths.push_back(std::move(ep));
    }
    if (j.contains("path_probabilities")) {
        const json& pp = j["path_probabilities"];
        if (!pp.is_object()) throw SchemaError(ctx + ".path_probabilities: expected object");
        for (auto it = pp.begin(); it != pp.end(); ++it) {
            int pid;
            try {
                pid = std::stoi(it.key());
            } catch (const std::exception&) {
                throw SchemaError(ctx + ".path_probabilities: bad path id key \"" + it.key() + "\"");
            }
            svc.path_probabilities[pid] = as_number(it.value(), ctx + ".path_probabilities." + it.key());
        }
    }
    return svc;
}

inline MachineSpec parse_machine(const json& j) {
    std::string name = j.contains("machine_id") && j["machine_id"].is_string()
                           ? j["machine_id"].get<std::string>()
                           : "?";
    const std::string ctx = "machine \"" + name + "\"";
    check_keys(j, {"machine_id", "cores", "network_cores", "dvfs_levels", "network_rx",
                   "network_rx_us_per_byte"},
               ctx);
    MachineSpec m;
    m.machine_id = as_string(require(j, "machine_id", ctx), ctx + ".machine_id");
    m.cores = static_cast<int>(as_int(require(j, "cores", ctx), ctx + ".cores"));
    m.network_cores = static_cast<int>(as_int(require(j, "network_cores", ctx), ctx + ".network_cores"));
    const json& lv = require(j, "dvfs_levels", ctx);
    if (!lv.is_array()) throw SchemaError(ctx + ".dvfs_levels: expected array");
    for (const auto& v : lv) m.dvfs_levels.push_back(as_number(v, ctx + ".dvfs_levels"));
    if (j.contains("network_rx")) m.network_rx = parse_analytic(j["network_rx"], ctx + ".network_rx");
    if (j.contains("network_rx_us_per_byte"))
        m.network_rx_us_per_byte = as_number(j["network_rx_us_per_byte"], ctx + ".network_rx_us_per_byte");
    return m;
}

inline InstanceSpec parse_instance(const json& j) {
    std::string name = j.contains("instance_name") && j["instance_name"].is_string()
                           ? j["instance_name"].get<std::string>()
                           : "?";
    const std::string ctx = "instance \"" + name + "\"";
    check_keys(j, {"instance_name", "service_name", "machine_id", "threads", "exec_model",
                   "connection_pools"},
               ctx);
    InstanceSpec inst;
    inst.instance_name = as_string(require(j, "instance_name", ctx), ctx + ".instance_name");
    inst.service_name = as_string(require(j, "service_name", ctx), ctx + ".service_name");
    inst.machine_id = as_string(require(j, "machine_id", ctx), ctx + ".machine_id");
    inst.exec_model = parse_exec_model(as_string(require(j, "exec_model", ctx), ctx + ".exec_model"), ctx);
    if (j.contains("threads")) inst.threads = static_cast<int>(as_int(j["threads"], ctx + ".threads"));
    if (j.contains("connection_pools")) {
        const json& cp = j["connection_pools"];
        if (!cp.is_object()) throw SchemaError(ctx + ".connection_pools: expected object");
        for (auto it = cp.begin(); it != cp.end(); ++it)
            inst.connection_pools[it.key()] =
                static_cast<int>(as_int(it.value(), ctx + ".connection_pools." + it.key()));
    }
    return inst;
}

inline PathNodeSpec parse_path_node(const json& j, const std::string& ctx) {
    check_keys(j, {"node_id", "service", "execution_path", "start_stage", "end_stage", "childs",
                   "enter_op", "leave_op", "causal_node_id"},
               ctx);
    PathNodeSpec n;
    n.node_id = static_cast<int>(as_int(require(j, "node_id", ctx), ctx + ".node_id"));
    n.service = as_string(require(j, "service", ctx), ctx + ".service");
    auto opt_int = [&](const char* key) -> std::optional<int> {
        if (!j.contains(key) || j[key].is_null()) return std::nullopt;
        return static_cast<int>(as_int(j[key], ctx + "." + key));
    };
    n.execution_path = opt_int("execution_path");
    n.start_stage = opt_int("start_stage");
    n.end_stage = opt_int("end_stage");
    if (j.contains("childs") && !j["childs"].is_null()) {
        if (!j["childs"].is_array()) throw SchemaError(ctx + ".childs: expected array or null");
        for (const auto& v : j["childs"]) n.childs.push_back(static_cast<int>(as_int(v, ctx + ".childs")));
    }
    auto parse_ops = [&](const char* key) {
        std::vector<PathOp> ops;
        if (j.contains(key) && !j[key].is_null()) {
            if (!j[key].is_array()) throw SchemaError(ctx + "." + key + ": expected array or null");
            for (const auto& v : j[key])
                ops.push_back(parse_path_op(as_string(v, ctx + "." + key), ctx + "." + key));
        }
        return ops;
    };
    n.enter_op = parse_ops("enter_op");
    n.leave_op = parse_ops("leave_op");
    n.causal_node_id = opt_int("causal_node_id");
    return n;
}

inline ClientSpec parse_client(const json& j, const std::filesystem::path& dir) {
    const std::string ctx = "client";
    check_keys(j, {"load_pattern", "interarrival", "request_size_bytes", "duration_s", "warmup_s",
                   "rng_seed", "connections", "tracked_path_name", "power_manager"},
               ctx);
    ClientSpec c;
    const json& lp = require(j, "load_pattern", ctx);
    const std::string type = as_string(require(lp, "type", ctx + ".load_pattern"), ctx + ".load_pattern.type");
    if (type == "constant") {
        check_keys(lp, {"type", "qps"}, ctx + ".load_pattern");
        c.load_pattern.kind = LoadPattern::Kind::constant;
        c.load_pattern.qps = as_number(require(lp, "qps", ctx), ctx + ".load_pattern.qps");
    } else if (type == "trace") {
        check_keys(lp, {"type", "file"}, ctx + ".load_pattern");
        c.load_pattern.kind = LoadPattern::Kind::trace;
        c.load_pattern.trace_file = as_string(require(lp, "file", ctx), ctx + ".load_pattern.file");
        c.load_pattern.points = load_trace_csv(dir / c.load_pattern.trace_file);
    } else {
        throw SchemaError(ctx + ".load_pattern: unknown type \"" + type + "\"");
    }
    const std::string ia = as_string(require(j, "interarrival", ctx), ctx + ".interarrival");
    if (ia == "exponential") c.interarrival = InterarrivalKind::exponential;
    else if (ia == "deterministic") c.interarrival = InterarrivalKind::deterministic;
    else throw SchemaError(ctx + ": unknown interarrival \"" + ia + "\"");
    c.request_size_bytes =
        static_cast<int>(as_int(require(j, "request_size_bytes", ctx), ctx + ".request_size_bytes"));
    c.duration_s = as_number(require(j, "duration_s", ctx), ctx + ".duration_s");
    c.warmup_s = as_number(require(j, "warmup_s", ctx), ctx + ".warmup_s");
    const json& seed = require(j, "rng_seed", ctx);
    if (!seed.is_number_unsigned() && !seed.is_number_integer())
        throw SchemaError(ctx + ".rng_seed: expected an integer");
    c.rng_seed = seed.get<std::uint64_t>();
    if (j.contains("connections"))
        c.connections = static_cast<int>(as_int(j["connections"], ctx + ".connections"));
    if (j.contains("tracked_path_name"))
        c.tracked_path_name = as_string(j["tracked_path_name"], ctx + ".tracked_path_name");
    if (j.contains("power_manager")) {
        const json& pm = j["power_manager"];
        const std::string pctx = ctx + ".power_manager";
        check_keys(pm, {"qos_target_ms", "decision_interval_s", "bucket_count", "K",
                        "preference_increase", "preference_decrease", "preference_min",
                        "preference_max", "target_margin"},
                   pctx);
        PmConfig cfg;
        cfg.qos_target_ms = as_number(require(pm, "qos_target_ms", pctx), pctx + ".qos_target_ms");
        cfg.decision_interval_s =
            as_number(require(pm, "decision_interval_s", pctx), pctx + ".decision_interval_s");
        if (pm.contains("bucket_count"))
            cfg.bucket_count = static_cast<int>(as_int(pm["bucket_count"], pctx + ".bucket_count"));
        if (pm.contains("K")) cfg.K = static_cast<int>(as_int(pm["K"], pctx + ".K"));
        if (pm.contains("preference_increase"))
            cfg.preference_increase = as_number(pm["preference_increase"], pctx);
        if (pm.contains("preference_decrease"))
            cfg.preference_decrease = as_number(pm["preference_decrease"], pctx);
        if (pm.contains("preference_min")) cfg.preference_min = as_number(pm["preference_min"], pctx);
        if (pm.contains("preference_max")) cfg.preference_max = as_number(pm["preference_max"], pctx);
        if (pm.contains("target_margin")) cfg.target_margin = as_number(pm["target_margin"], pctx);
        c.power_manager = cfg;
    }
    return c;
}

}  // namespace detail

// Load and cross-link the five declarative inputs (plus referenced histogram
// and trace files) from a scenario directory.
inline Scenario load_scenario(const std::string& directory_path) {
    namespace fs = std::filesystem;
    const fs::path dir(directory_path);
    for (const char* f : {"service.json", "graph.json", "path.json", "machines.json", "client.json"})
        if (!fs::exists(dir / f)) throw MissingFileError((dir / f).string());

    Scenario s;

    const json services = detail::load_json_file(dir / "service.json");
    if (!services.is_array()) throw SchemaError("service.json: expected an array of services");
    for (const auto& sj : services) s.services.push_back(detail::parse_service(sj));

    const json machines = detail::load_json_file(dir / "machines.json");
    detail::check_keys(machines, {"machines"}, "machines.json");
    const json& ml = detail::require(machines, "machines", "machines.json");
    if (!ml.is_array()) throw SchemaError("machines.json: machines must be an array");
    for (const auto& mj : ml) s.machines.push_back(detail::parse_machine(mj));

    const json graph = detail::load_json_file(dir / "graph.json");
    detail::check_keys(graph, {"instances"}, "graph.json");
    const json& il = detail::require(graph, "instances", "graph.json");
    if (!il.is_array()) throw SchemaError("graph.json: instances must be an array");
    for (const auto& ij : il) s.instances.push_back(detail::parse_instance(ij));

    const json paths = detail::load_json_file(dir / "path.json");
    if (!paths.is_array()) throw SchemaError("path.json: expected an array of paths");
    for (const auto& pj : paths) {
        const std::string ctx = "path.json path";
        detail::check_keys(pj, {"path_id", "probability", "entry", "nodes"}, ctx);
        InterPathSpec p;
        p.path_id = static_cast<int>(detail::as_int(detail::require(pj, "path_id", ctx), ctx + ".path_id"));
        p.probability = detail::as_number(detail::require(pj, "probability", ctx), ctx + ".probability");
        p.entry = static_cast<int>(detail::as_int(detail::require(pj, "entry", ctx), ctx + ".entry"));
        const json& nodes = detail::require(pj, "nodes", ctx);
        if (!nodes.is_array()) throw SchemaError(ctx + ".nodes: expected array");
        for (const auto& nj : nodes)
            p.nodes.push_back(detail::parse_path_node(nj, ctx + " node"));
        s.inter_paths.push_back(std::move(p));
    }

    s.client = detail::parse_client(detail::load_json_file(dir / "client.json"), dir);

    // Load referenced histograms into the (service, stage, frequency) table.
    for (const auto& svc : s.services) {
        auto load_files = [&](const ProcessingSpec& p, int stage_id, const std::string& ctx) {
            if (p.kind != ProcessingSpec::Kind::histogram) return;
            for (const auto& [fkey, rel] : p.histogram_files) {
                double f = detail::parse_freq_key(fkey, ctx);
                s.histograms[{svc.service_name, stage_id, f}] = detail::load_histogram_csv(dir / rel);
            }
        };
        for (const auto& st : svc.stages)
            load_files(st.processing, st.stage_id, svc.service_name + " stage " + std::to_string(st.stage_id));
        for (const auto& p : svc.paths)
            for (const auto& [sid, spec] : p.processing_overrides)
                load_files(spec, sid, svc.service_name + " path override");
    }

    validate_scenario(s);
    return s;
}

// Write a scenario back out as the five JSON inputs plus histogram/trace
// CSVs. load_scenario(save_scenario(s)) is structurally equal to s.
inline void save_scenario(const Scenario& s, const std::string& directory_path) {
    namespace fs = std::filesystem;
    const fs::path dir(directory_path);
    std::error_code ec;
    fs::create_directories(dir, ec);

    auto write = [&](const fs::path& p, const std::string& text) {
        fs::create_directories(p.parent_path(), ec);
        std::ofstream out(p, std::ios::binary);
        if (!out) throw IoError("cannot write " + p.string());
        out << text;
    };

    write(dir / "service.json", json(s.services).dump(2) + "\n");
    write(dir / "machines.json", json{{"machines", s.machines}}.dump(2) + "\n");
    write(dir / "graph.json", json{{"instances", s.instances}}.dump(2) + "\n");
    write(dir / "path.json", json(s.inter_paths).dump(2) + "\n");
    write(dir / "client.json", json(s.client).dump(2) + "\n");

    if (s.client.load_pattern.kind == LoadPattern::Kind::trace) {
        std::string csv = "time_s,qps\n";
        for (const auto& [t, q] : s.client.load_pattern.points)
            csv += detail::format_double(t) + "," + detail::format_double(q) + "\n";
        write(dir / s.client.load_pattern.trace_file, csv);
    }

    // Histogram files, at the relative paths the services reference.
    for (const auto& svc : s.services) {
        auto dump_files = [&](const ProcessingSpec& p, int stage_id) {
            if (p.kind != ProcessingSpec::Kind::histogram) return;
            for (const auto& [fkey, rel] : p.histogram_files) {
                double f = detail::parse_freq_key(fkey, "save");
                auto it = s.histograms.find({svc.service_name, stage_id, f});
                if (it == s.histograms.end())
                    throw IoError("no histogram loaded for " +
                                  HistKey{svc.service_name, stage_id, f}.str());
                std::string csv = "upper_bound_us,probability\n";
                for (std::size_t i = 0; i < it->second.upper_bound_us.size(); ++i)
                    csv += detail::format_double(it->second.upper_bound_us[i]) + "," +
                           detail::format_double(it->second.probability[i]) + "\n";
                write(dir / rel, csv);
            }
        };
        for (const auto& st : svc.stages) dump_files(st.processing, st.stage_id);
        for (const auto& p : svc.paths)
            for (const auto& [sid, spec] : p.processing_overrides) dump_files(spec, sid);
    }
}

}  // namespace uqsim

#endif
