#ifndef UQSIM_BUILTIN_HPP
#define UQSIM_BUILTIN_HPP

#include <string>
#include <vector>

#include "uqsim/config.hpp"

namespace uqsim {

// Built-in scenario topologies: the validation shapes (2/3-tier,
// load-balancing proxy, request fanout, RPC echo, social network) and the
// tail-at-scale experiment, with analytic exponential service times as
// defaults.
struct BuiltinSpec {
    enum class Kind { two_tier, three_tier, load_balance, fanout, rpc_echo, social_network, tail_at_scale };
    Kind kind = Kind::two_tier;
    int k = 0;                 // load_balance / fanout factor
    int n = 0;                 // tail_at_scale cluster size
    double slow_frac = 0.0;    // tail_at_scale: per-request probability a leaf serves slowly
    double slow_factor = 1.0;  // tail_at_scale: slow-path service-time multiplier
};

namespace detail {

inline std::vector<double> default_ladder() {
    return {1.2, 1.4, 1.6, 1.8, 2.0, 2.2, 2.4, 2.6};
}

inline ProcessingSpec exp_us(double mean) {
    ProcessingSpec p;
    p.analytic = {AnalyticKind::exponential, mean, 0.0};
    return p;
}

inline StageSpec single_stage(const std::string& name, int id, double mean_us) {
    StageSpec s;
    s.stage_name = name;
    s.stage_id = id;
    s.queue_type = QueueType::single;
    s.batching = false;
    s.processing = exp_us(mean_us);
    return s;
}

inline StageSpec epoll_stage(const std::string& name, int id, double mean_us, int bound,
                             double slope_event) {
    StageSpec s;
    s.stage_name = name;
    s.stage_id = id;
    s.queue_type = QueueType::epoll;
    s.batching = true;
    s.queue_parameter = std::vector<std::optional<int>>{std::nullopt, bound};
    s.processing = exp_us(mean_us);
    s.slope_us_per_event = slope_event;
    return s;
}

inline MachineSpec machine(const std::string& id, int cores, int net_cores) {
    MachineSpec m;
    m.machine_id = id;
    m.cores = cores;
    m.network_cores = net_cores;
    m.dvfs_levels = default_ladder();
    return m;
}

inline InstanceSpec instance(const std::string& name, const std::string& svc, const std::string& mac,
                             ExecModel model, int threads) {
    InstanceSpec i;
    i.instance_name = name;
    i.service_name = svc;
    i.machine_id = mac;
    i.exec_model = model;
    i.threads = threads;
    return i;
}

inline PathNodeSpec node(int id, const std::string& service, std::optional<int> exec_path,
                         std::vector<int> childs) {
    PathNodeSpec n;
    n.node_id = id;
    n.service = service;
    n.execution_path = exec_path;
    n.childs = std::move(childs);
    return n;
}

inline ClientSpec client(double qps, int connections, double duration_s = 10.0, double warmup_s = 1.0) {
    ClientSpec c;
    c.load_pattern = {LoadPattern::Kind::constant, qps, "", {}};
    c.connections = connections;
    c.duration_s = duration_s;
    c.warmup_s = warmup_s;
    c.rng_seed = 1;
    return c;
}

// The memcached model of the reference listing: epoll and socket_read batch
// (epoll cost grows with returned events, socket_read with bytes read);
// read and write paths share the stage order and differ only in the
// processing distribution.
inline ServiceSpec memcached_service() {
    ServiceSpec svc;
    svc.service_name = "memcached";
    svc.stages.push_back(epoll_stage("epoll", 0, 20.0, 64, 1.0));
    StageSpec sr;
    sr.stage_name = "socket_read";
    sr.stage_id = 1;
    sr.queue_type = QueueType::socket;
    sr.batching = true;
    sr.queue_parameter = std::vector<std::optional<int>>{64};
    sr.processing = exp_us(10.0);
    sr.slope_us_per_byte = 0.01;
    svc.stages.push_back(sr);
    svc.stages.push_back(single_stage("memcached_processing", 2, 50.0));
    svc.stages.push_back(single_stage("socket_send", 3, 20.0));
    ExecutionPathSpec read{0, "memcached_read", {0, 1, 2, 3}, {}};
    ExecutionPathSpec write{1, "memcached_write", {0, 1, 2, 3}, {}};
    write.processing_overrides[2] = exp_us(60.0);
    svc.paths = {read, write};
    return svc;
}

inline ServiceSpec nginx_service() {
    ServiceSpec svc;
    svc.service_name = "nginx";
    svc.stages.push_back(epoll_stage("epoll", 0, 30.0, 64, 1.0));
    svc.stages.push_back(single_stage("nginx_processing", 1, 150.0));
    svc.paths = {{0, "request", {0, 1}, {}}, {1, "response", {1}, {}}};
    return svc;
}

inline Scenario two_tier() {
    Scenario s;
    s.services = {nginx_service(), memcached_service()};
    s.machines = {machine("m_front", 8, 2), machine("m_back", 4, 2)};
    InstanceSpec fe = instance("Nginx", "nginx", "m_front", ExecModel::multi_threaded, 8);
    fe.connection_pools["Memcached"] = 8;
    s.instances = {fe, instance("Memcached", "memcached", "m_back", ExecModel::multi_threaded, 4)};

    InterPathSpec p;
    p.path_id = 0;
    p.probability = 1.0;
    p.entry = 0;
    PathNodeSpec n0 = node(0, "Nginx", 0, {1});
    n0.enter_op = {PathOp::block_recv_connection};  // http/1.1: one outstanding per connection
    PathNodeSpec n1 = node(1, "Memcached", 0, {2});
    PathNodeSpec n2 = node(2, "Nginx", 1, {3});
    n2.leave_op = {PathOp::unblock_connection};
    n2.causal_node_id = 0;
    PathNodeSpec n3 = node(3, "client", std::nullopt, {});
    p.nodes = {n0, n1, n2, n3};
    s.inter_paths = {p};

    s.client = client(1000.0, 320);
    return s;
}

inline Scenario three_tier() {
    Scenario s = two_tier();
    ServiceSpec mongo;
    mongo.service_name = "mongodb";
    mongo.stages.push_back(single_stage("mongo_processing", 0, 1500.0));
    mongo.paths = {{0, "query", {0}, {}}};
    s.services.push_back(mongo);
    s.machines.push_back(machine("m_db", 4, 2));
    InstanceSpec db = instance("MongoDB", "mongodb", "m_db", ExecModel::multi_threaded, 4);
    s.instances.push_back(db);
    s.instances[1].connection_pools["MongoDB"] = 4;  // memcached tier queries the database on a miss

    // Cache hit path.
    s.inter_paths[0].probability = 0.9;
    // Cache miss: query the database, then write-allocate back into the cache.
    InterPathSpec miss;
    miss.path_id = 1;
    miss.probability = 0.1;
    miss.entry = 0;
    PathNodeSpec n0 = node(0, "Nginx", 0, {1});
    n0.enter_op = {PathOp::block_recv_connection};
    PathNodeSpec n1 = node(1, "Memcached", 0, {2});
    PathNodeSpec n2 = node(2, "MongoDB", 0, {3});
    PathNodeSpec n3 = node(3, "Memcached", 1, {4});
    PathNodeSpec n4 = node(4, "Nginx", 1, {5});
    n4.leave_op = {PathOp::unblock_connection};
    n4.causal_node_id = 0;
    PathNodeSpec n5 = node(5, "client", std::nullopt, {});
    miss.nodes = {n0, n1, n2, n3, n4, n5};
    s.inter_paths.push_back(miss);

    s.client = client(500.0, 320);
    return s;
}

inline Scenario load_balance(int k) {
    if (k < 1) throw InvalidParameterError("load_balance: k must be >= 1");
    Scenario s;
    ServiceSpec proxy;
    proxy.service_name = "proxy_nginx";
    proxy.stages.push_back(epoll_stage("epoll", 0, 20.0, 64, 1.0));
    proxy.stages.push_back(single_stage("proxy_processing", 1, 100.0));
    proxy.paths = {{0, "request", {0, 1}, {}}, {1, "response", {1}, {}}};
    ServiceSpec web;
    web.service_name = "webserver";
    web.stages.push_back(single_stage("web_processing", 0, 200.0));
    web.paths = {{0, "serve", {0}, {}}};
    s.services = {proxy, web};

    s.machines.push_back(machine("m_proxy", 4, 2));
    s.instances.push_back(instance("Proxy", "proxy_nginx", "m_proxy", ExecModel::multi_threaded, 4));
    for (int i = 0; i < k; ++i) {
        s.machines.push_back(machine("m_web_" + std::to_string(i), 1, 1));
        s.instances.push_back(instance("Web_" + std::to_string(i), "webserver",
                                       "m_web_" + std::to_string(i), ExecModel::simple, 1));
    }

    // One inter-path per backend with equal probability: the long-run
    // round-robin balance without modeling the proxy's rotor state.
    for (int i = 0; i < k; ++i) {
        InterPathSpec p;
        p.path_id = i;
        p.probability = 1.0 / k;
        p.entry = 0;
        p.nodes = {node(0, "Proxy", 0, {1}), node(1, "Web_" + std::to_string(i), 0, {2}),
                   node(2, "Proxy", 1, {3}), node(3, "client", std::nullopt, {})};
        s.inter_paths.push_back(p);
    }
    s.client = client(1000.0, 64);
    return s;
}

inline Scenario fanout(int k) {
    if (k < 1) throw InvalidParameterError("fanout: k must be >= 1");
    Scenario s;
    ServiceSpec proxy;
    proxy.service_name = "proxy_nginx";
    proxy.stages.push_back(single_stage("proxy_processing", 0, 10.0));
    proxy.paths = {{0, "forward", {0}, {}}};
    ServiceSpec leaf;
    leaf.service_name = "leaf_nginx";
    leaf.stages.push_back(single_stage("leaf_processing", 0, 1000.0));
    leaf.paths = {{0, "serve", {0}, {}}};
    s.services = {proxy, leaf};

    MachineSpec pm = machine("m_proxy", 4, 0);
    s.machines.push_back(pm);
    s.instances.push_back(instance("Proxy", "proxy_nginx", "m_proxy", ExecModel::simple, 1));
    for (int i = 0; i < k; ++i) {
        s.machines.push_back(machine("m_leaf_" + std::to_string(i), 1, 0));
        s.instances.push_back(instance("Leaf_" + std::to_string(i), "leaf_nginx",
                                       "m_leaf_" + std::to_string(i), ExecModel::simple, 1));
    }

    // Proxy forwards to every leaf; a fan-in node back on the proxy
    // synchronizes all responses before answering the client.
    InterPathSpec p;
    p.path_id = 0;
    p.probability = 1.0;
    p.entry = 0;
    std::vector<int> leaves;
    for (int i = 0; i < k; ++i) leaves.push_back(1 + i);
    p.nodes.push_back(node(0, "Proxy", 0, leaves));
    for (int i = 0; i < k; ++i)
        p.nodes.push_back(node(1 + i, "Leaf_" + std::to_string(i), 0, {k + 1}));
    p.nodes.push_back(node(k + 1, "Proxy", 0, {k + 2}));
    p.nodes.push_back(node(k + 2, "client", std::nullopt, {}));
    s.inter_paths = {p};

    s.client = client(100.0, 32);
    return s;
}

inline Scenario rpc_echo() {
    Scenario s;
    ServiceSpec thrift;
    thrift.service_name = "thrift_server";
    thrift.stages.push_back(single_stage("rpc_processing", 0, 20.0));
    thrift.paths = {{0, "echo", {0}, {}}};
    s.services = {thrift};
    s.machines = {machine("m_server", 1, 1)};
    s.instances = {instance("Thrift", "thrift_server", "m_server", ExecModel::simple, 1)};
    InterPathSpec p;
    p.path_id = 0;
    p.probability = 1.0;
    p.entry = 0;
    p.nodes = {node(0, "Thrift", 0, {1}), node(1, "client", std::nullopt, {})};
    s.inter_paths = {p};
    s.client = client(1000.0, 32);
    return s;
}

inline Scenario social_network() {
    Scenario s;
    ServiceSpec fe;
    fe.service_name = "frontend";
    fe.stages.push_back(epoll_stage("epoll", 0, 15.0, 64, 1.0));
    fe.stages.push_back(single_stage("frontend_processing", 1, 100.0));
    fe.paths = {{0, "request", {0, 1}, {}}, {1, "compose", {1}, {}}, {2, "response", {1}, {}}};
    auto logic = [&](const std::string& name) {
        ServiceSpec svc;
        svc.service_name = name;
        svc.stages.push_back(single_stage(name + "_processing", 0, 150.0));
        svc.paths = {{0, "handle", {0}, {}}};
        return svc;
    };
    // Storage tiers have a fast in-memory path and a slow disk path, picked
    // probabilistically per query.
    auto store = [&](const std::string& name) {
        ServiceSpec svc;
        svc.service_name = name;
        svc.stages.push_back(single_stage(name + "_lookup", 0, 100.0));
        ExecutionPathSpec hit{0, "cache_hit", {0}, {}};
        ExecutionPathSpec miss{1, "db_miss", {0}, {}};
        miss.processing_overrides[0] = exp_us(2000.0);
        svc.paths = {hit, miss};
        svc.path_probabilities = {{0, 0.8}, {1, 0.2}};
        return svc;
    };
    s.services = {fe,
                  logic("user_service"),
                  logic("post_service"),
                  logic("media_service"),
                  store("user_store"),
                  store("post_store"),
                  store("media_store")};

    s.machines = {machine("m_fe", 8, 2), machine("m_logic", 8, 2), machine("m_store", 8, 2)};
    InstanceSpec front = instance("Frontend", "frontend", "m_fe", ExecModel::multi_threaded, 8);
    front.connection_pools = {{"User", 8}, {"Post", 8}, {"Media", 8}};
    InstanceSpec user = instance("User", "user_service", "m_logic", ExecModel::multi_threaded, 2);
    user.connection_pools = {{"UserStore", 4}};
    InstanceSpec post = instance("Post", "post_service", "m_logic", ExecModel::multi_threaded, 2);
    post.connection_pools = {{"PostStore", 4}};
    InstanceSpec media = instance("Media", "media_service", "m_logic", ExecModel::multi_threaded, 2);
    media.connection_pools = {{"MediaStore", 4}};
    s.instances = {front,
                   user,
                   post,
                   media,
                   instance("UserStore", "user_store", "m_store", ExecModel::multi_threaded, 2),
                   instance("PostStore", "post_store", "m_store", ExecModel::multi_threaded, 2),
                   instance("MediaStore", "media_store", "m_store", ExecModel::multi_threaded, 2)};

    // Frontend queries user and post in parallel, synchronizes, then
    // resolves media and responds.
    InterPathSpec p;
    p.path_id = 0;
    p.probability = 1.0;
    p.entry = 0;
    PathNodeSpec n0 = node(0, "Frontend", 0, {1, 3});
    n0.enter_op = {PathOp::block_recv_connection};
    PathNodeSpec n8 = node(8, "Frontend", 2, {9});
    n8.leave_op = {PathOp::unblock_connection};
    n8.causal_node_id = 0;
    p.nodes = {n0,
               node(1, "User", 0, {2}),
               node(2, "UserStore", std::nullopt, {5}),
               node(3, "Post", 0, {4}),
               node(4, "PostStore", std::nullopt, {5}),
               node(5, "Frontend", 1, {6}),
               node(6, "Media", 0, {7}),
               node(7, "MediaStore", std::nullopt, {8}),
               n8,
               node(9, "client", std::nullopt, {})};
    s.inter_paths = {p};

    s.client = client(300.0, 64);
    return s;
}

inline Scenario tail_at_scale(int n, double slow_frac, double slow_factor) {
    if (n < 1) throw InvalidParameterError("tail_at_scale: n must be >= 1");
    if (slow_frac < 0.0 || slow_frac > 1.0)
        throw InvalidParameterError("tail_at_scale: slow_frac must be in [0,1]");
    if (slow_factor < 1.0) throw InvalidParameterError("tail_at_scale: slow_factor must be >= 1");
    Scenario s;
    ServiceSpec proxy;
    proxy.service_name = "proxy";
    proxy.stages.push_back(single_stage("proxy_processing", 0, 10.0));
    proxy.paths = {{0, "forward", {0}, {}}};
    // Each leaf serves a request slowly with probability slow_frac,
    // independently per request; slow service is slow_factor times the mean.
    ServiceSpec leaf;
    leaf.service_name = "leaf";
    leaf.stages.push_back(single_stage("leaf_processing", 0, 1000.0));
    ExecutionPathSpec fast{0, "fast", {0}, {}};
    ExecutionPathSpec slow{1, "slow", {0}, {}};
    slow.processing_overrides[0] = exp_us(1000.0 * slow_factor);
    leaf.paths = {fast, slow};
    leaf.path_probabilities = {{0, 1.0 - slow_frac}, {1, slow_frac}};
    s.services = {proxy, leaf};

    s.machines.push_back(machine("m_proxy", 4, 0));
    s.instances.push_back(instance("Proxy", "proxy", "m_proxy", ExecModel::simple, 1));
    InterPathSpec p;
    p.path_id = 0;
    p.probability = 1.0;
    p.entry = 0;
    std::vector<int> leaves;
    for (int i = 0; i < n; ++i) leaves.push_back(1 + i);
    p.nodes.push_back(node(0, "Proxy", 0, leaves));
    for (int i = 0; i < n; ++i) {
        s.machines.push_back(machine("m_leaf_" + std::to_string(i), 1, 0));
        s.instances.push_back(
            instance("Leaf_" + std::to_string(i), "leaf", "m_leaf_" + std::to_string(i),
                     ExecModel::simple, 1));
        // Execution path left open: each leaf draws fast vs slow per request.
        p.nodes.push_back(node(1 + i, "Leaf_" + std::to_string(i), std::nullopt, {n + 1}));
    }
    p.nodes.push_back(node(n + 1, "Proxy", 0, {n + 2}));
    p.nodes.push_back(node(n + 2, "client", std::nullopt, {}));
    s.inter_paths = {p};

    s.client = client(50.0, 32);
    s.client.tracked_path_name = "slow";
    return s;
}

}  // namespace detail

// One service with one single-FIFO exponential stage and no network: an
// M/M/1 system (simple model, 1 core) or M/M/k (multi_threaded, k threads
// on >= k cores) under open-loop Poisson arrivals. The workhorse of the
// closed-form validation suite.
inline Scenario single_queue_scenario(double mean_us, int threads, int cores, ExecModel model,
                                      double qps, double duration_s) {
    Scenario s;
    ServiceSpec svc;
    svc.service_name = "server";
    svc.stages.push_back(detail::single_stage("processing", 0, mean_us));
    svc.paths = {{0, "serve", {0}, {}}};
    s.services = {svc};
    s.machines = {detail::machine("m0", cores, 0)};
    s.instances = {detail::instance("Server", "server", "m0", model, threads)};
    InterPathSpec p;
    p.path_id = 0;
    p.probability = 1.0;
    p.entry = 0;
    p.nodes = {detail::node(0, "Server", 0, {1}), detail::node(1, "client", std::nullopt, {})};
    s.inter_paths = {p};
    s.client = detail::client(qps, 32, duration_s, 0.1 * duration_s);
    return s;
}

inline Scenario generate_builtin_scenario(const BuiltinSpec& b) {
    Scenario s;
    switch (b.kind) {
        case BuiltinSpec::Kind::two_tier: s = detail::two_tier(); break;
        case BuiltinSpec::Kind::three_tier: s = detail::three_tier(); break;
        case BuiltinSpec::Kind::load_balance: s = detail::load_balance(b.k); break;
        case BuiltinSpec::Kind::fanout: s = detail::fanout(b.k); break;
        case BuiltinSpec::Kind::rpc_echo: s = detail::rpc_echo(); break;
        case BuiltinSpec::Kind::social_network: s = detail::social_network(); break;
        case BuiltinSpec::Kind::tail_at_scale:
            s = detail::tail_at_scale(b.n, b.slow_frac, b.slow_factor);
            break;
    }
    validate_scenario(s);
    return s;
}

// Parses "two_tier", "fanout:8", "load_balance:4" or
// "tail_at_scale:100,0.01,10".
inline BuiltinSpec parse_builtin(const std::string& text) {
    BuiltinSpec b;
    std::string name = text;
    std::vector<std::string> args;
    if (auto colon = text.find(':'); colon != std::string::npos) {
        name = text.substr(0, colon);
        std::string rest = text.substr(colon + 1);
        std::size_t pos = 0;
        while (pos != std::string::npos) {
            std::size_t comma = rest.find(',', pos);
            args.push_back(rest.substr(pos, comma == std::string::npos ? comma : comma - pos));
            pos = comma == std::string::npos ? comma : comma + 1;
        }
    }
    auto num = [&](std::size_t i) -> double {
        if (i >= args.size()) throw InvalidParameterError("builtin \"" + name + "\": missing parameter");
        try {
            return std::stod(args[i]);
        } catch (const std::exception&) {
            throw InvalidParameterError("builtin \"" + name + "\": bad parameter \"" + args[i] + "\"");
        }
    };
    if (name == "two_tier") b.kind = BuiltinSpec::Kind::two_tier;
    else if (name == "three_tier") b.kind = BuiltinSpec::Kind::three_tier;
    else if (name == "rpc_echo") b.kind = BuiltinSpec::Kind::rpc_echo;
    else if (name == "social_network") b.kind = BuiltinSpec::Kind::social_network;
    else if (name == "load_balance") {
        b.kind = BuiltinSpec::Kind::load_balance;
        b.k = static_cast<int>(num(0));
    } else if (name == "fanout") {
        b.kind = BuiltinSpec::Kind::fanout;
        b.k = static_cast<int>(num(0));
    } else if (name == "tail_at_scale") {
        b.kind = BuiltinSpec::Kind::tail_at_scale;
        b.n = static_cast<int>(num(0));
        b.slow_frac = num(1);
        b.slow_factor = num(2);
    } else {
        throw InvalidParameterError("unknown builtin scenario \"" + name + "\"");
    }
    return b;
}

}  // namespace uqsim

#endif
