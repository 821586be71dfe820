#ifndef UQSIM_TESTS_HELPERS_HPP
#define UQSIM_TESTS_HELPERS_HPP

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "uqsim/uqsim.hpp"

namespace test {

inline std::filesystem::path scenario_dir(const std::string& name) {
    return std::filesystem::path(UQSIM_SCENARIO_DIR) / name;
}

// Fresh temp directory under the test binary's working directory.
inline std::filesystem::path fresh_dir(const std::string& tag) {
    static int counter = 0;
    auto p = std::filesystem::path("test_tmp") / (tag + "_" + std::to_string(counter++));
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
    std::filesystem::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    out << text;
}

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

// Kolmogorov-Smirnov statistic of samples against Exp(mean).
inline double ks_statistic_exponential(std::vector<double> samples, double mean) {
    std::sort(samples.begin(), samples.end());
    double d = 0.0;
    const double n = static_cast<double>(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        double f = 1.0 - std::exp(-samples[i] / mean);
        d = std::max(d, std::abs(f - (i + 1) / n));
        d = std::max(d, std::abs(f - i / n));
    }
    return d;
}

// A deterministic-service scenario: one instance per entry in `means_us`,
// visited in a chain, each with a single deterministic stage. `cores` and
// `rx_det_us` control contention and network cost; rx < 0 disables the
// network entirely (network_cores = 0).
inline uqsim::Scenario chain_scenario(const std::vector<double>& means_us, bool deterministic,
                                      double qps, double duration_s, double rx_det_us = -1.0,
                                      int cores = 1) {
    using namespace uqsim;
    Scenario s;
    InterPathSpec path;
    path.path_id = 0;
    path.probability = 1.0;
    path.entry = 0;
    for (std::size_t i = 0; i < means_us.size(); ++i) {
        ServiceSpec svc;
        svc.service_name = "svc" + std::to_string(i);
        StageSpec st;
        st.stage_name = "stage";
        st.stage_id = 0;
        st.processing.analytic = {deterministic ? AnalyticKind::deterministic : AnalyticKind::exponential,
                                  means_us[i], 0.0};
        svc.stages = {st};
        svc.paths = {{0, "p", {0}, {}}};
        s.services.push_back(svc);

        MachineSpec m;
        m.machine_id = "m" + std::to_string(i);
        m.cores = cores;
        m.network_cores = rx_det_us < 0.0 ? 0 : 1;
        m.dvfs_levels = {2.6};
        if (rx_det_us >= 0.0) m.network_rx = {AnalyticKind::deterministic, rx_det_us, 0.0};
        s.machines.push_back(m);

        InstanceSpec inst;
        inst.instance_name = "S" + std::to_string(i);
        inst.service_name = svc.service_name;
        inst.machine_id = m.machine_id;
        inst.exec_model = ExecModel::simple;
        s.instances.push_back(inst);

        PathNodeSpec n;
        n.node_id = static_cast<int>(i);
        n.service = inst.instance_name;
        n.execution_path = 0;
        n.childs = {static_cast<int>(i) + 1};
        path.nodes.push_back(n);
    }
    PathNodeSpec terminal;
    terminal.node_id = static_cast<int>(means_us.size());
    terminal.service = "client";
    path.nodes.push_back(terminal);
    s.inter_paths = {path};

    s.client.load_pattern = {LoadPattern::Kind::constant, qps, "", {}};
    s.client.interarrival = InterarrivalKind::deterministic;
    s.client.duration_s = duration_s;
    s.client.warmup_s = 0.0;
    s.client.rng_seed = 7;
    s.client.connections = 1;
    return s;
}

}  // namespace test

#endif
