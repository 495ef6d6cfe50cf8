#include "coex/coexec_sim.hpp"

#include <algorithm>

#include "coex/error.hpp"

namespace coex {

std::string sync_mode_name(SyncMode mode) {
    return mode == SyncMode::polling ? "polling" : "passive";
}

SyncMode sync_mode_from_name(const std::string& name) {
    if (name == "polling") return SyncMode::polling;
    if (name == "passive") return SyncMode::passive;
    throw ValidationError("unknown sync mode: " + name);
}

void SyncConfig::validate() const {
    if (epsilon_poll_us < 0 || notify_delay_us < 0) {
        throw ValidationError("sync delays must be >= 0");
    }
}

double simulate_layer(double t_cpu_us, double t_gpu_us, const SyncConfig& sync, bool co_executed) {
    if (t_cpu_us < 0 || t_gpu_us < 0) throw ContractViolation("work durations must be >= 0");
    if (!co_executed) {
        if (t_cpu_us != 0.0 && t_gpu_us != 0.0) {
            throw ContractViolation("exclusive execution requires one idle side");
        }
        return t_cpu_us + t_gpu_us;
    }
    return std::max(t_cpu_us, t_gpu_us) + sync.overhead_us();
}

double simulate_model(const std::vector<PartitionPlan>& plans, const std::vector<CostEstimate>& costs,
                      const SyncConfig& sync) {
    if (plans.size() != costs.size()) {
        throw ContractViolation("plans and cost curves must align one-to-one");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < plans.size(); ++i) {
        const auto& split = plans[i].partition;
        const bool co_executed = split.c_cpu > 0 && split.c_gpu > 0;
        double t_cpu = 0.0;
        double t_gpu = 0.0;
        if (split.c_cpu > 0) t_cpu = costs[i].t_cpu_us(split.c_cpu);
        // The GPU side also covers pool layers planned as (0, 0).
        if (split.c_gpu > 0 || split.c_cpu == 0) t_gpu = costs[i].t_gpu_us(split.c_gpu);
        total += simulate_layer(t_cpu, t_gpu, sync, co_executed);
    }
    return total;
}

}  // namespace coex
