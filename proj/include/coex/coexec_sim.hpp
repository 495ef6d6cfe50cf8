#pragma once

#include <string>
#include <vector>

#include "coex/partitioner.hpp"

namespace coex {

enum class SyncMode { polling, passive };

std::string sync_mode_name(SyncMode mode);
SyncMode sync_mode_from_name(const std::string& name);

// Synchronization cost model: busy polling leaves a small residual overhead,
// passive event notification a large one.
struct SyncConfig {
    SyncMode mode = SyncMode::polling;
    double epsilon_poll_us = 7.0;
    double notify_delay_us = 162.0;

    void validate() const;
    double overhead_us() const {
        return mode == SyncMode::polling ? epsilon_poll_us : notify_delay_us;
    }
};

// Virtual-clock latency of one layer: exclusive runs carry no sync overhead,
// co-executed runs cost max(t_cpu, t_gpu) plus the mode's overhead.
double simulate_layer(double t_cpu_us, double t_gpu_us, const SyncConfig& sync, bool co_executed);

// Sum of per-layer totals; overhead charged only where both sides run. Plans
// and cost curves are positionally aligned; a pool plan (0/0 split) bills its
// constant GPU cost.
double simulate_model(const std::vector<PartitionPlan>& plans, const std::vector<CostEstimate>& costs,
                      const SyncConfig& sync);

}  // namespace coex
