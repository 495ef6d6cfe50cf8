#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <variant>
#include <vector>

#include "coex/op_model.hpp"

namespace coex {

// Per-op cost curves: latency at a given channel count per executor, plus the
// constant co-execution overhead (zero whenever one side is idle).
struct CostEstimate {
    std::function<double(std::int64_t)> t_cpu_us;
    std::function<double(std::int64_t)> t_gpu_us;
    double t_overhead_us = 0.0;
};

struct PartitionPlan {
    enum class Source { predicted, measured };

    ChannelPartition partition;
    double predicted_total_us = 0.0;
    double baseline_gpu_us = 0.0;
    double baseline_cpu_us = 0.0;
    double speedup = 1.0;  // GPU-only baseline over the planned total
    Source source = Source::predicted;
};

// T_overhead + max(T_CPU(c_cpu), T_GPU(c_gpu)); exclusive splits carry no
// overhead.
double objective(std::int64_t c_cpu, std::int64_t c_gpu, const CostEstimate& costs);

// Exhaustive scan over c_gpu in {0, alignment, 2*alignment, ...} plus both
// endpoints; ties resolve toward more GPU channels (less CPU busy-wait).
PartitionPlan optimize(const OpDescriptor& op, const CostEstimate& costs, std::int64_t alignment = 8);

using MeasureFn = std::function<double(const ChannelPartition&)>;

// Brute force over the same candidate grid using measured totals.
PartitionPlan grid_search_measured(const OpDescriptor& op, const MeasureFn& measure,
                                   std::int64_t step = 8);

// Pooling stage scheduled whole on the GPU; carries no partitionable channels.
struct PoolLayer {};

using LayerSpec = std::variant<LinearOp, ConvOp, PoolLayer>;

using LayerCostsProvider = std::function<CostEstimate(const LayerSpec& layer, int threads)>;

// Independent per-layer optimization; pool layers are pinned to the GPU with
// zero overhead and report speedup 1.
std::vector<PartitionPlan> plan_model(const std::vector<LayerSpec>& layers,
                                      const LayerCostsProvider& provider, int threads,
                                      std::int64_t alignment = 8);

// Model description file: JSON array of op records plus {"type":"pool"}.
std::vector<LayerSpec> load_layer_specs(const std::string& path);

// Plan file: JSON array of {layer, c_cpu, c_gpu, predicted_us, speedup}.
void save_plans(const std::vector<PartitionPlan>& plans, const std::string& path);
std::vector<PartitionPlan> load_plans(const std::string& path);

}  // namespace coex
