#include "coex/partitioner.hpp"

#include <algorithm>
#include <fstream>

#include <nlohmann/json.hpp>

#include "coex/error.hpp"

namespace coex {

double objective(std::int64_t c_cpu, std::int64_t c_gpu, const CostEstimate& costs) {
    if (c_cpu < 0 || c_gpu < 0 || c_cpu + c_gpu < 1) {
        throw ContractViolation("objective requires a non-empty, non-negative split");
    }
    if (c_cpu == 0) return costs.t_gpu_us(c_gpu);
    if (c_gpu == 0) return costs.t_cpu_us(c_cpu);
    return costs.t_overhead_us + std::max(costs.t_cpu_us(c_cpu), costs.t_gpu_us(c_gpu));
}

namespace {

std::vector<std::int64_t> candidate_gpu_channels(std::int64_t c_out, std::int64_t step) {
    if (step < 1) throw ContractViolation("candidate step must be >= 1");
    std::vector<std::int64_t> candidates;
    for (std::int64_t c = 0; c < c_out; c += step) candidates.push_back(c);
    candidates.push_back(c_out);
    return candidates;
}

PartitionPlan argmin_over_grid(std::int64_t c_out, std::int64_t step,
                               const std::function<double(std::int64_t, std::int64_t)>& total_of,
                               PartitionPlan::Source source) {
    PartitionPlan plan;
    plan.source = source;
    bool have_best = false;
    for (const std::int64_t c_gpu : candidate_gpu_channels(c_out, step)) {
        const std::int64_t c_cpu = c_out - c_gpu;
        const double total = total_of(c_cpu, c_gpu);
        // <= keeps the later (larger c_gpu) candidate on exact ties.
        if (!have_best || total <= plan.predicted_total_us) {
            plan.partition = ChannelPartition{c_cpu, c_gpu};
            plan.predicted_total_us = total;
            have_best = true;
        }
    }
    plan.baseline_gpu_us = total_of(0, c_out);
    plan.baseline_cpu_us = total_of(c_out, 0);
    plan.speedup = plan.baseline_gpu_us / plan.predicted_total_us;
    return plan;
}

}  // namespace

PartitionPlan optimize(const OpDescriptor& op, const CostEstimate& costs, std::int64_t alignment) {
    if (alignment < 1) throw ContractViolation("optimize requires alignment >= 1");
    return argmin_over_grid(
        c_out_of(op), alignment,
        [&costs](std::int64_t c_cpu, std::int64_t c_gpu) { return objective(c_cpu, c_gpu, costs); },
        PartitionPlan::Source::predicted);
}

PartitionPlan grid_search_measured(const OpDescriptor& op, const MeasureFn& measure,
                                   std::int64_t step) {
    if (step < 1) throw ContractViolation("grid_search_measured requires step >= 1");
    return argmin_over_grid(
        c_out_of(op), step,
        [&measure](std::int64_t c_cpu, std::int64_t c_gpu) {
            return measure(ChannelPartition{c_cpu, c_gpu});
        },
        PartitionPlan::Source::measured);
}

std::vector<PartitionPlan> plan_model(const std::vector<LayerSpec>& layers,
                                      const LayerCostsProvider& provider, int threads,
                                      std::int64_t alignment) {
    std::vector<PartitionPlan> plans;
    plans.reserve(layers.size());
    for (const auto& layer : layers) {
        const CostEstimate costs = provider(layer, threads);
        if (std::holds_alternative<PoolLayer>(layer)) {
            PartitionPlan plan;
            plan.partition = ChannelPartition{0, 0};
            plan.predicted_total_us = costs.t_gpu_us(0);
            plan.baseline_gpu_us = plan.predicted_total_us;
            plan.baseline_cpu_us = plan.predicted_total_us;
            plan.speedup = 1.0;
            plans.push_back(std::move(plan));
            continue;
        }
        const OpDescriptor op = std::holds_alternative<LinearOp>(layer)
                                    ? OpDescriptor(std::get<LinearOp>(layer))
                                    : OpDescriptor(std::get<ConvOp>(layer));
        plans.push_back(optimize(op, costs, alignment));
    }
    return plans;
}

std::vector<LayerSpec> load_layer_specs(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open model description: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw IoError(path + ": " + e.what());
    }
    if (!j.is_array()) throw ValidationError(path + ": model description must be a JSON array");
    std::vector<LayerSpec> layers;
    for (std::size_t i = 0; i < j.size(); ++i) {
        const auto& record = j[i];
        const auto ctx = [&](const std::string& msg) {
            return path + ": layer " + std::to_string(i) + ": " + msg;
        };
        std::string type;
        try {
            type = record.at("type").get<std::string>();
        } catch (const nlohmann::json::exception&) {
            throw PlanningError(ctx("missing layer type"));
        }
        if (type == "pool") {
            layers.emplace_back(PoolLayer{});
            continue;
        }
        if (type != "linear" && type != "conv") {
            throw PlanningError(ctx("unknown layer type '" + type + "'"));
        }
        try {
            const OpDescriptor op = op_from_json(record.dump());
            if (const auto* lin = std::get_if<LinearOp>(&op)) {
                layers.emplace_back(*lin);
            } else {
                layers.emplace_back(std::get<ConvOp>(op));
            }
        } catch (const ValidationError& e) {
            throw PlanningError(ctx(e.what()));
        }
    }
    return layers;
}

void save_plans(const std::vector<PartitionPlan>& plans, const std::string& path) {
    nlohmann::ordered_json j = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < plans.size(); ++i) {
        const auto& plan = plans[i];
        j.push_back({
            {"layer", i},
            {"c_cpu", plan.partition.c_cpu},
            {"c_gpu", plan.partition.c_gpu},
            {"predicted_us", plan.predicted_total_us},
            {"speedup", plan.speedup},
        });
    }
    std::ofstream out(path);
    if (!out) throw IoError("cannot write plan file: " + path);
    out << j.dump(2) << "\n";
    if (!out) throw IoError("short write to plan file: " + path);
}

std::vector<PartitionPlan> load_plans(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open plan file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw IoError(path + ": " + e.what());
    }
    if (!j.is_array()) throw ValidationError(path + ": plan file must be a JSON array");
    std::vector<PartitionPlan> plans;
    for (std::size_t i = 0; i < j.size(); ++i) {
        try {
            const auto& record = j[i];
            if (record.at("layer").get<std::size_t>() != i) {
                throw ValidationError("layer indices must be dense and ordered");
            }
            PartitionPlan plan;
            plan.partition.c_cpu = record.at("c_cpu").get<std::int64_t>();
            plan.partition.c_gpu = record.at("c_gpu").get<std::int64_t>();
            plan.predicted_total_us = record.at("predicted_us").get<double>();
            plan.speedup = record.at("speedup").get<double>();
            plans.push_back(plan);
        } catch (const nlohmann::json::exception& e) {
            throw ValidationError(path + ": plan " + std::to_string(i) + ": " + e.what());
        }
    }
    return plans;
}

}  // namespace coex
