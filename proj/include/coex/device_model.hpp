#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "coex/gpu_dispatch.hpp"
#include "coex/op_model.hpp"

namespace coex {

enum class Executor { gpu, cpu };

std::string executor_name(Executor e);
Executor executor_from_name(const std::string& name);

// One measured or synthesized data point; kernel present iff executor is GPU,
// threads in {1,2,3} iff executor is CPU.
struct LatencySample {
    OpDescriptor op = LinearOp(1, 1, 1);
    Executor executor = Executor::gpu;
    int threads = 0;
    std::optional<KernelId> kernel;
    double latency_us = 0.0;
};

struct Dataset {
    std::vector<LatencySample> samples;
};

// Parametric stand-in for a physical device: staircase GPU latency plus
// smooth multi-thread CPU scaling.
struct SyntheticDeviceSpec {
    DeviceProfile profile;
    double gpu_dispatch_us = 751.0;
    std::map<KernelId, double> wave_us = {
        {KernelId::linear_generic, 15.0},
        {KernelId::conv_constant, 12.0},
        {KernelId::winograd, 7.0},
        {KernelId::conv_generic, 15.0},
    };
    double cpu_gflops_1t = 51.2;
    std::map<int, double> cpu_scaling = {{1, 1.0}, {2, 0.9}, {3, 0.8}};
    double cpu_overhead_us = 20.0;
    double noise_rel = 0.0;
    std::uint64_t seed = 42;

    void validate() const;
};

double synth_gpu_latency(const OpDescriptor& op, const SyntheticDeviceSpec& spec);
double synth_cpu_latency(const OpDescriptor& op, int threads, const SyntheticDeviceSpec& spec);

enum class OpType { linear, conv };

// Structured random training ops: every dimension drawn by picking an octave
// [2^k, 2^(k+1)] with k in [2,9], then an integer inside it. Conv tuples that
// would put the kernel outside the input are redrawn.
std::vector<OpDescriptor> sample_training_ops(std::int64_t count, OpType type, std::uint64_t seed);

// Deterministic evaluation grids: linear dims from {i*2^j | 4<=i<=6, 2<=j<=9}
// cross-product; conv from a 4-stage hierarchy (stage 1 resolutions
// {64,56,48,40}, K in {1,3,5,7}, S in {1,2}, channels {256..512}/i with
// i=1,1,4,8 per K; later stages halve resolution and double channels). Both
// filtered to FLOPs in [4e6, 1e9].
std::vector<OpDescriptor> sample_eval_ops(OpType type);

// RFC-4180 field quoting (commas, quotes, newlines).
std::string csv_quote(const std::string& field);

// Trace CSV bridge: header `op_json,executor,threads,kernel,latency_us`.
Dataset ingest_trace(const std::string& path);
void write_trace(const Dataset& dataset, const std::string& path);

// Featurized view: one CSV with the FeatureVector header plus latency_us.
// Requires homogeneous op type and executor; CPU rows append a threads column.
void write_features(const Dataset& dataset, const DeviceProfile& profile, FeatureMode mode,
                    const std::string& path);

SyntheticDeviceSpec spec_from_json(const std::string& text);
std::string spec_to_json(const SyntheticDeviceSpec& spec);

// Profiles file: top-level JSON object keyed by profile name.
std::map<std::string, SyntheticDeviceSpec> load_profiles(const std::string& path);

}  // namespace coex
