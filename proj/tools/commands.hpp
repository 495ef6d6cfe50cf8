#pragma once

#include <cstdint>
#include <string>

namespace coex::cli {

// Synthesize (or re-validate) a latency trace. `executors` picks the rows per
// sampled op: "gpu" (one row), "cpu" (threads 1..3), or "all" (both).
struct GenDatasetConfig {
    std::string profiles_path = "data/profiles.json";
    std::string profile = "default";
    std::string op_type = "linear";
    std::string executors = "gpu";
    std::int64_t count = 12500;
    std::uint64_t seed = 42;
    std::string from_trace;  // ingest + re-emit instead of sampling
    std::string out;
    std::string features_out;  // optional featurized CSV (single-executor runs)
    std::string feature_mode = "augmented";
    std::string report_out;
};

// Train per-route GBDT models from a trace. With `ablation` both feature
// modes are trained; the baseline ensemble lands next to `out` with a
// ".baseline" suffix before the extension.
struct TrainConfig {
    std::string profiles_path = "data/profiles.json";
    std::string profile = "default";
    std::string data;
    std::string out;
    std::string metrics_out;
    std::string mode = "augmented";
    bool ablation = false;
    int trials = 50;
    std::uint64_t seed = 42;
};

// Two planning flows share one command. Grid mode (no `model_desc`) sweeps the
// evaluation grid and reports predictor-driven ("GBDT") against oracle grid
// search ("Search") speedups per thread count. Model mode plans a bundled
// layer list and writes the plan file `simulate` consumes.
struct PlanConfig {
    std::string profiles_path = "data/profiles.json";
    std::string profile = "default";
    std::string models_path;  // trained ensemble; required for predictor costs
    std::string op_type = "linear";
    std::string model_desc;
    std::string costs = "predictor";  // model mode: "predictor" or "oracle"
    int threads = 0;                  // 0 = all of {1,2,3} (grid mode only)
    std::int64_t alignment = 8;
    std::int64_t step = 8;
    std::int64_t sample = 0;  // 0 = full grid, else seeded subset of this size
    std::uint64_t seed = 42;
    double sync_overhead_us = 7.0;
    std::string out;         // plan JSON
    std::string report_out;  // aggregate JSON
    std::string detail_out;  // per-op CSV (grid mode)
};

// Replay a plan against the synthetic device under a sync-cost model; totals
// for both sync modes are always reported. Optionally runs the real-thread
// rendezvous benchmark alongside.
struct SimulateConfig {
    std::string profiles_path = "data/profiles.json";
    std::string profile = "default";
    std::string model_desc;
    std::string plans_path;
    std::string sync = "polling";
    double epsilon_poll_us = 7.0;
    double notify_delay_us = 162.0;
    int threads = 2;
    std::string report_out;
    int bench_rounds = 0;  // 0 skips the thread benchmark
    double bench_cpu_us = 200.0;
    double bench_gpu_us = 200.0;
};

// Standalone two-thread rendezvous benchmark.
struct SyncBenchConfig {
    std::string mode = "both";  // polling | passive | both
    int rounds = 1000;
    double cpu_us = 200.0;
    double gpu_us = 200.0;
    double delay_us = 162.0;
    double timeout_s = 1.0;
    bool include_rounds = false;
    std::string out;
};

// Each command throws coex error types on failure; the CLI maps them to exit
// codes (config 2, I/O 3, validation 4).
void cmd_gen_dataset(const GenDatasetConfig& config);
void cmd_train(const TrainConfig& config);
void cmd_plan(const PlanConfig& config);
void cmd_simulate(const SimulateConfig& config);
void cmd_sync_bench(const SyncBenchConfig& config);

}  // namespace coex::cli
