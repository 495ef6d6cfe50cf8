// Acceptance gate: runs every release criterion at its stated tolerance and
// prints one pass/fail line per criterion. Exits nonzero if any line fails.
//
// Usage: acceptance <coex-cli-binary> <data-dir>
//   argv[1] drives the end-to-end determinism criterion through the real CLI.
//   argv[2] must hold profiles.json (the checked-in data directory).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <unistd.h>

#include "coex/coexec_sim.hpp"
#include "coex/device_model.hpp"
#include "coex/error.hpp"
#include "coex/gbdt.hpp"
#include "coex/gpu_dispatch.hpp"
#include "coex/op_model.hpp"
#include "coex/partitioner.hpp"
#include "coex/predictor.hpp"
#include "coex/ref_kernels.hpp"
#include "coex/rendezvous.hpp"
#include "coex/rng.hpp"
#include "coex/tensor.hpp"

namespace {

using namespace coex;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

struct CriterionResult {
    bool pass = false;
    std::string detail;
};

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(double value, int digits = 3) {
    std::ostringstream out;
    out << std::fixed << std::setprecision(digits) << value;
    return out.str();
}

void fill_random(Tensor& t, std::mt19937_64& rng) {
    for (std::int64_t i = 0; i < t.numel(); ++i) {
        t.data()[i] = static_cast<float>(uniform_real(rng, -1.0, 1.0));
    }
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    if (a.dims() != b.dims()) return std::numeric_limits<double>::infinity();
    double worst = 0.0;
    for (std::int64_t i = 0; i < a.numel(); ++i) {
        worst = std::max(worst, std::abs(static_cast<double>(a.data()[i]) - b.data()[i]));
    }
    return worst;
}

OpDescriptor resize_c_out(const OpDescriptor& op, std::int64_t c_out) {
    if (const auto* linear = std::get_if<LinearOp>(&op)) {
        return LinearOp(linear->length, linear->c_in, c_out);
    }
    const auto& conv = std::get<ConvOp>(op);
    return ConvOp(conv.h_in, conv.w_in, conv.c_in, c_out, conv.k, conv.s);
}

CostEstimate synthetic_costs(const OpDescriptor& op, int threads, const SyntheticDeviceSpec& spec,
                             double overhead_us) {
    CostEstimate costs;
    costs.t_cpu_us = [op, threads, spec](std::int64_t c) {
        return c == 0 ? 0.0 : synth_cpu_latency(resize_c_out(op, c), threads, spec);
    };
    costs.t_gpu_us = [op, spec](std::int64_t c) {
        return c == 0 ? 0.0 : synth_gpu_latency(resize_c_out(op, c), spec);
    };
    costs.t_overhead_us = overhead_us;
    return costs;
}

// --- criterion 1: partition-merge correctness --------------------------------

CriterionResult check_partition_merge() {
    std::mt19937_64 rng(1001);
    double worst_linear = 0.0, worst_direct = 0.0, worst_winograd = 0.0;
    bool winograd_seen = false;

    for (int trial = 0; trial < 50; ++trial) {
        const LinearOp op(uniform_int(rng, 1, 64), uniform_int(rng, 1, 64), uniform_int(rng, 1, 64));
        Tensor x({op.length, op.c_in});
        Tensor w({op.c_in, op.c_out});
        fill_random(x, rng);
        fill_random(w, rng);
        const Tensor full = linear_forward(x, w);
        const std::int64_t c_cpu = uniform_int(rng, 0, op.c_out);
        const ChannelPartition split{c_cpu, op.c_out - c_cpu};
        const Tensor merged = coexec_forward(OpDescriptor(op), split, x, w);
        worst_linear = std::max(worst_linear, max_abs_diff(full, merged));
    }

    for (int trial = 0; trial < 50; ++trial) {
        // Every even trial pins (K=3, S=1) so the Winograd slice path is hit.
        const std::int64_t k = (trial % 2 == 0) ? 3 : (uniform_int(rng, 0, 1) == 0 ? 1 : 3);
        const std::int64_t s = (trial % 2 == 0) ? 1 : uniform_int(rng, 1, 2);
        const std::int64_t min_dim = std::max(k, s);  // keeps the strided output non-empty
        const ConvOp op(uniform_int(rng, min_dim, 16), uniform_int(rng, min_dim, 16),
                        uniform_int(rng, 1, 8), uniform_int(rng, 1, 16), k, s);
        Tensor x({op.h_in, op.w_in, op.c_in});
        Tensor w({op.k, op.k, op.c_in, op.c_out});
        fill_random(x, rng);
        fill_random(w, rng);
        const Tensor full = conv_forward_direct(x, w, op.s);
        const std::int64_t c_cpu = uniform_int(rng, 0, op.c_out);
        const ChannelPartition split{c_cpu, op.c_out - c_cpu};

        const Tensor merged = coexec_forward(OpDescriptor(op), split, x, w);
        worst_direct = std::max(worst_direct, max_abs_diff(full, merged));

        if (op.k == 3 && op.s == 1) {
            winograd_seen = true;
            CoexecImpls impls;
            impls.gpu = RefConvImpl::winograd;
            const Tensor wino = coexec_forward(OpDescriptor(op), split, x, w, impls);
            worst_winograd = std::max(worst_winograd, max_abs_diff(full, wino));
        }
    }

    CriterionResult result;
    result.pass = worst_linear == 0.0 && worst_direct == 0.0 && winograd_seen &&
                  worst_winograd <= 1e-4;
    result.detail = "linear max err " + fmt(worst_linear, 1) + ", direct conv max err " +
                    fmt(worst_direct, 1) + ", winograd-slice max err " + fmt(worst_winograd, 7);
    return result;
}

// --- criterion 2: Winograd equivalence ----------------------------------------

CriterionResult check_winograd() {
    std::mt19937_64 rng(1002);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::int64_t h = uniform_int(rng, 3, 24);
        const std::int64_t w_dim = uniform_int(rng, 3, 24);
        const std::int64_t c_in = uniform_int(rng, 1, 8);
        const std::int64_t c_out = uniform_int(rng, 1, 16);
        Tensor x({h, w_dim, c_in});
        Tensor w({3, 3, c_in, c_out});
        fill_random(x, rng);
        fill_random(w, rng);
        worst = std::max(worst,
                         max_abs_diff(conv_forward_direct(x, w, 1), conv_forward_winograd(x, w)));
    }
    CriterionResult result;
    result.pass = worst <= 1e-4;
    result.detail = "max abs error " + fmt(worst, 7) + " over 100 convs";
    return result;
}

// --- criterion 3: partitioner optimality --------------------------------------

CriterionResult check_partitioner_optimality() {
    std::mt19937_64 rng(1003);
    SyntheticDeviceSpec spec;
    spec.noise_rel = 0.02;

    int exact = 0;
    for (int trial = 0; trial < 100; ++trial) {
        spec.seed = 5000 + static_cast<std::uint64_t>(trial);
        OpDescriptor op = LinearOp(1, 1, 1);
        if (uniform_int(rng, 0, 1) == 0) {
            op = LinearOp(uniform_int(rng, 1, 64), uniform_int(rng, 1, 512),
                          uniform_int(rng, 1, 512));
        } else {
            const std::int64_t k = std::vector<std::int64_t>{1, 3, 5}[static_cast<std::size_t>(
                uniform_int(rng, 0, 2))];
            op = ConvOp(uniform_int(rng, std::max<std::int64_t>(k, 4), 32),
                        uniform_int(rng, std::max<std::int64_t>(k, 4), 32), uniform_int(rng, 1, 64),
                        uniform_int(rng, 1, 512), k, uniform_int(rng, 1, 2));
        }
        const int threads = static_cast<int>(uniform_int(rng, 1, 3));
        const CostEstimate costs = synthetic_costs(op, threads, spec, 7.0);
        const std::int64_t c_out = c_out_of(op);

        double best_total = 0.0;
        std::int64_t best_gpu = -1;
        for (std::int64_t c_gpu = 0; c_gpu <= c_out; ++c_gpu) {
            const double total = objective(c_out - c_gpu, c_gpu, costs);
            if (best_gpu < 0 || total <= best_total) {
                best_total = total;
                best_gpu = c_gpu;
            }
        }

        const PartitionPlan plan = optimize(op, costs, 1);
        if (plan.predicted_total_us == best_total && plan.partition.c_gpu == best_gpu &&
            plan.partition.c_cpu == c_out - best_gpu) {
            ++exact;
        }
    }
    CriterionResult result;
    result.pass = exact == 100;
    result.detail = std::to_string(exact) + "/100 plans bit-equal to exhaustive enumeration";
    return result;
}

// --- criterion 4: grid-step fidelity ------------------------------------------

CriterionResult check_grid_step() {
    bool all_ok = true;
    std::string failures;
    for (const std::int64_t c_out : {std::int64_t(1), std::int64_t(5), std::int64_t(8),
                                     std::int64_t(64), std::int64_t(100), std::int64_t(425),
                                     std::int64_t(1024), std::int64_t(3072)}) {
        const LinearOp op(4, 8, c_out);
        std::set<std::int64_t> seen;
        const auto measure = [&seen, c_out](const ChannelPartition& p) {
            seen.insert(p.c_gpu);
            return 1.0 + std::abs(static_cast<double>(p.c_gpu) - static_cast<double>(c_out) / 3.0);
        };
        grid_search_measured(OpDescriptor(op), measure, 8);
        const std::size_t expected = static_cast<std::size_t>((c_out + 7) / 8) + 1;
        const bool ok = seen.size() == expected && seen.count(0) == 1 &&
                        seen.count(c_out) == 1;
        if (!ok) {
            all_ok = false;
            failures += " C_out=" + std::to_string(c_out) + " saw " +
                        std::to_string(seen.size()) + " (want " + std::to_string(expected) + ")";
        }
    }
    CriterionResult result;
    result.pass = all_ok;
    result.detail = all_ok ? "candidate sets match ceil(C_out/8)+1 with both endpoints"
                           : "mismatch:" + failures;
    return result;
}

// --- criterion 5: feature-augmentation ablation --------------------------------

CriterionResult check_ablation() {
    // Noise floor: with multiplicative noise of relative width r, every
    // predictor bottoms out near mean|u| = r/2 MAPE. At 10,000 samples both
    // schemas learn the deterministic staircase to ~0.1%, so any noise level
    // past ~0.2% drowns the schema gap in that shared floor. The criterion
    // bounds noise at 2% from above; it is run noise-free so validation MAPE
    // measures approximation error, which is what the ablation is about.
    SyntheticDeviceSpec spec;
    spec.noise_rel = 0.0;
    spec.seed = 101;

    const auto ops = sample_training_ops(10000, OpType::linear, 101);
    Dataset dataset;
    dataset.samples.reserve(ops.size());
    for (const auto& op : ops) {
        LatencySample sample;
        sample.op = op;
        sample.executor = Executor::gpu;
        sample.kernel = select_kernel(op, spec.profile);
        sample.latency_us = synth_gpu_latency(op, spec);
        dataset.samples.push_back(std::move(sample));
    }

    const HyperparameterSpace space;  // full default search ranges
    const TrainMatrix augmented = featurize(dataset, spec.profile, FeatureMode::augmented);
    const TrainMatrix baseline = featurize(dataset, spec.profile, FeatureMode::baseline);
    const TuneResult tuned_aug = tune(augmented, space, 10, 202);
    const TuneResult tuned_base = tune(baseline, space, 10, 202);

    CriterionResult result;
    result.pass = tuned_aug.validation_mape <= 0.7 * tuned_base.validation_mape &&
                  tuned_aug.validation_mape <= 10.0;
    result.detail = "augmented MAPE " + fmt(tuned_aug.validation_mape, 2) + "% vs baseline " +
                    fmt(tuned_base.validation_mape, 2) + "% (need <= 0.7x and <= 10%)";
    return result;
}

// --- criterion 6: eval-grid counts ---------------------------------------------

CriterionResult check_eval_grid_counts() {
    const std::size_t linear = sample_eval_ops(OpType::linear).size();
    const std::size_t conv = sample_eval_ops(OpType::conv).size();
    CriterionResult result;
    result.pass = linear == 2039 && conv == 2051;
    result.detail = "linear " + std::to_string(linear) + " (want 2039), conv " +
                    std::to_string(conv) + " (want 2051)";
    return result;
}

// --- criterion 7: planner-vs-oracle speedup ------------------------------------

CriterionResult check_planner_speedup() {
    SyntheticDeviceSpec spec;  // frozen default calibration, zero noise

    const auto train_ops = sample_training_ops(1500, OpType::linear, 303);
    Dataset dataset;
    for (const auto& op : train_ops) {
        LatencySample gpu;
        gpu.op = op;
        gpu.executor = Executor::gpu;
        gpu.kernel = select_kernel(op, spec.profile);
        gpu.latency_us = synth_gpu_latency(op, spec);
        dataset.samples.push_back(std::move(gpu));
        for (int threads = 1; threads <= 3; ++threads) {
            LatencySample cpu;
            cpu.op = op;
            cpu.executor = Executor::cpu;
            cpu.threads = threads;
            cpu.latency_us = synth_cpu_latency(op, threads, spec);
            dataset.samples.push_back(std::move(cpu));
        }
    }
    EnsembleTrainOptions options;
    options.tune_trials = 0;  // library defaults are plenty on noise-free data
    options.seed = 303;
    const PredictorEnsemble ensemble = train_ensemble(dataset, spec.profile, options).ensemble;

    auto all_ops = sample_eval_ops(OpType::linear);
    std::mt19937_64 rng(404);
    const auto picked = sample_indices(rng, all_ops.size(), 200);

    const int threads = 2;
    const double overhead_us = 7.0;
    double gbdt_sum = 0.0, search_sum = 0.0;
    for (const auto index : picked) {
        const OpDescriptor& op = all_ops[index];
        const CostEstimate oracle = synthetic_costs(op, threads, spec, overhead_us);
        const double gpu_only = objective(0, c_out_of(op), oracle);

        CostEstimate predicted_costs;
        predicted_costs.t_cpu_us = [&, op](std::int64_t c) {
            return c == 0 ? 0.0
                          : predict_latency(ensemble, resize_c_out(op, c), Executor::cpu, threads,
                                            spec.profile);
        };
        predicted_costs.t_gpu_us = [&, op](std::int64_t c) {
            return c == 0 ? 0.0
                          : predict_latency(ensemble, resize_c_out(op, c), Executor::gpu, 0,
                                            spec.profile);
        };
        predicted_costs.t_overhead_us = overhead_us;

        const PartitionPlan plan = optimize(op, predicted_costs, 8);
        const double planned_on_oracle =
            objective(plan.partition.c_cpu, plan.partition.c_gpu, oracle);
        gbdt_sum += gpu_only / planned_on_oracle;

        const PartitionPlan searched = grid_search_measured(
            op, [&oracle](const ChannelPartition& p) { return objective(p.c_cpu, p.c_gpu, oracle); },
            8);
        search_sum += searched.speedup;
    }

    const double gbdt_mean = gbdt_sum / 200.0;
    const double search_mean = search_sum / 200.0;
    CriterionResult result;
    result.pass = gbdt_mean >= 0.9 * search_mean;
    result.detail = "predictor mean speedup " + fmt(gbdt_mean) + "x vs oracle search " +
                    fmt(search_mean) + "x (" + fmt(100.0 * gbdt_mean / search_mean, 1) + "%)";
    return result;
}

// --- criterion 8: objective/simulator identity ----------------------------------

CriterionResult check_simulator_identity() {
    std::mt19937_64 rng(1008);
    int exact = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const double t_cpu = uniform_real(rng, 0.001, 5000.0);
        const double t_gpu = uniform_real(rng, 0.001, 5000.0);
        const double epsilon = uniform_real(rng, 0.0, 200.0);

        SyncConfig sync;
        sync.epsilon_poll_us = epsilon;

        CostEstimate costs;
        costs.t_cpu_us = [t_cpu](std::int64_t c) { return c == 0 ? 0.0 : t_cpu; };
        costs.t_gpu_us = [t_gpu](std::int64_t c) { return c == 0 ? 0.0 : t_gpu; };
        costs.t_overhead_us = epsilon;

        if (simulate_layer(t_cpu, t_gpu, sync, true) == objective(16, 16, costs)) ++exact;
    }
    CriterionResult result;
    result.pass = exact == 1000;
    result.detail = std::to_string(exact) + "/1000 triples bit-identical";
    return result;
}

// --- criterion 9: sync protocol safety and liveness ------------------------------

double median_of(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    if (n == 0) return 0.0;
    return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

CriterionResult check_rendezvous() {
    std::mt19937_64 rng(1009);
    constexpr int kBatches = 20;
    constexpr int kRoundsPerBatch = 50;

    int completed_polling = 0, completed_passive = 0, timeouts = 0;
    bool safety_ok = true;
    std::vector<double> polling_overheads, passive_overheads;
    for (int batch = 0; batch < kBatches; ++batch) {
        const double t_cpu = uniform_real(rng, 20.0, 120.0);
        const double t_gpu = uniform_real(rng, 20.0, 120.0);

        const RendezvousReport active = rendezvous_run(t_cpu, t_gpu, kRoundsPerBatch, 10.0);
        completed_polling += active.rounds_completed;
        timeouts += active.timeouts;
        safety_ok = safety_ok && active.safety_ok;
        for (const auto& round : active.rounds) polling_overheads.push_back(round.overhead_us);

        const RendezvousReport passive =
            passive_baseline_run(t_cpu, t_gpu, kRoundsPerBatch, 162.0, 10.0);
        completed_passive += passive.rounds_completed;
        timeouts += passive.timeouts;
        safety_ok = safety_ok && passive.safety_ok;
        for (const auto& round : passive.rounds) passive_overheads.push_back(round.overhead_us);
    }

    const double polling_median = median_of(polling_overheads);
    const double passive_median = median_of(passive_overheads);
    const int total = kBatches * kRoundsPerBatch;

    CriterionResult result;
    result.pass = completed_polling == total && completed_passive == total && timeouts == 0 &&
                  safety_ok && polling_median < passive_median && polling_median < 100.0;
    result.detail = "rounds " + std::to_string(completed_polling) + "+" +
                    std::to_string(completed_passive) + "/" + std::to_string(total) + "+" +
                    std::to_string(total) + ", timeouts " + std::to_string(timeouts) + ", safety " +
                    (safety_ok ? "ok" : "VIOLATED") + ", median polling " + fmt(polling_median, 2) +
                    " us vs passive " + fmt(passive_median, 2) + " us";
    return result;
}

// --- criterion 10: end-to-end determinism ----------------------------------------

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return "<unreadable:" + path.string() + ">";
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

CriterionResult check_cli_determinism(const std::string& binary, const std::string& data_dir) {
    CriterionResult result;
    if (binary.empty() || data_dir.empty()) {
        result.detail = "needs <coex-cli-binary> and <data-dir> arguments";
        return result;
    }
    const std::string profiles = (fs::path(data_dir) / "profiles.json").string();
    if (!fs::exists(profiles)) {
        result.detail = "profiles not found: " + profiles;
        return result;
    }

    const fs::path root =
        fs::temp_directory_path() / ("coex_acceptance_" + std::to_string(::getpid()));
    std::error_code ec;
    fs::remove_all(root, ec);

    const std::vector<std::string> outputs = {"trace.csv",       "gen_report.json",
                                              "models.json",     "metrics.json",
                                              "plans.json",      "plan_report.json",
                                              "plan_detail.csv"};
    for (const char* run : {"a", "b"}) {
        const fs::path dir = root / run;
        fs::create_directories(dir);
        const std::string script =
            "cd '" + dir.string() + "' && '" + binary + "' gen-dataset --profiles '" + profiles +
            "' --profile default --type linear --executors all --count 80 --seed 7"
            " --out trace.csv --report-out gen_report.json > gen.log 2>&1"
            " && '" + binary + "' train --profiles '" + profiles +
            "' --profile default --data trace.csv --out models.json --metrics-out metrics.json"
            " --trials 2 --seed 9 > train.log 2>&1"
            " && '" + binary + "' plan --profiles '" + profiles +
            "' --profile default --models models.json --type linear --threads 2 --sample 6"
            " --seed 5 --out plans.json --report-out plan_report.json"
            " --detail-out plan_detail.csv > plan.log 2>&1";
        if (std::system(script.c_str()) != 0) {
            result.detail = std::string("pipeline run '") + run + "' exited nonzero";
            fs::remove_all(root, ec);
            return result;
        }
    }

    std::string mismatches;
    for (const auto& name : outputs) {
        if (read_file(root / "a" / name) != read_file(root / "b" / name)) {
            mismatches += " " + name;
        }
    }
    fs::remove_all(root, ec);

    result.pass = mismatches.empty();
    result.detail = mismatches.empty()
                        ? "gen-dataset/train/plan outputs byte-identical across two runs"
                        : "differing outputs:" + mismatches;
    return result;
}

struct Criterion {
    int number;
    std::string label;
    double budget_s;
    std::function<CriterionResult()> run;
};

}  // namespace

int main(int argc, char** argv) {
    // The determinism pipeline cd's into scratch directories, so both paths
    // must survive a working-directory change.
    const std::string binary = argc > 1 ? fs::absolute(argv[1]).string() : "";
    const std::string data_dir = argc > 2 ? fs::absolute(argv[2]).string() : "";

    const std::vector<Criterion> criteria = {
        {1, "partition-merge correctness", 10.0, check_partition_merge},
        {2, "Winograd equivalence", 10.0, check_winograd},
        {3, "partitioner optimality", 30.0, check_partitioner_optimality},
        {4, "grid-step fidelity", 30.0, check_grid_step},
        {5, "feature-augmentation ablation", 600.0, check_ablation},
        {6, "eval-grid counts", 60.0, check_eval_grid_counts},
        {7, "planner-vs-oracle speedup", 300.0, check_planner_speedup},
        {8, "objective/simulator identity", 30.0, check_simulator_identity},
        {9, "sync protocol safety and liveness", 120.0, check_rendezvous},
        {10, "end-to-end determinism", 600.0,
         [&] { return check_cli_determinism(binary, data_dir); }},
    };

    int failures = 0;
    for (const auto& criterion : criteria) {
        const auto start = Clock::now();
        CriterionResult result;
        try {
            result = criterion.run();
        } catch (const std::exception& e) {
            result.pass = false;
            result.detail = std::string("exception: ") + e.what();
        }
        const double elapsed = seconds_since(start);
        const bool in_budget = elapsed < criterion.budget_s;
        const bool pass = result.pass && in_budget;
        if (!pass) ++failures;
        std::cout << (pass ? "PASS" : "FAIL") << "  " << std::setw(2) << criterion.number << "  "
                  << std::left << std::setw(36) << criterion.label << std::right << "  ["
                  << fmt(elapsed, 1) << "s/" << fmt(criterion.budget_s, 0) << "s]  "
                  << result.detail;
        if (result.pass && !in_budget) std::cout << "  (over time budget)";
        std::cout << std::endl;
    }

    std::cout << (10 - failures) << "/10 criteria passed" << std::endl;
    return failures == 0 ? 0 : 1;
}
