#include <fstream>
#include <iostream>
#include <set>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "coex/error.hpp"
#include "commands.hpp"

namespace {

nlohmann::json load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw coex::IoError("cannot open config file: " + path);
    try {
        nlohmann::json j;
        in >> j;
        if (!j.is_object()) throw coex::ConfigError(path + ": config must be a JSON object");
        return j;
    } catch (const nlohmann::json::parse_error& e) {
        throw coex::ConfigError(path + ": " + e.what());
    }
}

// Fills in config-file values for options the command line left untouched;
// explicit flags always win. Unknown keys are rejected.
class ConfigMerger {
public:
    ConfigMerger(const CLI::App& cmd, const std::string& path) : cmd_(cmd) {
        if (!path.empty()) json_ = load_config_file(path);
    }

    template <typename T>
    ConfigMerger& apply(const std::string& key, T& target) {
        known_.insert(key);
        if (json_.is_object() && json_.contains(key) && cmd_.count("--" + key) == 0) {
            try {
                target = json_.at(key).get<T>();
            } catch (const nlohmann::json::exception&) {
                throw coex::ConfigError("config key '" + key + "' has the wrong type");
            }
        }
        return *this;
    }

    void finish() const {
        if (!json_.is_object()) return;
        for (const auto& [key, value] : json_.items()) {
            if (known_.find(key) == known_.end()) {
                throw coex::ConfigError("unknown config key '" + key + "'");
            }
        }
    }

private:
    const CLI::App& cmd_;
    nlohmann::json json_;
    std::set<std::string> known_;
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"CPU-GPU co-execution planning toolkit"};
    app.require_subcommand(1);

    coex::cli::GenDatasetConfig gen;
    std::string gen_config_path;
    auto* gen_cmd = app.add_subcommand("gen-dataset", "Synthesize or re-validate a latency trace");
    gen_cmd->add_option("--config", gen_config_path, "JSON config file (flags override)");
    gen_cmd->add_option("--profiles", gen.profiles_path, "device profiles JSON");
    gen_cmd->add_option("--profile", gen.profile, "profile name");
    gen_cmd->add_option("--type", gen.op_type, "op type: linear|conv");
    gen_cmd->add_option("--executors", gen.executors, "rows per op: gpu|cpu|all");
    gen_cmd->add_option("--count", gen.count, "ops to sample");
    gen_cmd->add_option("--seed", gen.seed, "sampling and noise seed");
    gen_cmd->add_option("--from-trace", gen.from_trace, "ingest this trace instead of sampling");
    gen_cmd->add_option("--out", gen.out, "trace CSV output");
    gen_cmd->add_option("--features-out", gen.features_out, "featurized CSV output");
    gen_cmd->add_option("--feature-mode", gen.feature_mode, "augmented|baseline");
    gen_cmd->add_option("--report-out", gen.report_out, "JSON summary output");
    gen_cmd->callback([&] {
        ConfigMerger merge(*gen_cmd, gen_config_path);
        merge.apply("profiles", gen.profiles_path)
            .apply("profile", gen.profile)
            .apply("type", gen.op_type)
            .apply("executors", gen.executors)
            .apply("count", gen.count)
            .apply("seed", gen.seed)
            .apply("from-trace", gen.from_trace)
            .apply("out", gen.out)
            .apply("features-out", gen.features_out)
            .apply("feature-mode", gen.feature_mode)
            .apply("report-out", gen.report_out);
        merge.finish();
        coex::cli::cmd_gen_dataset(gen);
    });

    coex::cli::TrainConfig train;
    std::string train_config_path;
    auto* train_cmd = app.add_subcommand("train", "Train per-route latency models from a trace");
    train_cmd->add_option("--config", train_config_path, "JSON config file (flags override)");
    train_cmd->add_option("--profiles", train.profiles_path, "device profiles JSON");
    train_cmd->add_option("--profile", train.profile, "profile name");
    train_cmd->add_option("--data", train.data, "trace CSV input");
    train_cmd->add_option("--out", train.out, "ensemble JSON output");
    train_cmd->add_option("--metrics-out", train.metrics_out, "metrics JSON output");
    train_cmd->add_option("--mode", train.mode, "feature mode: augmented|baseline");
    train_cmd->add_flag("--ablation", train.ablation, "train both feature modes");
    train_cmd->add_option("--trials", train.trials, "random-search trials per model (0 = defaults)");
    train_cmd->add_option("--seed", train.seed, "tuning seed");
    train_cmd->callback([&] {
        ConfigMerger merge(*train_cmd, train_config_path);
        merge.apply("profiles", train.profiles_path)
            .apply("profile", train.profile)
            .apply("data", train.data)
            .apply("out", train.out)
            .apply("metrics-out", train.metrics_out)
            .apply("mode", train.mode)
            .apply("ablation", train.ablation)
            .apply("trials", train.trials)
            .apply("seed", train.seed);
        merge.finish();
        coex::cli::cmd_train(train);
    });

    coex::cli::PlanConfig plan;
    std::string plan_config_path;
    auto* plan_cmd = app.add_subcommand("plan", "Partition ops or a model's layers across CPU and GPU");
    plan_cmd->add_option("--config", plan_config_path, "JSON config file (flags override)");
    plan_cmd->add_option("--profiles", plan.profiles_path, "device profiles JSON");
    plan_cmd->add_option("--profile", plan.profile, "profile name");
    plan_cmd->add_option("--models", plan.models_path, "trained ensemble JSON");
    plan_cmd->add_option("--type", plan.op_type, "eval grid op type: linear|conv");
    plan_cmd->add_option("--model", plan.model_desc, "model description JSON (switches to model mode)");
    plan_cmd->add_option("--costs", plan.costs, "model-mode cost source: predictor|oracle");
    plan_cmd->add_option("--threads", plan.threads, "CPU threads (grid mode: 0 = all of 1,2,3)");
    plan_cmd->add_option("--alignment", plan.alignment, "partition channel alignment");
    plan_cmd->add_option("--step", plan.step, "oracle grid-search step");
    plan_cmd->add_option("--sample", plan.sample, "seeded eval-grid subset size (0 = full)");
    plan_cmd->add_option("--seed", plan.seed, "subset and noise seed");
    plan_cmd->add_option("--sync-overhead-us", plan.sync_overhead_us, "co-execution overhead charge");
    plan_cmd->add_option("--out", plan.out, "plan JSON output");
    plan_cmd->add_option("--report-out", plan.report_out, "aggregate JSON output");
    plan_cmd->add_option("--detail-out", plan.detail_out, "per-op CSV output (grid mode)");
    plan_cmd->callback([&] {
        ConfigMerger merge(*plan_cmd, plan_config_path);
        merge.apply("profiles", plan.profiles_path)
            .apply("profile", plan.profile)
            .apply("models", plan.models_path)
            .apply("type", plan.op_type)
            .apply("model", plan.model_desc)
            .apply("costs", plan.costs)
            .apply("threads", plan.threads)
            .apply("alignment", plan.alignment)
            .apply("step", plan.step)
            .apply("sample", plan.sample)
            .apply("seed", plan.seed)
            .apply("sync-overhead-us", plan.sync_overhead_us)
            .apply("out", plan.out)
            .apply("report-out", plan.report_out)
            .apply("detail-out", plan.detail_out);
        merge.finish();
        coex::cli::cmd_plan(plan);
    });

    coex::cli::SimulateConfig sim;
    std::string sim_config_path;
    auto* sim_cmd = app.add_subcommand("simulate", "Replay a plan under a synchronization cost model");
    sim_cmd->add_option("--config", sim_config_path, "JSON config file (flags override)");
    sim_cmd->add_option("--profiles", sim.profiles_path, "device profiles JSON");
    sim_cmd->add_option("--profile", sim.profile, "profile name");
    sim_cmd->add_option("--model", sim.model_desc, "model description JSON");
    sim_cmd->add_option("--plans", sim.plans_path, "plan JSON input");
    sim_cmd->add_option("--sync", sim.sync, "sync mode: polling|passive");
    sim_cmd->add_option("--epsilon-poll-us", sim.epsilon_poll_us, "polling overhead");
    sim_cmd->add_option("--notify-delay-us", sim.notify_delay_us, "passive notification delay");
    sim_cmd->add_option("--threads", sim.threads, "CPU threads the plan assumed");
    sim_cmd->add_option("--report-out", sim.report_out, "JSON report output");
    sim_cmd->add_option("--bench-rounds", sim.bench_rounds, "rendezvous benchmark rounds (0 = skip)");
    sim_cmd->add_option("--bench-cpu-us", sim.bench_cpu_us, "benchmark CPU work duration");
    sim_cmd->add_option("--bench-gpu-us", sim.bench_gpu_us, "benchmark GPU work duration");
    sim_cmd->callback([&] {
        ConfigMerger merge(*sim_cmd, sim_config_path);
        merge.apply("profiles", sim.profiles_path)
            .apply("profile", sim.profile)
            .apply("model", sim.model_desc)
            .apply("plans", sim.plans_path)
            .apply("sync", sim.sync)
            .apply("epsilon-poll-us", sim.epsilon_poll_us)
            .apply("notify-delay-us", sim.notify_delay_us)
            .apply("threads", sim.threads)
            .apply("report-out", sim.report_out)
            .apply("bench-rounds", sim.bench_rounds)
            .apply("bench-cpu-us", sim.bench_cpu_us)
            .apply("bench-gpu-us", sim.bench_gpu_us);
        merge.finish();
        coex::cli::cmd_simulate(sim);
    });

    coex::cli::SyncBenchConfig bench;
    std::string bench_config_path;
    auto* bench_cmd = app.add_subcommand("sync-bench", "Two-thread rendezvous overhead benchmark");
    bench_cmd->add_option("--config", bench_config_path, "JSON config file (flags override)");
    bench_cmd->add_option("--mode", bench.mode, "polling|passive|both");
    bench_cmd->add_option("--rounds", bench.rounds, "rounds to complete");
    bench_cmd->add_option("--cpu-us", bench.cpu_us, "CPU work duration");
    bench_cmd->add_option("--gpu-us", bench.gpu_us, "GPU work duration");
    bench_cmd->add_option("--delay-us", bench.delay_us, "passive injected delay");
    bench_cmd->add_option("--timeout-s", bench.timeout_s, "per-round liveness timeout");
    bench_cmd->add_flag("--include-rounds", bench.include_rounds, "embed per-round records in JSON");
    bench_cmd->add_option("--out", bench.out, "JSON report output");
    bench_cmd->callback([&] {
        ConfigMerger merge(*bench_cmd, bench_config_path);
        merge.apply("mode", bench.mode)
            .apply("rounds", bench.rounds)
            .apply("cpu-us", bench.cpu_us)
            .apply("gpu-us", bench.gpu_us)
            .apply("delay-us", bench.delay_us)
            .apply("timeout-s", bench.timeout_s)
            .apply("include-rounds", bench.include_rounds)
            .apply("out", bench.out);
        merge.finish();
        coex::cli::cmd_sync_bench(bench);
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const coex::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const coex::IoError& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return 3;
    } catch (const coex::ValidationError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return 4;
    } catch (const coex::TrainingError& e) {
        std::cerr << "training error: " << e.what() << "\n";
        return 4;
    } catch (const coex::RoutingError& e) {
        std::cerr << "routing error: " << e.what() << "\n";
        return 4;
    } catch (const coex::PlanningError& e) {
        std::cerr << "planning error: " << e.what() << "\n";
        return 4;
    } catch (const coex::UnsupportedKernelError& e) {
        std::cerr << "kernel error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
