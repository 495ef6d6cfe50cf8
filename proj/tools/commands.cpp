#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "coex/coexec_sim.hpp"
#include "coex/device_model.hpp"
#include "coex/error.hpp"
#include "coex/op_model.hpp"
#include "coex/partitioner.hpp"
#include "coex/predictor.hpp"
#include "coex/rendezvous.hpp"
#include "coex/rng.hpp"

namespace coex::cli {

namespace {

std::string hex64(std::uint64_t value) {
    std::ostringstream out;
    out << std::hex << std::setw(16) << std::setfill('0') << value;
    return out.str();
}

// Canonical hash of the effective run configuration: plain (key-sorted) JSON
// dump fed through FNV-1a.
std::string config_hash(const nlohmann::json& effective) {
    return hex64(fnv1a64(effective.dump()));
}

SyntheticDeviceSpec load_spec(const std::string& profiles_path, const std::string& profile) {
    const auto profiles = load_profiles(profiles_path);
    const auto it = profiles.find(profile);
    if (it == profiles.end()) {
        throw ConfigError("profile '" + profile + "' not found in " + profiles_path);
    }
    SyntheticDeviceSpec spec = it->second;
    spec.validate();
    return spec;
}

OpType op_type_from_string(const std::string& name) {
    if (name == "linear") return OpType::linear;
    if (name == "conv") return OpType::conv;
    throw ConfigError("op type must be 'linear' or 'conv', got '" + name + "'");
}

FeatureMode feature_mode_from_string(const std::string& name) {
    if (name == "augmented") return FeatureMode::augmented;
    if (name == "baseline") return FeatureMode::baseline;
    throw ConfigError("feature mode must be 'augmented' or 'baseline', got '" + name + "'");
}

OpDescriptor with_c_out(const OpDescriptor& op, std::int64_t c_out) {
    if (const auto* linear = std::get_if<LinearOp>(&op)) {
        return LinearOp(linear->length, linear->c_in, c_out);
    }
    const auto& conv = std::get<ConvOp>(op);
    return ConvOp(conv.h_in, conv.w_in, conv.c_in, c_out, conv.k, conv.s);
}

CostEstimate oracle_costs(const OpDescriptor& op, int threads, const SyntheticDeviceSpec& spec,
                          double overhead_us) {
    CostEstimate costs;
    costs.t_cpu_us = [op, threads, spec](std::int64_t c) {
        return c == 0 ? 0.0 : synth_cpu_latency(with_c_out(op, c), threads, spec);
    };
    costs.t_gpu_us = [op, spec](std::int64_t c) {
        return c == 0 ? 0.0 : synth_gpu_latency(with_c_out(op, c), spec);
    };
    costs.t_overhead_us = overhead_us;
    return costs;
}

CostEstimate predictor_costs(const OpDescriptor& op, const PredictorEnsemble& ensemble, int threads,
                             const DeviceProfile& profile, double overhead_us) {
    CostEstimate costs;
    costs.t_cpu_us = [op, &ensemble, threads, &profile](std::int64_t c) {
        return c == 0 ? 0.0
                      : predict_latency(ensemble, with_c_out(op, c), Executor::cpu, threads, profile);
    };
    costs.t_gpu_us = [op, &ensemble, &profile](std::int64_t c) {
        return c == 0 ? 0.0
                      : predict_latency(ensemble, with_c_out(op, c), Executor::gpu, 0, profile);
    };
    costs.t_overhead_us = overhead_us;
    return costs;
}

// Pool stages run whole on the GPU and are billed one dispatch constant.
CostEstimate pool_costs(const SyntheticDeviceSpec& spec) {
    CostEstimate costs;
    costs.t_cpu_us = [](std::int64_t) { return 0.0; };
    costs.t_gpu_us = [dispatch_us = spec.gpu_dispatch_us](std::int64_t) { return dispatch_us; };
    costs.t_overhead_us = 0.0;
    return costs;
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write file: " + path);
    out << text;
    if (!out) throw IoError("short write to file: " + path);
}

void write_json_report(const std::string& path, const nlohmann::ordered_json& report) {
    write_text_file(path, report.dump(2) + "\n");
}

std::string with_suffix(const std::string& path, const std::string& suffix) {
    const auto dot = path.rfind('.');
    const auto slash = path.find_last_of("/\\");
    if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) {
        return path + suffix;
    }
    return path.substr(0, dot) + suffix + path.substr(dot);
}

std::string fmt_fixed(double value, int digits) {
    std::ostringstream out;
    out << std::fixed << std::setprecision(digits) << value;
    return out.str();
}

std::string fmt_pct(double value) { return fmt_fixed(value, 2) + "%"; }
std::string fmt_x(double value) { return fmt_fixed(value, 3) + "x"; }
std::string fmt_us(double value) { return fmt_fixed(value, 2) + " us"; }

std::string sample_group_name(const LatencySample& sample) {
    if (sample.executor == Executor::gpu) {
        return "gpu:" + (sample.kernel ? kernel_name(*sample.kernel) : std::string("?"));
    }
    const bool linear = std::holds_alternative<LinearOp>(sample.op);
    return std::string("cpu:") + (linear ? "linear" : "conv") + ":" + std::to_string(sample.threads);
}

std::string layer_kind(const LayerSpec& layer) {
    if (std::holds_alternative<PoolLayer>(layer)) return "pool";
    return std::holds_alternative<LinearOp>(layer) ? "linear" : "conv";
}

std::optional<OpDescriptor> layer_op(const LayerSpec& layer) {
    if (const auto* linear = std::get_if<LinearOp>(&layer)) return OpDescriptor(*linear);
    if (const auto* conv = std::get_if<ConvOp>(&layer)) return OpDescriptor(*conv);
    return std::nullopt;
}

}  // namespace

void cmd_gen_dataset(const GenDatasetConfig& config) {
    if (config.out.empty()) throw ConfigError("gen-dataset requires --out");
    if (config.executors != "gpu" && config.executors != "cpu" && config.executors != "all") {
        throw ConfigError("executors must be 'gpu', 'cpu', or 'all', got '" + config.executors + "'");
    }
    const FeatureMode feature_mode = feature_mode_from_string(config.feature_mode);
    SyntheticDeviceSpec spec = load_spec(config.profiles_path, config.profile);
    spec.seed = config.seed;

    Dataset dataset;
    if (!config.from_trace.empty()) {
        dataset = ingest_trace(config.from_trace);
    } else {
        if (config.count < 1) throw ConfigError("count must be positive");
        const OpType type = op_type_from_string(config.op_type);
        const auto ops = sample_training_ops(config.count, type, config.seed);
        for (const auto& op : ops) {
            if (config.executors == "gpu" || config.executors == "all") {
                LatencySample sample;
                sample.op = op;
                sample.executor = Executor::gpu;
                sample.kernel = select_kernel(op, spec.profile);
                sample.latency_us = synth_gpu_latency(op, spec);
                dataset.samples.push_back(std::move(sample));
            }
            if (config.executors == "cpu" || config.executors == "all") {
                for (int threads = 1; threads <= 3; ++threads) {
                    LatencySample sample;
                    sample.op = op;
                    sample.executor = Executor::cpu;
                    sample.threads = threads;
                    sample.latency_us = synth_cpu_latency(op, threads, spec);
                    dataset.samples.push_back(std::move(sample));
                }
            }
        }
    }

    write_trace(dataset, config.out);
    if (!config.features_out.empty()) {
        write_features(dataset, spec.profile, feature_mode, config.features_out);
    }

    std::map<std::string, std::size_t> groups;
    for (const auto& sample : dataset.samples) ++groups[sample_group_name(sample)];

    const nlohmann::json effective = {
        {"command", "gen-dataset"},     {"profiles", config.profiles_path},
        {"profile", config.profile},    {"op_type", config.op_type},
        {"executors", config.executors}, {"count", config.count},
        {"seed", config.seed},          {"from_trace", config.from_trace},
        {"out", config.out},            {"features_out", config.features_out},
        {"feature_mode", config.feature_mode},
    };
    const std::string hash = config_hash(effective);

    std::cout << "gen-dataset: wrote " << dataset.samples.size() << " rows to " << config.out << "\n";
    nlohmann::ordered_json group_report = nlohmann::ordered_json::array();
    for (const auto& [name, rows] : groups) {
        const std::size_t test = std::max<std::size_t>(1, rows / 5);
        const std::size_t train = rows - test;
        std::cout << "  " << std::left << std::setw(24) << name << " rows=" << rows
                  << "  holdout train/test=" << train << "/" << test << "\n";
        group_report.push_back({{"group", name}, {"rows", rows}, {"train", train}, {"test", test}});
    }
    if (!config.features_out.empty()) {
        std::cout << "  features (" << config.feature_mode << ") -> " << config.features_out << "\n";
    }
    std::cout << "  config " << hash << " seed " << config.seed << "\n";

    if (!config.report_out.empty()) {
        nlohmann::ordered_json report;
        report["command"] = "gen-dataset";
        report["config_hash"] = hash;
        report["seed"] = config.seed;
        report["profile"] = config.profile;
        report["rows"] = dataset.samples.size();
        report["groups"] = group_report;
        write_json_report(config.report_out, report);
    }
}

namespace {

struct MapeCells {
    std::optional<double> gpu;
    std::optional<double> cpu[4];  // indexed by threads 1..3
};

// Row-weighted mean validation MAPE per report column.
MapeCells mape_cells(const std::vector<ModelMetrics>& metrics) {
    double gpu_weighted = 0.0, cpu_weighted[4] = {0, 0, 0, 0};
    double gpu_rows = 0.0, cpu_rows[4] = {0, 0, 0, 0};
    for (const auto& m : metrics) {
        const double rows = static_cast<double>(m.rows);
        if (m.key.executor == Executor::gpu) {
            gpu_weighted += m.validation_mape * rows;
            gpu_rows += rows;
        } else {
            cpu_weighted[m.key.threads] += m.validation_mape * rows;
            cpu_rows[m.key.threads] += rows;
        }
    }
    MapeCells cells;
    if (gpu_rows > 0) cells.gpu = gpu_weighted / gpu_rows;
    for (int t = 1; t <= 3; ++t) {
        if (cpu_rows[t] > 0) cells.cpu[t] = cpu_weighted[t] / cpu_rows[t];
    }
    return cells;
}

std::string cell_text(const std::optional<double>& cell) {
    return cell ? fmt_pct(*cell) : std::string("-");
}

nlohmann::ordered_json cell_json(const std::optional<double>& cell) {
    if (cell) return *cell;
    return nullptr;
}

nlohmann::ordered_json params_report(const GBDTParams& p) {
    return {
        {"learning_rate", p.learning_rate}, {"n_estimators", p.n_estimators},
        {"max_depth", p.max_depth},         {"num_leaves", p.num_leaves},
        {"l1", p.l1},                       {"l2", p.l2},
        {"subsample", p.subsample},
    };
}

}  // namespace

void cmd_train(const TrainConfig& config) {
    if (config.data.empty()) throw ConfigError("train requires --data");
    if (config.out.empty()) throw ConfigError("train requires --out");
    if (config.trials < 0) throw ConfigError("trials must be non-negative");
    const FeatureMode primary_mode =
        config.ablation ? FeatureMode::augmented : feature_mode_from_string(config.mode);

    const SyntheticDeviceSpec spec = load_spec(config.profiles_path, config.profile);
    const Dataset dataset = ingest_trace(config.data);

    std::vector<FeatureMode> modes{primary_mode};
    if (config.ablation) modes.push_back(FeatureMode::baseline);

    std::vector<EnsembleTrainResult> results;
    for (const FeatureMode mode : modes) {
        EnsembleTrainOptions options;
        options.mode = mode;
        options.tune_trials = config.trials;
        options.seed = config.seed;
        results.push_back(train_ensemble(dataset, spec.profile, options));
    }

    save_ensemble(results[0].ensemble, config.out);
    std::string baseline_out;
    if (config.ablation) {
        baseline_out = with_suffix(config.out, ".baseline");
        save_ensemble(results[1].ensemble, baseline_out);
    }

    const nlohmann::json effective = {
        {"command", "train"},        {"profiles", config.profiles_path},
        {"profile", config.profile}, {"data", config.data},
        {"out", config.out},         {"mode", config.mode},
        {"ablation", config.ablation}, {"trials", config.trials},
        {"seed", config.seed},
    };
    const std::string hash = config_hash(effective);

    std::cout << "train: " << dataset.samples.size() << " rows from " << config.data << "\n";
    for (std::size_t i = 0; i < modes.size(); ++i) {
        const char* mode_name = modes[i] == FeatureMode::augmented ? "augmented" : "baseline";
        for (const auto& m : results[i].metrics) {
            std::cout << "  [" << mode_name << "] " << std::left << std::setw(24)
                      << model_key_name(m.key) << " rows=" << m.rows
                      << "  mape=" << fmt_pct(m.validation_mape) << "\n";
        }
    }

    std::cout << "\n  mode        GPU       1 CPU     2 CPUs    3 CPUs\n";
    nlohmann::ordered_json table = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < modes.size(); ++i) {
        const char* mode_name = modes[i] == FeatureMode::augmented ? "augmented" : "baseline";
        const MapeCells cells = mape_cells(results[i].metrics);
        std::cout << "  " << std::left << std::setw(11) << mode_name << " " << std::setw(9)
                  << cell_text(cells.gpu) << " " << std::setw(9) << cell_text(cells.cpu[1]) << " "
                  << std::setw(9) << cell_text(cells.cpu[2]) << " " << std::setw(9)
                  << cell_text(cells.cpu[3]) << "\n";
        table.push_back({{"mode", mode_name},
                         {"gpu", cell_json(cells.gpu)},
                         {"cpu_1", cell_json(cells.cpu[1])},
                         {"cpu_2", cell_json(cells.cpu[2])},
                         {"cpu_3", cell_json(cells.cpu[3])}});
    }

    // Gain importance for the primary ensemble's GPU models, largest first.
    nlohmann::ordered_json importance;
    for (const auto& [key, model] : results[0].ensemble.models) {
        if (key.executor != Executor::gpu) continue;
        auto gains = gain_importance(model);
        std::vector<std::pair<std::string, double>> ranked(gains.begin(), gains.end());
        std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
            if (a.second != b.second) return a.second > b.second;
            return a.first < b.first;
        });
        std::cout << "\n  importance " << model_key_name(key) << ":";
        nlohmann::ordered_json entries = nlohmann::ordered_json::array();
        for (std::size_t i = 0; i < ranked.size(); ++i) {
            if (i < 5) std::cout << " " << ranked[i].first << "=" << fmt_fixed(ranked[i].second, 3);
            entries.push_back({{"feature", ranked[i].first}, {"gain", ranked[i].second}});
        }
        std::cout << "\n";
        importance[model_key_name(key)] = entries;
    }

    std::cout << "\n  wrote " << config.out;
    if (!baseline_out.empty()) std::cout << " and " << baseline_out;
    std::cout << "\n  config " << hash << " seed " << config.seed << "\n";

    if (!config.metrics_out.empty()) {
        nlohmann::ordered_json report;
        report["command"] = "train";
        report["config_hash"] = hash;
        report["seed"] = config.seed;
        report["profile"] = config.profile;
        report["data_rows"] = dataset.samples.size();
        report["table"] = table;
        nlohmann::ordered_json models = nlohmann::ordered_json::array();
        for (std::size_t i = 0; i < modes.size(); ++i) {
            const char* mode_name = modes[i] == FeatureMode::augmented ? "augmented" : "baseline";
            for (const auto& m : results[i].metrics) {
                models.push_back({{"mode", mode_name},
                                  {"key", model_key_name(m.key)},
                                  {"rows", m.rows},
                                  {"validation_mape", m.validation_mape},
                                  {"params", params_report(m.params)}});
            }
        }
        report["models"] = models;
        report["gain_importance"] = importance;
        write_json_report(config.metrics_out, report);
    }
}

namespace {

void run_plan_grid(const PlanConfig& config, const SyntheticDeviceSpec& spec,
                   const PredictorEnsemble& ensemble, const std::string& hash) {
    std::vector<int> thread_set;
    if (config.threads == 0) {
        thread_set = {1, 2, 3};
    } else {
        thread_set = {config.threads};
    }
    if (!config.out.empty() && thread_set.size() != 1) {
        throw ConfigError("--out in grid mode requires a single --threads value");
    }

    auto ops = sample_eval_ops(op_type_from_string(config.op_type));
    if (config.sample > 0 && static_cast<std::size_t>(config.sample) < ops.size()) {
        std::mt19937_64 rng(config.seed);
        auto picked = sample_indices(rng, ops.size(), static_cast<std::size_t>(config.sample));
        std::sort(picked.begin(), picked.end());
        std::vector<OpDescriptor> subset;
        subset.reserve(picked.size());
        for (const auto index : picked) subset.push_back(ops[index]);
        ops = std::move(subset);
    }
    if (ops.empty()) throw PlanningError("evaluation grid is empty");

    std::ostringstream detail;
    detail << "op_json,threads,planner,c_cpu,c_gpu,total_us,gpu_only_us,speedup\n";

    std::map<int, double> gbdt_mean, search_mean;
    std::vector<PartitionPlan> out_plans;
    for (const int threads : thread_set) {
        double gbdt_sum = 0.0, search_sum = 0.0;
        for (const auto& op : ops) {
            const CostEstimate oracle = oracle_costs(op, threads, spec, config.sync_overhead_us);
            const double gpu_only = objective(0, c_out_of(op), oracle);

            PartitionPlan predicted = optimize(
                op, predictor_costs(op, ensemble, threads, spec.profile, config.sync_overhead_us),
                config.alignment);
            const double predicted_on_oracle =
                objective(predicted.partition.c_cpu, predicted.partition.c_gpu, oracle);
            const double gbdt_speedup = gpu_only / predicted_on_oracle;
            gbdt_sum += gbdt_speedup;

            const PartitionPlan searched = grid_search_measured(
                op,
                [&oracle](const ChannelPartition& p) { return objective(p.c_cpu, p.c_gpu, oracle); },
                config.step);
            search_sum += searched.speedup;

            const std::string op_text = csv_quote(op_to_json(op));
            detail << op_text << ',' << threads << ",GBDT," << predicted.partition.c_cpu << ','
                   << predicted.partition.c_gpu << ',' << fmt_fixed(predicted_on_oracle, 6) << ','
                   << fmt_fixed(gpu_only, 6) << ',' << fmt_fixed(gbdt_speedup, 6) << "\n";
            detail << op_text << ',' << threads << ",Search," << searched.partition.c_cpu << ','
                   << searched.partition.c_gpu << ',' << fmt_fixed(searched.predicted_total_us, 6)
                   << ',' << fmt_fixed(gpu_only, 6) << ',' << fmt_fixed(searched.speedup, 6) << "\n";

            if (!config.out.empty()) out_plans.push_back(predicted);
        }
        gbdt_mean[threads] = gbdt_sum / static_cast<double>(ops.size());
        search_mean[threads] = search_sum / static_cast<double>(ops.size());
    }

    if (!config.out.empty()) save_plans(out_plans, config.out);
    if (!config.detail_out.empty()) write_text_file(config.detail_out, detail.str());

    std::cout << "plan: " << config.op_type << " eval grid, " << ops.size() << " ops, profile "
              << config.profile << "\n";
    std::cout << "            ";
    for (const int threads : thread_set) {
        std::cout << std::setw(9) << (std::to_string(threads) + " CPU");
    }
    std::cout << "\n  GBDT      ";
    for (const int threads : thread_set) std::cout << std::setw(9) << fmt_x(gbdt_mean[threads]);
    std::cout << "\n  Search    ";
    for (const int threads : thread_set) std::cout << std::setw(9) << fmt_x(search_mean[threads]);
    std::cout << "\n  config " << hash << " seed " << config.seed << "\n";

    if (!config.report_out.empty()) {
        nlohmann::ordered_json rows = nlohmann::ordered_json::array();
        for (const int threads : thread_set) {
            rows.push_back(
                {{"planner", "GBDT"}, {"threads", threads}, {"mean_speedup", gbdt_mean[threads]}});
        }
        for (const int threads : thread_set) {
            rows.push_back(
                {{"planner", "Search"}, {"threads", threads}, {"mean_speedup", search_mean[threads]}});
        }
        nlohmann::ordered_json report;
        report["command"] = "plan";
        report["config_hash"] = hash;
        report["seed"] = config.seed;
        report["profile"] = config.profile;
        report["mode"] = "grid";
        report["op_type"] = config.op_type;
        report["ops"] = ops.size();
        report["sync_overhead_us"] = config.sync_overhead_us;
        report["rows"] = rows;
        write_json_report(config.report_out, report);
    }
}

void run_plan_model(const PlanConfig& config, const SyntheticDeviceSpec& spec,
                    const PredictorEnsemble* ensemble, const std::string& hash) {
    const int threads = config.threads == 0 ? 2 : config.threads;
    if (threads < 1 || threads > 3) throw ConfigError("threads must be in {1,2,3}");

    const auto layers = load_layer_specs(config.model_desc);
    const bool use_oracle = config.costs == "oracle";
    const LayerCostsProvider provider = [&](const LayerSpec& layer, int t) -> CostEstimate {
        const auto op = layer_op(layer);
        if (!op) return pool_costs(spec);
        if (use_oracle) return oracle_costs(*op, t, spec, config.sync_overhead_us);
        return predictor_costs(*op, *ensemble, t, spec.profile, config.sync_overhead_us);
    };
    const auto plans = plan_model(layers, provider, threads, config.alignment);

    if (!config.out.empty()) save_plans(plans, config.out);

    double total_us = 0.0, gpu_only_us = 0.0;
    nlohmann::ordered_json layer_rows = nlohmann::ordered_json::array();
    std::cout << "plan: " << config.model_desc << ", " << layers.size() << " layers, threads "
              << threads << ", costs " << (use_oracle ? "oracle" : "predictor") << "\n";
    std::cout << "  layer  kind    c_cpu  c_gpu  total_us     speedup\n";
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const auto& plan = plans[i];
        total_us += plan.predicted_total_us;
        gpu_only_us += plan.baseline_gpu_us;
        std::cout << "  " << std::left << std::setw(6) << i << " " << std::setw(7)
                  << layer_kind(layers[i]) << " " << std::right << std::setw(5)
                  << plan.partition.c_cpu << "  " << std::setw(5) << plan.partition.c_gpu << "  "
                  << std::setw(11) << fmt_fixed(plan.predicted_total_us, 2) << "  "
                  << fmt_x(plan.speedup) << "\n";
        layer_rows.push_back({{"layer", i},
                              {"kind", layer_kind(layers[i])},
                              {"c_cpu", plan.partition.c_cpu},
                              {"c_gpu", plan.partition.c_gpu},
                              {"total_us", plan.predicted_total_us},
                              {"gpu_only_us", plan.baseline_gpu_us},
                              {"speedup", plan.speedup}});
    }
    std::cout << "  end-to-end " << fmt_us(total_us) << " vs gpu-only " << fmt_us(gpu_only_us)
              << " (" << fmt_x(gpu_only_us / total_us) << ")\n";
    std::cout << "  config " << hash << " seed " << config.seed << "\n";

    if (!config.report_out.empty()) {
        nlohmann::ordered_json report;
        report["command"] = "plan";
        report["config_hash"] = hash;
        report["seed"] = config.seed;
        report["profile"] = config.profile;
        report["mode"] = "model";
        report["model_desc"] = config.model_desc;
        report["threads"] = threads;
        report["costs"] = use_oracle ? "oracle" : "predictor";
        report["sync_overhead_us"] = config.sync_overhead_us;
        report["layers"] = layer_rows;
        report["end_to_end_us"] = total_us;
        report["gpu_only_us"] = gpu_only_us;
        report["speedup"] = gpu_only_us / total_us;
        write_json_report(config.report_out, report);
    }
}

}  // namespace

void cmd_plan(const PlanConfig& config) {
    if (config.costs != "predictor" && config.costs != "oracle") {
        throw ConfigError("costs must be 'predictor' or 'oracle', got '" + config.costs + "'");
    }
    if (config.alignment < 1 || config.step < 1) throw ConfigError("alignment and step must be >= 1");
    if (config.sync_overhead_us < 0) throw ConfigError("sync overhead must be non-negative");
    if (config.threads < 0 || config.threads > 3) throw ConfigError("threads must be in {0,1,2,3}");
    if (config.sample < 0) throw ConfigError("sample must be non-negative");

    SyntheticDeviceSpec spec = load_spec(config.profiles_path, config.profile);
    spec.seed = config.seed;

    const bool grid_mode = config.model_desc.empty();
    const bool needs_models = grid_mode || config.costs == "predictor";
    PredictorEnsemble ensemble;
    if (needs_models) {
        if (config.models_path.empty()) {
            throw ConfigError(grid_mode ? "plan grid mode requires --models"
                                        : "predictor costs require --models");
        }
        ensemble = load_ensemble(config.models_path);
        if (ensemble.profile_name != spec.profile.name) {
            throw ConfigError("ensemble was trained for profile '" + ensemble.profile_name +
                              "', run uses '" + spec.profile.name + "'");
        }
    }

    const nlohmann::json effective = {
        {"command", "plan"},          {"profiles", config.profiles_path},
        {"profile", config.profile},  {"models", config.models_path},
        {"op_type", config.op_type},  {"model_desc", config.model_desc},
        {"costs", config.costs},      {"threads", config.threads},
        {"alignment", config.alignment}, {"step", config.step},
        {"sample", config.sample},    {"seed", config.seed},
        {"sync_overhead_us", config.sync_overhead_us}, {"out", config.out},
    };
    const std::string hash = config_hash(effective);

    if (grid_mode) {
        run_plan_grid(config, spec, ensemble, hash);
    } else {
        run_plan_model(config, spec, needs_models ? &ensemble : nullptr, hash);
    }
}

void cmd_simulate(const SimulateConfig& config) {
    if (config.model_desc.empty()) throw ConfigError("simulate requires --model");
    if (config.plans_path.empty()) throw ConfigError("simulate requires --plans");
    if (config.threads < 1 || config.threads > 3) throw ConfigError("threads must be in {1,2,3}");
    const SyncMode selected_mode = sync_mode_from_name(config.sync);
    if (config.bench_rounds < 0) throw ConfigError("bench rounds must be non-negative");

    const SyntheticDeviceSpec spec = load_spec(config.profiles_path, config.profile);
    const auto layers = load_layer_specs(config.model_desc);
    const auto plans = load_plans(config.plans_path);
    if (plans.size() != layers.size()) {
        throw PlanningError("plan has " + std::to_string(plans.size()) + " entries but model has " +
                            std::to_string(layers.size()) + " layers");
    }

    std::vector<CostEstimate> costs;
    costs.reserve(layers.size());
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const auto op = layer_op(layers[i]);
        const auto& partition = plans[i].partition;
        if (!op) {
            if (partition.c_cpu != 0 || partition.c_gpu != 0) {
                throw PlanningError("layer " + std::to_string(i) +
                                    " (pool): plan assigns channels to an unpartitionable layer");
            }
            costs.push_back(pool_costs(spec));
            continue;
        }
        const std::int64_t expected = c_out_of(*op);
        if (partition.c_cpu + partition.c_gpu != expected) {
            throw PlanningError("layer " + std::to_string(i) + " (" + layer_kind(layers[i]) +
                                "): plan channels " +
                                std::to_string(partition.c_cpu + partition.c_gpu) + " != C_out " +
                                std::to_string(expected));
        }
        costs.push_back(oracle_costs(*op, config.threads, spec, 0.0));
    }

    SyncConfig polling;
    polling.mode = SyncMode::polling;
    polling.epsilon_poll_us = config.epsilon_poll_us;
    polling.notify_delay_us = config.notify_delay_us;
    polling.validate();
    SyncConfig passive = polling;
    passive.mode = SyncMode::passive;

    const double total_polling = simulate_model(plans, costs, polling);
    const double total_passive = simulate_model(plans, costs, passive);
    const double selected_total = selected_mode == SyncMode::polling ? total_polling : total_passive;

    double gpu_only_us = 0.0;
    int co_executed_layers = 0;
    nlohmann::ordered_json layer_rows = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const auto op = layer_op(layers[i]);
        const auto& partition = plans[i].partition;
        const double t_cpu = costs[i].t_cpu_us(partition.c_cpu);
        const double t_gpu =
            op ? costs[i].t_gpu_us(partition.c_gpu) : costs[i].t_gpu_us(0);
        const bool co_executed = partition.c_cpu > 0 && partition.c_gpu > 0;
        if (co_executed) ++co_executed_layers;
        gpu_only_us += op ? costs[i].t_gpu_us(c_out_of(*op)) : costs[i].t_gpu_us(0);
        layer_rows.push_back({{"layer", i},
                              {"kind", layer_kind(layers[i])},
                              {"c_cpu", partition.c_cpu},
                              {"c_gpu", partition.c_gpu},
                              {"t_cpu_us", t_cpu},
                              {"t_gpu_us", t_gpu},
                              {"co_executed", co_executed},
                              {"total_polling_us", simulate_layer(t_cpu, t_gpu, polling, co_executed)},
                              {"total_passive_us", simulate_layer(t_cpu, t_gpu, passive, co_executed)}});
    }

    const nlohmann::json effective = {
        {"command", "simulate"},        {"profiles", config.profiles_path},
        {"profile", config.profile},    {"model_desc", config.model_desc},
        {"plans", config.plans_path},   {"sync", config.sync},
        {"epsilon_poll_us", config.epsilon_poll_us},
        {"notify_delay_us", config.notify_delay_us},
        {"threads", config.threads},    {"bench_rounds", config.bench_rounds},
        {"bench_cpu_us", config.bench_cpu_us}, {"bench_gpu_us", config.bench_gpu_us},
    };
    const std::string hash = config_hash(effective);

    std::cout << "simulate: " << config.model_desc << ", " << layers.size() << " layers ("
              << co_executed_layers << " co-executed), threads " << config.threads << "\n";
    std::cout << "  polling total  " << fmt_us(total_polling) << "  (speedup "
              << fmt_x(gpu_only_us / total_polling) << ")\n";
    std::cout << "  passive total  " << fmt_us(total_passive) << "  (speedup "
              << fmt_x(gpu_only_us / total_passive) << ")\n";
    std::cout << "  gpu-only       " << fmt_us(gpu_only_us) << "\n";
    std::cout << "  selected mode  " << sync_mode_name(selected_mode) << " -> "
              << fmt_us(selected_total) << "\n";

    nlohmann::ordered_json bench;
    if (config.bench_rounds > 0) {
        const auto active =
            rendezvous_run(config.bench_cpu_us, config.bench_gpu_us, config.bench_rounds);
        const auto baseline = passive_baseline_run(config.bench_cpu_us, config.bench_gpu_us,
                                                   config.bench_rounds, config.notify_delay_us);
        std::cout << "  bench polling  median " << fmt_us(median_overhead_us(active)) << ", p95 "
                  << fmt_us(p95_overhead_us(active)) << ", safety "
                  << (active.safety_ok ? "ok" : "VIOLATED") << ", timeouts " << active.timeouts
                  << "\n";
        std::cout << "  bench passive  median " << fmt_us(median_overhead_us(baseline)) << ", p95 "
                  << fmt_us(p95_overhead_us(baseline)) << "\n";
        bench["polling"] = nlohmann::ordered_json::parse(report_to_json(active, false));
        bench["passive"] = nlohmann::ordered_json::parse(report_to_json(baseline, false));
    }
    std::cout << "  config " << hash << "\n";

    if (!config.report_out.empty()) {
        nlohmann::ordered_json report;
        report["command"] = "simulate";
        report["config_hash"] = hash;
        report["profile"] = config.profile;
        report["model_desc"] = config.model_desc;
        report["threads"] = config.threads;
        report["sync"] = sync_mode_name(selected_mode);
        report["epsilon_poll_us"] = config.epsilon_poll_us;
        report["notify_delay_us"] = config.notify_delay_us;
        report["layers"] = layer_rows;
        report["co_executed_layers"] = co_executed_layers;
        report["end_to_end_polling_us"] = total_polling;
        report["end_to_end_passive_us"] = total_passive;
        report["end_to_end_us"] = selected_total;
        report["gpu_only_us"] = gpu_only_us;
        report["speedup_polling"] = gpu_only_us / total_polling;
        report["speedup_passive"] = gpu_only_us / total_passive;
        if (config.bench_rounds > 0) report["bench"] = bench;
        write_json_report(config.report_out, report);
    }
}

void cmd_sync_bench(const SyncBenchConfig& config) {
    if (config.mode != "polling" && config.mode != "passive" && config.mode != "both") {
        throw ConfigError("mode must be 'polling', 'passive', or 'both', got '" + config.mode + "'");
    }
    if (config.rounds < 1) throw ConfigError("rounds must be positive");
    if (config.cpu_us < 0 || config.gpu_us < 0) throw ConfigError("work durations must be non-negative");
    if (config.delay_us < 0) throw ConfigError("delay must be non-negative");
    if (config.timeout_s <= 0) throw ConfigError("timeout must be positive");

    const nlohmann::json effective = {
        {"command", "sync-bench"}, {"mode", config.mode},
        {"rounds", config.rounds}, {"cpu_us", config.cpu_us},
        {"gpu_us", config.gpu_us}, {"delay_us", config.delay_us},
        {"timeout_s", config.timeout_s},
    };
    const std::string hash = config_hash(effective);

    const auto summarize = [](const char* label, const RendezvousReport& report) {
        std::cout << "  " << std::left << std::setw(8) << label << " rounds "
                  << report.rounds_completed << "/" << report.rounds_requested << " (discarded "
                  << report.rounds_discarded << ", timeouts " << report.timeouts << "), safety "
                  << (report.safety_ok ? "ok" : "VIOLATED");
        if (report.rounds_completed > 0) {
            std::cout << ", overhead min " << fmt_us(min_overhead_us(report)) << " median "
                      << fmt_us(median_overhead_us(report)) << " p95 "
                      << fmt_us(p95_overhead_us(report));
        }
        std::cout << "\n";
    };

    std::cout << "sync-bench: cpu " << fmt_us(config.cpu_us) << ", gpu " << fmt_us(config.gpu_us)
              << ", " << config.rounds << " rounds\n";

    std::optional<RendezvousReport> polling, passive;
    if (config.mode == "polling" || config.mode == "both") {
        polling = rendezvous_run(config.cpu_us, config.gpu_us, config.rounds, config.timeout_s);
        summarize("polling", *polling);
    }
    if (config.mode == "passive" || config.mode == "both") {
        passive = passive_baseline_run(config.cpu_us, config.gpu_us, config.rounds, config.delay_us,
                                       config.timeout_s);
        summarize("passive", *passive);
    }
    if (polling && passive && polling->rounds_completed > 0 && passive->rounds_completed > 0) {
        std::cout << "  passive - polling median gap: "
                  << fmt_us(median_overhead_us(*passive) - median_overhead_us(*polling)) << "\n";
    }
    std::cout << "  config " << hash << "\n";

    if (!config.out.empty()) {
        nlohmann::ordered_json report;
        report["command"] = "sync-bench";
        report["config_hash"] = hash;
        report["rounds"] = config.rounds;
        report["cpu_us"] = config.cpu_us;
        report["gpu_us"] = config.gpu_us;
        report["delay_us"] = config.delay_us;
        if (polling) {
            report["polling"] =
                nlohmann::ordered_json::parse(report_to_json(*polling, config.include_rounds));
        }
        if (passive) {
            report["passive"] =
                nlohmann::ordered_json::parse(report_to_json(*passive, config.include_rounds));
        }
        write_json_report(config.out, report);
    }
}

}  // namespace coex::cli
