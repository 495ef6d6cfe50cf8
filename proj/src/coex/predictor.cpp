#include "coex/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "coex/error.hpp"
#include "coex/rng.hpp"

namespace coex {

GBDTModel fit_gbdt(const TrainMatrix& data, const GBDTParams& params, std::uint64_t seed) {
    if (data.rows.size() < 50) {
        throw TrainingError("training requires at least 50 samples, got " +
                            std::to_string(data.rows.size()));
    }
    std::vector<double> log_latency(data.latency_us.size());
    for (std::size_t i = 0; i < data.latency_us.size(); ++i) {
        if (!(data.latency_us[i] > 0)) throw TrainingError("latency targets must be positive");
        log_latency[i] = std::log(data.latency_us[i]);
    }
    return fit_gbdt_raw(data.rows, log_latency, data.feature_names, params, seed);
}

double mape(const std::vector<double>& predictions, const std::vector<double>& actuals) {
    if (predictions.size() != actuals.size() || predictions.empty()) {
        throw ContractViolation("mape requires equal, nonzero-length inputs");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        if (!(actuals[i] > 0)) throw ContractViolation("mape requires positive actuals");
        total += std::abs(predictions[i] - actuals[i]) / actuals[i];
    }
    return total / static_cast<double>(predictions.size()) * 100.0;
}

double predict_model_latency(const GBDTModel& model, const std::vector<double>& row) {
    return std::exp(model.predict_raw(row));
}

namespace {

GBDTParams sample_params(std::mt19937_64& rng, const HyperparameterSpace& space) {
    GBDTParams p;
    p.learning_rate = uniform_real(rng, space.learning_rate_min, space.learning_rate_max);
    p.n_estimators = static_cast<int>(uniform_int(rng, space.n_estimators_min, space.n_estimators_max));
    p.max_depth = static_cast<int>(uniform_int(rng, space.max_depth_min, space.max_depth_max));
    p.num_leaves = static_cast<int>(uniform_int(rng, space.num_leaves_min, space.num_leaves_max));
    p.l1 = log_uniform_real(rng, space.l1_min, space.l1_max);
    p.l2 = log_uniform_real(rng, space.l2_min, space.l2_max);
    p.subsample = uniform_real(rng, space.subsample_min, space.subsample_max);
    return p;
}

struct HoldoutSplit {
    TrainMatrix train;
    std::vector<std::vector<double>> test_rows;
    std::vector<double> test_latency;
};

// One fixed, seeded 80/20 shuffle-split shared by every trial.
HoldoutSplit holdout_split(const TrainMatrix& data, std::uint64_t seed) {
    const std::size_t n = data.rows.size();
    std::mt19937_64 rng(hash_combine(seed, 0x5e1ec7));
    auto order = sample_indices(rng, n, n);
    const std::size_t test_count = std::max<std::size_t>(1, n / 5);
    const std::size_t train_count = n - test_count;
    HoldoutSplit split;
    split.train.feature_names = data.feature_names;
    for (std::size_t i = 0; i < train_count; ++i) {
        split.train.rows.push_back(data.rows[order[i]]);
        split.train.latency_us.push_back(data.latency_us[order[i]]);
    }
    for (std::size_t i = train_count; i < n; ++i) {
        split.test_rows.push_back(data.rows[order[i]]);
        split.test_latency.push_back(data.latency_us[order[i]]);
    }
    return split;
}

double holdout_mape(const GBDTModel& model, const HoldoutSplit& split) {
    std::vector<double> predictions;
    predictions.reserve(split.test_rows.size());
    for (const auto& row : split.test_rows) predictions.push_back(predict_model_latency(model, row));
    return mape(predictions, split.test_latency);
}

}  // namespace

TuneResult tune(const TrainMatrix& data, const HyperparameterSpace& space, int trials,
                std::uint64_t seed) {
    if (trials < 1) throw ContractViolation("tune requires at least one trial");
    const HoldoutSplit split = holdout_split(data, seed);
    std::mt19937_64 rng(seed);
    TuneResult best;
    bool have_best = false;
    for (int trial = 0; trial < trials; ++trial) {
        const GBDTParams params = sample_params(rng, space);
        const std::uint64_t fit_seed = hash_combine(seed, static_cast<std::uint64_t>(trial) + 1);
        GBDTModel model = fit_gbdt(split.train, params, fit_seed);
        const double score = holdout_mape(model, split);
        if (!have_best || score < best.validation_mape) {
            best.model = std::move(model);
            best.params = params;
            best.validation_mape = score;
            have_best = true;
        }
    }
    return best;
}

std::map<std::string, double> gain_importance(const GBDTModel& model) {
    std::map<std::string, double> gains;
    for (const auto& name : model.feature_names) gains[name] = 0.0;
    for (const auto& tree : model.trees) {
        for (const auto& node : tree.nodes) {
            if (node.feature >= 0) {
                gains[model.feature_names[static_cast<std::size_t>(node.feature)]] += node.gain;
            }
        }
    }
    return gains;
}

std::string model_key_name(const ModelKey& key) {
    if (key.executor == Executor::gpu) return "gpu:" + kernel_name(key.kernel);
    const std::string op = key.op_type == OpType::linear ? "linear" : "conv";
    return "cpu:" + op + ":" + std::to_string(key.threads);
}

ModelKey model_key_from_name(const std::string& name) {
    const auto colon = name.find(':');
    if (colon == std::string::npos) throw ValidationError("malformed model key: " + name);
    const std::string head = name.substr(0, colon);
    const std::string tail = name.substr(colon + 1);
    ModelKey key;
    if (head == "gpu") {
        key.executor = Executor::gpu;
        key.kernel = kernel_from_name(tail);
        key.threads = 0;
        return key;
    }
    if (head == "cpu") {
        const auto second = tail.find(':');
        if (second == std::string::npos) throw ValidationError("malformed model key: " + name);
        const std::string op = tail.substr(0, second);
        key.executor = Executor::cpu;
        key.kernel = KernelId::linear_generic;
        if (op == "linear") {
            key.op_type = OpType::linear;
        } else if (op == "conv") {
            key.op_type = OpType::conv;
        } else {
            throw ValidationError("malformed model key: " + name);
        }
        key.threads = std::stoi(tail.substr(second + 1));
        if (key.threads < 1 || key.threads > 3) throw ValidationError("cpu model threads out of range");
        return key;
    }
    throw ValidationError("malformed model key: " + name);
}

namespace {

std::vector<double> feature_row(const OpDescriptor& op, Executor executor, int threads,
                                const DeviceProfile& profile, FeatureMode mode) {
    if (executor == Executor::gpu) {
        return features(op, profile, mode).values;
    }
    auto row = features(op, profile, FeatureMode::baseline).values;
    row.push_back(static_cast<double>(threads));
    return row;
}

ModelKey route_key(const OpDescriptor& op, Executor executor, int threads,
                   const DeviceProfile& profile) {
    ModelKey key;
    key.executor = executor;
    if (executor == Executor::gpu) {
        key.kernel = select_kernel(op, profile);
        key.threads = 0;
    } else {
        key.kernel = KernelId::linear_generic;
        key.op_type = std::holds_alternative<LinearOp>(op) ? OpType::linear : OpType::conv;
        key.threads = threads;
    }
    return key;
}

}  // namespace

double predict_latency(const PredictorEnsemble& ensemble, const OpDescriptor& op, Executor executor,
                       int threads, const DeviceProfile& profile) {
    if (executor == Executor::cpu && (threads < 1 || threads > 3)) {
        throw ContractViolation("CPU prediction requires threads in {1,2,3}");
    }
    const ModelKey key = route_key(op, executor, threads, profile);
    const auto it = ensemble.models.find(key);
    if (it == ensemble.models.end()) {
        throw RoutingError("ensemble has no model for " + model_key_name(key));
    }
    return predict_model_latency(it->second, feature_row(op, executor, threads, profile, ensemble.mode));
}

TrainMatrix featurize(const Dataset& dataset, const DeviceProfile& profile, FeatureMode mode) {
    if (dataset.samples.empty()) throw ValidationError("cannot featurize an empty dataset");
    const auto& first = dataset.samples.front();
    for (const auto& sample : dataset.samples) {
        if (sample.op.index() != first.op.index() || sample.executor != first.executor) {
            throw ValidationError("featurize requires homogeneous op type and executor");
        }
    }
    TrainMatrix matrix;
    const FeatureMode row_mode = first.executor == Executor::cpu ? FeatureMode::baseline : mode;
    matrix.feature_names = features(first.op, profile, row_mode).names;
    if (first.executor == Executor::cpu) matrix.feature_names.push_back("threads");
    for (const auto& sample : dataset.samples) {
        matrix.rows.push_back(feature_row(sample.op, sample.executor, sample.threads, profile, mode));
        matrix.latency_us.push_back(sample.latency_us);
    }
    return matrix;
}

EnsembleTrainResult train_ensemble(const Dataset& dataset, const DeviceProfile& profile,
                                   const EnsembleTrainOptions& options) {
    std::map<ModelKey, Dataset> groups;
    for (const auto& sample : dataset.samples) {
        ModelKey key;
        key.executor = sample.executor;
        if (sample.executor == Executor::gpu) {
            if (!sample.kernel) throw ValidationError("gpu sample lacks kernel id");
            key.kernel = *sample.kernel;
            key.threads = 0;
        } else {
            key.kernel = KernelId::linear_generic;
            key.op_type = std::holds_alternative<LinearOp>(sample.op) ? OpType::linear : OpType::conv;
            key.threads = sample.threads;
        }
        groups[key].samples.push_back(sample);
    }
    if (groups.empty()) throw TrainingError("dataset is empty");

    EnsembleTrainResult result;
    result.ensemble.mode = options.mode;
    result.ensemble.profile_name = profile.name;
    for (const auto& [key, group] : groups) {
        if (group.samples.size() < 50) {
            throw TrainingError("insufficient samples for " + model_key_name(key) + ": " +
                                std::to_string(group.samples.size()) + " < 50");
        }
        const TrainMatrix matrix = featurize(group, profile, options.mode);
        const std::uint64_t group_seed = hash_combine(options.seed, fnv1a64(model_key_name(key)));
        ModelMetrics metrics;
        metrics.key = key;
        metrics.rows = group.samples.size();
        if (options.tune_trials > 0) {
            TuneResult tuned = tune(matrix, HyperparameterSpace{}, options.tune_trials, group_seed);
            metrics.validation_mape = tuned.validation_mape;
            metrics.params = tuned.params;
            result.ensemble.models.emplace(key, std::move(tuned.model));
        } else {
            const HoldoutSplit split = holdout_split(matrix, group_seed);
            GBDTModel model = fit_gbdt(split.train, options.base_params, group_seed);
            metrics.validation_mape = holdout_mape(model, split);
            metrics.params = options.base_params;
            result.ensemble.models.emplace(key, std::move(model));
        }
        result.metrics.push_back(std::move(metrics));
    }
    return result;
}

namespace {

nlohmann::ordered_json params_to_json(const GBDTParams& p) {
    return {
        {"learning_rate", p.learning_rate}, {"n_estimators", p.n_estimators},
        {"max_depth", p.max_depth},         {"num_leaves", p.num_leaves},
        {"l1", p.l1},                       {"l2", p.l2},
        {"subsample", p.subsample},
    };
}

GBDTParams params_from_json(const nlohmann::json& j) {
    GBDTParams p;
    p.learning_rate = j.at("learning_rate").get<double>();
    p.n_estimators = j.at("n_estimators").get<int>();
    p.max_depth = j.at("max_depth").get<int>();
    p.num_leaves = j.at("num_leaves").get<int>();
    p.l1 = j.at("l1").get<double>();
    p.l2 = j.at("l2").get<double>();
    p.subsample = j.at("subsample").get<double>();
    return p;
}

nlohmann::ordered_json node_to_json(const RegressionTree& tree, int index) {
    const TreeNode& node = tree.nodes[static_cast<std::size_t>(index)];
    if (node.feature < 0) {
        return {{"leaf", node.value}};
    }
    nlohmann::ordered_json j;
    j["feature"] = node.feature;
    j["threshold"] = node.threshold;
    j["gain"] = node.gain;
    j["left"] = node_to_json(tree, node.left);
    j["right"] = node_to_json(tree, node.right);
    return j;
}

int node_from_json(const nlohmann::json& j, RegressionTree& tree) {
    const int index = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    if (j.contains("leaf")) {
        tree.nodes[static_cast<std::size_t>(index)].value = j.at("leaf").get<double>();
        return index;
    }
    TreeNode node;
    node.feature = j.at("feature").get<int>();
    node.threshold = j.at("threshold").get<double>();
    node.gain = j.value("gain", 0.0);
    const int left = node_from_json(j.at("left"), tree);
    const int right = node_from_json(j.at("right"), tree);
    node.left = left;
    node.right = right;
    tree.nodes[static_cast<std::size_t>(index)] = node;
    return index;
}

constexpr int kModelVersion = 1;

nlohmann::ordered_json model_to_json_value(const GBDTModel& model) {
    nlohmann::ordered_json j;
    j["version"] = kModelVersion;
    j["target"] = "log_latency_us";
    j["base_score"] = model.base_score;
    j["learning_rate"] = model.learning_rate;
    j["feature_names"] = model.feature_names;
    j["params"] = params_to_json(model.params);
    nlohmann::ordered_json trees = nlohmann::ordered_json::array();
    for (const auto& tree : model.trees) trees.push_back(node_to_json(tree, 0));
    j["trees"] = trees;
    return j;
}

GBDTModel model_from_json_value(const nlohmann::json& j) {
    if (j.at("version").get<int>() != kModelVersion) {
        throw ValidationError("unsupported model version");
    }
    GBDTModel model;
    model.base_score = j.at("base_score").get<double>();
    model.learning_rate = j.at("learning_rate").get<double>();
    model.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    model.params = params_from_json(j.at("params"));
    for (const auto& tree_json : j.at("trees")) {
        RegressionTree tree;
        node_from_json(tree_json, tree);
        model.trees.push_back(std::move(tree));
    }
    return model;
}

}  // namespace

std::string model_to_json(const GBDTModel& model) { return model_to_json_value(model).dump(2); }

GBDTModel model_from_json(const std::string& text) {
    try {
        return model_from_json_value(nlohmann::json::parse(text));
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed model JSON: ") + e.what());
    }
}

void save_ensemble(const PredictorEnsemble& ensemble, const std::string& path) {
    nlohmann::ordered_json j;
    j["version"] = kModelVersion;
    j["feature_mode"] = ensemble.mode == FeatureMode::augmented ? "augmented" : "baseline";
    j["profile_name"] = ensemble.profile_name;
    nlohmann::ordered_json models;
    for (const auto& [key, model] : ensemble.models) {
        models[model_key_name(key)] = model_to_json_value(model);
    }
    j["models"] = models;
    std::ofstream out(path);
    if (!out) throw IoError("cannot write ensemble file: " + path);
    out << j.dump(2) << "\n";
    if (!out) throw IoError("short write to ensemble file: " + path);
}

PredictorEnsemble load_ensemble(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open ensemble file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw IoError(path + ": " + e.what());
    }
    try {
        if (j.at("version").get<int>() != kModelVersion) {
            throw ValidationError(path + ": unsupported ensemble version");
        }
        PredictorEnsemble ensemble;
        const std::string mode = j.at("feature_mode").get<std::string>();
        if (mode == "augmented") {
            ensemble.mode = FeatureMode::augmented;
        } else if (mode == "baseline") {
            ensemble.mode = FeatureMode::baseline;
        } else {
            throw ValidationError(path + ": unknown feature mode " + mode);
        }
        ensemble.profile_name = j.at("profile_name").get<std::string>();
        for (const auto& [name, body] : j.at("models").items()) {
            ensemble.models.emplace(model_key_from_name(name), model_from_json_value(body));
        }
        return ensemble;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(path + ": " + e.what());
    }
}

}  // namespace coex
