#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "coex/device_model.hpp"
#include "coex/gbdt.hpp"
#include "coex/gpu_dispatch.hpp"
#include "coex/op_model.hpp"

namespace coex {

// Featurized training view of a homogeneous dataset slice.
struct TrainMatrix {
    std::vector<std::string> feature_names;
    std::vector<std::vector<double>> rows;
    std::vector<double> latency_us;
};

// Closed sampling ranges for random hyperparameter search.
struct HyperparameterSpace {
    double learning_rate_min = 0.01, learning_rate_max = 0.2;
    int n_estimators_min = 100, n_estimators_max = 1000;
    int max_depth_min = 5, max_depth_max = 20;
    int num_leaves_min = 16, num_leaves_max = 512;
    double l1_min = 1e-8, l1_max = 1.0;  // sampled log-uniformly
    double l2_min = 1e-8, l2_max = 1.0;  // sampled log-uniformly
    double subsample_min = 0.5, subsample_max = 1.0;
};

struct TuneResult {
    GBDTModel model;
    GBDTParams params;
    double validation_mape = 0.0;
};

// Squared-error boosting on log(latency_us); base_score is the mean log target.
GBDTModel fit_gbdt(const TrainMatrix& data, const GBDTParams& params, std::uint64_t seed);

// Seeded random search: `trials` configurations evaluated against one fixed
// 80/20 split; lowest validation MAPE wins, ties to the earlier trial.
TuneResult tune(const TrainMatrix& data, const HyperparameterSpace& space, int trials,
                std::uint64_t seed);

// mean(|pred - actual| / actual) * 100, in latency space.
double mape(const std::vector<double>& predictions, const std::vector<double>& actuals);

// Per-feature sum of split gains; schema features never split report 0.
std::map<std::string, double> gain_importance(const GBDTModel& model);

// Latency-space prediction for one feature row.
double predict_model_latency(const GBDTModel& model, const std::vector<double>& row);

// Route key: GPU models per kernel implementation (which fixes the op type),
// CPU models per op type and thread count.
struct ModelKey {
    Executor executor = Executor::gpu;
    KernelId kernel = KernelId::linear_generic;  // meaningful for GPU only
    OpType op_type = OpType::linear;             // meaningful for CPU only
    int threads = 0;                             // meaningful for CPU only

    auto operator<=>(const ModelKey&) const = default;
};

std::string model_key_name(const ModelKey& key);
ModelKey model_key_from_name(const std::string& name);

struct PredictorEnsemble {
    FeatureMode mode = FeatureMode::augmented;
    std::string profile_name;
    std::map<ModelKey, GBDTModel> models;
};

// Builds the feature row for (op, executor, threads) and routes to the model
// selected by gpu-dispatch; CPU rows use op parameters plus the thread count.
double predict_latency(const PredictorEnsemble& ensemble, const OpDescriptor& op, Executor executor,
                       int threads, const DeviceProfile& profile);

TrainMatrix featurize(const Dataset& dataset, const DeviceProfile& profile, FeatureMode mode);

struct EnsembleTrainOptions {
    FeatureMode mode = FeatureMode::augmented;
    int tune_trials = 50;  // 0 trains base_params directly with an 80/20 holdout
    GBDTParams base_params;
    std::uint64_t seed = 42;
};

struct ModelMetrics {
    ModelKey key;
    std::size_t rows = 0;
    double validation_mape = 0.0;
    GBDTParams params;
};

struct EnsembleTrainResult {
    PredictorEnsemble ensemble;
    std::vector<ModelMetrics> metrics;
};

// Partitions a dataset by route key and trains one model per group; groups
// with fewer than 50 samples abort with the offending key named.
EnsembleTrainResult train_ensemble(const Dataset& dataset, const DeviceProfile& profile,
                                   const EnsembleTrainOptions& options);

std::string model_to_json(const GBDTModel& model);
GBDTModel model_from_json(const std::string& text);

void save_ensemble(const PredictorEnsemble& ensemble, const std::string& path);
PredictorEnsemble load_ensemble(const std::string& path);

}  // namespace coex
