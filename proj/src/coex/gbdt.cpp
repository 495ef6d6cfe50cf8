#include "coex/gbdt.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "coex/error.hpp"
#include "coex/rng.hpp"

namespace coex {

double RegressionTree::predict(const std::vector<double>& row) const {
    int node = 0;
    while (nodes[static_cast<std::size_t>(node)].feature >= 0) {
        const TreeNode& n = nodes[static_cast<std::size_t>(node)];
        node = row[static_cast<std::size_t>(n.feature)] < n.threshold ? n.left : n.right;
    }
    return nodes[static_cast<std::size_t>(node)].value;
}

double GBDTModel::predict_raw(const std::vector<double>& row) const {
    double out = base_score;
    for (const auto& tree : trees) out += learning_rate * tree.predict(row);
    return out;
}

namespace {

// L1 soft threshold applied to the gradient sum.
double soft_threshold(double g, double alpha) {
    if (g > alpha) return g - alpha;
    if (g < -alpha) return g + alpha;
    return 0.0;
}

struct SplitChoice {
    double gain = 0.0;
    int feature = -1;
    double threshold = 0.0;
    // Aggregates of the left side, for child statistics.
    double left_grad = 0.0;
    std::int64_t left_count = 0;
};

// One growing node: per-feature row orderings plus gradient aggregates.
struct BuildNode {
    std::vector<std::vector<std::int32_t>> order;  // [feature][position] -> row
    double grad_sum = 0.0;
    std::int64_t count = 0;
    int depth = 0;
    int node_index = -1;  // slot in the output tree
    SplitChoice best;
};

double leaf_objective(double grad_sum, std::int64_t count, double l1, double l2) {
    const double t = soft_threshold(grad_sum, l1);
    return t * t / (static_cast<double>(count) + l2);
}

// Exact greedy scan over every feature's sorted ordering. Hessian is the row
// count (squared error). Ties break toward the lowest feature index, then the
// lowest threshold: the scan visits features and thresholds in that order and
// replaces the incumbent only on strictly larger gain.
SplitChoice find_best_split(const BuildNode& node, const std::vector<std::vector<double>>& columns,
                            const GBDTParams& params, const std::vector<double>& grad) {
    SplitChoice best;
    const double parent_obj = leaf_objective(node.grad_sum, node.count, params.l1, params.l2);
    const auto features = static_cast<int>(columns.size());
    for (int f = 0; f < features; ++f) {
        const auto& order = node.order[static_cast<std::size_t>(f)];
        const auto& col = columns[static_cast<std::size_t>(f)];
        double left_grad = 0.0;
        for (std::size_t pos = 0; pos + 1 < order.size(); ++pos) {
            const auto row = static_cast<std::size_t>(order[pos]);
            left_grad += grad[row];
            const double here = col[row];
            const double next = col[static_cast<std::size_t>(order[pos + 1])];
            if (!(here < next)) continue;  // no boundary between equal values
            const auto left_count = static_cast<std::int64_t>(pos) + 1;
            const double right_grad = node.grad_sum - left_grad;
            const std::int64_t right_count = node.count - left_count;
            const double gain = 0.5 * (leaf_objective(left_grad, left_count, params.l1, params.l2) +
                                       leaf_objective(right_grad, right_count, params.l1, params.l2) -
                                       parent_obj);
            if (gain > best.gain) {
                best.gain = gain;
                best.feature = f;
                best.threshold = here + (next - here) / 2.0;
                best.left_grad = left_grad;
                best.left_count = left_count;
            }
        }
    }
    return best;
}

}  // namespace

GBDTModel fit_gbdt_raw(const std::vector<std::vector<double>>& rows, const std::vector<double>& targets,
                       const std::vector<std::string>& feature_names, const GBDTParams& params,
                       std::uint64_t seed) {
    const std::size_t n = rows.size();
    if (n == 0 || targets.size() != n) throw TrainingError("training set empty or misaligned");
    const std::size_t m = feature_names.size();
    if (m == 0) throw TrainingError("feature schema is empty");
    for (const auto& row : rows) {
        if (row.size() != m) throw TrainingError("feature row width does not match schema");
    }
    if (params.n_estimators < 1 || params.num_leaves < 2 || params.max_depth < 1) {
        throw TrainingError("degenerate boosting hyperparameters");
    }
    if (!(params.subsample > 0.0 && params.subsample <= 1.0)) {
        throw TrainingError("subsample must lie in (0, 1]");
    }

    // Column-major copy for cache-friendly split scans.
    std::vector<std::vector<double>> columns(m, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t f = 0; f < m; ++f) columns[f][i] = rows[i][f];
    }

    // Global per-feature orderings, computed once; per-tree orders are stable
    // subsequences, so no re-sorting happens during growth.
    std::vector<std::vector<std::int32_t>> global_order(m, std::vector<std::int32_t>(n));
    for (std::size_t f = 0; f < m; ++f) {
        auto& order = global_order[f];
        std::iota(order.begin(), order.end(), 0);
        const auto& col = columns[f];
        std::sort(order.begin(), order.end(), [&col](std::int32_t a, std::int32_t b) {
            const double va = col[static_cast<std::size_t>(a)];
            const double vb = col[static_cast<std::size_t>(b)];
            if (va != vb) return va < vb;
            return a < b;
        });
    }

    GBDTModel model;
    model.base_score = std::accumulate(targets.begin(), targets.end(), 0.0) / static_cast<double>(n);
    model.learning_rate = params.learning_rate;
    model.feature_names = feature_names;
    model.params = params;

    std::vector<double> pred(n, model.base_score);
    std::vector<double> grad(n);
    std::vector<char> in_sample(n, 1);
    std::mt19937_64 rng(seed);

    const auto sample_count = params.subsample < 1.0
                                  ? std::max<std::size_t>(1, static_cast<std::size_t>(params.subsample * static_cast<double>(n)))
                                  : n;

    for (int t = 0; t < params.n_estimators; ++t) {
        for (std::size_t i = 0; i < n; ++i) grad[i] = pred[i] - targets[i];

        if (sample_count < n) {
            std::fill(in_sample.begin(), in_sample.end(), 0);
            for (const auto idx : sample_indices(rng, n, sample_count)) in_sample[idx] = 1;
        }

        RegressionTree tree;
        tree.nodes.emplace_back();

        BuildNode root;
        root.order.resize(m);
        for (std::size_t f = 0; f < m; ++f) {
            auto& order = root.order[f];
            order.reserve(sample_count);
            for (const auto row : global_order[f]) {
                if (in_sample[static_cast<std::size_t>(row)]) order.push_back(row);
            }
        }
        root.count = static_cast<std::int64_t>(sample_count);
        for (const auto row : root.order[0]) root.grad_sum += grad[static_cast<std::size_t>(row)];
        root.depth = 0;
        root.node_index = 0;
        root.best = find_best_split(root, columns, params, grad);

        // Best-first frontier ordered by gain; node creation order breaks ties.
        const auto frontier_less = [](const BuildNode& a, const BuildNode& b) {
            if (a.best.gain != b.best.gain) return a.best.gain > b.best.gain;
            return a.node_index < b.node_index;
        };
        std::vector<BuildNode> frontier;
        frontier.push_back(std::move(root));
        int leaves = 1;

        while (leaves < params.num_leaves) {
            auto it = std::min_element(frontier.begin(), frontier.end(), frontier_less);
            if (it == frontier.end() || it->best.feature < 0 || !(it->best.gain > 0.0)) break;
            BuildNode node = std::move(*it);
            frontier.erase(it);

            const auto feature = static_cast<std::size_t>(node.best.feature);
            const double threshold = node.best.threshold;
            const auto& col = columns[feature];

            BuildNode left;
            BuildNode right;
            left.order.resize(m);
            right.order.resize(m);
            for (std::size_t f = 0; f < m; ++f) {
                left.order[f].reserve(static_cast<std::size_t>(node.best.left_count));
                right.order[f].reserve(static_cast<std::size_t>(node.count - node.best.left_count));
                for (const auto row : node.order[f]) {
                    if (col[static_cast<std::size_t>(row)] < threshold) {
                        left.order[f].push_back(row);
                    } else {
                        right.order[f].push_back(row);
                    }
                }
            }
            left.grad_sum = node.best.left_grad;
            left.count = node.best.left_count;
            right.grad_sum = node.grad_sum - node.best.left_grad;
            right.count = node.count - node.best.left_count;
            left.depth = right.depth = node.depth + 1;

            auto& parent = tree.nodes[static_cast<std::size_t>(node.node_index)];
            parent.feature = node.best.feature;
            parent.threshold = threshold;
            parent.gain = node.best.gain;
            parent.left = static_cast<int>(tree.nodes.size());
            parent.right = parent.left + 1;
            left.node_index = parent.left;
            right.node_index = parent.right;
            tree.nodes.emplace_back();
            tree.nodes.emplace_back();

            const bool can_go_deeper = left.depth < params.max_depth;
            left.best = can_go_deeper ? find_best_split(left, columns, params, grad) : SplitChoice{};
            right.best = can_go_deeper ? find_best_split(right, columns, params, grad) : SplitChoice{};

            frontier.push_back(std::move(left));
            frontier.push_back(std::move(right));
            ++leaves;
        }

        for (const auto& node : frontier) {
            tree.nodes[static_cast<std::size_t>(node.node_index)].value =
                -soft_threshold(node.grad_sum, params.l1) / (static_cast<double>(node.count) + params.l2);
        }

        for (std::size_t i = 0; i < n; ++i) {
            pred[i] += params.learning_rate * tree.predict(rows[i]);
        }
        model.trees.push_back(std::move(tree));
    }
    return model;
}

}  // namespace coex
