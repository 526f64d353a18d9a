#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "netmatrix/netmatrix.hpp"

namespace netmatrix {

struct DegenerateLabelsError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct EmptyDatasetError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NonFiniteFeatureError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ModelFormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Defaults follow the reference multiclass tree-boosting configuration:
/// exact greedy splits, no subsampling.
struct GbtHyperparams {
    int num_rounds = 100;
    int max_depth = 6;
    double learning_rate = 0.3;
    double l2_lambda = 1.0;
    double gamma = 0.0;
    double min_child_weight = 1.0;
    uint64_t seed = 42;

    bool operator==(const GbtHyperparams&) const = default;
};

/// Gains within numeric noise of zero are treated as zero, so an arbitrarily
/// large l2_lambda really does reject every split.
inline constexpr double kMinSplitGain = 1e-12;

/// Flat tree node: feature < 0 marks a leaf. Internal nodes route
/// x[feature] < threshold to the left child.
struct TreeNode {
    int32_t feature = -1;
    double threshold = 0.0;
    int32_t left = -1;
    int32_t right = -1;
    double weight = 0.0;  // leaf value, learning rate already applied

    bool is_leaf() const { return feature < 0; }
    bool operator==(const TreeNode&) const = default;
};

struct Tree {
    std::vector<TreeNode> nodes;

    double leaf_value(std::span<const double> x) const {
        int32_t idx = 0;
        while (!nodes[idx].is_leaf()) {
            const TreeNode& n = nodes[idx];
            idx = x[n.feature] < n.threshold ? n.left : n.right;
        }
        return nodes[idx].weight;
    }

    bool operator==(const Tree&) const = default;
};

/// Row-major numeric matrix; the generic training entry point below works
/// for any column count, the LabeledExample overload pins it to 15.
struct FeatureMatrix {
    size_t rows = 0;
    size_t cols = 0;
    std::vector<double> values;  // rows * cols

    double at(size_t r, size_t c) const { return values[r * cols + c]; }
};

using PredictedDistribution = std::vector<double>;

/// Additive per-class ensembles, round-major: trees[round * K + class].
struct GbtModel {
    std::vector<std::string> label_map;
    std::vector<Tree> trees;
    GbtHyperparams params;
    double base_score = 0.0;

    size_t num_classes() const { return label_map.size(); }

    bool operator==(const GbtModel&) const = default;
};

struct SplitCandidate {
    int32_t feature = 0;
    double threshold = 0.0;
    double gain = 0.0;
    double left_grad_sum = 0.0;
    double left_hess_sum = 0.0;
};

struct FitOptions {
    bool parallel_classes = false;  // must not change the resulting model
};

/// Exact greedy split search over one node's examples, given per-example
/// feature columns and gradient/hessian pairs. Candidates are the midpoints
/// between distinct consecutive sorted values; ties resolve to the lowest
/// feature index, then the lowest threshold.
std::optional<SplitCandidate> find_best_split(const FeatureMatrix& x,
                                              std::span<const size_t> node_examples,
                                              std::span<const double> gradients,
                                              std::span<const double> hessians,
                                              const GbtHyperparams& params);

/// Second-order multiclass boosting with softmax loss. Deterministic given
/// inputs; FitOptions::parallel_classes only changes the schedule.
GbtModel fit(const FeatureMatrix& x, std::span<const std::string> labels,
             const GbtHyperparams& params, const FitOptions& options = {});
GbtModel fit(std::span<const LabeledExample> examples, const GbtHyperparams& params,
             const FitOptions& options = {});

std::vector<double> predict_scores(const GbtModel& model, std::span<const double> x);
PredictedDistribution predict_proba(const GbtModel& model, std::span<const double> x);
const std::string& predict(const GbtModel& model, std::span<const double> x);

/// Per-class scores for a whole matrix, tree-major for cache locality.
/// Identical sums (bit for bit) to the per-sample path.
std::vector<double> predict_scores_batch(const GbtModel& model, const FeatureMatrix& x);
std::vector<size_t> predict_batch(const GbtModel& model, const FeatureMatrix& x);

/// Model file: format_version 1 JSON; reals carry 17 significant digits so a
/// reload reproduces predictions bit for bit.
void save_model(const GbtModel& model, const std::filesystem::path& path);
GbtModel load_model(const std::filesystem::path& path);

std::vector<double> softmax(std::span<const double> scores);

}  // namespace netmatrix
