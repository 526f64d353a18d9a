#include "netmatrix/gbt.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <thread>

#include <json.hpp>

namespace netmatrix {

namespace {

void validate_params(const GbtHyperparams& p) {
    if (p.num_rounds < 0) throw std::invalid_argument("num_rounds must be >= 0");
    if (p.max_depth < 1) throw std::invalid_argument("max_depth must be >= 1");
    if (!(p.learning_rate > 0.0 && p.learning_rate <= 1.0)) {
        throw std::invalid_argument("learning_rate must be in (0, 1]");
    }
    if (p.l2_lambda < 0.0) throw std::invalid_argument("l2_lambda must be >= 0");
    if (p.gamma < 0.0) throw std::invalid_argument("gamma must be >= 0");
    if (p.min_child_weight < 0.0) {
        throw std::invalid_argument("min_child_weight must be >= 0");
    }
}

double split_gain(double gl, double hl, double gr, double hr, double g, double h,
                  const GbtHyperparams& p) {
    const double lambda = p.l2_lambda;
    return 0.5 * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda) -
                  g * g / (h + lambda)) -
           p.gamma;
}

double leaf_weight(double g, double h, const GbtHyperparams& p) {
    return -p.learning_rate * g / (h + p.l2_lambda);
}

struct ScanState {
    double grad_sum = 0.0;
    double hess_sum = 0.0;
    double last_value = 0.0;
    uint32_t count = 0;
};

struct GrowNode {
    double grad_sum = 0.0;
    double hess_sum = 0.0;
    std::optional<SplitCandidate> best;
};

// Level-wise exact greedy growth. presort[f] holds example indices ordered
// by feature f ascending (index ascending on ties), computed once per fit.
// position[i] tracks each example's node and ends at its leaf, which the
// caller uses to update scores.
Tree grow_tree(const FeatureMatrix& x,
               const std::vector<std::vector<uint32_t>>& presort,
               std::span<const double> grad, std::span<const double> hess,
               const GbtHyperparams& params, std::vector<int32_t>& position) {
    const size_t n = x.rows;
    Tree tree;
    tree.nodes.emplace_back();

    std::vector<GrowNode> grow(1);
    grow[0].grad_sum = std::accumulate(grad.begin(), grad.end(), 0.0);
    grow[0].hess_sum = std::accumulate(hess.begin(), hess.end(), 0.0);

    std::fill(position.begin(), position.end(), 0);
    std::vector<int32_t> frontier{0};
    std::vector<int32_t> slot_of_node;  // node id -> frontier slot, -1 if settled
    std::vector<ScanState> scan;

    for (int depth = 0; depth < params.max_depth && !frontier.empty(); ++depth) {
        slot_of_node.assign(tree.nodes.size(), -1);
        for (size_t s = 0; s < frontier.size(); ++s) {
            slot_of_node[frontier[s]] = static_cast<int32_t>(s);
            grow[frontier[s]].best.reset();
        }

        // Candidates appear with ascending feature index and, inside one
        // feature, ascending threshold; keeping only strictly better gains
        // makes the tie-break "lowest feature, then lowest threshold".
        for (size_t f = 0; f < x.cols; ++f) {
            scan.assign(frontier.size(), ScanState{});
            for (const uint32_t i : presort[f]) {
                const int32_t slot = slot_of_node[position[i]];
                if (slot < 0) continue;
                ScanState& st = scan[slot];
                const double value = x.at(i, f);
                GrowNode& node = grow[frontier[slot]];
                if (st.count > 0 && value > st.last_value) {
                    const double hl = st.hess_sum;
                    const double hr = node.hess_sum - hl;
                    if (hl >= params.min_child_weight && hr >= params.min_child_weight) {
                        const double gl = st.grad_sum;
                        const double gr = node.grad_sum - gl;
                        const double gain = split_gain(gl, hl, gr, hr, node.grad_sum,
                                                       node.hess_sum, params);
                        if (gain > kMinSplitGain &&
                            (!node.best || gain > node.best->gain)) {
                            node.best = SplitCandidate{
                                static_cast<int32_t>(f),
                                (st.last_value + value) * 0.5, gain, gl, hl};
                        }
                    }
                }
                st.grad_sum += grad[i];
                st.hess_sum += hess[i];
                st.last_value = value;
                ++st.count;
            }
        }

        std::vector<int32_t> next_frontier;
        for (const int32_t nd : frontier) {
            GrowNode& node = grow[nd];
            if (!node.best) {
                tree.nodes[nd].weight =
                    leaf_weight(node.grad_sum, node.hess_sum, params);
                continue;
            }
            const SplitCandidate& c = *node.best;
            const int32_t left = static_cast<int32_t>(tree.nodes.size());
            const int32_t right = left + 1;
            tree.nodes[nd].feature = c.feature;
            tree.nodes[nd].threshold = c.threshold;
            tree.nodes[nd].left = left;
            tree.nodes[nd].right = right;
            tree.nodes.emplace_back();
            tree.nodes.emplace_back();
            grow.resize(tree.nodes.size());
            grow[left].grad_sum = c.left_grad_sum;
            grow[left].hess_sum = c.left_hess_sum;
            grow[right].grad_sum = node.grad_sum - c.left_grad_sum;
            grow[right].hess_sum = node.hess_sum - c.left_hess_sum;
            next_frontier.push_back(left);
            next_frontier.push_back(right);
        }

        if (!next_frontier.empty()) {
            for (size_t i = 0; i < n; ++i) {
                const TreeNode& nd = tree.nodes[position[i]];
                if (nd.is_leaf()) continue;
                position[i] = x.at(i, nd.feature) < nd.threshold ? nd.left : nd.right;
            }
        }
        frontier = std::move(next_frontier);
    }

    for (const int32_t nd : frontier) {
        tree.nodes[nd].weight = leaf_weight(grow[nd].grad_sum, grow[nd].hess_sum, params);
    }
    return tree;
}

}  // namespace

std::optional<SplitCandidate> find_best_split(const FeatureMatrix& x,
                                              std::span<const size_t> node_examples,
                                              std::span<const double> gradients,
                                              std::span<const double> hessians,
                                              const GbtHyperparams& params) {
    double total_grad = 0.0;
    double total_hess = 0.0;
    for (const size_t i : node_examples) {
        total_grad += gradients[i];
        total_hess += hessians[i];
    }

    std::optional<SplitCandidate> best;
    std::vector<size_t> order(node_examples.begin(), node_examples.end());
    for (size_t f = 0; f < x.cols; ++f) {
        std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
            if (x.at(a, f) != x.at(b, f)) return x.at(a, f) < x.at(b, f);
            return a < b;
        });
        double gl = 0.0;
        double hl = 0.0;
        for (size_t pos = 0; pos + 1 <= order.size(); ++pos) {
            const size_t i = order[pos];
            if (pos > 0) {
                const double prev = x.at(order[pos - 1], f);
                const double cur = x.at(i, f);
                if (cur > prev) {
                    const double hr = total_hess - hl;
                    if (hl >= params.min_child_weight &&
                        hr >= params.min_child_weight) {
                        const double gain = split_gain(gl, hl, total_grad - gl, hr,
                                                       total_grad, total_hess, params);
                        if (gain > kMinSplitGain && (!best || gain > best->gain)) {
                            best = SplitCandidate{static_cast<int32_t>(f),
                                                  (prev + cur) * 0.5, gain, gl, hl};
                        }
                    }
                }
            }
            gl += gradients[i];
            hl += hessians[i];
        }
    }
    return best;
}

std::vector<double> softmax(std::span<const double> scores) {
    std::vector<double> probs(scores.size());
    const double max_score = *std::max_element(scores.begin(), scores.end());
    double sum = 0.0;
    for (size_t k = 0; k < scores.size(); ++k) {
        probs[k] = std::exp(scores[k] - max_score);
        sum += probs[k];
    }
    for (double& p : probs) p /= sum;
    return probs;
}

GbtModel fit(const FeatureMatrix& x, std::span<const std::string> labels,
             const GbtHyperparams& params, const FitOptions& options) {
    validate_params(params);
    const size_t n = x.rows;
    if (n == 0) throw EmptyDatasetError("cannot fit on an empty dataset");
    if (labels.size() != n) throw std::invalid_argument("label count mismatch");
    for (const double v : x.values) {
        if (!std::isfinite(v)) {
            throw NonFiniteFeatureError("feature matrix contains a non-finite value");
        }
    }

    GbtModel model;
    model.params = params;
    model.base_score = 0.0;
    {
        std::set<std::string> unique(labels.begin(), labels.end());
        model.label_map.assign(unique.begin(), unique.end());
    }
    const size_t num_classes = model.label_map.size();
    if (num_classes < 2) {
        throw DegenerateLabelsError("need at least 2 distinct labels, got " +
                                    std::to_string(num_classes));
    }

    std::vector<uint32_t> y(n);
    for (size_t i = 0; i < n; ++i) {
        y[i] = static_cast<uint32_t>(
            std::lower_bound(model.label_map.begin(), model.label_map.end(),
                             labels[i]) -
            model.label_map.begin());
    }

    std::vector<std::vector<uint32_t>> presort(x.cols);
    for (size_t f = 0; f < x.cols; ++f) {
        auto& order = presort[f];
        order.resize(n);
        std::iota(order.begin(), order.end(), 0u);
        std::sort(order.begin(), order.end(), [&](uint32_t a, uint32_t b) {
            if (x.at(a, f) != x.at(b, f)) return x.at(a, f) < x.at(b, f);
            return a < b;
        });
    }

    std::vector<double> scores(n * num_classes, model.base_score);
    std::vector<double> probs(n * num_classes);
    std::vector<double> grad(n);
    std::vector<double> hess(n);
    std::vector<int32_t> position(n);
    model.trees.reserve(static_cast<size_t>(params.num_rounds) * num_classes);

    for (int round = 0; round < params.num_rounds; ++round) {
        for (size_t i = 0; i < n; ++i) {
            const auto row_probs =
                softmax(std::span(&scores[i * num_classes], num_classes));
            std::copy(row_probs.begin(), row_probs.end(), &probs[i * num_classes]);
        }

        // Class trees within one round all derive from the same probability
        // snapshot, so the schedule cannot change the result.
        auto grow_class = [&](size_t k, std::vector<double>& g, std::vector<double>& h,
                              std::vector<int32_t>& pos) -> Tree {
            for (size_t i = 0; i < n; ++i) {
                const double p = probs[i * num_classes + k];
                g[i] = p - (y[i] == k ? 1.0 : 0.0);
                h[i] = p * (1.0 - p);
            }
            return grow_tree(x, presort, g, h, params, pos);
        };

        std::vector<Tree> round_trees(num_classes);
        std::vector<std::vector<int32_t>> round_positions(num_classes);
        if (options.parallel_classes && num_classes > 1) {
            std::vector<std::thread> workers;
            workers.reserve(num_classes);
            for (size_t k = 0; k < num_classes; ++k) {
                workers.emplace_back([&, k] {
                    std::vector<double> g(n), h(n);
                    std::vector<int32_t> pos(n);
                    round_trees[k] = grow_class(k, g, h, pos);
                    round_positions[k] = std::move(pos);
                });
            }
            for (auto& w : workers) w.join();
        } else {
            for (size_t k = 0; k < num_classes; ++k) {
                round_trees[k] = grow_class(k, grad, hess, position);
                round_positions[k] = position;
            }
        }

        for (size_t k = 0; k < num_classes; ++k) {
            const Tree& tree = round_trees[k];
            const auto& pos = round_positions[k];
            for (size_t i = 0; i < n; ++i) {
                scores[i * num_classes + k] += tree.nodes[pos[i]].weight;
            }
            model.trees.push_back(std::move(round_trees[k]));
        }
    }
    return model;
}

GbtModel fit(std::span<const LabeledExample> examples, const GbtHyperparams& params,
             const FitOptions& options) {
    FeatureMatrix x;
    x.rows = examples.size();
    x.cols = kFeatureCount;
    x.values.reserve(x.rows * x.cols);
    std::vector<std::string> labels;
    labels.reserve(examples.size());
    for (const auto& ex : examples) {
        x.values.insert(x.values.end(), ex.features.begin(), ex.features.end());
        labels.push_back(ex.label);
    }
    return fit(x, labels, params, options);
}

std::vector<double> predict_scores(const GbtModel& model, std::span<const double> x) {
    const size_t num_classes = model.num_classes();
    std::vector<double> scores(num_classes, model.base_score);
    for (size_t t = 0; t < model.trees.size(); ++t) {
        scores[t % num_classes] += model.trees[t].leaf_value(x);
    }
    return scores;
}

PredictedDistribution predict_proba(const GbtModel& model, std::span<const double> x) {
    for (const double v : x) {
        if (!std::isfinite(v)) {
            throw NonFiniteFeatureError("prediction input contains a non-finite value");
        }
    }
    return softmax(predict_scores(model, x));
}

const std::string& predict(const GbtModel& model, std::span<const double> x) {
    const auto probs = predict_proba(model, x);
    size_t best = 0;
    for (size_t k = 1; k < probs.size(); ++k) {
        if (probs[k] > probs[best]) best = k;
    }
    return model.label_map[best];
}

std::vector<double> predict_scores_batch(const GbtModel& model,
                                         const FeatureMatrix& x) {
    const size_t num_classes = model.num_classes();
    std::vector<double> scores(x.rows * num_classes, model.base_score);
    for (size_t t = 0; t < model.trees.size(); ++t) {
        const Tree& tree = model.trees[t];
        const size_t k = t % num_classes;
        for (size_t i = 0; i < x.rows; ++i) {
            scores[i * num_classes + k] +=
                tree.leaf_value(std::span(&x.values[i * x.cols], x.cols));
        }
    }
    return scores;
}

std::vector<size_t> predict_batch(const GbtModel& model, const FeatureMatrix& x) {
    const size_t num_classes = model.num_classes();
    const auto scores = predict_scores_batch(model, x);
    std::vector<size_t> out(x.rows);
    for (size_t i = 0; i < x.rows; ++i) {
        const double* row = &scores[i * num_classes];
        size_t best = 0;
        for (size_t k = 1; k < num_classes; ++k) {
            if (row[k] > row[best]) best = k;
        }
        out[i] = best;
    }
    return out;
}

namespace {

void append_json_string(std::string& out, const std::string& s) {
    out += '"';
    for (const char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\r': out += "\\r"; break;
            case '\t': out += "\\t"; break;
            default:
                if (static_cast<unsigned char>(c) < 0x20) {
                    char buf[8];
                    std::snprintf(buf, sizeof(buf), "\\u%04x", c);
                    out += buf;
                } else {
                    out += c;
                }
        }
    }
    out += '"';
}

void append_real(std::string& out, double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out += buf;
}

}  // namespace

void save_model(const GbtModel& model, const std::filesystem::path& path) {
    const size_t num_classes = model.num_classes();
    std::string out;
    out.reserve(4096 + model.trees.size() * 256);

    out += "{\n  \"format_version\": 1,\n  \"label_map\": [";
    for (size_t k = 0; k < model.label_map.size(); ++k) {
        if (k > 0) out += ", ";
        append_json_string(out, model.label_map[k]);
    }
    out += "],\n  \"hyperparams\": {";
    char buf[96];
    std::snprintf(buf, sizeof(buf), "\"num_rounds\": %d, \"max_depth\": %d, ",
                  model.params.num_rounds, model.params.max_depth);
    out += buf;
    out += "\"learning_rate\": ";
    append_real(out, model.params.learning_rate);
    out += ", \"l2_lambda\": ";
    append_real(out, model.params.l2_lambda);
    out += ", \"gamma\": ";
    append_real(out, model.params.gamma);
    out += ", \"min_child_weight\": ";
    append_real(out, model.params.min_child_weight);
    std::snprintf(buf, sizeof(buf), ", \"seed\": %" PRIu64 "},\n",
                  model.params.seed);
    out += buf;
    out += "  \"base_score\": ";
    append_real(out, model.base_score);
    out += ",\n  \"trees\": [";

    for (size_t t = 0; t < model.trees.size(); ++t) {
        if (t > 0) out += ',';
        std::snprintf(buf, sizeof(buf),
                      "\n    {\"round\": %zu, \"class_index\": %zu, \"nodes\": [",
                      t / num_classes, t % num_classes);
        out += buf;
        const auto& nodes = model.trees[t].nodes;
        for (size_t id = 0; id < nodes.size(); ++id) {
            if (id > 0) out += ',';
            const TreeNode& node = nodes[id];
            if (node.is_leaf()) {
                std::snprintf(buf, sizeof(buf), "\n      {\"id\": %zu, \"weight\": ", id);
                out += buf;
                append_real(out, node.weight);
                out += '}';
            } else {
                std::snprintf(buf, sizeof(buf),
                              "\n      {\"id\": %zu, \"feature\": %d, \"threshold\": ",
                              id, node.feature);
                out += buf;
                append_real(out, node.threshold);
                std::snprintf(buf, sizeof(buf), ", \"left\": %d, \"right\": %d}",
                              node.left, node.right);
                out += buf;
            }
        }
        out += "\n    ]}";
    }
    out += "\n  ]\n}\n";

    std::ofstream file(path, std::ios::binary);
    if (!file) throw ModelFormatError("cannot open for writing: " + path.string());
    file << out;
    if (!file) throw ModelFormatError("write failed: " + path.string());
}

GbtModel load_model(const std::filesystem::path& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) throw ModelFormatError("cannot open model file: " + path.string());

    nlohmann::json doc;
    try {
        file >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw ModelFormatError("model file is not valid JSON: " + std::string(e.what()));
    }

    try {
        if (doc.at("format_version").get<int>() != 1) {
            throw ModelFormatError("unsupported model format version");
        }
        GbtModel model;
        model.label_map = doc.at("label_map").get<std::vector<std::string>>();
        const auto& hp = doc.at("hyperparams");
        model.params.num_rounds = hp.at("num_rounds").get<int>();
        model.params.max_depth = hp.at("max_depth").get<int>();
        model.params.learning_rate = hp.at("learning_rate").get<double>();
        model.params.l2_lambda = hp.at("l2_lambda").get<double>();
        model.params.gamma = hp.at("gamma").get<double>();
        model.params.min_child_weight = hp.at("min_child_weight").get<double>();
        model.params.seed = hp.at("seed").get<uint64_t>();
        model.base_score = doc.at("base_score").get<double>();

        const size_t num_classes = model.label_map.size();
        if (num_classes < 2) throw ModelFormatError("label_map needs >= 2 classes");

        const auto& trees = doc.at("trees");
        model.trees.reserve(trees.size());
        for (size_t t = 0; t < trees.size(); ++t) {
            const auto& jt = trees[t];
            if (jt.at("round").get<size_t>() != t / num_classes ||
                jt.at("class_index").get<size_t>() != t % num_classes) {
                throw ModelFormatError("trees are not in round-major order");
            }
            Tree tree;
            const auto& jnodes = jt.at("nodes");
            tree.nodes.resize(jnodes.size());
            for (size_t id = 0; id < jnodes.size(); ++id) {
                const auto& jn = jnodes[id];
                if (jn.at("id").get<size_t>() != id) {
                    throw ModelFormatError("node ids must match array indices");
                }
                TreeNode& node = tree.nodes[id];
                if (jn.contains("feature")) {
                    node.feature = jn.at("feature").get<int32_t>();
                    node.threshold = jn.at("threshold").get<double>();
                    node.left = jn.at("left").get<int32_t>();
                    node.right = jn.at("right").get<int32_t>();
                    if (node.feature < 0 || node.left < 0 || node.right < 0 ||
                        static_cast<size_t>(node.left) >= jnodes.size() ||
                        static_cast<size_t>(node.right) >= jnodes.size()) {
                        throw ModelFormatError("node references out of range");
                    }
                } else {
                    node.weight = jn.at("weight").get<double>();
                }
            }
            if (tree.nodes.empty()) throw ModelFormatError("tree with no nodes");
            model.trees.push_back(std::move(tree));
        }
        if (model.trees.size() !=
            static_cast<size_t>(model.params.num_rounds) * num_classes) {
            throw ModelFormatError("tree count does not match num_rounds * classes");
        }
        return model;
    } catch (const nlohmann::json::exception& e) {
        throw ModelFormatError("malformed model document: " + std::string(e.what()));
    }
}

}  // namespace netmatrix
