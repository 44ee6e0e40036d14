#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "cost.hpp"
#include "data.hpp"
#include "logistic.hpp"
#include "random.hpp"
#include "tree.hpp"

namespace varaudit {

enum class ModelKind { Logistic, Tree, Forest, Constant };

inline std::string to_string(ModelKind k) {
    switch (k) {
        case ModelKind::Logistic: return "logistic";
        case ModelKind::Tree: return "tree";
        case ModelKind::Forest: return "forest";
        case ModelKind::Constant: return "constant";
    }
    return "?";
}

inline ModelKind parse_model_kind(const std::string& s) {
    if (s == "logistic" || s == "lr") return ModelKind::Logistic;
    if (s == "tree" || s == "dt") return ModelKind::Tree;
    if (s == "forest" || s == "rf") return ModelKind::Forest;
    if (s == "constant") return ModelKind::Constant;
    throw ConfigError("unknown model kind '" + s + "'");
}

enum class FeatureSampling { Sqrt, All, Fixed };

struct ForestParams {
    std::size_t trees = 100;
    FeatureSampling sampling = FeatureSampling::Sqrt;
    std::size_t max_features = 0;  // used when sampling == Fixed
    TreeParams tree{};

    std::size_t features_per_node(std::size_t m) const {
        switch (sampling) {
            case FeatureSampling::All: return m;
            case FeatureSampling::Fixed: return std::min(std::max<std::size_t>(max_features, 1), std::max<std::size_t>(m, 1));
            case FeatureSampling::Sqrt: break;
        }
        return std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(m))));
    }

    friend bool operator==(const ForestParams&, const ForestParams&) = default;
};

// Model family plus hyperparameters, fixed for a whole experiment.
struct ModelSpec {
    ModelKind kind = ModelKind::Logistic;
    LogisticParams logistic{};
    TreeParams tree{};
    ForestParams forest{};

    friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

struct ConstantModel {
    double probability = 0.0;
    friend bool operator==(const ConstantModel&, const ConstantModel&) = default;
};

struct ForestModel {
    std::vector<TreeModel> trees;

    double predict_proba(std::span<const double> x) const noexcept {
        double s = 0.0;
        for (const auto& t : trees) s += t.predict_proba(x);
        return s / static_cast<double>(trees.size());
    }

    friend bool operator==(const ForestModel&, const ForestModel&) = default;
};

class TrainedModel {
public:
    using Parameters = std::variant<LogisticModel, TreeModel, ForestModel, ConstantModel>;

    TrainedModel(Parameters params, std::size_t num_features)
        : params_(std::move(params)), num_features_(num_features) {}

    ModelKind kind() const noexcept {
        switch (params_.index()) {
            case 0: return ModelKind::Logistic;
            case 1: return ModelKind::Tree;
            case 2: return ModelKind::Forest;
            default: return ModelKind::Constant;
        }
    }

    const Parameters& parameters() const noexcept { return params_; }
    std::size_t num_features() const noexcept { return num_features_; }

    friend bool operator==(const TrainedModel&, const TrainedModel&) = default;

private:
    Parameters params_;
    std::size_t num_features_;
};

inline double predict_proba(const TrainedModel& model, std::span<const double> x) {
    if (x.size() != model.num_features())
        throw InputError("feature row has " + std::to_string(x.size()) + " values, model expects " +
                         std::to_string(model.num_features()));
    const double p = std::visit(
        [&](const auto& m) -> double {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, ConstantModel>)
                return m.probability;
            else
                return m.predict_proba(x);
        },
        model.parameters());
    return std::clamp(p, 0.0, 1.0);
}

// 1[proba >= tau]; the comparison is inclusive.
inline std::uint8_t predict_label(const TrainedModel& model, std::span<const double> x, const CostModel& costs) {
    return predict_proba(model, x) >= cost_threshold(costs) ? 1 : 0;
}

// Seed of tree `t` inside a forest fitted with `seed`; it drives both the
// tree's row bootstrap and its feature sampling.
inline std::uint64_t forest_tree_seed(std::uint64_t seed, std::size_t t) noexcept { return derive_seed(seed, t); }

inline ForestModel fit_forest(const TabularDataset& train, const ForestParams& params, std::uint64_t seed) {
    if (params.trees == 0) throw ConfigError("forest needs at least one tree");
    TreeParams tp = params.tree;
    tp.max_features = params.features_per_node(train.num_features());
    ForestModel forest;
    forest.trees.reserve(params.trees);
    for (std::size_t t = 0; t < params.trees; ++t) {
        const std::uint64_t ts = forest_tree_seed(seed, t);
        Rng rng(ts);
        const auto rows = resample_indices(train.size(), train.size(), rng);
        forest.trees.push_back(fit_tree(train.subset(rows), tp, ts));
    }
    return forest;
}

// Trains one model. Deterministic in (spec, train, seed). A training set with a
// single class yields a constant model.
inline TrainedModel fit(const ModelSpec& spec, const TabularDataset& train, std::uint64_t seed) {
    for (double v : train.features())
        if (!std::isfinite(v)) throw InputError("training features contain a non-finite value");
    std::size_t ones = 0;
    for (auto o : train.labels()) ones += o;
    const std::size_t m = train.num_features();
    if (spec.kind == ModelKind::Constant || ones == 0 || ones == train.size())
        return TrainedModel(ConstantModel{static_cast<double>(ones) / static_cast<double>(train.size())}, m);
    switch (spec.kind) {
        case ModelKind::Logistic: return TrainedModel(fit_logistic(train, spec.logistic), m);
        case ModelKind::Tree: return TrainedModel(fit_tree(train, spec.tree, seed), m);
        case ModelKind::Forest: return TrainedModel(fit_forest(train, spec.forest, seed), m);
        case ModelKind::Constant: break;
    }
    throw ConfigError("unsupported model kind");
}

// ---------------------------------------------------------------------------
// JSON

namespace detail {

inline nlohmann::json tree_params_json(const TreeParams& p) {
    return {{"max_depth", p.max_depth},
            {"min_leaf", p.min_leaf},
            {"max_features", p.max_features},
            {"criterion", p.criterion == SplitCriterion::Gini ? "gini" : "entropy"}};
}

inline TreeParams parse_tree_params(const nlohmann::json& j, TreeParams p = {}) {
    p.max_depth = j.value("max_depth", p.max_depth);
    p.min_leaf = j.value("min_leaf", p.min_leaf);
    if (j.contains("max_features") && j.at("max_features").is_number_unsigned())
        p.max_features = j.at("max_features").get<std::size_t>();
    const std::string c = j.value("criterion", std::string(p.criterion == SplitCriterion::Gini ? "gini" : "entropy"));
    if (c == "gini")
        p.criterion = SplitCriterion::Gini;
    else if (c == "entropy")
        p.criterion = SplitCriterion::Entropy;
    else
        throw ConfigError("unknown split criterion '" + c + "'");
    if (p.min_leaf == 0) throw ConfigError("min_leaf must be >= 1");
    return p;
}

}  // namespace detail

inline nlohmann::json to_json(const ModelSpec& s) {
    nlohmann::json j = {{"kind", to_string(s.kind)}};
    switch (s.kind) {
        case ModelKind::Logistic:
            j["max_iters"] = s.logistic.max_iters;
            j["tolerance"] = s.logistic.tolerance;
            j["l2"] = s.logistic.l2;
            break;
        case ModelKind::Tree: j.update(detail::tree_params_json(s.tree)); break;
        case ModelKind::Forest: {
            j["trees"] = s.forest.trees;
            switch (s.forest.sampling) {
                case FeatureSampling::Sqrt: j["max_features"] = "sqrt"; break;
                case FeatureSampling::All: j["max_features"] = "all"; break;
                case FeatureSampling::Fixed: j["max_features"] = s.forest.max_features; break;
            }
            auto t = detail::tree_params_json(s.forest.tree);
            t.erase("max_features");
            j["tree"] = t;
            break;
        }
        case ModelKind::Constant: break;
    }
    return j;
}

inline ModelSpec model_spec_from_json(const nlohmann::json& j) {
    ModelSpec s;
    if (j.is_string()) {
        s.kind = parse_model_kind(j.get<std::string>());
        return s;
    }
    s.kind = parse_model_kind(j.at("kind").get<std::string>());
    s.logistic.max_iters = j.value("max_iters", s.logistic.max_iters);
    s.logistic.tolerance = j.value("tolerance", s.logistic.tolerance);
    s.logistic.l2 = j.value("l2", s.logistic.l2);
    if (s.logistic.l2 < 0.0) throw ConfigError("l2 must be >= 0");
    if (s.kind == ModelKind::Tree) s.tree = detail::parse_tree_params(j);
    if (s.kind == ModelKind::Forest) {
        s.forest.trees = j.value("trees", s.forest.trees);
        if (s.forest.trees == 0) throw ConfigError("forest needs at least one tree");
        if (j.contains("max_features")) {
            const auto& mf = j.at("max_features");
            if (mf.is_string() && mf.get<std::string>() == "sqrt")
                s.forest.sampling = FeatureSampling::Sqrt;
            else if (mf.is_string() && mf.get<std::string>() == "all")
                s.forest.sampling = FeatureSampling::All;
            else if (mf.is_number_unsigned()) {
                s.forest.sampling = FeatureSampling::Fixed;
                s.forest.max_features = mf.get<std::size_t>();
            } else
                throw ConfigError("max_features must be \"sqrt\", \"all\" or a positive integer");
        }
        if (j.contains("tree")) s.forest.tree = detail::parse_tree_params(j.at("tree"));
    }
    return s;
}

// Debug dump; the layout is not a stable format.
inline nlohmann::json to_json(const TrainedModel& model) {
    auto tree_json = [](const TreeModel& t) {
        nlohmann::json nodes = nlohmann::json::array();
        for (const auto& n : t.nodes)
            nodes.push_back({{"feature", n.feature}, {"threshold", n.threshold}, {"left", n.left}, {"right", n.right},
                             {"value", n.value}});
        return nlohmann::json{{"depth", t.depth}, {"nodes", nodes}};
    };
    nlohmann::json j = {{"kind", to_string(model.kind())}, {"num_features", model.num_features()}};
    std::visit(
        [&](const auto& m) {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, LogisticModel>) {
                j["weights"] = m.weights;
                j["intercept"] = m.intercept;
                j["iterations"] = m.iterations;
                j["converged"] = m.converged;
            } else if constexpr (std::is_same_v<T, TreeModel>) {
                j["tree"] = tree_json(m);
            } else if constexpr (std::is_same_v<T, ForestModel>) {
                j["trees"] = nlohmann::json::array();
                for (const auto& t : m.trees) j["trees"].push_back(tree_json(t));
            } else {
                j["probability"] = m.probability;
            }
        },
        model.parameters());
    return j;
}

}  // namespace varaudit
