#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "csv.hpp"
#include "error.hpp"
#include "random.hpp"

namespace varaudit {

// Row-aligned (features, group, label) triples. Immutable after construction.
class TabularDataset {
public:
    TabularDataset() = default;

    TabularDataset(std::vector<double> features, std::size_t num_features, std::vector<std::uint8_t> groups,
                   std::vector<std::uint8_t> labels, std::vector<std::string> feature_names,
                   std::string group_name = "g", std::string label_name = "o")
        : features_(std::move(features)),
          groups_(std::move(groups)),
          labels_(std::move(labels)),
          feature_names_(std::move(feature_names)),
          group_name_(std::move(group_name)),
          label_name_(std::move(label_name)),
          m_(num_features) {
        const std::size_t n = labels_.size();
        if (n < 2) throw SizeError("dataset needs at least 2 rows, got " + std::to_string(n));
        if (groups_.size() != n) throw InputError("group vector length differs from label vector length");
        if (features_.size() != n * m_) throw InputError("feature matrix is not n x m");
        if (feature_names_.size() != m_) throw InputError("feature_names length differs from feature count");
        for (std::size_t i = 0; i < n; ++i)
            if (groups_[i] > 1 || labels_[i] > 1) throw InputError("group and label values must be 0 or 1");
    }

    std::size_t size() const noexcept { return labels_.size(); }
    std::size_t num_features() const noexcept { return m_; }

    std::span<const double> row(std::size_t i) const noexcept { return {features_.data() + i * m_, m_}; }
    std::uint8_t group(std::size_t i) const noexcept { return groups_[i]; }
    std::uint8_t label(std::size_t i) const noexcept { return labels_[i]; }

    std::span<const double> features() const noexcept { return features_; }
    std::span<const std::uint8_t> groups() const noexcept { return groups_; }
    std::span<const std::uint8_t> labels() const noexcept { return labels_; }
    const std::vector<std::string>& feature_names() const noexcept { return feature_names_; }
    const std::string& group_name() const noexcept { return group_name_; }
    const std::string& label_name() const noexcept { return label_name_; }

    // Rows in `indices` order; repeats allowed (bootstrap multisets).
    TabularDataset subset(std::span<const std::size_t> indices) const {
        std::vector<double> f;
        f.reserve(indices.size() * m_);
        std::vector<std::uint8_t> g, o;
        g.reserve(indices.size());
        o.reserve(indices.size());
        for (std::size_t i : indices) {
            if (i >= size()) throw InputError("row index " + std::to_string(i) + " out of range");
            auto r = row(i);
            f.insert(f.end(), r.begin(), r.end());
            g.push_back(groups_[i]);
            o.push_back(labels_[i]);
        }
        return TabularDataset(std::move(f), m_, std::move(g), std::move(o), feature_names_, group_name_, label_name_);
    }

    // Features first, then group, then label; the inverse of load_csv.
    RawTable to_table() const {
        RawTable t;
        t.header = feature_names_;
        t.header.push_back(group_name_);
        t.header.push_back(label_name_);
        for (std::size_t i = 0; i < size(); ++i) {
            std::vector<std::string> cells;
            cells.reserve(m_ + 2);
            for (double v : row(i)) cells.push_back(csv::format_double(v));
            cells.push_back(std::to_string(groups_[i]));
            cells.push_back(std::to_string(labels_[i]));
            t.rows.push_back(std::move(cells));
        }
        return t;
    }

    std::string to_csv() const {
        const RawTable t = to_table();
        std::string out = csv::join(t.header) + "\n";
        for (const auto& r : t.rows) out += csv::join(r) + "\n";
        return out;
    }

    friend bool operator==(const TabularDataset&, const TabularDataset&) = default;

private:
    std::vector<double> features_;
    std::vector<std::uint8_t> groups_;
    std::vector<std::uint8_t> labels_;
    std::vector<std::string> feature_names_;
    std::string group_name_;
    std::string label_name_;
    std::size_t m_ = 0;
};

// ---------------------------------------------------------------------------
// Preprocessing recipes

enum class Mapped { Zero, One, Drop };
enum class FeatureDirective { Numeric, OneHot, Drop };

// Maps raw cell text of one column to {0, 1, drop}. Either an explicit value
// table (with an optional `otherwise` fallback) or a numeric threshold
// (value >= threshold -> 1).
struct ValueRule {
    std::string column;
    std::map<std::string, Mapped> values;
    std::optional<Mapped> otherwise;
    std::optional<double> threshold;

    Mapped apply(const std::string& raw, std::size_t row) const {
        if (threshold) {
            auto v = csv::parse_double(raw);
            if (!v || !std::isfinite(*v))
                throw RecipeError("value '" + raw + "' in column '" + column + "' (row " + std::to_string(row) +
                                  ") is not numeric for threshold rule");
            return *v >= *threshold ? Mapped::One : Mapped::Zero;
        }
        auto it = values.find(trim(raw));
        if (it != values.end()) return it->second;
        if (otherwise) return *otherwise;
        throw RecipeError("value '" + raw + "' in column '" + column + "' (row " + std::to_string(row) +
                          ") is not covered by the recipe");
    }

    void validate(const char* role) const {
        if (column.empty()) throw RecipeError(std::string(role) + " rule has no column");
        if (threshold) return;
        bool zero = otherwise == Mapped::Zero, one = otherwise == Mapped::One;
        for (const auto& [k, v] : values) {
            zero |= v == Mapped::Zero;
            one |= v == Mapped::One;
        }
        if (!zero || !one)
            throw RecipeError(std::string(role) + " rule must map at least one value to 0 and one to 1");
    }

    static std::string trim(const std::string& s) {
        auto b = s.find_first_not_of(" \t");
        if (b == std::string::npos) return {};
        auto e = s.find_last_not_of(" \t");
        return s.substr(b, e - b + 1);
    }

    static ValueRule binary(std::string column) {
        ValueRule r;
        r.column = std::move(column);
        r.values = {{"0", Mapped::Zero}, {"1", Mapped::One}, {"0.0", Mapped::Zero}, {"1.0", Mapped::One}};
        return r;
    }
};

struct PrepRecipe {
    ValueRule target_rule;
    ValueRule group_rule;
    std::map<std::string, FeatureDirective> feature_rules;
    FeatureDirective default_feature = FeatureDirective::Numeric;
    bool drop_missing = false;
    // Output names for the binarized columns; default to the source names.
    std::optional<std::string> target_name;
    std::optional<std::string> group_name;

    static PrepRecipe identity(std::string target, std::string group) {
        PrepRecipe r;
        r.target_rule = ValueRule::binary(std::move(target));
        r.group_rule = ValueRule::binary(std::move(group));
        return r;
    }
};

// Column roles for plain CSV ingestion.
struct Schema {
    std::string target;
    std::string group;
    std::vector<std::string> features;  // empty: every other column
    bool drop_missing = false;
};

inline bool is_missing(const std::string& cell) {
    const std::string t = ValueRule::trim(cell);
    return t.empty() || t == "NA" || t == "N/A" || t == "?" || t == "null" || t == "NULL";
}

namespace detail {

inline Mapped parse_mapped(const nlohmann::json& j) {
    if (j.is_string() && j.get<std::string>() == "drop") return Mapped::Drop;
    if (j.is_number_integer() || j.is_number_unsigned()) {
        auto v = j.get<long long>();
        if (v == 0) return Mapped::Zero;
        if (v == 1) return Mapped::One;
    }
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "0") return Mapped::Zero;
        if (s == "1") return Mapped::One;
    }
    throw RecipeError("mapping target must be 0, 1 or \"drop\", got " + j.dump());
}

inline ValueRule parse_rule(const nlohmann::json& j, const char* role) {
    if (!j.is_object()) throw RecipeError(std::string(role) + " rule must be an object");
    ValueRule r;
    r.column = j.value("column", std::string{});
    if (j.contains("threshold")) r.threshold = j.at("threshold").get<double>();
    if (j.contains("map")) {
        for (const auto& [raw, target] : j.at("map").items()) {
            const std::string key = ValueRule::trim(raw);
            if (r.values.count(key)) throw RecipeError("value '" + key + "' mapped twice in " + role + " rule");
            r.values.emplace(key, parse_mapped(target));
        }
    }
    // Shorthand: lists of raw values per outcome.
    for (const auto& [name, outcome] :
         {std::pair{"zero", Mapped::Zero}, std::pair{"one", Mapped::One}, std::pair{"drop", Mapped::Drop}}) {
        if (!j.contains(name)) continue;
        for (const auto& v : j.at(name)) {
            const std::string key = ValueRule::trim(v.is_string() ? v.get<std::string>() : v.dump());
            if (r.values.count(key)) throw RecipeError("value '" + key + "' mapped twice in " + role + " rule");
            r.values.emplace(key, outcome);
        }
    }
    if (j.contains("otherwise")) r.otherwise = parse_mapped(j.at("otherwise"));
    if (r.threshold && !r.values.empty()) throw RecipeError(std::string(role) + " rule mixes threshold and map");
    r.validate(role);
    return r;
}

inline FeatureDirective parse_directive(const std::string& s) {
    if (s == "numeric") return FeatureDirective::Numeric;
    if (s == "one-hot" || s == "onehot" || s == "one_hot") return FeatureDirective::OneHot;
    if (s == "drop") return FeatureDirective::Drop;
    throw RecipeError("unknown feature directive '" + s + "'");
}

}  // namespace detail

// Recipe document:
//   { "target": {"column": "...", "map": {"1": 1, "3": 0, "4": "drop"}},
//     "group":  {"column": "...", "one": ["5"], "zero": ["1","2"], "otherwise": "drop"},
//     "features": {"purpose": "one-hot", "id": "drop"},
//     "default_feature": "numeric", "drop_missing": true }
inline PrepRecipe recipe_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw RecipeError("recipe must be a JSON object");
    PrepRecipe r;
    r.target_rule = detail::parse_rule(j.at("target"), "target");
    r.group_rule = detail::parse_rule(j.at("group"), "group");
    if (j.contains("features"))
        for (const auto& [col, d] : j.at("features").items())
            r.feature_rules.emplace(col, detail::parse_directive(d.get<std::string>()));
    if (j.contains("default_feature"))
        r.default_feature = detail::parse_directive(j.at("default_feature").get<std::string>());
    r.drop_missing = j.value("drop_missing", false);
    if (j.at("target").contains("name")) r.target_name = j.at("target").at("name").get<std::string>();
    if (j.at("group").contains("name")) r.group_name = j.at("group").at("name").get<std::string>();
    if (r.target_rule.column == r.group_rule.column) throw RecipeError("target and group use the same column");
    return r;
}

inline PrepRecipe load_recipe(const std::string& path) {
    try {
        return recipe_from_json(nlohmann::json::parse(csv::read_file(path)));
    } catch (const nlohmann::json::exception& e) {
        throw RecipeError("recipe '" + path + "': " + e.what());
    }
}

// Binarizes target and group, expands one-hot columns, drops rows mapped to
// drop (and rows with missing features when drop_missing is set).
inline TabularDataset apply_recipe(const RawTable& raw, const PrepRecipe& recipe,
                                   const std::vector<std::string>* feature_subset = nullptr) {
    recipe.target_rule.validate("target");
    recipe.group_rule.validate("group");
    auto require = [&](const std::string& name) {
        auto idx = raw.column_index(name);
        if (!idx) throw SchemaError("column '" + name + "' not found in header");
        return *idx;
    };
    const std::size_t target_col = require(recipe.target_rule.column);
    const std::size_t group_col = require(recipe.group_rule.column);
    for (const auto& [col, d] : recipe.feature_rules) require(col);

    struct Source {
        std::size_t col;
        FeatureDirective directive;
    };
    std::vector<Source> sources;
    if (feature_subset && !feature_subset->empty()) {
        for (const auto& name : *feature_subset) {
            const std::size_t c = require(name);
            if (c == target_col || c == group_col)
                throw SchemaError("column '" + name + "' cannot be both a feature and target/group");
            auto it = recipe.feature_rules.find(name);
            sources.push_back({c, it == recipe.feature_rules.end() ? recipe.default_feature : it->second});
        }
    } else {
        for (std::size_t c = 0; c < raw.header.size(); ++c) {
            if (c == target_col || c == group_col) continue;
            auto it = recipe.feature_rules.find(raw.header[c]);
            sources.push_back({c, it == recipe.feature_rules.end() ? recipe.default_feature : it->second});
        }
    }
    std::erase_if(sources, [](const Source& s) { return s.directive == FeatureDirective::Drop; });

    // Pass 1: decide which rows survive.
    std::vector<std::size_t> kept;
    std::vector<std::uint8_t> groups, labels;
    for (std::size_t r = 0; r < raw.rows.size(); ++r) {
        const auto& row = raw.rows[r];
        const std::size_t line = r + 1;
        const Mapped t = recipe.target_rule.apply(row[target_col], line);
        const Mapped g = recipe.group_rule.apply(row[group_col], line);
        if (t == Mapped::Drop || g == Mapped::Drop) continue;
        bool missing = false;
        for (const auto& s : sources) {
            if (is_missing(row[s.col])) {
                if (!recipe.drop_missing)
                    throw ParseError("missing value '" + row[s.col] + "' in feature", line, raw.header[s.col]);
                missing = true;
                break;
            }
        }
        if (missing) continue;
        kept.push_back(r);
        labels.push_back(t == Mapped::One ? 1 : 0);
        groups.push_back(g == Mapped::One ? 1 : 0);
    }
    if (kept.empty()) throw RecipeError("recipe dropped every row");
    if (kept.size() < 2) throw RecipeError("recipe left fewer than 2 rows");

    // Pass 2: feature layout; one-hot levels sorted for determinism.
    std::vector<std::string> names;
    std::vector<std::vector<std::string>> levels(sources.size());
    for (std::size_t s = 0; s < sources.size(); ++s) {
        const auto& name = raw.header[sources[s].col];
        if (sources[s].directive == FeatureDirective::Numeric) {
            names.push_back(name);
            continue;
        }
        std::set<std::string> seen;
        for (std::size_t r : kept) seen.insert(ValueRule::trim(raw.rows[r][sources[s].col]));
        levels[s].assign(seen.begin(), seen.end());
        for (const auto& lvl : levels[s]) names.push_back(name + "=" + lvl);
    }

    const std::size_t m = names.size();
    std::vector<double> features;
    features.reserve(kept.size() * m);
    for (std::size_t r : kept) {
        const auto& row = raw.rows[r];
        for (std::size_t s = 0; s < sources.size(); ++s) {
            const std::string& cell = row[sources[s].col];
            if (sources[s].directive == FeatureDirective::Numeric) {
                auto v = csv::parse_double(cell);
                if (!v) throw ParseError("non-numeric value '" + cell + "'", r + 1, raw.header[sources[s].col]);
                if (!std::isfinite(*v))
                    throw ParseError("non-finite value '" + cell + "'", r + 1, raw.header[sources[s].col]);
                features.push_back(*v);
            } else {
                const std::string t = ValueRule::trim(cell);
                for (const auto& lvl : levels[s]) features.push_back(lvl == t ? 1.0 : 0.0);
            }
        }
    }
    return TabularDataset(std::move(features), m, std::move(groups), std::move(labels), std::move(names),
                          recipe.group_name.value_or(recipe.group_rule.column),
                          recipe.target_name.value_or(recipe.target_rule.column));
}

// Reads a CSV whose target and group columns are already 0/1 and whose
// feature columns are numeric.
inline TabularDataset load_csv(const std::string& path, const Schema& schema) {
    const RawTable raw = csv::read(path);
    if (!raw.column_index(schema.target)) throw SchemaError("target column '" + schema.target + "' not found");
    if (!raw.column_index(schema.group)) throw SchemaError("group column '" + schema.group + "' not found");
    PrepRecipe recipe = PrepRecipe::identity(schema.target, schema.group);
    recipe.drop_missing = schema.drop_missing;
    try {
        return apply_recipe(raw, recipe, &schema.features);
    } catch (const RecipeError& e) {
        throw ParseError(std::string("target/group must be 0 or 1: ") + e.what(), 0, schema.target);
    }
}

// ---------------------------------------------------------------------------
// Train/test splits

struct SplitPlan {
    std::uint64_t seed = 0;
    double test_fraction = 0.2;
    std::size_t split_count = 10;
};

struct SplitIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

// Seeded shuffle of 0..n-1; the first round(test_fraction * n) indices form
// the test set. Both sides are returned in ascending order.
inline SplitIndices split_indices(std::size_t n, const SplitPlan& plan, std::size_t split_index) {
    if (plan.split_count < 1) throw InputError("split_count must be >= 1");
    if (split_index >= plan.split_count)
        throw InputError("split index " + std::to_string(split_index) + " >= split count " +
                         std::to_string(plan.split_count));
    if (!(plan.test_fraction > 0.0 && plan.test_fraction < 1.0))
        throw InputError("test_fraction must lie in (0, 1)");
    const auto n_test = static_cast<std::size_t>(std::llround(plan.test_fraction * static_cast<double>(n)));
    if (n_test == 0 || n_test >= n)
        throw SizeError("split of " + std::to_string(n) + " rows leaves an empty train or test set");

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(derive_seed(plan.seed, split_index));
    shuffle(order, rng);

    SplitIndices out;
    out.test.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
    out.train.assign(order.begin() + static_cast<std::ptrdiff_t>(n_test), order.end());
    std::sort(out.test.begin(), out.test.end());
    std::sort(out.train.begin(), out.train.end());
    return out;
}

inline std::pair<TabularDataset, TabularDataset> train_test_split(const TabularDataset& data, const SplitPlan& plan,
                                                                  std::size_t split_index) {
    const SplitIndices idx = split_indices(data.size(), plan, split_index);
    if (idx.train.size() < 2 || idx.test.size() < 2)
        throw SizeError("each side of a split needs at least 2 rows");
    return {data.subset(idx.train), data.subset(idx.test)};
}

}  // namespace varaudit
