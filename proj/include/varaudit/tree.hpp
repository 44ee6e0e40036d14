#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "data.hpp"
#include "random.hpp"

namespace varaudit {

enum class SplitCriterion { Gini, Entropy };

struct TreeParams {
    std::size_t max_depth = 0;     // 0: unlimited
    std::size_t min_leaf = 1;      // minimum rows on each side of a split
    std::size_t max_features = 0;  // features examined per node; 0: all
    SplitCriterion criterion = SplitCriterion::Gini;

    friend bool operator==(const TreeParams&, const TreeParams&) = default;
};

struct TreeNode {
    std::int32_t feature = -1;  // -1 marks a leaf
    double threshold = 0.0;     // rows with x[feature] <= threshold go left
    std::uint32_t left = 0;
    std::uint32_t right = 0;
    double value = 0.0;  // fraction of class-1 rows reaching the node

    bool is_leaf() const noexcept { return feature < 0; }
    friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

struct TreeModel {
    std::vector<TreeNode> nodes;  // nodes[0] is the root
    std::size_t depth = 0;

    double predict_proba(std::span<const double> x) const noexcept {
        std::uint32_t i = 0;
        while (!nodes[i].is_leaf())
            i = x[static_cast<std::size_t>(nodes[i].feature)] <= nodes[i].threshold ? nodes[i].left : nodes[i].right;
        return nodes[i].value;
    }

    std::size_t leaf_count() const noexcept {
        return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.is_leaf(); }));
    }

    friend bool operator==(const TreeModel&, const TreeModel&) = default;
};

namespace detail {

inline double impurity(double ones, double total, SplitCriterion c) noexcept {
    if (total <= 0.0) return 0.0;
    const double p1 = ones / total, p0 = 1.0 - p1;
    if (c == SplitCriterion::Gini) return 1.0 - p0 * p0 - p1 * p1;
    double h = 0.0;
    if (p0 > 0.0) h -= p0 * std::log2(p0);
    if (p1 > 0.0) h -= p1 * std::log2(p1);
    return h;
}

class TreeBuilder {
public:
    TreeBuilder(const TabularDataset& data, const TreeParams& params, std::uint64_t seed)
        : data_(data), params_(params), rng_(seed) {}

    TreeModel build() {
        std::vector<std::size_t> rows(data_.size());
        std::iota(rows.begin(), rows.end(), std::size_t{0});
        model_.nodes.emplace_back();
        grow(0, rows, 0);
        return std::move(model_);
    }

private:
    struct Split {
        std::int32_t feature = -1;
        double threshold = 0.0;
        double gain = 0.0;
    };

    void grow(std::uint32_t node, std::vector<std::size_t>& rows, std::size_t depth) {
        model_.depth = std::max(model_.depth, depth);
        std::size_t ones = 0;
        for (std::size_t r : rows) ones += data_.label(r);
        const std::size_t n = rows.size();
        model_.nodes[node].value = static_cast<double>(ones) / static_cast<double>(n);

        if (ones == 0 || ones == n) return;
        if (params_.max_depth != 0 && depth >= params_.max_depth) return;
        if (n < 2 * std::max<std::size_t>(params_.min_leaf, 1)) return;

        const Split best = find_split(rows, ones);
        if (best.feature < 0) return;

        std::vector<std::size_t> left, right;
        const auto f = static_cast<std::size_t>(best.feature);
        for (std::size_t r : rows) (data_.row(r)[f] <= best.threshold ? left : right).push_back(r);
        rows.clear();
        rows.shrink_to_fit();

        const auto l = static_cast<std::uint32_t>(model_.nodes.size());
        model_.nodes.emplace_back();
        const auto rt = static_cast<std::uint32_t>(model_.nodes.size());
        model_.nodes.emplace_back();
        model_.nodes[node].feature = best.feature;
        model_.nodes[node].threshold = best.threshold;
        model_.nodes[node].left = l;
        model_.nodes[node].right = rt;
        grow(l, left, depth + 1);
        grow(rt, right, depth + 1);
    }

    std::vector<std::size_t> candidate_features() {
        const std::size_t m = data_.num_features();
        std::vector<std::size_t> all(m);
        std::iota(all.begin(), all.end(), std::size_t{0});
        if (params_.max_features == 0 || params_.max_features >= m) return all;
        // Partial Fisher-Yates, then ascending order so tie-breaking stays by index.
        for (std::size_t i = 0; i < params_.max_features; ++i) {
            const std::size_t j = i + static_cast<std::size_t>(rng_.below(m - i));
            std::swap(all[i], all[j]);
        }
        all.resize(params_.max_features);
        std::sort(all.begin(), all.end());
        return all;
    }

    // Highest impurity decrease; ties keep the lowest feature index, then the
    // lowest threshold (features and thresholds are scanned in ascending order
    // and only a strictly larger gain replaces the incumbent).
    Split find_split(const std::vector<std::size_t>& rows, std::size_t ones) {
        const double n = static_cast<double>(rows.size());
        const double parent = impurity(static_cast<double>(ones), n, params_.criterion) * n;
        const std::size_t min_leaf = std::max<std::size_t>(params_.min_leaf, 1);
        Split best;
        std::vector<std::pair<double, std::uint8_t>> column(rows.size());
        for (std::size_t f : candidate_features()) {
            for (std::size_t i = 0; i < rows.size(); ++i) column[i] = {data_.row(rows[i])[f], data_.label(rows[i])};
            std::sort(column.begin(), column.end());
            double left_ones = 0.0;
            for (std::size_t i = 0; i + 1 < column.size(); ++i) {
                left_ones += column[i].second;
                if (column[i].first == column[i + 1].first) continue;
                const std::size_t nl = i + 1, nr = column.size() - nl;
                if (nl < min_leaf || nr < min_leaf) continue;
                const double dl = static_cast<double>(nl), dr = static_cast<double>(nr);
                const double child = impurity(left_ones, dl, params_.criterion) * dl +
                                     impurity(static_cast<double>(ones) - left_ones, dr, params_.criterion) * dr;
                const double gain = parent - child;
                if (gain > best.gain + 1e-12) {
                    double mid = 0.5 * (column[i].first + column[i + 1].first);
                    if (!(mid < column[i + 1].first)) mid = column[i].first;
                    best = {static_cast<std::int32_t>(f), mid, gain};
                }
            }
        }
        return best;
    }

    const TabularDataset& data_;
    const TreeParams& params_;
    Rng rng_;
    TreeModel model_;
};

}  // namespace detail

// Greedy CART growth on impurity decrease. The seed only matters when
// max_features subsamples candidate features.
inline TreeModel fit_tree(const TabularDataset& train, const TreeParams& params, std::uint64_t seed) {
    return detail::TreeBuilder(train, params, seed).build();
}

}  // namespace varaudit
