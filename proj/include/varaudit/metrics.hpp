#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bootstrap.hpp"
#include "cost.hpp"
#include "error.hpp"

namespace varaudit {

// One replicate's output on one instance. Abstain only arises from
// abstaining ensembles.
enum class Vote : std::uint8_t { Zero = 0, One = 1, Abstain = 2 };

struct VoteCount {
    std::size_t b0 = 0;
    std::size_t b1 = 0;
    std::size_t b_abstain = 0;

    std::size_t total() const noexcept { return b0 + b1 + b_abstain; }
    friend bool operator==(const VoteCount&, const VoteCount&) = default;
};

inline VoteCount vote_count(std::span<const Vote> column) {
    if (column.size() < 2) throw DomainError("self-consistency needs at least 2 votes, got " + std::to_string(column.size()));
    VoteCount v;
    for (Vote x : column) {
        switch (x) {
            case Vote::Zero: ++v.b0; break;
            case Vote::One: ++v.b1; break;
            case Vote::Abstain: ++v.b_abstain; break;
        }
    }
    return v;
}

inline VoteCount vote_count(std::span<const std::uint8_t> labels) {
    if (labels.size() < 2) throw DomainError("self-consistency needs at least 2 votes, got " + std::to_string(labels.size()));
    VoteCount v;
    for (auto x : labels) (x ? v.b1 : v.b0)++;
    return v;
}

// Mean pairwise loss between two distinct replicates:
// (c01 + c10) * b0 * b1 / (B (B - 1)).
inline double variance_estimate(const VoteCount& v, const CostModel& costs) {
    if (v.b_abstain != 0)
        throw DomainError("variance is defined over committed predictions only; use self_consistency for abstentions");
    const std::size_t B = v.total();
    if (B < 2) throw DomainError("variance needs B >= 2");
    const double pairs = static_cast<double>(B) * static_cast<double>(B - 1);
    return (costs.c01() + costs.c10()) * static_cast<double>(v.b0 * v.b1) / pairs;
}

// Probability that two distinct replicates agree: 1 - 2 b0 b1 / (B (B - 1)),
// with B counting abstentions (an abstention agrees with either label).
inline double self_consistency(const VoteCount& v) {
    const std::size_t B = v.total();
    if (B < 2) throw DomainError("self-consistency needs B >= 2");
    return 1.0 - static_cast<double>(2 * v.b0 * v.b1) / (static_cast<double>(B) * static_cast<double>(B - 1));
}

inline std::vector<double> sc_profile(const PredictionMatrix& m) {
    if (m.replicates < 2) throw DomainError("self-consistency needs B >= 2");
    std::vector<double> out(m.instances);
    for (std::size_t t = 0; t < m.instances; ++t) {
        const std::size_t ones = m.ones_in_column(t);
        out[t] = self_consistency({m.replicates - ones, ones, 0});
    }
    return out;
}

// Attainable SC levels for B votes without abstention, ascending. Has
// floor(B/2) + 1 entries.
inline std::vector<double> sc_grid(std::size_t B) {
    if (B < 2) throw DomainError("SC grid needs B >= 2");
    std::vector<double> grid;
    for (std::size_t b0 = B / 2 + 1; b0-- > 0;) grid.push_back(self_consistency({b0, B - b0, 0}));
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    return grid;
}

// ---------------------------------------------------------------------------
// CDFs over the grid

struct SCDistribution {
    std::vector<double> grid;
    std::vector<double> cdf;           // F(k) = fraction with SC <= k, at each grid level
    std::optional<std::uint8_t> group;  // nullopt: all instances
    std::optional<double> mask_below;   // entries at levels < mask_below forced to 0
    std::size_t count = 0;              // instances behind the CDF

    friend bool operator==(const SCDistribution&, const SCDistribution&) = default;
};

struct SCDistributions {
    std::array<SCDistribution, 2> by_group;
    SCDistribution overall;
};

namespace detail {

inline std::size_t grid_position(const std::vector<double>& grid, double sc) {
    constexpr double tol = 1e-9;
    auto it = std::lower_bound(grid.begin(), grid.end(), sc - tol);
    if (it == grid.end() || std::abs(*it - sc) > tol)
        throw ConsistencyError("SC value " + std::to_string(sc) + " is not on the grid for this B");
    return static_cast<std::size_t>(it - grid.begin());
}

inline SCDistribution build_cdf(const std::vector<double>& grid, const std::vector<std::size_t>& positions,
                                std::optional<std::uint8_t> group, std::optional<double> mask_below) {
    SCDistribution d;
    d.grid = grid;
    d.group = group;
    d.mask_below = mask_below;
    d.count = positions.size();
    std::vector<std::size_t> hist(grid.size(), 0);
    for (std::size_t p : positions) ++hist[p];
    d.cdf.resize(grid.size(), 0.0);
    std::size_t cumulative = 0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        cumulative += hist[i];
        d.cdf[i] = d.count ? static_cast<double>(cumulative) / static_cast<double>(d.count) : 0.0;
        if (mask_below && grid[i] < *mask_below) d.cdf[i] = 0.0;
    }
    return d;
}

}  // namespace detail

inline SCDistributions sc_cdf(std::span<const double> profile, std::span<const std::uint8_t> groups, std::size_t B,
                              std::optional<double> mask_below = std::nullopt) {
    if (profile.size() != groups.size()) throw InputError("SC profile and group vector lengths differ");
    const auto grid = sc_grid(B);
    std::array<std::vector<std::size_t>, 2> per_group;
    std::vector<std::size_t> all;
    all.reserve(profile.size());
    for (std::size_t i = 0; i < profile.size(); ++i) {
        const std::size_t p = detail::grid_position(grid, profile[i]);
        if (groups[i] > 1) throw InputError("group values must be 0 or 1");
        per_group[groups[i]].push_back(p);
        all.push_back(p);
    }
    SCDistributions out;
    for (std::uint8_t g = 0; g < 2; ++g) out.by_group[g] = detail::build_cdf(grid, per_group[g], g, mask_below);
    out.overall = detail::build_cdf(grid, all, std::nullopt, mask_below);
    return out;
}

// Mean absolute CDF gap over the shared grid.
inline double wasserstein1(const SCDistribution& d0, const SCDistribution& d1) {
    if (d0.grid != d1.grid || d0.cdf.size() != d0.grid.size() || d1.cdf.size() != d1.grid.size())
        throw InputError("CDFs are not evaluated on the same grid");
    if (d0.mask_below != d1.mask_below) throw InputError("CDFs use different abstention masks");
    if (d0.grid.empty()) throw InputError("empty grid");
    double s = 0.0;
    for (std::size_t i = 0; i < d0.cdf.size(); ++i) s += std::abs(d0.cdf[i] - d1.cdf[i]);
    return s / static_cast<double>(d0.grid.size());
}

// ---------------------------------------------------------------------------
// Group-conditional error metrics

enum class Metric : std::size_t { Err, Fpr, Fnr, Pr, Ar, MeanSc };
inline constexpr std::size_t kMetricCount = 6;
inline constexpr std::array<std::string_view, kMetricCount> kMetricNames{"err", "fpr", "fnr", "pr", "ar", "mean_sc"};

inline std::optional<Metric> parse_metric(std::string_view s) {
    for (std::size_t i = 0; i < kMetricCount; ++i)
        if (kMetricNames[i] == s) return static_cast<Metric>(i);
    return std::nullopt;
}

// Absent entries are undefined (empty conditioning set), never 0.
struct MetricSet {
    std::array<std::optional<double>, kMetricCount> values{};

    std::optional<double>& operator[](Metric m) noexcept { return values[static_cast<std::size_t>(m)]; }
    const std::optional<double>& operator[](Metric m) const noexcept { return values[static_cast<std::size_t>(m)]; }

    friend bool operator==(const MetricSet&, const MetricSet&) = default;
};

struct GroupReport {
    std::array<MetricSet, 2> group;
    MetricSet overall;
    MetricSet delta;  // |group0 - group1| where both are defined

    friend bool operator==(const GroupReport&, const GroupReport&) = default;
};

namespace detail {

inline std::optional<double> ratio(std::size_t num, std::size_t den) {
    if (den == 0) return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
}

struct Tally {
    std::size_t members = 0, abstained = 0, predicted = 0, wrong = 0, predicted_pos = 0;
    std::size_t neg = 0, false_pos = 0, pos = 0, false_neg = 0;
    double sc_sum = 0.0;
    std::size_t sc_count = 0;

    void add(Vote decision, std::uint8_t truth, std::optional<double> sc) {
        ++members;
        if (decision == Vote::Abstain) {
            ++abstained;
            return;
        }
        const std::uint8_t y = decision == Vote::One ? 1 : 0;
        ++predicted;
        predicted_pos += y;
        wrong += y != truth;
        if (truth == 0) {
            ++neg;
            false_pos += y;
        } else {
            ++pos;
            false_neg += 1 - y;
        }
        if (sc) {
            sc_sum += *sc;
            ++sc_count;
        }
    }

    MetricSet metrics() const {
        MetricSet m;
        m[Metric::Err] = ratio(wrong, predicted);
        m[Metric::Fpr] = ratio(false_pos, neg);
        m[Metric::Fnr] = ratio(false_neg, pos);
        m[Metric::Pr] = ratio(predicted_pos, predicted);
        m[Metric::Ar] = ratio(abstained, members);
        if (sc_count) m[Metric::MeanSc] = sc_sum / static_cast<double>(sc_count);
        return m;
    }
};

inline MetricSet deltas(const MetricSet& a, const MetricSet& b) {
    MetricSet d;
    for (std::size_t i = 0; i < kMetricCount; ++i)
        if (a.values[i] && b.values[i]) d.values[i] = std::abs(*a.values[i] - *b.values[i]);
    return d;
}

}  // namespace detail

// Metrics over one set of decisions. Abstained instances count only toward
// AR; err/fpr/fnr/pr are computed over predicted instances; mean_sc averages
// `sc` (when given) over predicted instances.
inline GroupReport group_report(std::span<const Vote> decisions, std::span<const std::uint8_t> labels,
                                std::span<const std::uint8_t> groups, std::span<const double> sc = {}) {
    if (decisions.size() != labels.size() || decisions.size() != groups.size() ||
        (!sc.empty() && sc.size() != decisions.size()))
        throw InputError("group_report inputs are not aligned");
    std::array<detail::Tally, 2> per_group;
    detail::Tally all;
    for (std::size_t i = 0; i < decisions.size(); ++i) {
        if (groups[i] > 1 || labels[i] > 1) throw InputError("group and label values must be 0 or 1");
        const std::optional<double> s = sc.empty() ? std::nullopt : std::optional<double>(sc[i]);
        per_group[groups[i]].add(decisions[i], labels[i], s);
        all.add(decisions[i], labels[i], s);
    }
    GroupReport r;
    for (int g = 0; g < 2; ++g) r.group[g] = per_group[g].metrics();
    r.overall = all.metrics();
    r.delta = detail::deltas(r.group[0], r.group[1]);
    return r;
}

inline std::vector<Vote> to_votes(std::span<const std::uint8_t> labels) {
    std::vector<Vote> v(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) v[i] = labels[i] ? Vote::One : Vote::Zero;
    return v;
}

// Expected single-model behavior: the per-replicate reports averaged over the
// B rows (each metric over the rows where it is defined); mean_sc is the mean
// instance SC of the matrix.
inline GroupReport baseline_report(const PredictionMatrix& m) {
    m.validate();
    const auto sc = sc_profile(m);
    std::array<std::array<double, kMetricCount>, 4> sums{};
    std::array<std::array<std::size_t, kMetricCount>, 4> counts{};
    auto accumulate = [&](std::size_t slot, const MetricSet& ms) {
        for (std::size_t i = 0; i < kMetricCount; ++i)
            if (ms.values[i]) {
                sums[slot][i] += *ms.values[i];
                ++counts[slot][i];
            }
    };
    std::vector<std::uint8_t> row(m.instances);
    for (std::size_t b = 0; b < m.replicates; ++b) {
        for (std::size_t t = 0; t < m.instances; ++t) row[t] = m.label(b, t);
        const auto votes = to_votes(row);
        const GroupReport r = group_report(votes, m.test_labels, m.test_groups);
        accumulate(0, r.group[0]);
        accumulate(1, r.group[1]);
        accumulate(2, r.overall);
    }
    auto finish = [&](std::size_t slot) {
        MetricSet ms;
        for (std::size_t i = 0; i < kMetricCount; ++i)
            if (counts[slot][i]) ms.values[i] = sums[slot][i] / static_cast<double>(counts[slot][i]);
        return ms;
    };
    GroupReport out;
    for (int g = 0; g < 2; ++g) out.group[g] = finish(static_cast<std::size_t>(g));
    out.overall = finish(2);
    std::array<double, 3> sc_sum{};
    std::array<std::size_t, 3> sc_n{};
    for (std::size_t t = 0; t < m.instances; ++t) {
        sc_sum[m.test_groups[t]] += sc[t];
        ++sc_n[m.test_groups[t]];
        sc_sum[2] += sc[t];
        ++sc_n[2];
    }
    for (int g = 0; g < 2; ++g)
        if (sc_n[g]) out.group[g][Metric::MeanSc] = sc_sum[g] / static_cast<double>(sc_n[g]);
    if (sc_n[2]) out.overall[Metric::MeanSc] = sc_sum[2] / static_cast<double>(sc_n[2]);
    out.delta = detail::deltas(out.group[0], out.group[1]);
    return out;
}

}  // namespace varaudit
