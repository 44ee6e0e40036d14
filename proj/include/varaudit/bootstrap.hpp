#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "classifiers.hpp"
#include "cost.hpp"
#include "csv.hpp"
#include "data.hpp"
#include "error.hpp"
#include "parallel.hpp"
#include "random.hpp"

namespace varaudit {

struct ReplicatePlan {
    std::size_t replicate_count = 101;
    std::uint64_t base_seed = 0;
    std::optional<std::size_t> resample_size;  // default: size of the training set

    void validate() const {
        if (replicate_count < 2) throw DomainError("replicate count B must be >= 2, got " + std::to_string(replicate_count));
        if (resample_size && *resample_size < 2) throw SizeError("resample size must be >= 2");
    }
};

inline std::uint64_t replicate_seed(const ReplicatePlan& plan, std::size_t b) noexcept {
    return derive_seed(plan.base_seed, b);
}

// Index multiset of replicate b: resample_size i.i.d. uniform draws from 0..n-1.
inline std::vector<std::size_t> replicate_indices(std::size_t n, const ReplicatePlan& plan, std::size_t b) {
    if (n == 0) throw SizeError("cannot resample an empty training set");
    Rng rng(replicate_seed(plan, b));
    return resample_indices(n, plan.resample_size.value_or(n), rng);
}

inline std::vector<std::vector<std::size_t>> make_replicates(const TabularDataset& train, const ReplicatePlan& plan) {
    plan.validate();
    std::vector<std::vector<std::size_t>> out(plan.replicate_count);
    for (std::size_t b = 0; b < plan.replicate_count; ++b) out[b] = replicate_indices(train.size(), plan, b);
    return out;
}

// Model b of a bootstrap run; build_prediction_matrix row b is this model
// evaluated on the test set.
inline TrainedModel fit_replicate(const TabularDataset& train, const ModelSpec& spec, const ReplicatePlan& plan,
                                  std::size_t b) {
    const auto rows = replicate_indices(train.size(), plan, b);
    return fit(spec, train.subset(rows), derive_seed(replicate_seed(plan, b), 1));
}

// B x T replicate outputs over one test set.
struct PredictionMatrix {
    std::size_t replicates = 0;  // B
    std::size_t instances = 0;   // T
    std::vector<std::uint8_t> labels;        // row-major B x T
    std::vector<double> probabilities;       // row-major B x T
    std::vector<std::uint8_t> test_groups;   // T
    std::vector<std::uint8_t> test_labels;   // T
    CostModel costs{};
    std::vector<std::uint64_t> seeds;        // per-replicate seed, may be empty

    PredictionMatrix() = default;

    PredictionMatrix(std::size_t b, std::size_t t, std::vector<std::uint8_t> groups, std::vector<std::uint8_t> truth,
                     CostModel c)
        : replicates(b), instances(t), labels(b * t, 0), probabilities(b * t, 0.0), test_groups(std::move(groups)),
          test_labels(std::move(truth)), costs(c) {
        if (test_groups.size() != t || test_labels.size() != t)
            throw InputError("group/label vectors do not match the instance count");
    }

    std::uint8_t label(std::size_t b, std::size_t t) const noexcept { return labels[b * instances + t]; }
    double probability(std::size_t b, std::size_t t) const noexcept { return probabilities[b * instances + t]; }

    std::vector<std::uint8_t> column(std::size_t t) const {
        std::vector<std::uint8_t> out(replicates);
        for (std::size_t b = 0; b < replicates; ++b) out[b] = label(b, t);
        return out;
    }

    std::size_t ones_in_column(std::size_t t) const noexcept {
        std::size_t s = 0;
        for (std::size_t b = 0; b < replicates; ++b) s += label(b, t);
        return s;
    }

    double mean_probability(std::size_t t) const noexcept {
        double s = 0.0;
        for (std::size_t b = 0; b < replicates; ++b) s += probability(b, t);
        return s / static_cast<double>(replicates);
    }

    // labels[b][t] == 1[probabilities[b][t] >= tau] everywhere.
    bool threshold_consistent() const noexcept {
        const double tau = cost_threshold(costs);
        for (std::size_t i = 0; i < labels.size(); ++i)
            if (labels[i] != (probabilities[i] >= tau ? 1 : 0)) return false;
        return true;
    }

    void validate() const {
        if (replicates < 2) throw DomainError("prediction matrix needs B >= 2");
        if (labels.size() != replicates * instances || probabilities.size() != replicates * instances)
            throw InputError("prediction matrix storage does not match B x T");
        if (test_groups.size() != instances || test_labels.size() != instances)
            throw InputError("prediction matrix group/label vectors do not match T");
        for (auto v : labels)
            if (v > 1) throw InputError("prediction labels must be 0 or 1");
    }

    friend bool operator==(const PredictionMatrix&, const PredictionMatrix&) = default;
};

inline PredictionMatrix build_prediction_matrix(const TabularDataset& train, const TabularDataset& test,
                                                const ModelSpec& spec, const CostModel& costs,
                                                const ReplicatePlan& plan, std::size_t workers = 1) {
    plan.validate();
    if (train.num_features() != test.num_features())
        throw InputError("train has " + std::to_string(train.num_features()) + " features, test has " +
                         std::to_string(test.num_features()));
    const std::size_t B = plan.replicate_count, T = test.size();
    PredictionMatrix pm(B, T, {test.groups().begin(), test.groups().end()},
                        {test.labels().begin(), test.labels().end()}, costs);
    pm.seeds.resize(B);
    const double tau = cost_threshold(costs);
    parallel_for(B, workers, [&](std::size_t b) {
        try {
            const TrainedModel model = fit_replicate(train, spec, plan, b);
            for (std::size_t t = 0; t < T; ++t) {
                const double p = predict_proba(model, test.row(t));
                pm.probabilities[b * T + t] = p;
                pm.labels[b * T + t] = p >= tau ? 1 : 0;
            }
            pm.seeds[b] = replicate_seed(plan, b);
        } catch (const std::exception& e) {
            throw Error("replicate " + std::to_string(b) + ": " + e.what());
        }
    });
    return pm;
}

// ---------------------------------------------------------------------------
// Expected error: mean loss over the B replicates, per instance and aggregated.

struct ExpectedError {
    std::vector<double> per_instance;
    std::size_t count = 0;  // instances included in the aggregate
    double aggregate = 0.0;
    std::array<std::optional<double>, 2> by_group{};

    friend bool operator==(const ExpectedError&, const ExpectedError&) = default;
};

// Restricted to `instances` when given; per_instance always covers all T.
inline ExpectedError expected_error(const PredictionMatrix& m, const CostModel& costs,
                                    const std::vector<std::size_t>* instances = nullptr) {
    ExpectedError out;
    out.per_instance.resize(m.instances);
    for (std::size_t t = 0; t < m.instances; ++t) {
        double s = 0.0;
        for (std::size_t b = 0; b < m.replicates; ++b) s += costs.loss(m.test_labels[t], m.label(b, t));
        out.per_instance[t] = s / static_cast<double>(m.replicates);
    }
    std::vector<std::size_t> all;
    if (!instances) {
        all.resize(m.instances);
        for (std::size_t t = 0; t < m.instances; ++t) all[t] = t;
        instances = &all;
    }
    double total = 0.0;
    std::array<double, 2> gsum{0.0, 0.0};
    std::array<std::size_t, 2> gcount{0, 0};
    for (std::size_t t : *instances) {
        total += out.per_instance[t];
        gsum[m.test_groups[t]] += out.per_instance[t];
        ++gcount[m.test_groups[t]];
    }
    out.count = instances->size();
    out.aggregate = out.count ? total / static_cast<double>(out.count) : 0.0;
    for (int g = 0; g < 2; ++g)
        if (gcount[g]) out.by_group[g] = gsum[g] / static_cast<double>(gcount[g]);
    return out;
}

// ---------------------------------------------------------------------------
// Serialization: CSV body (replicate,instance,probability,label) + JSON header.

inline nlohmann::json matrix_header(const PredictionMatrix& m) {
    return {{"B", m.replicates},
            {"T", m.instances},
            {"tau", cost_threshold(m.costs)},
            {"c01", m.costs.c01()},
            {"c10", m.costs.c10()},
            {"seeds", m.seeds},
            {"test_groups", m.test_groups},
            {"test_labels", m.test_labels}};
}

inline std::string matrix_csv(const PredictionMatrix& m) {
    std::string out = "replicate,instance,probability,label\n";
    for (std::size_t b = 0; b < m.replicates; ++b)
        for (std::size_t t = 0; t < m.instances; ++t)
            out += std::to_string(b) + ',' + std::to_string(t) + ',' + csv::format_double(m.probability(b, t)) + ',' +
                   std::to_string(m.label(b, t)) + '\n';
    return out;
}

inline PredictionMatrix matrix_from_serialized(const nlohmann::json& header, std::string_view body) {
    const auto B = header.at("B").get<std::size_t>();
    const auto T = header.at("T").get<std::size_t>();
    PredictionMatrix m(B, T, header.at("test_groups").get<std::vector<std::uint8_t>>(),
                       header.at("test_labels").get<std::vector<std::uint8_t>>(),
                       CostModel(header.at("c01").get<double>(), header.at("c10").get<double>()));
    m.seeds = header.value("seeds", std::vector<std::uint64_t>{});
    const RawTable table = csv::parse(body);
    if (table.header != std::vector<std::string>{"replicate", "instance", "probability", "label"})
        throw SchemaError("prediction matrix CSV header mismatch");
    if (table.rows.size() != B * T) throw SizeError("prediction matrix CSV has wrong row count");
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const auto b = static_cast<std::size_t>(std::stoull(row[0]));
        const auto t = static_cast<std::size_t>(std::stoull(row[1]));
        auto p = csv::parse_double(row[2]);
        if (b >= B || t >= T || !p) throw ParseError("bad prediction matrix record", r + 1, "");
        m.probabilities[b * T + t] = *p;
        m.labels[b * T + t] = row[3] == "1" ? 1 : 0;
    }
    m.validate();
    return m;
}

}  // namespace varaudit
