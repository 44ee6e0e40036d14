#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bootstrap.hpp"
#include "classifiers.hpp"
#include "metrics.hpp"
#include "parallel.hpp"

namespace varaudit {

enum class Aggregation { Vote, ProbabilityAverage };

struct AbstentionPolicy {
    double kappa = 0.75;
    Aggregation aggregation = Aggregation::Vote;

    void validate() const {
        if (!(kappa >= 0.5 && kappa <= 1.0))
            throw ConfigError("kappa must lie in [0.5, 1], got " + std::to_string(kappa));
    }
};

struct EnsembleOutcome {
    std::vector<Vote> decisions;           // per test instance
    std::vector<double> sc;                // SC of the votes behind each decision
    std::vector<std::size_t> prediction_set;
    std::vector<std::size_t> abstention_set;

    std::size_t size() const noexcept { return decisions.size(); }
    friend bool operator==(const EnsembleOutcome&, const EnsembleOutcome&) = default;
};

// Two-level bagging: `outer_count` bags, each a plain majority vote over
// `inner_count` models.
struct SuperSpec {
    std::size_t outer_count = 101;
    std::size_t inner_count = 51;

    void validate() const {
        if (outer_count < 2) throw ConfigError("outer_count must be >= 2");
        if (inner_count < 1 || inner_count % 2 == 0) throw ConfigError("inner_count must be odd and >= 1");
    }
};

namespace detail {

inline Vote gate(const VoteCount& v, const AbstentionPolicy& policy) {
    if (v.b0 == v.b1) return Vote::Abstain;
    if (self_consistency(v) < policy.kappa) return Vote::Abstain;
    return v.b1 > v.b0 ? Vote::One : Vote::Zero;
}

}  // namespace detail

// kappa-majority: the majority label if SC(votes) >= kappa, else abstain.
// Exact ties always abstain.
inline Vote aggregate_votes(std::span<const std::uint8_t> votes, const AbstentionPolicy& policy) {
    policy.validate();
    return detail::gate(vote_count(votes), policy);
}

inline EnsembleOutcome simple_ensemble(const PredictionMatrix& m, const AbstentionPolicy& policy) {
    policy.validate();
    m.validate();
    const double tau = cost_threshold(m.costs);
    EnsembleOutcome out;
    out.decisions.resize(m.instances);
    out.sc.resize(m.instances);
    for (std::size_t t = 0; t < m.instances; ++t) {
        const std::size_t ones = m.ones_in_column(t);
        const VoteCount v{m.replicates - ones, ones, 0};
        out.sc[t] = self_consistency(v);
        Vote d = detail::gate(v, policy);
        if (d != Vote::Abstain && policy.aggregation == Aggregation::ProbabilityAverage)
            d = m.mean_probability(t) >= tau ? Vote::One : Vote::Zero;
        out.decisions[t] = d;
        (d == Vote::Abstain ? out.abstention_set : out.prediction_set).push_back(t);
    }
    return out;
}

struct SuperResult {
    PredictionMatrix outer;  // row b: bag b's majority labels and mean probabilities
    EnsembleOutcome outcome;
};

// Outer bag b resamples the training set as replicate b of `plan`; its inner
// models are trained on resamples of that outer replicate. A bag of one model
// trains directly on the outer replicate, so inner_count == 1 reproduces
// build_prediction_matrix exactly.
inline SuperResult super_ensemble(const TabularDataset& train, const TabularDataset& test, const ModelSpec& spec,
                                  const CostModel& costs, const SuperSpec& super, const AbstentionPolicy& policy,
                                  std::uint64_t base_seed, std::size_t workers = 1,
                                  std::optional<std::size_t> resample_size = std::nullopt) {
    super.validate();
    policy.validate();
    if (train.num_features() != test.num_features()) throw InputError("train and test feature counts differ");
    const ReplicatePlan plan{super.outer_count, base_seed, resample_size};
    plan.validate();
    const std::size_t B = super.outer_count, T = test.size();
    const double tau = cost_threshold(costs);

    SuperResult result;
    result.outer = PredictionMatrix(B, T, {test.groups().begin(), test.groups().end()},
                                    {test.labels().begin(), test.labels().end()}, costs);
    result.outer.seeds.resize(B);
    auto& outer = result.outer;

    parallel_for(B, workers, [&](std::size_t b) {
        const std::uint64_t outer_seed = replicate_seed(plan, b);
        const auto rows = replicate_indices(train.size(), plan, b);
        const TabularDataset outer_data = train.subset(rows);
        std::vector<std::size_t> ones(T, 0);
        std::vector<double> prob_sum(T, 0.0);
        for (std::size_t j = 0; j < super.inner_count; ++j) {
            try {
                TrainedModel model = [&] {
                    if (super.inner_count == 1) return fit(spec, outer_data, derive_seed(outer_seed, 1));
                    const std::uint64_t inner_seed = derive_seed(derive_seed(outer_seed, 2), j);
                    Rng rng(inner_seed);
                    const auto inner_rows = resample_indices(outer_data.size(), outer_data.size(), rng);
                    return fit(spec, outer_data.subset(inner_rows), derive_seed(inner_seed, 1));
                }();
                for (std::size_t t = 0; t < T; ++t) {
                    const double p = predict_proba(model, test.row(t));
                    prob_sum[t] += p;
                    ones[t] += p >= tau ? 1 : 0;
                }
            } catch (const std::exception& e) {
                throw Error("outer bag " + std::to_string(b) + ", inner model " + std::to_string(j) + ": " + e.what());
            }
        }
        for (std::size_t t = 0; t < T; ++t) {
            outer.labels[b * T + t] = 2 * ones[t] > super.inner_count ? 1 : 0;
            outer.probabilities[b * T + t] = prob_sum[t] / static_cast<double>(super.inner_count);
        }
        outer.seeds[b] = outer_seed;
    });

    result.outcome = simple_ensemble(outer, policy);
    return result;
}

struct SplitEvaluation {
    GroupReport prediction;             // metrics of the ensemble's decisions
    ExpectedError prediction_expected;  // base-model expected error on the prediction set
    ExpectedError abstention_expected;  // base-model expected error on the abstention set
    double abstention_rate = 0.0;
};

// `base` supplies the votes the outcome was aggregated from (the replicate
// matrix for simple ensembling, the outer-bag matrix for super ensembling).
inline SplitEvaluation split_evaluate(const EnsembleOutcome& outcome, const PredictionMatrix& base,
                                      const CostModel& costs) {
    if (outcome.size() != base.instances) throw InputError("outcome and matrix cover different test sets");
    SplitEvaluation ev;
    ev.prediction = group_report(outcome.decisions, base.test_labels, base.test_groups, outcome.sc);
    ev.prediction_expected = expected_error(base, costs, &outcome.prediction_set);
    ev.abstention_expected = expected_error(base, costs, &outcome.abstention_set);
    ev.abstention_rate =
        outcome.size() ? static_cast<double>(outcome.abstention_set.size()) / static_cast<double>(outcome.size()) : 0.0;
    return ev;
}

inline std::string_view decision_name(Vote v) noexcept {
    switch (v) {
        case Vote::Zero: return "0";
        case Vote::One: return "1";
        case Vote::Abstain: return "abstain";
    }
    return "";
}

// instance,group,label,decision,sc
inline std::string outcome_csv(const EnsembleOutcome& outcome, const PredictionMatrix& base) {
    if (outcome.size() != base.instances) throw InputError("outcome and matrix cover different test sets");
    std::string out = "instance,group,label,decision,sc\n";
    for (std::size_t t = 0; t < outcome.size(); ++t) {
        out += std::to_string(t) + ',' + std::to_string(base.test_groups[t]) + ',' + std::to_string(base.test_labels[t]) +
               ',' + std::string(decision_name(outcome.decisions[t])) + ',' + csv::format_double(outcome.sc[t]) + '\n';
    }
    return out;
}

}  // namespace varaudit
