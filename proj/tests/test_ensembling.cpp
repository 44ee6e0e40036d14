#include <gtest/gtest.h>

#include <numeric>

#include "synthetic.hpp"
#include "varaudit/ensembling.hpp"

using namespace varaudit;

namespace {

std::vector<std::uint8_t> column(std::size_t ones, std::size_t zeros) {
    std::vector<std::uint8_t> v(ones, 1);
    v.insert(v.end(), zeros, 0);
    return v;
}

// B x T matrix whose column t holds ones[t] one-votes.
PredictionMatrix matrix_with_counts(std::size_t B, const std::vector<std::size_t>& ones) {
    const std::size_t T = ones.size();
    PredictionMatrix m(B, T, std::vector<std::uint8_t>(T, 0), std::vector<std::uint8_t>(T, 1), {});
    for (std::size_t t = 0; t < T; ++t)
        for (std::size_t b = 0; b < ones[t]; ++b) {
            m.labels[b * T + t] = 1;
            m.probabilities[b * T + t] = 1.0;
        }
    return m;
}

// Direct pair enumeration of agreement probability, independent of the closed form.
double sc_by_pairs(std::size_t ones, std::size_t B) {
    std::size_t agree = 0;
    for (std::size_t i = 0; i < B; ++i)
        for (std::size_t j = 0; j < B; ++j)
            if (i != j) agree += (i < ones) == (j < ones);
    return static_cast<double>(agree) / static_cast<double>(B * (B - 1));
}

}  // namespace

TEST(AggregateVotes, Examples) {
    const AbstentionPolicy p{0.75, Aggregation::Vote};
    EXPECT_EQ(aggregate_votes(column(76, 25), p), Vote::Abstain);
    EXPECT_EQ(aggregate_votes(column(101, 0), p), Vote::One);
    EXPECT_EQ(aggregate_votes(column(90, 11), p), Vote::One);
    EXPECT_EQ(aggregate_votes(column(11, 90), p), Vote::Zero);
    EXPECT_NEAR(self_consistency(vote_count(column(90, 11))), 0.80396, 5e-6);
}

TEST(AggregateVotes, TiesAlwaysAbstain) {
    for (double kappa : {0.5, 0.6, 1.0})
        for (std::size_t h : {1u, 2u, 10u, 50u})
            EXPECT_EQ(aggregate_votes(column(h, h), {kappa, Aggregation::Vote}), Vote::Abstain);
}

TEST(AggregateVotes, Errors) {
    EXPECT_THROW(aggregate_votes(column(1, 0), {}), DomainError);
    EXPECT_THROW(aggregate_votes(column(3, 0), {0.49, Aggregation::Vote}), ConfigError);
    EXPECT_THROW(aggregate_votes(column(3, 0), {1.01, Aggregation::Vote}), ConfigError);
}

TEST(AggregateVotes, KappaHalfAtOddBMatchesEnumeration) {
    // At B=101 the splits 46/55 .. 50/51 all sit below 0.5, so they abstain.
    const AbstentionPolicy p{0.5, Aggregation::Vote};
    std::size_t abstaining_splits = 0;
    for (std::size_t ones = 0; ones <= 101; ++ones) {
        const bool oracle_abstain = sc_by_pairs(ones, 101) < 0.5;
        const Vote v = aggregate_votes(column(ones, 101 - ones), p);
        EXPECT_EQ(v == Vote::Abstain, oracle_abstain) << ones;
        abstaining_splits += oracle_abstain;
        if (!oracle_abstain) {
            EXPECT_EQ(v, ones > 50 ? Vote::One : Vote::Zero);
        }
    }
    EXPECT_EQ(abstaining_splits, 10u);
}

TEST(SimpleEnsemble, IdenticalRowsNeverAbstain) {
    const std::vector<std::size_t> ones{0, 9, 9, 0};
    const auto m = matrix_with_counts(9, ones);
    const auto out = simple_ensemble(m, {});
    EXPECT_TRUE(out.abstention_set.empty());
    EXPECT_EQ(out.decisions, (std::vector<Vote>{Vote::Zero, Vote::One, Vote::One, Vote::Zero}));
}

TEST(SimpleEnsemble, GateExactnessPartitionAndMonotonicity) {
    Rng rng(5);
    std::vector<std::size_t> ones(400);
    for (auto& o : ones) o = rng.below(102);
    const auto m = matrix_with_counts(101, ones);
    std::size_t prev_abstain = 0;
    for (double kappa : {0.5, 0.55, 0.6, 0.7, 0.75, 0.8, 0.9, 0.95, 1.0}) {
        const auto out = simple_ensemble(m, {kappa, Aggregation::Vote});
        EXPECT_EQ(out.prediction_set.size() + out.abstention_set.size(), m.instances);
        EXPECT_GE(out.abstention_set.size(), prev_abstain);
        prev_abstain = out.abstention_set.size();
        for (std::size_t t = 0; t < m.instances; ++t)
            EXPECT_EQ(out.decisions[t] == Vote::Abstain, out.sc[t] < kappa) << kappa << ' ' << ones[t];
        for (std::size_t t : out.prediction_set) EXPECT_GE(out.sc[t], kappa);
        if (kappa == 1.0) {
            for (std::size_t t : out.prediction_set) EXPECT_TRUE(ones[t] == 0 || ones[t] == 101);
        }
    }
}

TEST(SimpleEnsemble, ProbabilityAverageStillGatedByVotes) {
    // Two columns: 9 of 10 votes are 1 (SC 0.8) but mean probability is low;
    // 5/5 split with high mean probability must still abstain.
    PredictionMatrix m(10, 2, {0, 1}, {1, 0}, {});
    for (std::size_t b = 0; b < 10; ++b) {
        m.probabilities[b * 2] = b < 9 ? 0.5 : 0.0;
        m.labels[b * 2] = b < 9 ? 1 : 0;
        m.probabilities[b * 2 + 1] = b < 5 ? 0.99 : 0.49;
        m.labels[b * 2 + 1] = b < 5 ? 1 : 0;
    }
    const auto vote = simple_ensemble(m, {0.75, Aggregation::Vote});
    const auto avg = simple_ensemble(m, {0.75, Aggregation::ProbabilityAverage});
    EXPECT_EQ(vote.decisions[0], Vote::One);
    EXPECT_EQ(avg.decisions[0], Vote::Zero);  // mean 0.45 < 0.5
    EXPECT_EQ(vote.decisions[1], Vote::Abstain);
    EXPECT_EQ(avg.decisions[1], Vote::Abstain);
    EXPECT_EQ(vote.sc, avg.sc);
}

TEST(SuperEnsemble, InnerCountOneEqualsSimple) {
    const auto train = synthetic::noisy_linear(80, 0.25, 1);
    const auto test = synthetic::noisy_linear(30, 0.25, 2);
    ModelSpec spec;
    spec.kind = ModelKind::Tree;
    const std::uint64_t seed = 314;
    const AbstentionPolicy policy{};
    const auto super = super_ensemble(train, test, spec, {}, {15, 1}, policy, seed);
    const auto base = build_prediction_matrix(train, test, spec, {}, {15, seed, {}});
    EXPECT_EQ(super.outer, base);
    EXPECT_EQ(super.outcome, simple_ensemble(base, policy));
}

TEST(SuperEnsemble, DeterministicAcrossWorkers) {
    const auto train = synthetic::noisy_linear(60, 0.3, 3);
    const auto test = synthetic::noisy_linear(20, 0.3, 4);
    ModelSpec spec;
    spec.kind = ModelKind::Tree;
    const auto a = super_ensemble(train, test, spec, {}, {9, 5}, {}, 8, 1);
    const auto b = super_ensemble(train, test, spec, {}, {9, 5}, {}, 8, 4);
    EXPECT_EQ(a.outer, b.outer);
    EXPECT_EQ(a.outcome, b.outcome);
}

TEST(SuperEnsemble, UnanimousInnerBagsMatchSimpleOnOuterLabels) {
    TabularDataset train({0, 1, 2, 3, 4, 5}, 1, {0, 1, 0, 1, 0, 1}, {0, 0, 0, 1, 1, 1}, {"x"});
    TabularDataset test({-5, 10}, 1, {0, 1}, {0, 1}, {"x"});
    ModelSpec spec;
    spec.kind = ModelKind::Tree;
    const auto r = super_ensemble(train, test, spec, {}, {7, 3}, {}, 2);
    EXPECT_EQ(r.outcome, simple_ensemble(r.outer, {}));
}

TEST(SuperEnsemble, InvalidInnerCount) {
    const auto d = synthetic::noisy_linear(20, 0.1, 1);
    EXPECT_THROW(super_ensemble(d, d, {}, {}, {5, 2}, {}, 0), ConfigError);
    EXPECT_THROW(super_ensemble(d, d, {}, {}, {5, 0}, {}, 0), ConfigError);
}

TEST(SplitEvaluate, NoAbstentions) {
    const auto m = matrix_with_counts(5, {5, 5, 0});
    const auto out = simple_ensemble(m, {});
    const auto ev = split_evaluate(out, m, {});
    EXPECT_EQ(ev.abstention_rate, 0.0);
    EXPECT_EQ(ev.abstention_expected.count, 0u);
    EXPECT_EQ(ev.prediction.overall[Metric::Ar], 0.0);
}

TEST(SplitEvaluate, AllAbstain) {
    const auto m = matrix_with_counts(4, {2, 2, 2});
    const auto out = simple_ensemble(m, {});
    const auto ev = split_evaluate(out, m, {});
    EXPECT_EQ(ev.abstention_rate, 1.0);
    EXPECT_EQ(ev.prediction.overall[Metric::Ar], 1.0);
    EXPECT_FALSE(ev.prediction.overall[Metric::Err].has_value());
    EXPECT_FALSE(ev.prediction.overall[Metric::Fpr].has_value());
    EXPECT_EQ(ev.prediction_expected.count, 0u);
}

TEST(SplitEvaluate, AbstentionSetHarderThanPredictionSet) {
    const auto train = synthetic::noisy_linear(300, 0.25, 21);
    const auto test = synthetic::noisy_linear(200, 0.25, 22);
    ModelSpec spec;
    spec.kind = ModelKind::Tree;
    spec.tree.max_depth = 8;
    const auto m = build_prediction_matrix(train, test, spec, {}, {51, 5, {}}, 4);
    const auto out = simple_ensemble(m, {0.75, Aggregation::Vote});
    ASSERT_FALSE(out.abstention_set.empty());
    ASSERT_FALSE(out.prediction_set.empty());
    const auto ev = split_evaluate(out, m, {});
    EXPECT_GT(ev.abstention_expected.aggregate, ev.prediction_expected.aggregate);
}

TEST(OutcomeCsv, Layout) {
    const auto m = matrix_with_counts(4, {4, 2});
    const auto out = simple_ensemble(m, {});
    EXPECT_EQ(outcome_csv(out, m), "instance,group,label,decision,sc\n0,0,1,1,1\n1,0,1,abstain,0.33333333333333337\n");
}
