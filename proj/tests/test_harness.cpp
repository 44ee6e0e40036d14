#include <gtest/gtest.h>

#include <filesystem>

#include "synthetic.hpp"
#include "varaudit/harness.hpp"

using namespace varaudit;
namespace fs = std::filesystem;

namespace {

ExperimentConfig small_config() {
    ExperimentConfig c;
    c.seed = 17;
    c.splits = 2;
    c.replicates = 5;
    c.super = {5, 3};
    c.model.kind = ModelKind::Tree;
    c.model.tree.max_depth = 4;
    c.methods = {Method::Baseline, Method::Simple, Method::Super};
    return c;
}

std::map<std::string, std::string> read_dir(const fs::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::directory_iterator(dir)) out[e.path().filename().string()] = csv::read_file(e.path().string());
    return out;
}

}  // namespace

TEST(Moments, PopulationStd) {
    const auto m = moments({1.0, 3.0, std::nullopt});
    EXPECT_EQ(m.n, 2u);
    EXPECT_EQ(*m.mean, 2.0);
    EXPECT_EQ(*m.std, 1.0);
    EXPECT_FALSE(moments({std::nullopt}).mean.has_value());
}

TEST(RunExperiment, RecordShape) {
    const auto data = synthetic::noisy_linear(60, 0.2, 1);
    const auto run = run_experiment(small_config(), data);
    ASSERT_EQ(run.splits.size(), 2u);
    for (const auto& sp : run.splits) {
        EXPECT_EQ(sp.methods.size(), 3u);
        EXPECT_EQ(sp.n_test, 12u);
        EXPECT_EQ(sp.n_train, 48u);
    }
    for (Method m : run.methods) EXPECT_EQ(run.summaries.at(m).grid.size(), 3u);
}

TEST(RunExperiment, SingleSplitHasZeroStd) {
    auto c = small_config();
    c.splits = 1;
    const auto run = run_experiment(c, synthetic::noisy_linear(60, 0.2, 2));
    for (const auto& [m, s] : run.summaries) {
        for (const MetricSet* ms : {&s.std.overall, &s.std.group[0], &s.std.group[1], &s.std.delta})
            for (const auto& v : ms->values) {
                if (v) {
                    EXPECT_EQ(*v, 0.0);
                }
            }
        EXPECT_EQ(*s.w1.std, 0.0);
    }
}

TEST(RunExperiment, SeparableTaskIsConsistent) {
    ExperimentConfig c;
    c.seed = 3;
    c.splits = 2;
    c.replicates = 21;
    c.model.kind = ModelKind::Logistic;
    const auto run = run_experiment(c, synthetic::separable_clusters(200, 4));
    EXPECT_GE(*run.summaries.at(Method::Baseline).mean.overall[Metric::MeanSc], 0.99);
    EXPECT_EQ(*run.summaries.at(Method::Simple).mean.overall[Metric::Ar], 0.0);
}

TEST(RunExperiment, BaselineMatchesRecomputationFromMatrix) {
    auto c = small_config();
    c.methods = {Method::Baseline};
    const auto data = synthetic::noisy_linear(60, 0.2, 5);
    const auto run = run_experiment(c, data);
    for (std::size_t s = 0; s < c.splits; ++s) {
        const auto [train, test] = train_test_split(data, c.split_plan(), s);
        const auto m =
            build_prediction_matrix(train, test, c.model, c.costs, {c.replicates, c.replicate_seed_for(s), {}});
        const auto& rec = run.splits[s].methods.at(Method::Baseline);
        EXPECT_EQ(rec.report, baseline_report(m));
        EXPECT_EQ(*rec.prediction_expected_error, expected_error(m, c.costs).aggregate);
        // Baseline Err is the expected error under 0-1 loss.
        EXPECT_NEAR(*rec.report.overall[Metric::Err], expected_error(m, {}).aggregate, 1e-12);
    }
}

TEST(RunExperiment, StageErrorsCarryContext) {
    auto c = small_config();
    c.splits = 1;
    TabularDataset tiny({1, 2, 3}, 1, {0, 1, 0}, {0, 1, 0}, {"x"});
    try {
        run_experiment(c, tiny);
        FAIL();
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("split 0"), std::string::npos) << e.what();
    }
}

TEST(EmitReport, OneMethodWritesFourFiles) {
    auto c = small_config();
    c.methods = {Method::Baseline};
    const auto run = run_experiment(c, synthetic::noisy_linear(60, 0.2, 6));
    const auto dir = synthetic::temp_dir("one_method");
    const auto files = emit_report(run, dir.string());
    EXPECT_EQ(files.size(), 4u);
    EXPECT_EQ(read_dir(dir).size(), 4u);
    EXPECT_TRUE(fs::exists(dir / "cdf_baseline.csv"));
}

TEST(EmitReport, CdfRowsEqualGridSize) {
    for (std::size_t B : {5u, 6u, 11u}) {
        auto c = small_config();
        c.replicates = B;
        c.super.outer_count = B;
        const auto run = run_experiment(c, synthetic::noisy_linear(50, 0.2, 7));
        for (Method m : run.methods) {
            const auto t = csv::parse(cdf_csv(run.summaries.at(m)));
            EXPECT_EQ(t.rows.size(), B / 2 + 1);
            EXPECT_EQ(t.rows.back()[1], "1");
        }
    }
}

TEST(EmitReport, MetricsCsvRoundTrip) {
    const auto run = run_experiment(small_config(), synthetic::noisy_linear(60, 0.3, 8));
    const auto parsed = parse_metrics_csv(metrics_csv(run));
    ASSERT_EQ(parsed.size(), run.methods.size());
    for (Method m : run.methods) {
        EXPECT_EQ(parsed.at(m).first, run.summaries.at(m).mean);
        EXPECT_EQ(parsed.at(m).second, run.summaries.at(m).std);
    }
}

TEST(EmitReport, RerunIsByteIdentical) {
    const auto data = synthetic::noisy_linear(60, 0.3, 9);
    auto c = small_config();
    const auto d1 = synthetic::temp_dir("rerun1"), d2 = synthetic::temp_dir("rerun2");
    emit_report(run_experiment(c, data), d1.string());
    c.workers = 3;
    emit_report(run_experiment(c, data), d2.string());
    EXPECT_EQ(read_dir(d1), read_dir(d2));
}

TEST(EmitReport, ReportReRenderIsIdentical) {
    const auto run = run_experiment(small_config(), synthetic::noisy_linear(60, 0.3, 10));
    const auto d1 = synthetic::temp_dir("render1"), d2 = synthetic::temp_dir("render2");
    emit_report(run, d1.string());
    const auto back = summary_from_json(nlohmann::json::parse(csv::read_file((d1 / "summary.json").string())));
    emit_report(back, d2.string());
    EXPECT_EQ(read_dir(d1), read_dir(d2));
}

TEST(EmitReport, UnwritableDirectoryIsIoError) {
    const auto run = run_experiment(small_config(), synthetic::noisy_linear(60, 0.3, 11));
    const auto dir = synthetic::temp_dir("blocked");
    csv::write_file((dir / "file").string(), "x");
    EXPECT_THROW(emit_report(run, (dir / "file" / "sub").string()), IoError);
}

TEST(Config, JsonParsingAndDefaults) {
    const auto j = nlohmann::json::parse(R"({
        "dataset": {"path": "data/x.csv", "target": "two_year_recid", "group": "race"},
        "seed": 9, "splits": 3, "model": {"kind": "forest", "trees": 11},
        "costs": {"c01": 1, "c10": 3}, "replicates": 21, "kappa": 0.9,
        "methods": ["baseline", "super"], "super": {"inner": 5}, "out": "res"
    })");
    const auto c = config_from_json(j, "/base");
    EXPECT_EQ(c.dataset.path, "/base/data/x.csv");
    EXPECT_EQ(c.output_dir, "/base/res");
    EXPECT_EQ(c.model.kind, ModelKind::Forest);
    EXPECT_EQ(c.model.forest.trees, 11u);
    EXPECT_EQ(cost_threshold(c.costs), 0.25);
    EXPECT_EQ(c.super.outer_count, 21u);
    EXPECT_EQ(c.super.inner_count, 5u);
    EXPECT_EQ(c.methods, (std::vector<Method>{Method::Baseline, Method::Super}));
    EXPECT_NO_THROW(c.validate());

    ExperimentConfig bad;
    bad.policy.kappa = 1.2;
    EXPECT_THROW(bad.validate(), ConfigError);
    EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"aggregation": "median"})")), ConfigError);
}

TEST(Config, Defaults) {
    const ExperimentConfig c;
    EXPECT_EQ(c.replicates, 101u);
    EXPECT_EQ(c.splits, 10u);
    EXPECT_EQ(c.policy.kappa, 0.75);
    EXPECT_EQ(c.test_fraction, 0.2);
    EXPECT_EQ(cost_threshold(c.costs), 0.5);
}
