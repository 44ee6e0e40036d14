#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <numeric>
#include <set>

#include "synthetic.hpp"
#include "varaudit/data.hpp"

using namespace varaudit;

namespace {

std::string write_temp(const std::string& name, const std::string& content) {
    const auto dir = synthetic::temp_dir("data");
    const auto p = (dir / name).string();
    csv::write_file(p, content);
    return p;
}

}  // namespace

TEST(Csv, QuotedFieldsAndCrlf) {
    const auto t = csv::parse("a,b,c\r\n1,\"x, y\",\"he said \"\"hi\"\"\"\r\n2,,3\r\n");
    ASSERT_EQ(t.header, (std::vector<std::string>{"a", "b", "c"}));
    ASSERT_EQ(t.rows.size(), 2u);
    EXPECT_EQ(t.rows[0][1], "x, y");
    EXPECT_EQ(t.rows[0][2], "he said \"hi\"");
    EXPECT_EQ(t.rows[1][1], "");
}

TEST(Csv, RaggedRowIsParseError) { EXPECT_THROW(csv::parse("a,b\n1,2,3\n"), ParseError); }

TEST(Csv, FormatDoubleRoundTrips) {
    Rng rng(1);
    for (int i = 0; i < 1000; ++i) {
        const double v = rng.normal() * std::pow(10.0, static_cast<double>(rng.below(20)) - 10.0);
        EXPECT_EQ(*csv::parse_double(csv::format_double(v)), v);
    }
}

TEST(LoadCsv, ThreeRows) {
    const auto path = write_temp("three.csv", "f1,g,o\n0.5,0,1\n1.5,1,0\n-2,1,1\n");
    const auto d = load_csv(path, {"o", "g", {}, false});
    EXPECT_EQ(d.size(), 3u);
    EXPECT_EQ(d.num_features(), 1u);
    EXPECT_EQ(d.row(2)[0], -2.0);
    EXPECT_EQ(d.label(0), 1);
    EXPECT_EQ(d.group(1), 1);
}

TEST(LoadCsv, MissingGroupColumnIsSchemaError) {
    const auto path = write_temp("nogroup.csv", "f1,o\n0.5,1\n1.5,0\n");
    EXPECT_THROW(load_csv(path, {"o", "g", {}, false}), SchemaError);
}

TEST(LoadCsv, NaInNumericColumnIsParseErrorAtCell) {
    const auto path = write_temp("na.csv", "f1,f2,g,o\n0.5,1,0,1\n1.5,NA,1,0\n2,3,0,0\n");
    try {
        load_csv(path, {"o", "g", {}, false});
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.row(), 2u);
        EXPECT_EQ(e.column(), "f2");
    }
    // With drop_missing the row disappears instead.
    const auto d = load_csv(path, {"o", "g", {}, true});
    EXPECT_EQ(d.size(), 2u);
}

TEST(LoadCsv, NonNumericFeatureIsParseError) {
    const auto path = write_temp("text.csv", "f1,g,o\nabc,0,1\n1,1,0\n");
    EXPECT_THROW(load_csv(path, {"o", "g", {}, false}), ParseError);
}

TEST(Recipe, HmdaActionTakenRules) {
    RawTable raw;
    raw.header = {"loan_amount", "applicant_race_1", "action_taken"};
    for (int a = 1; a <= 8; ++a) raw.rows.push_back({std::to_string(100 * a), a % 2 ? "5" : "3", std::to_string(a)});
    const auto recipe = recipe_from_json(nlohmann::json::parse(R"({
        "target": {"column": "action_taken", "one": ["1","2","8"], "zero": ["3","5","7"], "drop": ["4","6"]},
        "group": {"column": "applicant_race_1", "one": ["5"], "zero": ["1","2","3","4"], "drop": ["6","7","8"]}
    })"));
    const auto d = apply_recipe(raw, recipe);
    ASSERT_EQ(d.size(), 6u);  // 4 and 6 removed
    const std::vector<int> kept_actions{1, 2, 3, 5, 7, 8};
    const std::vector<std::uint8_t> expected{1, 1, 0, 0, 0, 1};
    for (std::size_t i = 0; i < d.size(); ++i) {
        EXPECT_EQ(d.label(i), expected[i]) << "action " << kept_actions[i];
        EXPECT_EQ(d.row(i)[0], 100.0 * kept_actions[i]);
    }
    EXPECT_EQ(d.label_name(), "action_taken");
}

TEST(Recipe, UnmappedValueIsCoverageError) {
    RawTable raw{{"x", "g", "o"}, {{"1", "0", "1"}, {"2", "1", "9"}}};
    const auto recipe = PrepRecipe::identity("o", "g");
    EXPECT_THROW(apply_recipe(raw, recipe), RecipeError);
}

TEST(Recipe, AllRowsDroppedIsError) {
    RawTable raw{{"x", "g", "o"}, {{"1", "0", "4"}, {"2", "1", "4"}}};
    auto recipe = PrepRecipe::identity("o", "g");
    recipe.target_rule.values["4"] = Mapped::Drop;
    EXPECT_THROW(apply_recipe(raw, recipe), RecipeError);
}

TEST(Recipe, RuleMustCoverBothClasses) {
    EXPECT_THROW(recipe_from_json(nlohmann::json::parse(
                     R"({"target": {"column": "o", "one": ["1"]}, "group": {"column": "g", "one": ["1"], "zero": ["0"]}})")),
                 RecipeError);
}

TEST(Recipe, DuplicateMappingRejected) {
    EXPECT_THROW(recipe_from_json(nlohmann::json::parse(
                     R"({"target": {"column": "o", "one": ["1"], "zero": ["1", "0"]},
                         "group": {"column": "g", "one": ["1"], "zero": ["0"]}})")),
                 RecipeError);
}

TEST(Recipe, OneHotAddsLevelsMinusOneColumns) {
    RawTable raw{{"colour", "size", "g", "o"},
                 {{"red", "1", "0", "1"}, {"green", "2", "1", "0"}, {"blue", "3", "0", "0"}, {"red", "4", "1", "1"}}};
    auto recipe = PrepRecipe::identity("o", "g");
    const auto plain_names = std::vector<std::string>{"size"};
    const auto before = apply_recipe(raw, recipe, &plain_names);
    recipe.feature_rules["colour"] = FeatureDirective::OneHot;
    const auto after = apply_recipe(raw, recipe);
    EXPECT_EQ(after.num_features(), before.num_features() + 3);
    EXPECT_EQ(after.feature_names(),
              (std::vector<std::string>{"colour=blue", "colour=green", "colour=red", "size"}));
    EXPECT_EQ(after.row(0)[2], 1.0);
    EXPECT_EQ(after.row(0)[0] + after.row(0)[1], 0.0);
}

TEST(Recipe, ThresholdRule) {
    RawTable raw{{"age", "x", "o"}, {{"20", "1", "1"}, {"25", "2", "0"}, {"60", "3", "1"}}};
    auto recipe = recipe_from_json(nlohmann::json::parse(
        R"({"target": {"column": "o", "one": ["1"], "zero": ["0"]}, "group": {"column": "age", "threshold": 25}})"));
    const auto d = apply_recipe(raw, recipe);
    EXPECT_EQ(d.group(0), 0);
    EXPECT_EQ(d.group(1), 1);
    EXPECT_EQ(d.group(2), 1);
    EXPECT_EQ(d.num_features(), 1u);
}

TEST(Recipe, IdentityOnBinaryTableIsNoOp) {
    const auto data = synthetic::noisy_linear(40, 0.1, 9);
    const auto once = apply_recipe(data.to_table(), PrepRecipe::identity("o", "g"));
    EXPECT_EQ(once, data);
    const auto twice = apply_recipe(once.to_table(), PrepRecipe::identity("o", "g"));
    EXPECT_EQ(twice, once);
}

TEST(Dataset, InvariantsEnforced) {
    EXPECT_THROW(TabularDataset({1.0}, 1, {0}, {1}, {"x"}), SizeError);
    EXPECT_THROW(TabularDataset({1.0, 2.0}, 1, {0, 2}, {1, 0}, {"x"}), InputError);
    EXPECT_THROW(TabularDataset({1.0, 2.0}, 1, {0}, {1, 0}, {"x"}), InputError);
}

TEST(Split, SizesFollowTestFraction) {
    const auto idx = split_indices(10, {7, 0.3, 5}, 0);
    EXPECT_EQ(idx.test.size(), 3u);
    EXPECT_EQ(idx.train.size(), 7u);
}

TEST(Split, DeterministicPerSeedAndIndex) {
    const SplitPlan plan{42, 0.25, 4};
    EXPECT_EQ(split_indices(100, plan, 2).test, split_indices(100, plan, 2).test);
    EXPECT_NE(split_indices(100, plan, 1).test, split_indices(100, plan, 2).test);
    // Order-insensitive: computing split 3 first gives the same result.
    const auto s3 = split_indices(100, plan, 3);
    (void)split_indices(100, plan, 0);
    EXPECT_EQ(split_indices(100, plan, 3).train, s3.train);
}

TEST(Split, PartitionProperty) {
    for (std::size_t n : {2u, 5u, 17u, 200u})
        for (std::size_t k = 0; k < 6; ++k) {
            SplitPlan plan{k * 31 + n, 0.3, 6};
            std::size_t n_test = static_cast<std::size_t>(std::llround(0.3 * static_cast<double>(n)));
            if (n_test == 0 || n_test >= n) {
                EXPECT_THROW(split_indices(n, plan, k), SizeError);
                continue;
            }
            const auto idx = split_indices(n, plan, k);
            std::vector<std::size_t> all = idx.train;
            all.insert(all.end(), idx.test.begin(), idx.test.end());
            std::sort(all.begin(), all.end());
            std::vector<std::size_t> expected(n);
            std::iota(expected.begin(), expected.end(), std::size_t{0});
            EXPECT_EQ(all, expected);
        }
}

TEST(Split, IndexOutOfRangeIsError) {
    EXPECT_THROW(split_indices(10, {1, 0.3, 2}, 2), InputError);
    const auto data = synthetic::noisy_linear(10, 0.0, 1);
    EXPECT_THROW(train_test_split(data, {1, 0.3, 2}, 5), InputError);
}

TEST(Split, EmptySideIsSizeError) { EXPECT_THROW(split_indices(3, {1, 0.01, 1}, 0), SizeError); }
