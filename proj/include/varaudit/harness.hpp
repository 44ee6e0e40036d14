#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bootstrap.hpp"
#include "classifiers.hpp"
#include "csv.hpp"
#include "data.hpp"
#include "ensembling.hpp"
#include "metrics.hpp"

namespace varaudit {

enum class Method { Baseline, Simple, Super };

inline std::string to_string(Method m) {
    switch (m) {
        case Method::Baseline: return "baseline";
        case Method::Simple: return "simple";
        case Method::Super: return "super";
    }
    return "?";
}

inline Method parse_method(const std::string& s) {
    if (s == "baseline") return Method::Baseline;
    if (s == "simple") return Method::Simple;
    if (s == "super") return Method::Super;
    throw ConfigError("unknown method '" + s + "' (expected baseline, simple or super)");
}

struct DatasetConfig {
    std::string path;
    Schema schema;
    std::optional<PrepRecipe> recipe;
};

struct ExperimentConfig {
    DatasetConfig dataset;
    std::uint64_t seed = 0;
    std::size_t splits = 10;
    double test_fraction = 0.2;
    ModelSpec model{};
    CostModel costs{1.0, 1.0};
    std::size_t replicates = 101;
    std::optional<std::size_t> resample_size;
    AbstentionPolicy policy{};
    SuperSpec super{};
    std::vector<Method> methods{Method::Baseline, Method::Simple};
    std::string output_dir = "results";
    std::size_t workers = 1;

    bool has(Method m) const { return std::find(methods.begin(), methods.end(), m) != methods.end(); }

    SplitPlan split_plan() const { return {derive_seed(seed, 1), test_fraction, splits}; }
    std::uint64_t replicate_seed_for(std::size_t split) const { return derive_seed(derive_seed(seed, 2), split); }
    std::uint64_t super_seed_for(std::size_t split) const { return derive_seed(derive_seed(seed, 3), split); }

    void validate() const {
        if (splits < 1) throw ConfigError("splits must be >= 1");
        if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ConfigError("test_fraction must lie in (0, 1)");
        if (replicates < 2) throw ConfigError("replicates (B) must be >= 2");
        if (resample_size && *resample_size < 2) throw ConfigError("resample_size must be >= 2");
        if (workers < 1) throw ConfigError("workers must be >= 1");
        policy.validate();
        if (has(Method::Super)) super.validate();
        if (methods.empty()) throw ConfigError("no methods selected");
    }
};

// ---------------------------------------------------------------------------
// Config JSON

inline nlohmann::json to_json(const ExperimentConfig& c) {
    nlohmann::json methods = nlohmann::json::array();
    for (Method m : c.methods) methods.push_back(to_string(m));
    nlohmann::json ds = {{"path", c.dataset.path},
                         {"target", c.dataset.schema.target},
                         {"group", c.dataset.schema.group},
                         {"features", c.dataset.schema.features},
                         {"drop_missing", c.dataset.schema.drop_missing},
                         {"has_recipe", c.dataset.recipe.has_value()}};
    nlohmann::json j = {{"dataset", ds},
                        {"seed", c.seed},
                        {"splits", c.splits},
                        {"test_fraction", c.test_fraction},
                        {"model", to_json(c.model)},
                        {"costs", {{"c01", c.costs.c01()}, {"c10", c.costs.c10()}}},
                        {"replicates", c.replicates},
                        {"kappa", c.policy.kappa},
                        {"aggregation", c.policy.aggregation == Aggregation::Vote ? "vote" : "probability"},
                        {"methods", methods},
                        {"super", {{"outer", c.super.outer_count}, {"inner", c.super.inner_count}}}};
    j["resample_size"] = c.resample_size ? nlohmann::json(*c.resample_size) : nlohmann::json(nullptr);
    return j;
}

// `base_dir` resolves relative dataset/recipe paths (normally the config
// file's directory).
inline ExperimentConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {}) {
    try {
        ExperimentConfig c;
        auto resolve = [&](const std::string& p) {
            std::filesystem::path path(p);
            if (path.is_relative() && !base_dir.empty()) path = base_dir / path;
            return path.string();
        };
        if (j.contains("dataset")) {
            const auto& d = j.at("dataset");
            if (d.contains("path")) c.dataset.path = resolve(d.at("path").get<std::string>());
            c.dataset.schema.target = d.value("target", std::string{});
            c.dataset.schema.group = d.value("group", std::string{});
            c.dataset.schema.features = d.value("features", std::vector<std::string>{});
            c.dataset.schema.drop_missing = d.value("drop_missing", false);
            if (d.contains("recipe")) {
                const auto& r = d.at("recipe");
                c.dataset.recipe = r.is_string() ? load_recipe(resolve(r.get<std::string>())) : recipe_from_json(r);
            }
        }
        c.seed = j.value("seed", c.seed);
        c.splits = j.value("splits", c.splits);
        c.test_fraction = j.value("test_fraction", c.test_fraction);
        if (j.contains("model")) c.model = model_spec_from_json(j.at("model"));
        if (j.contains("costs")) c.costs = CostModel(j.at("costs").value("c01", 1.0), j.at("costs").value("c10", 1.0));
        c.replicates = j.value("replicates", c.replicates);
        if (j.contains("resample_size") && !j.at("resample_size").is_null())
            c.resample_size = j.at("resample_size").get<std::size_t>();
        c.policy.kappa = j.value("kappa", c.policy.kappa);
        const std::string agg = j.value("aggregation", std::string("vote"));
        if (agg == "vote")
            c.policy.aggregation = Aggregation::Vote;
        else if (agg == "probability" || agg == "probability-average")
            c.policy.aggregation = Aggregation::ProbabilityAverage;
        else
            throw ConfigError("aggregation must be \"vote\" or \"probability\"");
        c.super.outer_count = c.replicates;
        if (j.contains("super")) {
            c.super.outer_count = j.at("super").value("outer", c.super.outer_count);
            c.super.inner_count = j.at("super").value("inner", c.super.inner_count);
        }
        if (j.contains("methods")) {
            c.methods.clear();
            for (const auto& m : j.at("methods")) c.methods.push_back(parse_method(m.get<std::string>()));
        }
        c.output_dir = j.contains("out") ? resolve(j.at("out").get<std::string>()) : c.output_dir;
        c.workers = j.value("workers", c.workers);
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("invalid config: ") + e.what());
    }
}

inline ExperimentConfig load_config(const std::string& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(csv::read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config '" + path + "': " + e.what());
    }
    return config_from_json(j, std::filesystem::path(path).parent_path());
}

inline TabularDataset load_dataset(const DatasetConfig& d) {
    if (d.path.empty()) throw ConfigError("no dataset path given");
    if (d.recipe) return apply_recipe(csv::read(d.path), *d.recipe, &d.schema.features);
    if (d.schema.target.empty() || d.schema.group.empty())
        throw ConfigError("dataset needs target and group columns (or a recipe)");
    return load_csv(d.path, d.schema);
}

// ---------------------------------------------------------------------------
// Records

struct MethodRecord {
    std::size_t votes = 0;  // B behind the SC values (outer bags for super)
    GroupReport report;
    std::array<std::vector<double>, 2> cdf;  // unmasked, per group
    std::vector<double> cdf_overall;
    std::array<std::size_t, 2> group_sizes{};
    double w1 = 0.0;
    double w1_masked = 0.0;
    double abstention_rate = 0.0;
    std::optional<double> prediction_expected_error;
    std::optional<double> abstention_expected_error;
    std::size_t prediction_count = 0;
    std::size_t abstention_count = 0;
};

struct SplitRecord {
    std::size_t split = 0;
    std::size_t n_train = 0;
    std::size_t n_test = 0;
    std::map<Method, MethodRecord> methods;
};

struct Moments {
    std::optional<double> mean;
    std::optional<double> std;  // population STD (divisor = number of defined values)
    std::size_t n = 0;

    friend bool operator==(const Moments&, const Moments&) = default;
};

inline Moments moments(const std::vector<std::optional<double>>& xs) {
    Moments m;
    double s = 0.0;
    for (const auto& x : xs)
        if (x) {
            s += *x;
            ++m.n;
        }
    if (m.n == 0) return m;
    const double mean = s / static_cast<double>(m.n);
    double ss = 0.0;
    for (const auto& x : xs)
        if (x) ss += (*x - mean) * (*x - mean);
    m.mean = mean;
    m.std = std::sqrt(ss / static_cast<double>(m.n));
    return m;
}

struct MethodSummary {
    GroupReport mean;
    GroupReport std;
    // Defined-split counts, indexed [scope][metric]; scope 0,1 = groups, 2 = overall, 3 = delta.
    std::array<std::array<std::size_t, kMetricCount>, 4> defined{};
    Moments w1, w1_masked, abstention_rate, prediction_expected_error, abstention_expected_error;
    std::size_t votes = 0;
    std::vector<double> grid;
    std::array<std::vector<double>, 2> cdf;  // mean over splits
    std::vector<double> cdf_overall;
    std::array<std::vector<double>, 2> cdf_masked;
    std::vector<double> cdf_overall_masked;
};

struct RunSummary {
    nlohmann::json config;
    double kappa = 0.75;
    std::vector<Method> methods;
    std::vector<SplitRecord> splits;
    std::map<Method, MethodSummary> summaries;
};

inline std::vector<double> mask_cdf(const std::vector<double>& grid, std::vector<double> cdf, double kappa) {
    for (std::size_t i = 0; i < grid.size(); ++i)
        if (grid[i] < kappa) cdf[i] = 0.0;
    return cdf;
}

namespace detail {

inline MethodRecord record_from(std::size_t votes, const GroupReport& report, const std::vector<double>& profile,
                                const PredictionMatrix& base, double kappa) {
    MethodRecord r;
    r.votes = votes;
    r.report = report;
    const auto plain = sc_cdf(profile, base.test_groups, votes);
    const auto masked = sc_cdf(profile, base.test_groups, votes, kappa);
    for (int g = 0; g < 2; ++g) {
        r.cdf[g] = plain.by_group[g].cdf;
        r.group_sizes[g] = plain.by_group[g].count;
    }
    r.cdf_overall = plain.overall.cdf;
    r.w1 = wasserstein1(plain.by_group[0], plain.by_group[1]);
    r.w1_masked = wasserstein1(masked.by_group[0], masked.by_group[1]);
    return r;
}

inline void attach_evaluation(MethodRecord& r, const EnsembleOutcome& outcome, const SplitEvaluation& ev) {
    r.abstention_rate = ev.abstention_rate;
    r.prediction_count = outcome.prediction_set.size();
    r.abstention_count = outcome.abstention_set.size();
    if (ev.prediction_expected.count) r.prediction_expected_error = ev.prediction_expected.aggregate;
    if (ev.abstention_expected.count) r.abstention_expected_error = ev.abstention_expected.aggregate;
}

}  // namespace detail

inline MethodSummary summarize(Method method, const std::vector<SplitRecord>& splits, double kappa) {
    MethodSummary s;
    std::vector<const MethodRecord*> recs;
    for (const auto& sp : splits) {
        auto it = sp.methods.find(method);
        if (it != sp.methods.end()) recs.push_back(&it->second);
    }
    if (recs.empty()) return s;
    auto scope = [](const GroupReport& r, std::size_t k) -> const MetricSet& {
        return k < 2 ? r.group[k] : (k == 2 ? r.overall : r.delta);
    };
    auto scope_mut = [](GroupReport& r, std::size_t k) -> MetricSet& {
        return k < 2 ? r.group[k] : (k == 2 ? r.overall : r.delta);
    };
    for (std::size_t k = 0; k < 4; ++k)
        for (std::size_t i = 0; i < kMetricCount; ++i) {
            std::vector<std::optional<double>> xs;
            for (const auto* r : recs) xs.push_back(scope(r->report, k).values[i]);
            const Moments m = moments(xs);
            scope_mut(s.mean, k).values[i] = m.mean;
            scope_mut(s.std, k).values[i] = m.std;
            s.defined[k][i] = m.n;
        }
    auto collect = [&](auto getter) {
        std::vector<std::optional<double>> xs;
        for (const auto* r : recs) xs.push_back(getter(*r));
        return moments(xs);
    };
    s.w1 = collect([](const MethodRecord& r) { return std::optional<double>(r.w1); });
    s.w1_masked = collect([](const MethodRecord& r) { return std::optional<double>(r.w1_masked); });
    s.abstention_rate = collect([](const MethodRecord& r) { return std::optional<double>(r.abstention_rate); });
    s.prediction_expected_error = collect([](const MethodRecord& r) { return r.prediction_expected_error; });
    s.abstention_expected_error = collect([](const MethodRecord& r) { return r.abstention_expected_error; });

    s.votes = recs.front()->votes;
    s.grid = sc_grid(s.votes);
    const std::size_t K = s.grid.size();
    for (int g = 0; g < 2; ++g) s.cdf[g].assign(K, 0.0);
    s.cdf_overall.assign(K, 0.0);
    for (const auto* r : recs) {
        if (r->votes != s.votes || r->cdf_overall.size() != K) throw ConsistencyError("splits disagree on B");
        for (std::size_t i = 0; i < K; ++i) {
            for (int g = 0; g < 2; ++g) s.cdf[g][i] += r->cdf[g][i];
            s.cdf_overall[i] += r->cdf_overall[i];
        }
    }
    const double n = static_cast<double>(recs.size());
    for (std::size_t i = 0; i < K; ++i) {
        for (int g = 0; g < 2; ++g) s.cdf[g][i] /= n;
        s.cdf_overall[i] /= n;
    }
    for (int g = 0; g < 2; ++g) s.cdf_masked[g] = mask_cdf(s.grid, s.cdf[g], kappa);
    s.cdf_overall_masked = mask_cdf(s.grid, s.cdf_overall, kappa);
    return s;
}

inline void finalize(RunSummary& run) {
    run.summaries.clear();
    for (Method m : run.methods) run.summaries[m] = summarize(m, run.splits, run.kappa);
}

// One split: bootstrap matrix, baseline metrics, then the configured ensembles.
inline SplitRecord run_split(const ExperimentConfig& config, const TabularDataset& data, std::size_t split) {
    const std::string where = "split " + std::to_string(split);
    auto stage = [&](const char* name, auto&& fn) {
        try {
            return fn();
        } catch (const std::exception& e) {
            throw Error(where + ", " + name + ": " + e.what());
        }
    };
    auto [train, test] = stage("split", [&] { return train_test_split(data, config.split_plan(), split); });
    SplitRecord rec;
    rec.split = split;
    rec.n_train = train.size();
    rec.n_test = test.size();

    const ReplicatePlan plan{config.replicates, config.replicate_seed_for(split), config.resample_size};
    const PredictionMatrix matrix = stage("bootstrap", [&] {
        return build_prediction_matrix(train, test, config.model, config.costs, plan, config.workers);
    });
    const auto profile = sc_profile(matrix);
    const double kappa = config.policy.kappa;

    if (config.has(Method::Baseline)) {
        rec.methods[Method::Baseline] = stage("baseline", [&] {
            MethodRecord r = detail::record_from(matrix.replicates, baseline_report(matrix), profile, matrix, kappa);
            const auto ee = expected_error(matrix, config.costs);
            r.prediction_expected_error = ee.aggregate;
            r.prediction_count = matrix.instances;
            return r;
        });
    }
    if (config.has(Method::Simple)) {
        rec.methods[Method::Simple] = stage("simple", [&] {
            const auto outcome = simple_ensemble(matrix, config.policy);
            const auto ev = split_evaluate(outcome, matrix, config.costs);
            MethodRecord r = detail::record_from(matrix.replicates, ev.prediction, profile, matrix, kappa);
            detail::attach_evaluation(r, outcome, ev);
            return r;
        });
    }
    if (config.has(Method::Super)) {
        rec.methods[Method::Super] = stage("super", [&] {
            const auto res = super_ensemble(train, test, config.model, config.costs, config.super, config.policy,
                                            config.super_seed_for(split), config.workers, config.resample_size);
            const auto ev = split_evaluate(res.outcome, res.outer, config.costs);
            MethodRecord r =
                detail::record_from(res.outer.replicates, ev.prediction, sc_profile(res.outer), res.outer, kappa);
            detail::attach_evaluation(r, res.outcome, ev);
            return r;
        });
    }
    return rec;
}

inline RunSummary run_experiment(const ExperimentConfig& config, const TabularDataset& data) {
    config.validate();
    RunSummary run;
    run.config = to_json(config);
    run.kappa = config.policy.kappa;
    for (Method m : {Method::Baseline, Method::Simple, Method::Super})
        if (config.has(m)) run.methods.push_back(m);
    for (std::size_t s = 0; s < config.splits; ++s) run.splits.push_back(run_split(config, data, s));
    finalize(run);
    return run;
}

inline RunSummary run_experiment(const ExperimentConfig& config) {
    config.validate();
    return run_experiment(config, load_dataset(config.dataset));
}

// ---------------------------------------------------------------------------
// Serialization of records and reports

namespace detail {

inline nlohmann::json opt_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

inline std::optional<double> opt_from(const nlohmann::json& j) {
    if (j.is_null()) return std::nullopt;
    return j.get<double>();
}

inline nlohmann::json metric_set_json(const MetricSet& m) {
    nlohmann::json j = nlohmann::json::object();
    for (std::size_t i = 0; i < kMetricCount; ++i) j[std::string(kMetricNames[i])] = opt_json(m.values[i]);
    return j;
}

inline MetricSet metric_set_from(const nlohmann::json& j) {
    MetricSet m;
    for (std::size_t i = 0; i < kMetricCount; ++i) m.values[i] = opt_from(j.at(std::string(kMetricNames[i])));
    return m;
}

inline nlohmann::json report_json(const GroupReport& r) {
    return {{"g0", metric_set_json(r.group[0])},
            {"g1", metric_set_json(r.group[1])},
            {"overall", metric_set_json(r.overall)},
            {"delta", metric_set_json(r.delta)}};
}

inline GroupReport report_from(const nlohmann::json& j) {
    GroupReport r;
    r.group[0] = metric_set_from(j.at("g0"));
    r.group[1] = metric_set_from(j.at("g1"));
    r.overall = metric_set_from(j.at("overall"));
    r.delta = metric_set_from(j.at("delta"));
    return r;
}

inline nlohmann::json moments_json(const Moments& m) {
    return {{"mean", opt_json(m.mean)}, {"std", opt_json(m.std)}, {"n", m.n}};
}

inline nlohmann::json record_json(const MethodRecord& r) {
    return {{"B", r.votes},
            {"report", report_json(r.report)},
            {"cdf", {{"F0", r.cdf[0]}, {"F1", r.cdf[1]}, {"overall", r.cdf_overall}}},
            {"group_sizes", r.group_sizes},
            {"w1", r.w1},
            {"w1_masked", r.w1_masked},
            {"abstention_rate", r.abstention_rate},
            {"prediction_expected_error", opt_json(r.prediction_expected_error)},
            {"abstention_expected_error", opt_json(r.abstention_expected_error)},
            {"prediction_count", r.prediction_count},
            {"abstention_count", r.abstention_count}};
}

inline MethodRecord record_from_json(const nlohmann::json& j) {
    MethodRecord r;
    r.votes = j.at("B").get<std::size_t>();
    r.report = report_from(j.at("report"));
    r.cdf[0] = j.at("cdf").at("F0").get<std::vector<double>>();
    r.cdf[1] = j.at("cdf").at("F1").get<std::vector<double>>();
    r.cdf_overall = j.at("cdf").at("overall").get<std::vector<double>>();
    r.group_sizes = j.at("group_sizes").get<std::array<std::size_t, 2>>();
    r.w1 = j.at("w1").get<double>();
    r.w1_masked = j.at("w1_masked").get<double>();
    r.abstention_rate = j.at("abstention_rate").get<double>();
    r.prediction_expected_error = opt_from(j.at("prediction_expected_error"));
    r.abstention_expected_error = opt_from(j.at("abstention_expected_error"));
    r.prediction_count = j.at("prediction_count").get<std::size_t>();
    r.abstention_count = j.at("abstention_count").get<std::size_t>();
    return r;
}

inline std::string cell(const std::optional<double>& v) { return v ? csv::format_double(*v) : std::string(); }

}  // namespace detail

inline nlohmann::json summary_json(const RunSummary& run) {
    nlohmann::json methods = nlohmann::json::object();
    for (const auto& [m, s] : run.summaries) {
        methods[to_string(m)] = {{"mean", detail::report_json(s.mean)},
                                 {"std", detail::report_json(s.std)},
                                 {"B", s.votes},
                                 {"w1", detail::moments_json(s.w1)},
                                 {"w1_masked", detail::moments_json(s.w1_masked)},
                                 {"abstention_rate", detail::moments_json(s.abstention_rate)},
                                 {"prediction_expected_error", detail::moments_json(s.prediction_expected_error)},
                                 {"abstention_expected_error", detail::moments_json(s.abstention_expected_error)}};
    }
    nlohmann::json splits = nlohmann::json::array();
    for (const auto& sp : run.splits) {
        nlohmann::json recs = nlohmann::json::object();
        for (const auto& [m, r] : sp.methods) recs[to_string(m)] = detail::record_json(r);
        splits.push_back({{"split", sp.split}, {"n_train", sp.n_train}, {"n_test", sp.n_test}, {"methods", recs}});
    }
    nlohmann::json method_names = nlohmann::json::array();
    for (Method m : run.methods) method_names.push_back(to_string(m));
    return {{"config", run.config},
            {"kappa", run.kappa},
            {"method_order", method_names},
            {"methods", methods},
            {"splits", splits}};
}

// Rebuilds a summary from the raw split records stored in summary.json.
inline RunSummary summary_from_json(const nlohmann::json& j) {
    try {
        RunSummary run;
        run.config = j.at("config");
        run.kappa = j.at("kappa").get<double>();
        for (const auto& m : j.at("method_order")) run.methods.push_back(parse_method(m.get<std::string>()));
        for (const auto& sj : j.at("splits")) {
            SplitRecord sp;
            sp.split = sj.at("split").get<std::size_t>();
            sp.n_train = sj.at("n_train").get<std::size_t>();
            sp.n_test = sj.at("n_test").get<std::size_t>();
            for (const auto& [name, rj] : sj.at("methods").items())
                sp.methods[parse_method(name)] = detail::record_from_json(rj);
            run.splits.push_back(std::move(sp));
        }
        finalize(run);
        return run;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed summary: ") + e.what());
    }
}

// metrics.csv: one row per method x scope x metric.
inline std::string metrics_csv(const RunSummary& run) {
    static constexpr std::array<const char*, 4> scopes{"g0", "g1", "overall", "delta"};
    std::string out = "method,scope,metric,mean,std,splits\n";
    for (Method m : run.methods) {
        const auto& s = run.summaries.at(m);
        for (std::size_t k = 0; k < 4; ++k) {
            const MetricSet& mean = k < 2 ? s.mean.group[k] : (k == 2 ? s.mean.overall : s.mean.delta);
            const MetricSet& sd = k < 2 ? s.std.group[k] : (k == 2 ? s.std.overall : s.std.delta);
            for (std::size_t i = 0; i < kMetricCount; ++i)
                out += to_string(m) + ',' + scopes[k] + ',' + std::string(kMetricNames[i]) + ',' +
                       detail::cell(mean.values[i]) + ',' + detail::cell(sd.values[i]) + ',' +
                       std::to_string(s.defined[k][i]) + '\n';
        }
    }
    return out;
}

// Inverse of metrics_csv for the mean and STD columns.
inline std::map<Method, std::pair<GroupReport, GroupReport>> parse_metrics_csv(std::string_view text) {
    const RawTable t = csv::parse(text);
    if (t.header != std::vector<std::string>{"method", "scope", "metric", "mean", "std", "splits"})
        throw SchemaError("metrics.csv header mismatch");
    std::map<Method, std::pair<GroupReport, GroupReport>> out;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        const Method m = parse_method(row[0]);
        const auto metric = parse_metric(row[2]);
        if (!metric) throw ParseError("unknown metric '" + row[2] + "'", r + 1, "metric");
        auto pick = [&](GroupReport& g) -> MetricSet& {
            if (row[1] == "g0") return g.group[0];
            if (row[1] == "g1") return g.group[1];
            if (row[1] == "overall") return g.overall;
            if (row[1] == "delta") return g.delta;
            throw ParseError("unknown scope '" + row[1] + "'", r + 1, "scope");
        };
        auto& [mean, sd] = out[m];
        pick(mean)[*metric] = row[3].empty() ? std::nullopt : csv::parse_double(row[3]);
        pick(sd)[*metric] = row[4].empty() ? std::nullopt : csv::parse_double(row[4]);
    }
    return out;
}

inline std::string cdf_csv(const MethodSummary& s) {
    std::string out = "grid,F0,F1,overall,F0_masked,F1_masked,overall_masked\n";
    for (std::size_t i = 0; i < s.grid.size(); ++i)
        out += csv::format_double(s.grid[i]) + ',' + csv::format_double(s.cdf[0][i]) + ',' +
               csv::format_double(s.cdf[1][i]) + ',' + csv::format_double(s.cdf_overall[i]) + ',' +
               csv::format_double(s.cdf_masked[0][i]) + ',' + csv::format_double(s.cdf_masked[1][i]) + ',' +
               csv::format_double(s.cdf_overall_masked[i]) + '\n';
    return out;
}

inline std::string w1_csv(const RunSummary& run) {
    std::string out = "method,w1_mean,w1_std,w1_masked_mean,w1_masked_std,kappa\n";
    for (Method m : run.methods) {
        const auto& s = run.summaries.at(m);
        out += to_string(m) + ',' + detail::cell(s.w1.mean) + ',' + detail::cell(s.w1.std) + ',' +
               detail::cell(s.w1_masked.mean) + ',' + detail::cell(s.w1_masked.std) + ',' +
               csv::format_double(run.kappa) + '\n';
    }
    return out;
}

// Writes summary.json, metrics.csv, cdf_<method>.csv per method and w1.csv.
// On failure, files written by this call are removed again.
inline std::vector<std::string> emit_report(const RunSummary& run, const std::string& dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create '" + dir + "': " + ec.message());
    std::vector<std::pair<std::string, std::string>> files;
    files.emplace_back("summary.json", summary_json(run).dump(2) + "\n");
    files.emplace_back("metrics.csv", metrics_csv(run));
    for (Method m : run.methods) files.emplace_back("cdf_" + to_string(m) + ".csv", cdf_csv(run.summaries.at(m)));
    files.emplace_back("w1.csv", w1_csv(run));

    std::vector<std::string> written;
    try {
        for (const auto& [name, content] : files) {
            const std::string path = (fs::path(dir) / name).string();
            csv::write_file(path, content);
            written.push_back(path);
        }
    } catch (...) {
        for (const auto& p : written) fs::remove(p, ec);
        throw;
    }
    return written;
}

}  // namespace varaudit
