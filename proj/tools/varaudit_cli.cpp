// varaudit command-line entry point: prep | audit | ensemble | report.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "varaudit/varaudit.hpp"

namespace {

using namespace varaudit;

struct Overrides {
    std::string config;
    std::string dataset;
    std::string schema;
    std::string recipe;
    std::string model;
    std::optional<std::size_t> b;
    std::optional<std::size_t> splits;
    std::optional<double> kappa;
    std::string mode;
    std::optional<std::size_t> inner;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> workers;
    std::string out;
};

void add_experiment_flags(CLI::App* cmd, Overrides& o, bool ensemble_flags) {
    cmd->add_option("--config", o.config, "Experiment config (JSON)");
    cmd->add_option("--dataset", o.dataset, "Input CSV");
    cmd->add_option("--schema", o.schema, "Column roles: target=COL,group=COL[,features=A;B;C]");
    cmd->add_option("--recipe", o.recipe, "Preprocessing recipe (JSON)");
    cmd->add_option("--model", o.model, "Model kind (logistic|tree|forest|constant) or model JSON file");
    cmd->add_option("--b", o.b, "Bootstrap replicates B");
    cmd->add_option("--splits", o.splits, "Number of train/test splits S");
    cmd->add_option("--kappa", o.kappa, "Minimum self-consistency to predict, in [0.5, 1]");
    cmd->add_option("--seed", o.seed, "Master seed");
    cmd->add_option("--workers", o.workers, "Worker threads for replicate training");
    cmd->add_option("--out", o.out, "Output directory");
    if (ensemble_flags) {
        cmd->add_option("--mode", o.mode, "Ensembling mode")->check(CLI::IsMember({"simple", "super"}));
        cmd->add_option("--inner", o.inner, "Models per inner bag (super mode, odd)");
    }
}

Schema parse_schema(const std::string& text) {
    Schema s;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto eq = item.find('=');
        if (eq == std::string::npos) throw ConfigError("schema entry '" + item + "' is not key=value");
        const std::string key = item.substr(0, eq), value = item.substr(eq + 1);
        if (key == "target")
            s.target = value;
        else if (key == "group")
            s.group = value;
        else if (key == "features") {
            std::stringstream fs(value);
            std::string f;
            while (std::getline(fs, f, ';'))
                if (!f.empty()) s.features.push_back(f);
        } else if (key == "drop_missing")
            s.drop_missing = value == "1" || value == "true";
        else
            throw ConfigError("unknown schema key '" + key + "'");
    }
    return s;
}

ExperimentConfig build_config(const Overrides& o) {
    ExperimentConfig c = o.config.empty() ? ExperimentConfig{} : load_config(o.config);
    if (o.config.empty()) c.super.outer_count = c.replicates;
    if (!o.dataset.empty()) c.dataset.path = o.dataset;
    if (!o.schema.empty()) c.dataset.schema = parse_schema(o.schema);
    if (!o.recipe.empty()) c.dataset.recipe = load_recipe(o.recipe);
    if (!o.model.empty()) {
        if (o.model.size() > 5 && o.model.substr(o.model.size() - 5) == ".json")
            c.model = model_spec_from_json(nlohmann::json::parse(csv::read_file(o.model)));
        else
            c.model = model_spec_from_json(nlohmann::json(o.model));
    }
    if (o.b) {
        if (c.super.outer_count == c.replicates) c.super.outer_count = *o.b;
        c.replicates = *o.b;
    }
    if (o.splits) c.splits = *o.splits;
    if (o.kappa) c.policy.kappa = *o.kappa;
    if (o.inner) c.super.inner_count = *o.inner;
    if (o.seed) c.seed = *o.seed;
    if (o.workers) c.workers = *o.workers;
    if (!o.out.empty()) c.output_dir = o.out;
    return c;
}

std::string fmt(const std::optional<double>& v) {
    if (!v) return "   -   ";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%7.4f", *v);
    return buf;
}

void print_summary(const RunSummary& run) {
    std::cout << "method    Err      dFPR     dFNR     AR       meanSC   W1       W1@kappa\n";
    for (Method m : run.methods) {
        const auto& s = run.summaries.at(m);
        std::string name = to_string(m);
        name.resize(9, ' ');
        std::cout << name << ' ' << fmt(s.mean.overall[Metric::Err]) << "  " << fmt(s.mean.delta[Metric::Fpr]) << "  "
                  << fmt(s.mean.delta[Metric::Fnr]) << "  " << fmt(s.mean.overall[Metric::Ar]) << "  "
                  << fmt(s.mean.overall[Metric::MeanSc]) << "  " << fmt(s.w1.mean) << "  " << fmt(s.w1_masked.mean)
                  << '\n';
    }
}

int run_and_emit(ExperimentConfig config) {
    config.validate();
    const RunSummary run = run_experiment(config);
    const auto files = emit_report(run, config.output_dir);
    print_summary(run);
    std::cout << "wrote " << files.size() << " files to " << config.output_dir << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"varaudit: arbitrariness audits and abstaining ensembles for binary classifiers"};
    app.require_subcommand(1);

    std::string prep_dataset, prep_recipe, prep_out;
    auto* prep = app.add_subcommand("prep", "Apply a preprocessing recipe and write a clean CSV");
    prep->add_option("--dataset", prep_dataset, "Raw CSV")->required();
    prep->add_option("--recipe", prep_recipe, "Recipe (JSON)")->required();
    prep->add_option("--out", prep_out, "Output CSV (default: stdout)");

    Overrides audit_o, ens_o;
    auto* audit = app.add_subcommand("audit", "Baseline self-consistency / variance / CDF analysis");
    add_experiment_flags(audit, audit_o, false);
    auto* ensemble = app.add_subcommand("ensemble", "Abstaining ensembles (simple or super)");
    add_experiment_flags(ensemble, ens_o, true);

    std::string report_dir;
    auto* report = app.add_subcommand("report", "Re-render tables from a stored summary.json");
    report->add_option("--out", report_dir, "Directory holding summary.json")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        if (code != 0) {
            const auto chosen = app.get_subcommands();
            std::cerr << '\n' << (chosen.empty() ? app.help() : chosen.front()->help());
        }
        return code;
    }

    try {
        if (*prep) {
            const TabularDataset data = apply_recipe(csv::read(prep_dataset), load_recipe(prep_recipe));
            if (prep_out.empty())
                std::cout << data.to_csv();
            else
                csv::write_file(prep_out, data.to_csv());
            std::cerr << "prep: " << data.size() << " rows, " << data.num_features() << " features\n";
            return 0;
        }
        if (*audit) {
            ExperimentConfig c = build_config(audit_o);
            c.methods = {Method::Baseline};
            return run_and_emit(c);
        }
        if (*ensemble) {
            ExperimentConfig c = build_config(ens_o);
            if (!ens_o.mode.empty())
                c.methods = {Method::Baseline, parse_method(ens_o.mode)};
            else if (!c.has(Method::Baseline))
                c.methods.insert(c.methods.begin(), Method::Baseline);
            if (c.methods.size() == 1) c.methods.push_back(Method::Simple);
            return run_and_emit(c);
        }
        if (*report) {
            const auto path = std::filesystem::path(report_dir) / "summary.json";
            const RunSummary run = summary_from_json(nlohmann::json::parse(csv::read_file(path.string())));
            const auto files = emit_report(run, report_dir);
            print_summary(run);
            std::cout << "re-rendered " << files.size() << " files in " << report_dir << '\n';
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
