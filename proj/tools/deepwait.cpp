#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "deepwait/bundle.hpp"
#include "deepwait/csv.hpp"
#include "deepwait/error.hpp"
#include "deepwait/evaluation.hpp"
#include "deepwait/linear_cph.hpp"
#include "deepwait/manifest.hpp"
#include "deepwait/pipeline.hpp"
#include "deepwait/preprocess.hpp"
#include "deepwait/relieff.hpp"
#include "deepwait/search.hpp"
#include "deepwait/survival.hpp"
#include "deepwait/synthetic.hpp"
#include "deepwait/vif.hpp"

namespace dw = deepwait;
namespace fs = std::filesystem;

namespace {

using FlagList = std::vector<std::pair<std::string, std::string>>;

const std::string* flag_get(const FlagList& flags, const std::string& key) {
    for (const auto& [k, v] : flags)
        if (k == key) return &v;
    return nullptr;
}

std::string flag_required(const FlagList& flags, const std::string& key) {
    const auto* v = flag_get(flags, key);
    if (!v) throw dw::ValidationError("missing required flag --" + key);
    return *v;
}

std::string flag_or(const FlagList& flags, const std::string& key, const std::string& fallback) {
    const auto* v = flag_get(flags, key);
    return v ? *v : fallback;
}

double flag_double(const FlagList& flags, const std::string& key, double fallback) {
    const auto* v = flag_get(flags, key);
    return v ? dw::parse_double(*v, "--" + key) : fallback;
}

int flag_int(const FlagList& flags, const std::string& key, int fallback) {
    const auto* v = flag_get(flags, key);
    if (!v) return fallback;
    try {
        std::size_t pos = 0;
        const int parsed = std::stoi(*v, &pos);
        if (pos != v->size()) throw std::invalid_argument(*v);
        return parsed;
    } catch (const std::exception&) {
        throw dw::ValidationError("--" + key + ": '" + *v + "' is not an integer");
    }
}

std::uint64_t flag_u64(const FlagList& flags, const std::string& key, std::uint64_t fallback) {
    const auto* v = flag_get(flags, key);
    if (!v) return fallback;
    try {
        std::size_t pos = 0;
        const std::uint64_t parsed = std::stoull(*v, &pos);
        if (pos != v->size()) throw std::invalid_argument(*v);
        return parsed;
    } catch (const std::exception&) {
        throw dw::ValidationError("--" + key + ": '" + *v + "' is not an unsigned integer");
    }
}

void warn_dropped_rows(const dw::RawTable& table) {
    if (table.dropped_rows.empty()) return;
    std::cerr << "note: dropped " << table.dropped_rows.size()
              << " row(s) with missing or malformed cells (csv lines:";
    for (std::size_t i = 0; i < table.dropped_rows.size() && i < 10; ++i)
        std::cerr << " " << table.dropped_rows[i];
    if (table.dropped_rows.size() > 10) std::cerr << " ...";
    std::cerr << ")\n";
}

dw::RawTable load_inputs(const FlagList& flags, dw::RunManifest& manifest) {
    const fs::path data = flag_required(flags, "data");
    const fs::path schema_path = flag_required(flags, "schema");
    manifest.add_input("data", data);
    manifest.add_input("schema", schema_path);
    const dw::TableSchema schema = dw::TableSchema::load(schema_path);
    dw::RawTable table = dw::load_table(data, schema);
    warn_dropped_rows(table);
    return table;
}

fs::path prepare_out_dir(const FlagList& flags) {
    const fs::path out_dir = flag_required(flags, "out-dir");
    fs::create_directories(out_dir);
    return out_dir;
}

void write_dataset_csv(const dw::SurvivalDataset& data, const fs::path& path) {
    std::vector<std::string> header = {"wait", "event"};
    for (const auto& name : data.feature_names) header.push_back(name);
    std::vector<std::vector<std::string>> rows;
    for (int i = 0; i < data.n_samples(); ++i) {
        std::vector<std::string> row = {dw::format_double(data.durations[i]),
                                        std::to_string(data.events[i])};
        for (int j = 0; j < data.n_features(); ++j)
            row.push_back(dw::format_double(data.features(i, j)));
        rows.push_back(std::move(row));
    }
    dw::write_csv(path, header, rows);
}

void write_schema_file(const dw::SurvivalDataset& data, const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw dw::IoError("cannot write '" + path.string() + "'");
    out << "duration: wait\n"
        << "event: event\n";
    for (const auto& name : data.feature_names) out << "numeric: " << name << "\n";
    if (!out) throw dw::IoError("failed writing '" + path.string() + "'");
}

std::string format_fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

// human-facing reports; manifests keep the exact %.17g form
std::string format_short(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

// ---------------------------------------------------------------------------

dw::RunManifest cmd_generate(const FlagList& flags) {
    dw::RunManifest manifest;
    manifest.command = "generate";
    const fs::path spec_path = flag_required(flags, "spec");
    manifest.add_input("spec", spec_path);
    dw::SyntheticSpec spec = dw::SyntheticSpec::load(spec_path);
    if (flag_get(flags, "seed")) spec.seed = flag_u64(flags, "seed", spec.seed);
    manifest.seed = spec.seed;
    manifest.add_flag("spec", spec_path.string());
    manifest.add_flag("out-dir", flag_required(flags, "out-dir"));
    manifest.add_flag("seed", std::to_string(spec.seed));

    const auto [data, truth] = dw::generate_synthetic(spec);
    const fs::path out_dir = prepare_out_dir(flags);

    write_dataset_csv(data, out_dir / "data.csv");
    write_schema_file(data, out_dir / "schema.txt");
    {
        std::vector<std::vector<std::string>> rows;
        for (Eigen::Index i = 0; i < truth.log_risk.size(); ++i)
            rows.push_back({dw::format_double(truth.log_risk[i]),
                            dw::format_double(truth.event_times[i])});
        dw::write_csv(out_dir / "truth.csv", {"log_risk", "event_time"}, rows);
    }
    manifest.add_output("data", out_dir / "data.csv");
    manifest.add_output("schema", out_dir / "schema.txt");
    manifest.add_output("truth", out_dir / "truth.csv");

    std::cout << "generated " << data.n_samples() << " rows, " << data.n_features()
              << " features -> " << out_dir.string() << " (censoring target "
              << format_fixed(truth.censoring_target, 2) << ", realized "
              << format_fixed(truth.censoring_realized, 2) << ")\n";
    return manifest;
}

dw::RunManifest cmd_describe(const FlagList& flags) {
    dw::RunManifest manifest;
    manifest.command = "describe";
    const double bin_width = flag_double(flags, "bin-width", 1.0);
    const dw::RawTable table = load_inputs(flags, manifest);
    manifest.add_flag("data", flag_required(flags, "data"));
    manifest.add_flag("schema", flag_required(flags, "schema"));
    manifest.add_flag("out-dir", flag_required(flags, "out-dir"));
    manifest.add_flag("bin-width", dw::format_double(bin_width));

    const dw::Description desc = dw::describe(table, bin_width);
    const fs::path out_dir = prepare_out_dir(flags);
    {
        std::vector<std::vector<std::string>> rows;
        for (const auto& lm : desc.level_means)
            rows.push_back({lm.variable, lm.level, std::to_string(lm.count),
                            lm.mean ? dw::format_double(*lm.mean) : ""});
        dw::write_csv(out_dir / "level_means.csv",
                      {"variable", "level", "count", "mean_wait"}, rows);
    }
    {
        std::vector<std::vector<std::string>> rows;
        for (const auto& bin : desc.histogram)
            rows.push_back({dw::format_double(bin.lower), dw::format_double(bin.upper),
                            std::to_string(bin.count)});
        dw::write_csv(out_dir / "histogram.csv", {"lower", "upper", "count"}, rows);
    }
    manifest.add_output("level_means", out_dir / "level_means.csv");
    manifest.add_output("histogram", out_dir / "histogram.csv");

    std::cout << "described " << table.n_rows() << " rows: " << desc.level_means.size()
              << " level means, " << desc.histogram.size() << " histogram bins -> "
              << out_dir.string() << "\n";
    return manifest;
}

dw::RunManifest cmd_fit_linear(const FlagList& flags) {
    dw::RunManifest manifest;
    manifest.command = "fit-linear";
    const double vif_threshold = flag_double(flags, "vif-threshold", 5.0);
    const double alpha = flag_double(flags, "alpha", 0.05);
    const double ridge = flag_double(flags, "ridge", 0.0);
    const int folds = flag_int(flags, "folds", 10);
    const std::uint64_t seed = flag_u64(flags, "seed", 0);
    manifest.seed = seed;

    const dw::RawTable table = load_inputs(flags, manifest);
    manifest.add_flag("data", flag_required(flags, "data"));
    manifest.add_flag("schema", flag_required(flags, "schema"));
    manifest.add_flag("out-dir", flag_required(flags, "out-dir"));
    manifest.add_flag("vif-threshold", dw::format_double(vif_threshold));
    manifest.add_flag("alpha", dw::format_double(alpha));
    manifest.add_flag("ridge", dw::format_double(ridge));
    manifest.add_flag("folds", std::to_string(folds));
    manifest.add_flag("seed", std::to_string(seed));

    const auto [data, encoding] = dw::encode(table);

    dw::LinearPipelineOptions pipeline;
    pipeline.vif_threshold = vif_threshold;
    pipeline.alpha = alpha;
    pipeline.cph.ridge = ridge;

    const dw::VifScreenResult screen = dw::vif_screen(data, vif_threshold);
    const dw::SurvivalDataset screened = dw::subset_features(data, screen.kept);
    const dw::BackwardEliminationResult elim =
        dw::backward_eliminate(screened, alpha, pipeline.cph);
    const dw::CrossValidationResult cv =
        dw::cross_validate(data, folds, seed, dw::make_linear_cph_factory(pipeline));

    std::string report;
    report += "rows: " + std::to_string(table.n_rows()) + " (dropped " +
              std::to_string(table.dropped_rows.size()) + ")\n";
    report += "VIF screening (threshold " + format_short(vif_threshold) + "):";
    if (screen.removed.empty()) report += " removed none";
    for (const auto& r : screen.removed)
        report += " removed " + r.feature + " (VIF " + format_fixed(r.vif, 2) + ");";
    report += "\n";
    report += "backward elimination (alpha " + format_short(alpha) + "):";
    if (elim.removed.empty()) report += " removed none";
    for (const auto& r : elim.removed)
        report += " removed " + r.feature + " (p " + format_fixed(r.p_value, 4) + ");";
    report += "\n\n";
    report += dw::format_fit_table(elim.fit);
    report += "\nmean C-index (" + std::to_string(folds) +
              "-fold): " + format_fixed(cv.mean_c_index, 2) + "\n";

    const fs::path out_dir = prepare_out_dir(flags);
    {
        std::ofstream out(out_dir / "report.txt");
        if (!out) throw dw::IoError("cannot write '" + (out_dir / "report.txt").string() + "'");
        out << report;
    }
    dw::ModelBundle bundle;
    bundle.kind = dw::ModelKind::linear;
    bundle.encoding = encoding;
    bundle.linear = elim.fit;
    dw::save_bundle(bundle, out_dir / "model");

    manifest.add_output("report", out_dir / "report.txt");
    manifest.add_output("bundle", out_dir / "model" / "bundle.txt");
    manifest.add_output("encoding", out_dir / "model" / "encoding.txt");
    manifest.add_output("fit", out_dir / "model" / "linear.txt");

    std::cout << report;
    return manifest;
}

dw::RunManifest cmd_rank(const FlagList& flags) {
    dw::RunManifest manifest;
    manifest.command = "rank";
    dw::ReliefConfig config;
    config.k_neighbors = flag_int(flags, "k-neighbors", config.k_neighbors);
    config.sigma = flag_double(flags, "sigma", config.sigma);
    config.m_samples = flag_int(flags, "m-samples", config.m_samples);
    config.seed = flag_u64(flags, "seed", 0);
    manifest.seed = config.seed;

    const dw::RawTable table = load_inputs(flags, manifest);
    manifest.add_flag("data", flag_required(flags, "data"));
    manifest.add_flag("schema", flag_required(flags, "schema"));
    manifest.add_flag("out-dir", flag_required(flags, "out-dir"));
    manifest.add_flag("k-neighbors", std::to_string(config.k_neighbors));
    manifest.add_flag("sigma", dw::format_double(config.sigma));
    manifest.add_flag("m-samples", std::to_string(config.m_samples));
    manifest.add_flag("seed", std::to_string(config.seed));

    const auto [data, encoding] = dw::encode(table);
    const dw::FeatureRanking ranking = dw::rank_features(data, config);
    for (const auto& warning : ranking.warnings) std::cerr << "warning: " << warning << "\n";

    const fs::path out_dir = prepare_out_dir(flags);
    dw::save_ranking(ranking, out_dir / "ranking.csv");
    manifest.add_output("ranking", out_dir / "ranking.csv");

    std::cout << "ranked " << ranking.order.size() << " features -> "
              << (out_dir / "ranking.csv").string() << "\n";
    return manifest;
}

dw::RunManifest cmd_search(const FlagList& flags) {
    dw::RunManifest manifest;
    manifest.command = "search";
    const fs::path space_path = flag_required(flags, "space");
    const int folds = flag_int(flags, "folds", 10);
    const int jobs = flag_int(flags, "jobs", 1);
    const std::uint64_t seed = flag_u64(flags, "seed", 0);
    manifest.seed = seed;

    const dw::RawTable table = load_inputs(flags, manifest);
    manifest.add_input("space", space_path);
    manifest.add_flag("data", flag_required(flags, "data"));
    manifest.add_flag("schema", flag_required(flags, "schema"));
    manifest.add_flag("space", space_path.string());
    manifest.add_flag("out-dir", flag_required(flags, "out-dir"));
    manifest.add_flag("folds", std::to_string(folds));
    manifest.add_flag("jobs", std::to_string(jobs));
    manifest.add_flag("seed", std::to_string(seed));

    const auto [data, encoding] = dw::encode(table);
    const dw::SearchSpace space = dw::SearchSpace::load(space_path);
    const fs::path out_dir = prepare_out_dir(flags);

    dw::SearchOptions options;
    options.k_folds = folds;
    options.seed = seed;
    options.jobs = jobs;
    options.trial_log = out_dir / "trials.csv";
    const dw::SearchResult result = dw::random_search(space, data, options);

    // refit the winning configuration on the full dataset for the bundle
    dw::DeepwaitOptions best;
    best.top_n = result.best.config.top_n;
    best.network = result.best.config.network;
    best.relief.seed = result.best.seed;
    const dw::DeepwaitModel model = dw::fit_deepwait(data, best);

    dw::ModelBundle bundle;
    bundle.kind = dw::ModelKind::deepwait;
    bundle.encoding = encoding;
    bundle.model = model;
    dw::save_bundle(bundle, out_dir / "best_model");

    manifest.add_output("trials", options.trial_log);
    manifest.add_output("bundle", out_dir / "best_model" / "bundle.txt");
    manifest.add_output("encoding", out_dir / "best_model" / "encoding.txt");
    manifest.add_output("network", out_dir / "best_model" / "network.txt");
    manifest.add_output("ranking", out_dir / "best_model" / "ranking.csv");
    manifest.add_output("pipeline", out_dir / "best_model" / "pipeline.txt");

    int failed = 0;
    for (const auto& trial : result.trials)
        if (!trial.ok()) ++failed;
    std::cout << "searched " << result.trials.size() << " trials (" << failed
              << " failed); best trial " << result.best.index << ": mean C-index "
              << format_fixed(result.best.mean_c_index, 4) << ", n=" << result.best.config.top_n
              << ", layers=" << dw::detail::join_layers(result.best.config.network.hidden_layers)
              << "\n";
    return manifest;
}

dw::RunManifest cmd_evaluate(const FlagList& flags) {
    dw::RunManifest manifest;
    manifest.command = "evaluate";
    std::vector<std::string> model_dirs;
    for (const auto& [k, v] : flags)
        if (k == "model") model_dirs.push_back(v);
    if (model_dirs.empty()) throw dw::ValidationError("missing required flag --model");

    const dw::RawTable table = load_inputs(flags, manifest);
    manifest.add_flag("data", flag_required(flags, "data"));
    manifest.add_flag("schema", flag_required(flags, "schema"));
    manifest.add_flag("out-dir", flag_required(flags, "out-dir"));
    for (const auto& dir : model_dirs) manifest.add_flag("model", dir);

    std::vector<std::string> names;
    for (const auto& dir : model_dirs) {
        std::string name = fs::path(dir).filename().string();
        if (name.empty()) name = fs::path(dir).parent_path().filename().string();
        if (std::find(names.begin(), names.end(), name) != names.end())
            throw dw::ValidationError("evaluate: duplicate bundle name '" + name +
                                      "'; use distinct directory names");
        names.push_back(name);
    }

    const fs::path out_dir = prepare_out_dir(flags);
    std::vector<std::vector<std::string>> metric_rows;
    std::cout << "model                              C-index\n";
    for (std::size_t m = 0; m < model_dirs.size(); ++m) {
        const dw::ModelBundle bundle = dw::load_bundle(model_dirs[m]);
        manifest.add_input("model:" + names[m], fs::path(model_dirs[m]) / "bundle.txt");
        const dw::SurvivalDataset data = dw::encode_with(table, bundle.encoding);
        const dw::RiskScores scores = dw::bundle_scores(bundle, data);
        const double c = dw::c_index(data.durations, data.events, scores);

        std::vector<std::vector<std::string>> score_rows;
        for (Eigen::Index i = 0; i < scores.size(); ++i)
            score_rows.push_back({std::to_string(i + 1), dw::format_double(scores[i])});
        const fs::path score_path = out_dir / ("scores_" + names[m] + ".csv");
        dw::write_csv(score_path, {"row", "score"}, score_rows);
        manifest.add_output("scores:" + names[m], score_path);

        metric_rows.push_back({names[m], dw::format_double(c)});
        std::printf("%-34s %.4f\n", names[m].c_str(), c);
    }
    dw::write_csv(out_dir / "metrics.csv", {"model", "c_index"}, metric_rows);
    manifest.add_output("metrics", out_dir / "metrics.csv");
    return manifest;
}

// ---------------------------------------------------------------------------

void dispatch(const std::string& command, const FlagList& flags);

void cmd_rerun(const FlagList& flags) {
    const fs::path manifest_path = flag_required(flags, "manifest");
    const dw::RunManifest manifest = dw::load_manifest(manifest_path);

    for (const auto& input : manifest.inputs) {
        const std::string digest = dw::file_digest(input.path);
        if (digest != input.digest)
            throw dw::IoError("rerun: input '" + input.role + "' (" + input.path +
                              ") has changed since the manifest was written");
    }
    dispatch(manifest.command, manifest.flags);
    for (const auto& output : manifest.outputs) {
        const std::string digest = dw::file_digest(output.path);
        if (digest != output.digest)
            throw dw::ValidationError("rerun: output '" + output.role + "' (" + output.path +
                                      ") was not reproduced byte-identically");
    }
    std::cout << "rerun of '" << manifest.command << "' reproduced "
              << manifest.outputs.size() << " output(s) byte-identically\n";
}

void dispatch(const std::string& command, const FlagList& flags) {
    dw::RunManifest manifest;
    if (command == "generate") manifest = cmd_generate(flags);
    else if (command == "describe") manifest = cmd_describe(flags);
    else if (command == "fit-linear") manifest = cmd_fit_linear(flags);
    else if (command == "rank") manifest = cmd_rank(flags);
    else if (command == "search") manifest = cmd_search(flags);
    else if (command == "evaluate") manifest = cmd_evaluate(flags);
    else if (command == "rerun") { cmd_rerun(flags); return; }
    else throw dw::ValidationError("unknown command '" + command + "'");
    dw::save_manifest(manifest, fs::path(flag_required(flags, "out-dir")) / "manifest.json");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"DeepWait: pedestrian waiting-time survival analysis"};
    app.require_subcommand(1);

    std::string data, schema, out_dir, spec, space, manifest_path;
    std::vector<std::string> models;
    std::uint64_t seed = 0;
    int folds = 10, jobs = 1, k_neighbors = 10, m_samples = 0;
    double bin_width = 1.0, vif_threshold = 5.0, alpha = 0.05, ridge = 0.0, sigma = 20.0;

    auto add_common = [&](CLI::App* sub, bool with_seed) {
        sub->add_option("--data", data, "input CSV")->required();
        sub->add_option("--schema", schema, "column schema file")->required();
        sub->add_option("--out-dir", out_dir, "output directory")->required();
        if (with_seed) sub->add_option("--seed", seed, "master seed");
    };

    auto* generate = app.add_subcommand("generate", "synthesize a dataset with known truth");
    generate->add_option("--spec", spec, "synthetic spec file")->required();
    generate->add_option("--out-dir", out_dir, "output directory")->required();
    generate->add_option("--seed", seed, "overrides the spec's seed");

    auto* describe = app.add_subcommand("describe", "level means and waiting-time histogram");
    add_common(describe, false);
    describe->add_option("--bin-width", bin_width, "histogram bin width");

    auto* fit_linear = app.add_subcommand("fit-linear", "VIF screen, fit, eliminate, cross-validate");
    add_common(fit_linear, true);
    fit_linear->add_option("--vif-threshold", vif_threshold, "collinearity cutoff");
    fit_linear->add_option("--alpha", alpha, "backward-elimination significance level");
    fit_linear->add_option("--ridge", ridge, "L2 stabilizer for collinear fits");
    fit_linear->add_option("--folds", folds, "cross-validation folds");

    auto* rank = app.add_subcommand("rank", "RReliefF feature ranking");
    add_common(rank, true);
    rank->add_option("--k-neighbors", k_neighbors, "neighbors per instance");
    rank->add_option("--sigma", sigma, "rank influence decay");
    rank->add_option("--m-samples", m_samples, "instances to sample (0 = all)");

    auto* search = app.add_subcommand("search", "random hyperparameter search");
    add_common(search, true);
    search->add_option("--space", space, "search space file")->required();
    search->add_option("--folds", folds, "cross-validation folds");
    search->add_option("--jobs", jobs, "parallel trials");

    auto* evaluate = app.add_subcommand("evaluate", "score data with saved model bundles");
    add_common(evaluate, false);
    evaluate->add_option("--model", models, "model bundle directory (repeatable)")->required();

    auto* rerun = app.add_subcommand("rerun", "replay a run manifest and verify outputs");
    rerun->add_option("--manifest", manifest_path, "manifest.json from a previous run")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    FlagList flags;
    std::string command;
    if (generate->parsed()) {
        command = "generate";
        flags.emplace_back("spec", spec);
        flags.emplace_back("out-dir", out_dir);
        if (generate->count("--seed")) flags.emplace_back("seed", std::to_string(seed));
    } else if (describe->parsed()) {
        command = "describe";
        flags = {{"data", data}, {"schema", schema}, {"out-dir", out_dir},
                 {"bin-width", dw::format_double(bin_width)}};
    } else if (fit_linear->parsed()) {
        command = "fit-linear";
        flags = {{"data", data},
                 {"schema", schema},
                 {"out-dir", out_dir},
                 {"vif-threshold", dw::format_double(vif_threshold)},
                 {"alpha", dw::format_double(alpha)},
                 {"ridge", dw::format_double(ridge)},
                 {"folds", std::to_string(folds)},
                 {"seed", std::to_string(seed)}};
    } else if (rank->parsed()) {
        command = "rank";
        flags = {{"data", data},
                 {"schema", schema},
                 {"out-dir", out_dir},
                 {"k-neighbors", std::to_string(k_neighbors)},
                 {"sigma", dw::format_double(sigma)},
                 {"m-samples", std::to_string(m_samples)},
                 {"seed", std::to_string(seed)}};
    } else if (search->parsed()) {
        command = "search";
        flags = {{"data", data},        {"schema", schema},
                 {"space", space},      {"out-dir", out_dir},
                 {"folds", std::to_string(folds)}, {"jobs", std::to_string(jobs)},
                 {"seed", std::to_string(seed)}};
    } else if (evaluate->parsed()) {
        command = "evaluate";
        flags = {{"data", data}, {"schema", schema}, {"out-dir", out_dir}};
        for (const auto& m : models) flags.emplace_back("model", m);
    } else if (rerun->parsed()) {
        command = "rerun";
        flags = {{"manifest", manifest_path}};
    }

    try {
        dispatch(command, flags);
        return 0;
    } catch (const dw::IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const dw::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const dw::NumericalError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
