#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "deepwait/error.hpp"
#include "deepwait/evaluation.hpp"
#include "deepwait/linear_cph.hpp"
#include "deepwait/network.hpp"
#include "deepwait/preprocess.hpp"
#include "deepwait/relieff.hpp"
#include "deepwait/survival.hpp"
#include "deepwait/vif.hpp"

namespace deepwait {

/**
 * Column-wise z-scoring with statistics frozen at fit time. Constant columns
 * get scale 1 so they map to zero instead of dividing by zero. Refit on every
 * training split; applying train statistics to held-out rows is the whole
 * point.
 */
struct Standardizer {
    Vector mean;
    Vector scale;

    static Standardizer fit(const Matrix& features) {
        if (features.rows() < 1) throw ValidationError("standardizer: no rows");
        const Eigen::Index n = features.rows();
        const Eigen::Index p = features.cols();
        Standardizer s;
        s.mean = features.colwise().mean().transpose();
        s.scale = Vector::Ones(p);
        if (n > 1) {
            for (Eigen::Index j = 0; j < p; ++j) {
                const double ss = (features.col(j).array() - s.mean[j]).square().sum();
                const double sd = std::sqrt(ss / static_cast<double>(n - 1));
                if (sd > 0.0) s.scale[j] = sd;
            }
        }
        return s;
    }

    Matrix apply(const Matrix& features) const {
        if (features.cols() != mean.size())
            throw ValidationError("standardizer: expected " + std::to_string(mean.size()) +
                                  " columns, got " + std::to_string(features.cols()));
        Matrix out(features.rows(), features.cols());
        for (Eigen::Index j = 0; j < features.cols(); ++j)
            out.col(j) = (features.col(j).array() - mean[j]) / scale[j];
        return out;
    }
};

struct DeepwaitOptions {
    int top_n = 0;  // 0 = keep every feature (ranking still computed)
    ReliefConfig relief;
    NetworkConfig network;              // n_inputs is overwritten with the selected count
    double validation_fraction = 0.0;   // >0 carves an early-stop split out of the training rows
};

/** Everything needed to score new rows: train-split statistics, the feature
 *  ranking, the selected subset, and the trained network. */
struct DeepwaitModel {
    Standardizer standardizer;
    FeatureRanking ranking;
    std::vector<std::string> selected;
    std::vector<int> selected_idx;  // columns in the original feature order
    RiskNetwork network;
    TrainResult training;
};

/**
 * The full pipeline on one training set: standardize, rank by RReliefF
 * against observed waiting time, keep the top n features, train the deep risk
 * network on them. Nothing here may look at held-out rows.
 */
inline DeepwaitModel fit_deepwait(const SurvivalDataset& train, const DeepwaitOptions& options) {
    train.validate();
    const int p = train.n_features();
    if (options.top_n < 0 || options.top_n > p)
        throw ValidationError("deepwait: top_n must lie in [0, " + std::to_string(p) +
                              "], got " + std::to_string(options.top_n));
    if (options.validation_fraction < 0.0 || options.validation_fraction >= 1.0)
        throw ValidationError("deepwait: validation_fraction must lie in [0, 1)");

    DeepwaitModel model;
    model.standardizer = Standardizer::fit(train.features);

    // ranking runs on the raw training features; the weights are invariant
    // under the standardization anyway
    model.ranking = rank_features(train, options.relief);
    const int n_keep = options.top_n == 0 ? p : options.top_n;
    model.selected = select_top_n(model.ranking, n_keep);
    for (const auto& name : model.selected) {
        const auto it = std::find(train.feature_names.begin(), train.feature_names.end(), name);
        model.selected_idx.push_back(
            static_cast<int>(it - train.feature_names.begin()));
    }

    SurvivalDataset fit_data = train;
    fit_data.features = model.standardizer.apply(train.features);
    fit_data = subset_features(fit_data, model.selected_idx);

    NetworkConfig config = options.network;
    config.n_inputs = n_keep;
    model.network = init_network(config);

    if (options.validation_fraction > 0.0) {
        const int n = train.n_samples();
        const int n_val = static_cast<int>(std::lround(options.validation_fraction * n));
        if (n_val < 1 || n_val >= n)
            throw ValidationError("deepwait: validation_fraction leaves no usable split");
        std::vector<int> rows(static_cast<std::size_t>(n));
        std::iota(rows.begin(), rows.end(), 0);
        Rng rng(derive_seed(config.seed, 0x1aa7));
        rng.shuffle(rows);
        const std::vector<int> val_rows(rows.begin(), rows.begin() + n_val);
        const std::vector<int> fit_rows(rows.begin() + n_val, rows.end());
        const SurvivalDataset inner_val = subset_rows(fit_data, val_rows);
        const SurvivalDataset inner_fit = subset_rows(fit_data, fit_rows);
        model.training = train_network(model.network, inner_fit, &inner_val);
    } else {
        model.training = train_network(model.network, fit_data);
    }
    return model;
}

inline RiskScores deepwait_scores(const DeepwaitModel& model, const Matrix& features) {
    const Matrix standardized = model.standardizer.apply(features);
    Matrix selected(standardized.rows(),
                    static_cast<Eigen::Index>(model.selected_idx.size()));
    for (std::size_t j = 0; j < model.selected_idx.size(); ++j)
        selected.col(static_cast<Eigen::Index>(j)) = standardized.col(model.selected_idx[j]);
    return predict(model.network, selected);
}

/** Cross-validation factory wrapping the DeepWait pipeline. An optional
 *  observer sees each trained fold model (used by leakage canaries). */
inline ScorerFactory make_deepwait_factory(
    const DeepwaitOptions& options,
    std::function<void(const DeepwaitModel&)> observer = nullptr) {
    return [options, observer](const SurvivalDataset& train) -> Scorer {
        auto model = std::make_shared<DeepwaitModel>(fit_deepwait(train, options));
        if (observer) observer(*model);
        return [model](const Matrix& features) { return deepwait_scores(*model, features); };
    };
}

struct LinearPipelineOptions {
    double vif_threshold = 5.0;
    double alpha = 0.05;  // backward-elimination significance level
    LinearCphOptions cph;
};

/** Per-split linear baseline: VIF screening, then backward elimination, both
 *  fitted on the training rows only. */
inline ScorerFactory make_linear_cph_factory(const LinearPipelineOptions& options = {}) {
    return [options](const SurvivalDataset& train) -> Scorer {
        const VifScreenResult screen = vif_screen(train, options.vif_threshold);
        const SurvivalDataset screened = subset_features(train, screen.kept);
        const BackwardEliminationResult eliminated =
            backward_eliminate(screened, options.alpha, options.cph);
        auto fit = std::make_shared<LinearCphFit>(eliminated.fit);
        // map the surviving feature names back to original column indices
        std::vector<int> columns;
        for (const auto& name : fit->feature_names) {
            const auto it =
                std::find(train.feature_names.begin(), train.feature_names.end(), name);
            columns.push_back(static_cast<int>(it - train.feature_names.begin()));
        }
        return [fit, columns](const Matrix& features) {
            Matrix selected(features.rows(), static_cast<Eigen::Index>(columns.size()));
            for (std::size_t j = 0; j < columns.size(); ++j)
                selected.col(static_cast<Eigen::Index>(j)) = features.col(columns[j]);
            return predict_risk(*fit, selected);
        };
    };
}

namespace detail {

inline std::string read_line_checked(std::istream& in, const std::string& context) {
    std::string line;
    if (!std::getline(in, line)) throw IoError(context + ": unexpected end of file");
    return line;
}

}  // namespace detail

/** Standardizer + selected features, one text file; the network and ranking
 *  have their own formats. */
inline void save_pipeline_state(const DeepwaitModel& model, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << "deepwait-pipeline v1\n";
    out << "n_features " << model.standardizer.mean.size() << "\n";
    for (Eigen::Index j = 0; j < model.standardizer.mean.size(); ++j)
        out << "column " << format_double(model.standardizer.mean[j]) << " "
            << format_double(model.standardizer.scale[j]) << "\n";
    out << "selected " << model.selected.size() << "\n";
    for (std::size_t j = 0; j < model.selected.size(); ++j)
        out << "select " << model.selected_idx[j] << " " << model.selected[j] << "\n";
    if (!out) throw IoError("failed writing '" + path.string() + "'");
}

inline void load_pipeline_state(DeepwaitModel& model, const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    const std::string context = "'" + path.string() + "'";
    if (detail::read_line_checked(in, context) != "deepwait-pipeline v1")
        throw IoError(context + ": not a pipeline state file");

    std::string word;
    long n_features = 0;
    if (!(in >> word >> n_features) || word != "n_features" || n_features < 0)
        throw IoError(context + ": malformed n_features line");
    model.standardizer.mean.resize(n_features);
    model.standardizer.scale.resize(n_features);
    for (long j = 0; j < n_features; ++j) {
        std::string mean_s, scale_s;
        if (!(in >> word >> mean_s >> scale_s) || word != "column")
            throw IoError(context + ": malformed column line");
        model.standardizer.mean[j] = parse_double(mean_s, "pipeline mean");
        model.standardizer.scale[j] = parse_double(scale_s, "pipeline scale");
    }
    long n_selected = 0;
    if (!(in >> word >> n_selected) || word != "selected" || n_selected < 0)
        throw IoError(context + ": malformed selected line");
    model.selected.clear();
    model.selected_idx.clear();
    for (long j = 0; j < n_selected; ++j) {
        int idx = 0;
        if (!(in >> word >> idx) || word != "select")
            throw IoError(context + ": malformed select line");
        std::string name;
        std::getline(in, name);
        name = trim(name);
        if (name.empty()) throw IoError(context + ": select line missing feature name");
        model.selected.push_back(name);
        model.selected_idx.push_back(idx);
    }
}

}  // namespace deepwait
