#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "deepwait/error.hpp"
#include "deepwait/linear_cph.hpp"
#include "deepwait/network.hpp"
#include "deepwait/pipeline.hpp"
#include "deepwait/preprocess.hpp"
#include "deepwait/relieff.hpp"

namespace deepwait {

enum class ModelKind { linear, deepwait };

/**
 * A scoring artifact directory: the column encoding plus either a linear fit
 * or the deep pipeline (standardizer, ranking, selection, network). Loading a
 * bundle and encoding a raw table with its spec is everything needed to score
 * new rows.
 */
struct ModelBundle {
    ModelKind kind = ModelKind::linear;
    EncodingSpec encoding;
    LinearCphFit linear;   // kind == linear
    DeepwaitModel model;   // kind == deepwait
};

inline void save_bundle(const ModelBundle& bundle, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    {
        std::ofstream out(dir / "bundle.txt");
        if (!out) throw IoError("cannot write '" + (dir / "bundle.txt").string() + "'");
        out << "deepwait-bundle v1\n";
        out << "kind " << (bundle.kind == ModelKind::linear ? "linear" : "deepwait") << "\n";
    }
    bundle.encoding.save(dir / "encoding.txt");
    if (bundle.kind == ModelKind::linear) {
        save_fit(bundle.linear, dir / "linear.txt");
    } else {
        save_network(bundle.model.network, dir / "network.txt");
        save_ranking(bundle.model.ranking, dir / "ranking.csv");
        save_pipeline_state(bundle.model, dir / "pipeline.txt");
    }
}

inline ModelBundle load_bundle(const std::filesystem::path& dir) {
    const auto marker = dir / "bundle.txt";
    std::ifstream in(marker);
    if (!in) throw IoError("cannot open '" + marker.string() + "' (not a model bundle?)");
    std::string line;
    if (!std::getline(in, line) || line != "deepwait-bundle v1")
        throw IoError("'" + marker.string() + "': not a model bundle");
    if (!std::getline(in, line) || line.rfind("kind ", 0) != 0)
        throw IoError("'" + marker.string() + "': missing kind line");
    const std::string kind = line.substr(5);

    ModelBundle bundle;
    bundle.encoding = EncodingSpec::load(dir / "encoding.txt");
    if (kind == "linear") {
        bundle.kind = ModelKind::linear;
        bundle.linear = load_fit(dir / "linear.txt");
    } else if (kind == "deepwait") {
        bundle.kind = ModelKind::deepwait;
        bundle.model.network = load_network(dir / "network.txt");
        bundle.model.ranking = load_ranking(dir / "ranking.csv");
        load_pipeline_state(bundle.model, dir / "pipeline.txt");
    } else {
        throw IoError("'" + marker.string() + "': unknown kind '" + kind + "'");
    }
    return bundle;
}

/** Risk scores for rows already encoded with the bundle's own spec. */
inline RiskScores bundle_scores(const ModelBundle& bundle, const SurvivalDataset& data) {
    if (bundle.kind == ModelKind::deepwait) return deepwait_scores(bundle.model, data.features);
    // the linear fit may use a subset of the encoded columns (VIF screening,
    // backward elimination); map its feature names back to column indices
    Matrix selected(data.features.rows(),
                    static_cast<Eigen::Index>(bundle.linear.feature_names.size()));
    for (std::size_t j = 0; j < bundle.linear.feature_names.size(); ++j) {
        const auto it = std::find(data.feature_names.begin(), data.feature_names.end(),
                                  bundle.linear.feature_names[j]);
        if (it == data.feature_names.end())
            throw ValidationError("bundle: data lacks feature '" +
                                  bundle.linear.feature_names[j] + "'");
        selected.col(static_cast<Eigen::Index>(j)) =
            data.features.col(it - data.feature_names.begin());
    }
    return predict_risk(bundle.linear, selected);
}

}  // namespace deepwait
