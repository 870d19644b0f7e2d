#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "deepwait/csv.hpp"
#include "deepwait/error.hpp"
#include "deepwait/evaluation.hpp"
#include "deepwait/pipeline.hpp"
#include "deepwait/rng.hpp"

namespace deepwait {

/** One numeric hyperparameter: a uniform range, a log-uniform range, or a
 *  finite choice set. */
struct ParamSpec {
    enum class Kind { uniform, log_uniform, choice };
    Kind kind = Kind::choice;
    double lo = 0.0;
    double hi = 0.0;
    std::vector<double> choices;

    static ParamSpec fixed(double v) {
        ParamSpec s;
        s.choices = {v};
        return s;
    }

    void validate(const std::string& key) const {
        switch (kind) {
            case Kind::uniform:
                if (!(lo <= hi))
                    throw ValidationError("search space: " + key + ": empty range");
                break;
            case Kind::log_uniform:
                if (!(lo > 0.0) || !(lo <= hi))
                    throw ValidationError("search space: " + key +
                                          ": log range needs 0 < lo <= hi");
                break;
            case Kind::choice:
                if (choices.empty())
                    throw ValidationError("search space: " + key + ": no choices");
                break;
        }
    }

    double sample(Rng& rng) const {
        switch (kind) {
            case Kind::uniform:
                return lo == hi ? lo : rng.uniform(lo, hi);
            case Kind::log_uniform:
                return lo == hi ? lo : std::exp(rng.uniform(std::log(lo), std::log(hi)));
            case Kind::choice:
            default:
                return choices[static_cast<std::size_t>(
                    rng.uniform_int(0, static_cast<std::int64_t>(choices.size()) - 1))];
        }
    }
};

/** Integer hyperparameter: inclusive uniform range or choice set. */
struct IntSpec {
    enum class Kind { uniform, choice };
    Kind kind = Kind::choice;
    int lo = 0;
    int hi = -1;
    std::vector<int> choices;

    static IntSpec fixed(int v) {
        IntSpec s;
        s.choices = {v};
        return s;
    }

    bool unset() const { return kind == Kind::choice && choices.empty(); }

    void validate(const std::string& key) const {
        if (kind == Kind::uniform) {
            if (lo > hi) throw ValidationError("search space: " + key + ": empty range");
        } else if (choices.empty()) {
            throw ValidationError("search space: " + key + ": no choices");
        }
    }

    int sample(Rng& rng) const {
        if (kind == Kind::uniform)
            return lo == hi ? lo : static_cast<int>(rng.uniform_int(lo, hi));
        return choices[static_cast<std::size_t>(
            rng.uniform_int(0, static_cast<std::int64_t>(choices.size()) - 1))];
    }
};

struct TrialConfig {
    int top_n = 0;
    NetworkConfig network;
};

/**
 * Random-search space over the pipeline hyperparameters. `n` (how many
 * top-ranked features feed the network) has no sensible default and must be
 * given; every other field defaults to the network's own default as a
 * singleton. Learning rate and L2 are conventionally searched log-uniform.
 */
struct SearchSpace {
    int budget = 100;
    IntSpec n;  // required
    std::vector<std::vector<int>> hidden_layer_choices = {{}};
    ParamSpec dropout_rate = ParamSpec::fixed(0.0);
    std::vector<bool> batch_norm_choices = {false};
    ParamSpec l2_coefficient = ParamSpec::fixed(0.0);
    ParamSpec learning_rate = ParamSpec::fixed(1e-3);
    ParamSpec lr_decay = ParamSpec::fixed(0.0);
    ParamSpec momentum = ParamSpec::fixed(0.0);
    IntSpec epochs = IntSpec::fixed(100);

    void validate() const {
        if (budget < 1) throw ValidationError("search space: trials must be >= 1");
        if (n.unset()) throw ValidationError("search space: n is required");
        n.validate("n");
        if (hidden_layer_choices.empty())
            throw ValidationError("search space: hidden_layers: no choices");
        for (const auto& widths : hidden_layer_choices)
            for (const int w : widths)
                if (w < 1)
                    throw ValidationError("search space: hidden_layers: widths must be >= 1");
        dropout_rate.validate("dropout_rate");
        if (batch_norm_choices.empty())
            throw ValidationError("search space: batch_norm: no choices");
        l2_coefficient.validate("l2_coefficient");
        learning_rate.validate("learning_rate");
        lr_decay.validate("lr_decay");
        momentum.validate("momentum");
        epochs.validate("epochs");
    }

    // Fields are drawn in this fixed order so a trial's configuration depends
    // only on its seed, never on other trials.
    TrialConfig sample(Rng& rng) const {
        TrialConfig trial;
        trial.top_n = n.sample(rng);
        trial.network.hidden_layers = hidden_layer_choices[static_cast<std::size_t>(
            rng.uniform_int(0, static_cast<std::int64_t>(hidden_layer_choices.size()) - 1))];
        trial.network.dropout_rate = dropout_rate.sample(rng);
        trial.network.batch_norm = batch_norm_choices[static_cast<std::size_t>(
            rng.uniform_int(0, static_cast<std::int64_t>(batch_norm_choices.size()) - 1))];
        trial.network.l2_coefficient = l2_coefficient.sample(rng);
        trial.network.learning_rate = learning_rate.sample(rng);
        trial.network.lr_decay = lr_decay.sample(rng);
        trial.network.momentum = momentum.sample(rng);
        trial.network.epochs = epochs.sample(rng);
        return trial;
    }

    static SearchSpace parse(std::istream& in);
    static SearchSpace load(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw IoError("cannot open '" + path.string() + "'");
        return parse(in);
    }
};

namespace detail {

inline std::vector<std::string> split_words(const std::string& s) {
    std::istringstream in(s);
    std::vector<std::string> words;
    std::string w;
    while (in >> w) words.push_back(w);
    return words;
}

// "lo..hi" -> (lo, hi)
inline std::pair<std::string, std::string> split_range(const std::string& token,
                                                       const std::string& key) {
    const auto dots = token.find("..");
    if (dots == std::string::npos)
        throw IoError("search space: " + key + ": expected lo..hi, got '" + token + "'");
    return {token.substr(0, dots), token.substr(dots + 2)};
}

inline ParamSpec parse_param(const std::string& key, const std::string& value) {
    const auto words = split_words(value);
    if (words.empty()) throw IoError("search space: " + key + ": missing value");
    ParamSpec spec;
    if (words[0] == "choice") {
        spec.kind = ParamSpec::Kind::choice;
        for (std::size_t i = 1; i < words.size(); ++i)
            spec.choices.push_back(parse_double(words[i], key));
        return spec;
    }
    if (words[0] == "log") {
        if (words.size() != 2)
            throw IoError("search space: " + key + ": expected 'log lo..hi'");
        const auto [lo, hi] = split_range(words[1], key);
        spec.kind = ParamSpec::Kind::log_uniform;
        spec.lo = parse_double(lo, key);
        spec.hi = parse_double(hi, key);
        return spec;
    }
    if (words.size() != 1)
        throw IoError("search space: " + key + ": expected a range, 'log' range, or 'choice' list");
    if (words[0].find("..") != std::string::npos) {
        const auto [lo, hi] = split_range(words[0], key);
        spec.kind = ParamSpec::Kind::uniform;
        spec.lo = parse_double(lo, key);
        spec.hi = parse_double(hi, key);
        return spec;
    }
    return ParamSpec::fixed(parse_double(words[0], key));
}

inline int parse_int_strict(const std::string& s, const std::string& key) {
    std::size_t pos = 0;
    int v = 0;
    try {
        v = std::stoi(s, &pos);
    } catch (const std::exception&) {
        throw IoError("search space: " + key + ": '" + s + "' is not an integer");
    }
    if (pos != s.size())
        throw IoError("search space: " + key + ": '" + s + "' is not an integer");
    return v;
}

inline IntSpec parse_int_spec(const std::string& key, const std::string& value) {
    const auto words = split_words(value);
    if (words.empty()) throw IoError("search space: " + key + ": missing value");
    IntSpec spec;
    if (words[0] == "choice") {
        spec.kind = IntSpec::Kind::choice;
        for (std::size_t i = 1; i < words.size(); ++i)
            spec.choices.push_back(parse_int_strict(words[i], key));
        return spec;
    }
    if (words.size() != 1)
        throw IoError("search space: " + key + ": expected a range or 'choice' list");
    if (words[0].find("..") != std::string::npos) {
        const auto [lo, hi] = split_range(words[0], key);
        spec.kind = IntSpec::Kind::uniform;
        spec.lo = parse_int_strict(lo, key);
        spec.hi = parse_int_strict(hi, key);
        return spec;
    }
    return IntSpec::fixed(parse_int_strict(words[0], key));
}

// layer lists: "choice 75,75,75 32,32 none"
inline std::vector<std::vector<int>> parse_layer_choices(const std::string& value) {
    auto words = split_words(value);
    if (!words.empty() && words[0] == "choice") words.erase(words.begin());
    if (words.empty()) throw IoError("search space: hidden_layers: missing value");
    std::vector<std::vector<int>> out;
    for (const auto& word : words) {
        std::vector<int> widths;
        if (word != "none") {
            std::istringstream in(word);
            std::string tok;
            while (std::getline(in, tok, ','))
                widths.push_back(parse_int_strict(tok, "hidden_layers"));
        }
        out.push_back(widths);
    }
    return out;
}

inline std::vector<bool> parse_bool_choices(const std::string& value) {
    auto words = split_words(value);
    if (!words.empty() && words[0] == "choice") words.erase(words.begin());
    if (words.empty()) throw IoError("search space: batch_norm: missing value");
    std::vector<bool> out;
    for (const auto& word : words) {
        if (word == "on" || word == "true" || word == "1") out.push_back(true);
        else if (word == "off" || word == "false" || word == "0") out.push_back(false);
        else throw IoError("search space: batch_norm: expected on/off, got '" + word + "'");
    }
    return out;
}

}  // namespace detail

inline SearchSpace SearchSpace::parse(std::istream& in) {
    SearchSpace space;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string stripped = trim(line.substr(0, line.find('#')));
        if (stripped.empty()) continue;
        const auto colon = stripped.find(':');
        if (colon == std::string::npos)
            throw IoError("search space line " + std::to_string(line_no) +
                          ": expected 'key: value'");
        const std::string key = trim(stripped.substr(0, colon));
        const std::string value = trim(stripped.substr(colon + 1));
        if (key == "trials") space.budget = detail::parse_int_strict(value, key);
        else if (key == "n") space.n = detail::parse_int_spec(key, value);
        else if (key == "hidden_layers") space.hidden_layer_choices = detail::parse_layer_choices(value);
        else if (key == "dropout_rate") space.dropout_rate = detail::parse_param(key, value);
        else if (key == "batch_norm") space.batch_norm_choices = detail::parse_bool_choices(value);
        else if (key == "l2_coefficient") space.l2_coefficient = detail::parse_param(key, value);
        else if (key == "learning_rate") space.learning_rate = detail::parse_param(key, value);
        else if (key == "lr_decay") space.lr_decay = detail::parse_param(key, value);
        else if (key == "momentum") space.momentum = detail::parse_param(key, value);
        else if (key == "epochs") space.epochs = detail::parse_int_spec(key, value);
        else throw IoError("search space line " + std::to_string(line_no) +
                           ": unknown key '" + key + "'");
    }
    space.validate();
    return space;
}

struct TrialRecord {
    int index = 0;
    TrialConfig config;
    std::uint64_t seed = 0;  // drives network init and dropout for this trial
    std::vector<double> fold_c_indices;
    double mean_c_index = 0.0;
    double wall_seconds = 0.0;
    std::string status = "ok";

    bool ok() const { return status == "ok"; }
};

struct SearchOptions {
    int k_folds = 10;
    std::uint64_t seed = 0;  // master seed: trial configs, trial seeds, fold split
    int jobs = 1;
    std::filesystem::path trial_log;  // empty = keep results in memory only
    ReliefConfig relief;
};

struct SearchResult {
    TrialRecord best;
    std::vector<TrialRecord> trials;
};

namespace detail {

constexpr std::uint64_t kTrialStream = 0x7a1a0000ULL;
constexpr std::uint64_t kFoldStream = 0x1e0fULL;

inline std::uint64_t trial_master(std::uint64_t seed, int trial) {
    return derive_seed(seed, kTrialStream + static_cast<std::uint64_t>(trial));
}

inline std::vector<std::string> trial_log_header() {
    return {"trial", "status", "seed", "n", "hidden_layers", "dropout_rate",
            "batch_norm", "l2_coefficient", "learning_rate", "lr_decay",
            "momentum", "epochs", "fold_c_indices", "mean_c_index", "wall_seconds"};
}

inline std::string join_layers(const std::vector<int>& widths) {
    if (widths.empty()) return "none";
    std::string out;
    for (std::size_t i = 0; i < widths.size(); ++i)
        out += (i ? "," : "") + std::to_string(widths[i]);
    return out;
}

inline std::vector<std::string> trial_log_row(const TrialRecord& rec) {
    std::string folds;
    for (std::size_t i = 0; i < rec.fold_c_indices.size(); ++i)
        folds += (i ? " " : "") + format_double(rec.fold_c_indices[i]);
    const NetworkConfig& net = rec.config.network;
    return {std::to_string(rec.index),
            rec.status,
            std::to_string(rec.seed),
            std::to_string(rec.config.top_n),
            join_layers(net.hidden_layers),
            format_double(net.dropout_rate),
            net.batch_norm ? "on" : "off",
            format_double(net.l2_coefficient),
            format_double(net.learning_rate),
            format_double(net.lr_decay),
            format_double(net.momentum),
            std::to_string(net.epochs),
            folds,
            format_double(rec.mean_c_index),
            format_double(rec.wall_seconds)};
}

inline TrialRecord parse_trial_row(const std::vector<std::string>& row) {
    TrialRecord rec;
    rec.index = parse_int_strict(row[0], "trial log: trial");
    rec.status = row[1];
    try {
        rec.seed = std::stoull(row[2]);
    } catch (const std::exception&) {
        throw IoError("trial log: seed: '" + row[2] + "' is not an unsigned integer");
    }
    rec.config.top_n = parse_int_strict(row[3], "trial log: n");
    if (row[4] != "none") {
        std::istringstream in(row[4]);
        std::string tok;
        while (std::getline(in, tok, ','))
            rec.config.network.hidden_layers.push_back(
                parse_int_strict(tok, "trial log: hidden_layers"));
    }
    rec.config.network.dropout_rate = parse_double(row[5], "trial log: dropout_rate");
    rec.config.network.batch_norm = row[6] == "on";
    rec.config.network.l2_coefficient = parse_double(row[7], "trial log: l2_coefficient");
    rec.config.network.learning_rate = parse_double(row[8], "trial log: learning_rate");
    rec.config.network.lr_decay = parse_double(row[9], "trial log: lr_decay");
    rec.config.network.momentum = parse_double(row[10], "trial log: momentum");
    rec.config.network.epochs = parse_int_strict(row[11], "trial log: epochs");
    rec.config.network.seed = rec.seed;
    std::istringstream folds(row[12]);
    std::string tok;
    while (folds >> tok) rec.fold_c_indices.push_back(parse_double(tok, "trial log: fold c"));
    rec.mean_c_index = parse_double(row[13], "trial log: mean");
    rec.wall_seconds = parse_double(row[14], "trial log: wall");
    return rec;
}

inline TrialRecord run_trial(const SearchSpace& space, const SurvivalDataset& data,
                             const SearchOptions& options, int index) {
    const std::uint64_t master = trial_master(options.seed, index);
    TrialRecord rec;
    rec.index = index;
    Rng sampler(derive_seed(master, 0));
    rec.config = space.sample(sampler);
    rec.seed = derive_seed(master, 1);
    rec.config.network.seed = rec.seed;

    DeepwaitOptions pipeline;
    pipeline.top_n = rec.config.top_n;
    pipeline.network = rec.config.network;
    pipeline.relief = options.relief;
    pipeline.relief.seed = rec.seed;

    const auto start = std::chrono::steady_clock::now();
    try {
        const CrossValidationResult cv = cross_validate(
            data, options.k_folds, derive_seed(options.seed, kFoldStream),
            make_deepwait_factory(pipeline));
        rec.fold_c_indices = cv.fold_c_indices;
        rec.mean_c_index = cv.mean_c_index;
    } catch (const Error& e) {
        rec.status = std::string("failed: ") + e.what();
        rec.fold_c_indices.clear();
        rec.mean_c_index = 0.0;
    }
    rec.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return rec;
}

}  // namespace detail

/**
 * Samples `budget` configurations, cross-validates each, and returns the one
 * with the highest mean validation C-index (ties break toward the earlier
 * trial). Every trial is seeded from (master seed, trial index) alone, so
 * results do not depend on scheduling; with jobs > 1 the trials run
 * concurrently and the log still commits rows in index order. If a trial log
 * path is given, completed trials found there are reused instead of re-run,
 * which is what makes interrupted searches resumable. A diverging trial is
 * recorded as failed and the search continues; only all trials failing is an
 * error.
 */
inline SearchResult random_search(const SearchSpace& space, const SurvivalDataset& data,
                                  const SearchOptions& options = {}) {
    space.validate();
    data.validate();
    if (options.jobs < 1) throw ValidationError("random search: jobs must be >= 1");

    std::vector<std::optional<TrialRecord>> records(static_cast<std::size_t>(space.budget));
    std::vector<bool> resumed(static_cast<std::size_t>(space.budget), false);

    const bool persist = !options.trial_log.empty();
    if (persist && std::filesystem::exists(options.trial_log)) {
        const CsvTable log = read_csv(options.trial_log);
        if (log.header != detail::trial_log_header())
            throw IoError("'" + options.trial_log.string() + "': not a trial log");
        for (const auto& row : log.rows) {
            TrialRecord rec = detail::parse_trial_row(row);
            if (rec.index < 0 || rec.index >= space.budget)
                throw IoError("'" + options.trial_log.string() + "': trial " +
                              std::to_string(rec.index) + " outside budget");
            if (rec.seed != derive_seed(detail::trial_master(options.seed, rec.index), 1))
                throw IoError("'" + options.trial_log.string() +
                              "': trial seeds do not match this search (different master "
                              "seed or space?)");
            records[static_cast<std::size_t>(rec.index)] = std::move(rec);
            resumed[static_cast<std::size_t>(rec.index)] = true;
        }
    }

    std::ofstream log_out;
    if (persist) {
        const bool fresh = !std::filesystem::exists(options.trial_log);
        log_out.open(options.trial_log, std::ios::app);
        if (!log_out) throw IoError("cannot write '" + options.trial_log.string() + "'");
        if (fresh) {
            const auto header = detail::trial_log_header();
            for (std::size_t j = 0; j < header.size(); ++j)
                log_out << (j ? "," : "") << header[j];
            log_out << "\n" << std::flush;
        }
    }

    std::mutex mu;
    std::condition_variable ready;
    std::atomic<int> next_trial{0};
    const int n_workers = std::min(options.jobs, space.budget);
    std::vector<std::thread> workers;
    auto worker = [&] {
        for (;;) {
            const int t = next_trial.fetch_add(1);
            if (t >= space.budget) return;
            if (resumed[static_cast<std::size_t>(t)]) continue;
            TrialRecord rec = detail::run_trial(space, data, options, t);
            {
                std::lock_guard<std::mutex> lock(mu);
                records[static_cast<std::size_t>(t)] = std::move(rec);
            }
            ready.notify_all();
        }
    };
    for (int w = 0; w < n_workers; ++w) workers.emplace_back(worker);

    // commit rows strictly in trial order no matter which worker finishes first
    for (int t = 0; t < space.budget; ++t) {
        std::unique_lock<std::mutex> lock(mu);
        ready.wait(lock, [&] { return records[static_cast<std::size_t>(t)].has_value(); });
        if (persist && !resumed[static_cast<std::size_t>(t)]) {
            const auto row = detail::trial_log_row(*records[static_cast<std::size_t>(t)]);
            for (std::size_t j = 0; j < row.size(); ++j)
                log_out << (j ? "," : "") << csv_quote(row[j]);
            log_out << "\n" << std::flush;
        }
    }
    for (auto& w : workers) w.join();
    if (persist && !log_out) throw IoError("failed writing '" + options.trial_log.string() + "'");

    SearchResult result;
    const TrialRecord* best = nullptr;
    std::string first_failure;
    for (const auto& rec : records) {
        result.trials.push_back(*rec);
        if (rec->ok()) {
            if (!best || rec->mean_c_index > best->mean_c_index) best = &*rec;
        } else if (first_failure.empty()) {
            first_failure = rec->status;
        }
    }
    if (!best)
        throw NumericalError("random search: all " + std::to_string(space.budget) +
                             " trials failed; first " + first_failure);
    result.best = *best;
    return result;
}

}  // namespace deepwait
