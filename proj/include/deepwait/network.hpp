#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "deepwait/error.hpp"
#include "deepwait/evaluation.hpp"
#include "deepwait/preprocess.hpp"
#include "deepwait/rng.hpp"
#include "deepwait/survival.hpp"

namespace deepwait {

struct NetworkConfig {
    int n_inputs = 1;
    std::vector<int> hidden_layers;  // widths, at least one layer
    double dropout_rate = 0.0;       // [0, 1)
    bool batch_norm = false;
    double l2_coefficient = 0.0;
    double learning_rate = 1e-3;
    double lr_decay = 0.0;  // lr_t = learning_rate * exp(-lr_decay * epoch)
    double momentum = 0.0;  // [0, 1)
    int epochs = 100;
    std::uint64_t seed = 0;

    void validate() const {
        if (n_inputs < 1) throw ValidationError("network: n_inputs must be >= 1");
        if (hidden_layers.empty()) throw ValidationError("network: need at least one hidden layer");
        for (const int w : hidden_layers)
            if (w < 1) throw ValidationError("network: hidden layer width must be >= 1");
        if (dropout_rate < 0.0 || dropout_rate >= 1.0)
            throw ValidationError("network: dropout rate must lie in [0, 1)");
        if (!(l2_coefficient >= 0.0)) throw ValidationError("network: l2 must be >= 0");
        if (!(learning_rate > 0.0)) throw ValidationError("network: learning rate must be > 0");
        if (!(lr_decay >= 0.0)) throw ValidationError("network: lr decay must be >= 0");
        if (momentum < 0.0 || momentum >= 1.0)
            throw ValidationError("network: momentum must lie in [0, 1)");
        if (epochs < 1) throw ValidationError("network: epochs must be >= 1");
    }

    // [n_inputs, hidden..., 1]
    std::vector<int> layer_widths() const {
        std::vector<int> widths;
        widths.push_back(n_inputs);
        widths.insert(widths.end(), hidden_layers.begin(), hidden_layers.end());
        widths.push_back(1);
        return widths;
    }
};

/** Per-hidden-layer normalization, applied before the activation. */
struct BatchNormLayer {
    Vector gamma, beta;               // learned scale and shift
    Vector running_mean, running_var;  // eval-mode statistics (EMA, momentum 0.9)
};

/**
 * Fully connected log-risk network: rectified-linear hidden layers with
 * inverted dropout (and optional batch normalization before each activation),
 * identity one-node output.
 */
struct RiskNetwork {
    NetworkConfig config;
    std::vector<Matrix> weights;  // weights[l] is widths[l] x widths[l+1]
    std::vector<Vector> biases;
    std::vector<BatchNormLayer> norms;  // one per hidden layer when enabled

    std::size_t n_layers() const { return weights.size(); }

    long parameter_count() const {
        long count = 0;
        for (const auto& w : weights) count += static_cast<long>(w.size());
        for (const auto& b : biases) count += static_cast<long>(b.size());
        for (const auto& bn : norms)
            count += static_cast<long>(bn.gamma.size() + bn.beta.size());
        return count;
    }
};

/** Glorot-uniform weights, zero biases; deterministic under config.seed. */
inline RiskNetwork init_network(const NetworkConfig& config) {
    config.validate();
    RiskNetwork net;
    net.config = config;
    Rng rng(derive_seed(config.seed, 0x1417));

    const auto widths = config.layer_widths();
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        const int fan_in = widths[l];
        const int fan_out = widths[l + 1];
        const double limit = std::sqrt(6.0 / (fan_in + fan_out));
        Matrix w(fan_in, fan_out);
        for (int i = 0; i < fan_in; ++i)
            for (int j = 0; j < fan_out; ++j) w(i, j) = (2.0 * rng.uniform() - 1.0) * limit;
        net.weights.push_back(std::move(w));
        net.biases.push_back(Vector::Zero(fan_out));
    }
    if (config.batch_norm) {
        for (const int width : config.hidden_layers) {
            BatchNormLayer bn;
            bn.gamma = Vector::Ones(width);
            bn.beta = Vector::Zero(width);
            bn.running_mean = Vector::Zero(width);
            bn.running_var = Vector::Ones(width);
            net.norms.push_back(std::move(bn));
        }
    }
    return net;
}

namespace detail {

constexpr double kBnEpsilon = 1e-5;
constexpr double kBnMomentum = 0.9;

struct LayerCache {
    Matrix input;  // activations entering the layer, n x fan_in
    Vector batch_mean, inv_std;  // batch-norm statistics (train mode)
    Matrix xhat;                 // normalized pre-activation
    Matrix y;                    // pre-activation after normalization
    Matrix mask;                 // inverted-dropout multiplier, empty if unused
};

struct ForwardCache {
    std::vector<LayerCache> layers;
    RiskScores scores;
};

/**
 * One pass through the network. Train mode uses batch statistics and applies
 * inverted dropout (mask from `rng`); eval mode uses running statistics and
 * no masking. Batch statistics are returned in the cache so the training
 * loop can update the running averages.
 */
inline ForwardCache forward_pass(const RiskNetwork& net, const Matrix& X, bool train,
                                 Rng* rng) {
    if (X.cols() != net.config.n_inputs)
        throw ValidationError("network: expected " + std::to_string(net.config.n_inputs) +
                              " input features, got " + std::to_string(X.cols()));
    if (train && net.config.dropout_rate > 0.0 && rng == nullptr)
        throw ValidationError("network: train-mode forward needs a mask source");

    ForwardCache cache;
    cache.layers.resize(net.n_layers());
    Matrix a = X;
    const double keep = 1.0 - net.config.dropout_rate;

    for (std::size_t l = 0; l < net.n_layers(); ++l) {
        auto& lc = cache.layers[l];
        lc.input = a;
        Matrix z = (a * net.weights[l]).rowwise() + net.biases[l].transpose();
        const bool hidden = l + 1 < net.n_layers();

        if (hidden && net.config.batch_norm) {
            const auto& bn = net.norms[l];
            const double n = static_cast<double>(z.rows());
            lc.batch_mean.resize(z.cols());
            lc.inv_std.resize(z.cols());
            if (train) {
                for (Eigen::Index j = 0; j < z.cols(); ++j) {
                    lc.batch_mean[j] = z.col(j).mean();
                    const double var =
                        (z.col(j).array() - lc.batch_mean[j]).square().sum() / n;
                    lc.inv_std[j] = 1.0 / std::sqrt(var + kBnEpsilon);
                }
            } else {
                lc.batch_mean = bn.running_mean;
                for (Eigen::Index j = 0; j < z.cols(); ++j)
                    lc.inv_std[j] = 1.0 / std::sqrt(bn.running_var[j] + kBnEpsilon);
            }
            lc.xhat.resize(z.rows(), z.cols());
            lc.y.resize(z.rows(), z.cols());
            for (Eigen::Index j = 0; j < z.cols(); ++j) {
                lc.xhat.col(j) =
                    ((z.col(j).array() - lc.batch_mean[j]) * lc.inv_std[j]).matrix();
                lc.y.col(j) = (bn.gamma[j] * lc.xhat.col(j).array() + bn.beta[j]).matrix();
            }
        } else {
            lc.y = std::move(z);
        }

        if (hidden) {
            a = lc.y.cwiseMax(0.0);
            if (train && net.config.dropout_rate > 0.0) {
                lc.mask.resize(a.rows(), a.cols());
                for (Eigen::Index i = 0; i < a.rows(); ++i)
                    for (Eigen::Index j = 0; j < a.cols(); ++j)
                        lc.mask(i, j) = rng->uniform() < keep ? 1.0 / keep : 0.0;
                a = a.cwiseProduct(lc.mask);
            }
        } else {
            a = lc.y;
        }
        if (!a.allFinite())
            throw NumericalError("network: layer " + std::to_string(l) +
                                 " produced non-finite activations");
    }
    cache.scores = a.col(0);
    return cache;
}

struct Gradients {
    std::vector<Matrix> d_weights;
    std::vector<Vector> d_biases;
    std::vector<Vector> d_gamma, d_beta;  // batch norm only
};

/** Backpropagation matching forward_pass in train mode. */
inline Gradients backward_pass(const RiskNetwork& net, const ForwardCache& cache,
                               const Vector& d_scores) {
    Gradients g;
    g.d_weights.resize(net.n_layers());
    g.d_biases.resize(net.n_layers());
    if (net.config.batch_norm) {
        g.d_gamma.resize(net.norms.size());
        g.d_beta.resize(net.norms.size());
    }

    Matrix delta = d_scores;  // n x 1, gradient at the output activation
    for (std::size_t l = net.n_layers(); l-- > 0;) {
        const auto& lc = cache.layers[l];
        const bool hidden = l + 1 < net.n_layers();

        if (hidden) {
            if (lc.mask.size() > 0) delta = delta.cwiseProduct(lc.mask);
            delta = delta.cwiseProduct((lc.y.array() > 0.0).cast<double>().matrix());
        }

        if (hidden && net.config.batch_norm) {
            const auto& bn = net.norms[l];
            const double n = static_cast<double>(delta.rows());
            g.d_gamma[l].resize(delta.cols());
            g.d_beta[l].resize(delta.cols());
            // d/dz of y = gamma * (z - mean(z)) * inv_std(z) + beta, where the
            // batch statistics themselves depend on z
            for (Eigen::Index j = 0; j < delta.cols(); ++j) {
                g.d_gamma[l][j] = delta.col(j).dot(lc.xhat.col(j));
                g.d_beta[l][j] = delta.col(j).sum();
                const Vector dxhat = bn.gamma[j] * delta.col(j);
                const double sum_dxhat = dxhat.sum();
                const double sum_dxhat_xhat = dxhat.dot(lc.xhat.col(j));
                delta.col(j) = ((lc.inv_std[j] / n) *
                                (n * dxhat.array() - sum_dxhat -
                                 lc.xhat.col(j).array() * sum_dxhat_xhat))
                                   .matrix();
            }
        }

        g.d_weights[l] = lc.input.transpose() * delta;
        g.d_biases[l] = delta.colwise().sum().transpose();
        if (l > 0) delta = delta * net.weights[l].transpose();
    }
    return g;
}

inline double l2_penalty(const RiskNetwork& net) {
    double sum = 0.0;
    for (const auto& w : net.weights) sum += w.squaredNorm();
    return net.config.l2_coefficient * sum;
}

}  // namespace detail

/** Eval-mode scores; deterministic, running statistics for normalization. */
inline RiskScores predict(const RiskNetwork& net, const Matrix& features) {
    return detail::forward_pass(net, features, false, nullptr).scores;
}

/** Train-mode scores with explicit mask source; used by training and tests. */
inline RiskScores forward_train(const RiskNetwork& net, const Matrix& features, Rng& rng) {
    return detail::forward_pass(net, features, true, &rng).scores;
}

struct TrainResult {
    std::vector<double> loss_trace;  // one entry per epoch
    int best_epoch = -1;             // epoch of the kept snapshot, -1 without validation
    double best_validation_c = 0.0;
};

/**
 * Full-batch SGD with momentum (v = momentum*v - lr_t*grad; theta += v),
 * exponentially decayed learning rate, and L2 penalty on weight matrices.
 * Loss per epoch is nll(train-mode scores) + l2*sum||W||^2, recorded before
 * the update. When `validation` is given, the returned network is the
 * per-epoch snapshot with the highest validation C-index, otherwise the
 * final parameters.
 */
inline TrainResult train_network(RiskNetwork& net, const SurvivalDataset& data,
                                 const SurvivalDataset* validation = nullptr) {
    net.config.validate();
    data.validate();
    if (data.n_events() == 0) throw ValidationError("no observable events");
    if (data.features.cols() != net.config.n_inputs)
        throw ValidationError("network: dataset has " + std::to_string(data.features.cols()) +
                              " features, network expects " +
                              std::to_string(net.config.n_inputs));
    if (validation) validation->validate();

    Rng dropout_rng(derive_seed(net.config.seed, 0xd407));

    std::vector<Matrix> v_weights;
    std::vector<Vector> v_biases;
    for (const auto& w : net.weights) v_weights.push_back(Matrix::Zero(w.rows(), w.cols()));
    for (const auto& b : net.biases) v_biases.push_back(Vector::Zero(b.size()));
    std::vector<Vector> v_gamma, v_beta;
    for (const auto& bn : net.norms) {
        v_gamma.push_back(Vector::Zero(bn.gamma.size()));
        v_beta.push_back(Vector::Zero(bn.beta.size()));
    }

    TrainResult result;
    RiskNetwork best;
    const auto ord = detail::make_order(data.durations, data.events);

    for (int epoch = 0; epoch < net.config.epochs; ++epoch) {
        detail::ForwardCache cache;
        try {
            cache = detail::forward_pass(net, data.features, true, &dropout_rng);
        } catch (const NumericalError& e) {
            throw NumericalError("epoch " + std::to_string(epoch) + ": " + e.what() +
                                 "; try a lower learning rate");
        }
        const auto terms =
            detail::accumulate_terms(ord, data.durations, data.events, cache.scores);
        const double loss = detail::nll_from_terms(ord, terms) + detail::l2_penalty(net);
        if (!std::isfinite(loss))
            throw NumericalError("network: training loss became non-finite at epoch " +
                                 std::to_string(epoch) + "; try a lower learning rate");
        result.loss_trace.push_back(loss);

        const Vector d_scores =
            detail::gradient_from_terms(ord, terms, data.events, cache.scores);
        auto grads = detail::backward_pass(net, cache, d_scores);
        if (net.config.l2_coefficient > 0.0)
            for (std::size_t l = 0; l < net.weights.size(); ++l)
                grads.d_weights[l] += 2.0 * net.config.l2_coefficient * net.weights[l];

        const double lr =
            net.config.learning_rate * std::exp(-net.config.lr_decay * epoch);
        for (std::size_t l = 0; l < net.weights.size(); ++l) {
            v_weights[l] = net.config.momentum * v_weights[l] - lr * grads.d_weights[l];
            net.weights[l] += v_weights[l];
            v_biases[l] = net.config.momentum * v_biases[l] - lr * grads.d_biases[l];
            net.biases[l] += v_biases[l];
        }
        for (std::size_t l = 0; l < net.norms.size(); ++l) {
            v_gamma[l] = net.config.momentum * v_gamma[l] - lr * grads.d_gamma[l];
            net.norms[l].gamma += v_gamma[l];
            v_beta[l] = net.config.momentum * v_beta[l] - lr * grads.d_beta[l];
            net.norms[l].beta += v_beta[l];
            // EMA of the batch statistics seen this epoch
            const auto& lc = cache.layers[l];
            const Vector batch_var =
                (lc.inv_std.array().square().inverse() - detail::kBnEpsilon).matrix();
            net.norms[l].running_mean = detail::kBnMomentum * net.norms[l].running_mean +
                                        (1.0 - detail::kBnMomentum) * lc.batch_mean;
            net.norms[l].running_var = detail::kBnMomentum * net.norms[l].running_var +
                                       (1.0 - detail::kBnMomentum) * batch_var;
        }
        for (std::size_t l = 0; l < net.weights.size(); ++l)
            if (!net.weights[l].allFinite() || !net.biases[l].allFinite())
                throw NumericalError("network: parameters became non-finite at epoch " +
                                     std::to_string(epoch) + "; try a lower learning rate");

        if (validation) {
            const double c = c_index(predict(net, validation->features), *validation);
            if (result.best_epoch < 0 || c > result.best_validation_c) {
                result.best_epoch = epoch;
                result.best_validation_c = c;
                best = net;
            }
        }
    }
    if (validation) net = best;
    return result;
}

inline void save_network(const RiskNetwork& net, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write network '" + path.string() + "'");
    out << "deepwait-network v1\n";
    out << "n_inputs " << net.config.n_inputs << "\n";
    out << "hidden";
    for (const int w : net.config.hidden_layers) out << " " << w;
    out << "\n";
    out << "dropout " << format_double(net.config.dropout_rate) << "\n";
    out << "batch_norm " << (net.config.batch_norm ? 1 : 0) << "\n";
    out << "l2 " << format_double(net.config.l2_coefficient) << "\n";
    out << "learning_rate " << format_double(net.config.learning_rate) << "\n";
    out << "lr_decay " << format_double(net.config.lr_decay) << "\n";
    out << "momentum " << format_double(net.config.momentum) << "\n";
    out << "epochs " << net.config.epochs << "\n";
    out << "seed " << net.config.seed << "\n";

    auto write_matrix = [&out](const std::string& tag, const Matrix& m) {
        out << tag << " " << m.rows() << " " << m.cols() << "\n";
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            for (Eigen::Index j = 0; j < m.cols(); ++j)
                out << (j ? " " : "") << format_double(m(i, j));
            out << "\n";
        }
    };
    auto write_vector = [&out](const std::string& tag, const Vector& v) {
        out << tag << " " << v.size() << "\n";
        for (Eigen::Index i = 0; i < v.size(); ++i)
            out << (i ? " " : "") << format_double(v[i]);
        out << "\n";
    };
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        write_matrix("weights", net.weights[l]);
        write_vector("bias", net.biases[l]);
    }
    for (const auto& bn : net.norms) {
        write_vector("gamma", bn.gamma);
        write_vector("beta", bn.beta);
        write_vector("running_mean", bn.running_mean);
        write_vector("running_var", bn.running_var);
    }
    if (!out) throw IoError("failed writing '" + path.string() + "'");
}

inline RiskNetwork load_network(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open network '" + path.string() + "'");
    std::string line;
    if (!std::getline(in, line) || trim(line) != "deepwait-network v1")
        throw IoError("'" + path.string() + "': not a deepwait-network v1 file");

    const std::string context = "network '" + path.string() + "'";
    auto fail = [&](const std::string& what) { throw IoError(context + ": " + what); };

    NetworkConfig config;
    std::string key;
    // fixed config block in save order
    for (int field = 0; field < 10; ++field) {
        if (!(in >> key)) fail("truncated config");
        if (key == "n_inputs") in >> config.n_inputs;
        else if (key == "hidden") {
            std::getline(in, line);
            std::istringstream widths(line);
            int w;
            while (widths >> w) config.hidden_layers.push_back(w);
        } else if (key == "dropout") { in >> line; config.dropout_rate = parse_double(line, key); }
        else if (key == "batch_norm") { int b; in >> b; config.batch_norm = b != 0; }
        else if (key == "l2") { in >> line; config.l2_coefficient = parse_double(line, key); }
        else if (key == "learning_rate") { in >> line; config.learning_rate = parse_double(line, key); }
        else if (key == "lr_decay") { in >> line; config.lr_decay = parse_double(line, key); }
        else if (key == "momentum") { in >> line; config.momentum = parse_double(line, key); }
        else if (key == "epochs") in >> config.epochs;
        else if (key == "seed") in >> config.seed;
        else fail("unknown config key '" + key + "'");
        if (!in) fail("malformed config value for '" + key + "'");
    }
    config.validate();

    RiskNetwork net;
    net.config = config;
    auto read_matrix = [&](const std::string& tag) {
        if (!(in >> key) || key != tag) fail("expected '" + tag + "'");
        Eigen::Index rows, cols;
        if (!(in >> rows >> cols)) fail("bad dimensions for '" + tag + "'");
        Matrix m(rows, cols);
        std::string tok;
        for (Eigen::Index i = 0; i < rows; ++i)
            for (Eigen::Index j = 0; j < cols; ++j) {
                if (!(in >> tok)) fail("truncated '" + tag + "'");
                m(i, j) = parse_double(tok, tag);
            }
        return m;
    };
    auto read_vector = [&](const std::string& tag) {
        if (!(in >> key) || key != tag) fail("expected '" + tag + "'");
        Eigen::Index size;
        if (!(in >> size)) fail("bad size for '" + tag + "'");
        Vector v(size);
        std::string tok;
        for (Eigen::Index i = 0; i < size; ++i) {
            if (!(in >> tok)) fail("truncated '" + tag + "'");
            v[i] = parse_double(tok, tag);
        }
        return v;
    };

    const auto widths = config.layer_widths();
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        net.weights.push_back(read_matrix("weights"));
        net.biases.push_back(read_vector("bias"));
        if (net.weights.back().rows() != widths[l] || net.weights.back().cols() != widths[l + 1])
            fail("layer " + std::to_string(l) + " dimensions disagree with config");
    }
    if (config.batch_norm) {
        for (std::size_t l = 0; l < config.hidden_layers.size(); ++l) {
            BatchNormLayer bn;
            bn.gamma = read_vector("gamma");
            bn.beta = read_vector("beta");
            bn.running_mean = read_vector("running_mean");
            bn.running_var = read_vector("running_var");
            net.norms.push_back(std::move(bn));
        }
    }
    return net;
}

}  // namespace deepwait
