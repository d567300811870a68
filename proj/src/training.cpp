#include "psim/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <json.hpp>
#include <numeric>

namespace psim {

void Adam::step(std::vector<NamedTensor>& params, const std::vector<Matrix>& grads,
                double scale) {
    if (m_.empty()) {
        for (const auto& p : params) {
            m_.push_back(Matrix(p.tensor->rows(), p.tensor->cols(), 0.0));
            v_.push_back(Matrix(p.tensor->rows(), p.tensor->cols(), 0.0));
        }
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, t_);
    const double bc2 = 1.0 - std::pow(beta2_, t_);
    for (size_t i = 0; i < params.size(); ++i) {
        Matrix& w = *params[i].tensor;
        for (size_t j = 0; j < w.size(); ++j) {
            const double g = grads[i].data()[j] * scale;
            double& m = m_[i].data()[j];
            double& v = v_[i].data()[j];
            m = beta1_ * m + (1.0 - beta1_) * g;
            v = beta2_ * v + (1.0 - beta2_) * g * g;
            w.data()[j] -= lr_ * (m / bc1) / (std::sqrt(v / bc2) + eps_);
        }
    }
}

void BestEpochSelector::observe(double val_loss) {
    const int epoch = observed_++;
    if (val_loss < best_loss_) {
        best_loss_ = val_loss;
        best_epoch_ = epoch;
        since_best_ = 0;
    } else {
        ++since_best_;
    }
}

namespace {

double sample_mse(const Matrix& pred, const Matrix& target) {
    double loss = 0.0;
    for (int c = 0; c < pred.cols(); ++c) {
        const double d = pred(0, c) - target(0, c);
        loss += d * d;
    }
    return loss / pred.cols();
}

double validation_mse(const ForecastModel& model, const WindowSet& ws) {
    double total = 0.0;
    for (int i = 0; i < ws.count(); ++i)
        total += sample_mse(model.predict(ws.window(i)), ws.target(i));
    return total / ws.count();
}

}  // namespace

TrainResult train(const HyperParams& hp, const WindowSet& train_ws, const WindowSet& val_ws,
                  const ScalerStats& scaler, const TrainConfig& cfg) {
    if (train_ws.count() < 1 || val_ws.count() < 1)
        throw std::invalid_argument("train: empty train or validation window set");
    const auto t0 = std::chrono::steady_clock::now();

    auto model = make_model(hp, train_ws.l(), train_ws.n_features(), cfg.seed);
    auto params = model->parameters();
    Adam adam(hp.learning_rate);
    Rng rng(cfg.seed ^ 0x7261696e);
    Rng dropout_rng = rng.fork(1);

    TrainReport report;
    report.seed = cfg.seed;
    BestEpochSelector selector;
    std::vector<Matrix> best_weights;

    std::vector<int> order(train_ws.count());
    std::iota(order.begin(), order.end(), 0);
    std::vector<Matrix> grads;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        // Fisher-Yates shuffle from the run's seed
        for (int i = static_cast<int>(order.size()) - 1; i > 0; --i)
            std::swap(order[i], order[static_cast<int>(rng.uniform_int(0, i))]);

        int n_batches = (train_ws.count() + hp.batch_size - 1) / hp.batch_size;
        if (cfg.max_batches_per_epoch > 0)
            n_batches = std::min(n_batches, cfg.max_batches_per_epoch);

        double epoch_loss = 0.0;
        int seen = 0;
        for (int b = 0; b < n_batches; ++b) {
            for (auto& g : grads) g.fill(0.0);
            const int begin = b * hp.batch_size;
            const int end = std::min<int>(begin + hp.batch_size, train_ws.count());
            for (int s = begin; s < end; ++s) {
                epoch_loss += model->loss_and_grads(train_ws.window(order[s]),
                                                    train_ws.target(order[s]), grads,
                                                    &dropout_rng);
                ++seen;
            }
            double scale = 1.0 / (end - begin);
            if (cfg.clip_norm > 0.0) {
                double norm2 = 0.0;
                for (const auto& g : grads)
                    for (size_t j = 0; j < g.size(); ++j)
                        norm2 += g.data()[j] * g.data()[j] * scale * scale;
                const double norm = std::sqrt(norm2);
                if (norm > cfg.clip_norm) scale *= cfg.clip_norm / norm;
            }
            adam.step(params, grads, scale);
        }
        const double train_mse = epoch_loss / std::max(1, seen);
        if (!std::isfinite(train_mse)) {
            report.diverged = true;
            break;
        }
        const double val_mse = validation_mse(*model, val_ws);
        report.train_mse.push_back(train_mse);
        report.val_mse.push_back(val_mse);
        if (!std::isfinite(val_mse)) {
            report.diverged = true;
            break;
        }
        selector.observe(val_mse);
        if (selector.best_epoch() == epoch) best_weights = model->snapshot_weights();
        if (selector.epochs_since_best() >= cfg.patience) break;
    }

    if (best_weights.empty())
        throw std::runtime_error("train: diverged before completing any epoch");
    model->restore_weights(best_weights);
    report.best_epoch = selector.best_epoch();
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    Checkpoint ckpt;
    ckpt.hp = hp;
    ckpt.l = train_ws.l();
    ckpt.n = train_ws.n_features();
    ckpt.scaler = scaler;
    for (auto& p : model->parameters()) ckpt.tensors.push_back({p.name, *p.tensor});
    return {std::move(ckpt), std::move(report)};
}

EvalMetrics evaluate(const ForecastModel& model, const WindowSet& test_ws) {
    if (test_ws.n_features() != model.n_features() || test_ws.l() != model.window_len())
        throw std::invalid_argument("evaluate: window schema does not match the model");
    const int n = test_ws.n_features();
    const int count = test_ws.count();
    // target variance per dimension, then pooled
    std::vector<double> mean(n, 0.0);
    for (int i = 0; i < count; ++i) {
        Matrix tgt = test_ws.target(i);
        for (int c = 0; c < n; ++c) mean[c] += tgt(0, c);
    }
    for (double& m : mean) m /= count;
    double var = 0.0, mse = 0.0;
    for (int i = 0; i < count; ++i) {
        Matrix tgt = test_ws.target(i);
        Matrix pred = model.predict(test_ws.window(i));
        for (int c = 0; c < n; ++c) {
            var += (tgt(0, c) - mean[c]) * (tgt(0, c) - mean[c]);
            mse += (pred(0, c) - tgt(0, c)) * (pred(0, c) - tgt(0, c));
        }
    }
    var /= static_cast<double>(count) * n;
    mse /= static_cast<double>(count) * n;
    EvalMetrics out;
    out.mse = mse;
    out.nmse = var > 0.0 ? mse / var : std::numeric_limits<double>::infinity();
    out.accuracy = std::clamp(1.0 - out.nmse, 0.0, 1.0);
    return out;
}

EvalMetrics evaluate_checkpoint(const Checkpoint& ckpt, const WindowSet& test_ws) {
    auto model = model_from_checkpoint(ckpt);
    return evaluate(*model, test_ws);
}

std::unique_ptr<ForecastModel> model_from_checkpoint(const Checkpoint& ckpt) {
    auto model = make_model(ckpt.hp, ckpt.l, ckpt.n, 0);
    auto params = model->parameters();
    if (params.size() != ckpt.tensors.size())
        throw std::runtime_error("checkpoint: tensor count does not match the architecture");
    for (size_t i = 0; i < params.size(); ++i) {
        if (params[i].name != ckpt.tensors[i].first ||
            !params[i].tensor->same_shape(ckpt.tensors[i].second))
            throw std::runtime_error("checkpoint: tensor mismatch at '" + params[i].name + "'");
        *params[i].tensor = ckpt.tensors[i].second;
    }
    return model;
}

namespace {

constexpr char kMagic[8] = {'P', 'S', 'I', 'M', 'C', 'K', 'P', '1'};

void write_doubles(std::ofstream& f, const double* data, size_t count) {
    f.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * 8));
}

void read_doubles(std::ifstream& f, double* data, size_t count, const std::string& path) {
    f.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(count * 8));
    if (static_cast<size_t>(f.gcount()) != count * 8)
        throw std::runtime_error("checkpoint: truncated payload in " + path);
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    nlohmann::json header;
    header["version"] = ckpt.version;
    header["kind"] = to_string(ckpt.hp.kind);
    header["l"] = ckpt.l;
    header["n"] = ckpt.n;
    header["hyperparams"] = {
        {"learning_rate", ckpt.hp.learning_rate},
        {"dropout", ckpt.hp.dropout},
        {"batch_size", ckpt.hp.batch_size},
        {"enc_layers", ckpt.hp.enc_layers},
        {"dec_layers", ckpt.hp.dec_layers},
        {"dim", ckpt.hp.dim},
        {"heads", ckpt.hp.heads},
        {"ffn_factor", ckpt.hp.ffn_factor},
        {"decomp_kernel", ckpt.hp.decomp_kernel},
        {"individual", ckpt.hp.individual},
        {"label_len", ckpt.hp.label_len},
        {"sparsity_factor", ckpt.hp.sparsity_factor},
        {"top_k_delays", ckpt.hp.top_k_delays},
        {"paper_lstm_activations", ckpt.hp.paper_lstm_activations},
        {"positional_encoding", ckpt.hp.positional_encoding},
    };
    header["features"] = ckpt.scaler.features;
    nlohmann::json tensors = nlohmann::json::array();
    for (const auto& [name, m] : ckpt.tensors)
        tensors.push_back({{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}});
    header["tensors"] = tensors;
    const std::string header_str = header.dump();

    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f.write(kMagic, 8);
    const uint32_t hlen = static_cast<uint32_t>(header_str.size());
    f.write(reinterpret_cast<const char*>(&hlen), 4);
    f.write(header_str.data(), hlen);
    write_doubles(f, ckpt.scaler.mean.data(), ckpt.scaler.mean.size());
    write_doubles(f, ckpt.scaler.std.data(), ckpt.scaler.std.size());
    for (const auto& [name, m] : ckpt.tensors) write_doubles(f, m.data(), m.size());
    if (!f) throw std::runtime_error("checkpoint write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open checkpoint: " + path);
    char magic[8];
    f.read(magic, 8);
    if (f.gcount() != 8 || std::memcmp(magic, kMagic, 8) != 0)
        throw std::runtime_error("checkpoint: bad magic in " + path);
    uint32_t hlen = 0;
    f.read(reinterpret_cast<char*>(&hlen), 4);
    if (f.gcount() != 4 || hlen == 0 || hlen > (1u << 24))
        throw std::runtime_error("checkpoint: bad header length in " + path);
    std::string header_str(hlen, '\0');
    f.read(header_str.data(), hlen);
    if (static_cast<uint32_t>(f.gcount()) != hlen)
        throw std::runtime_error("checkpoint: truncated header in " + path);
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(header_str);
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("checkpoint: corrupt header in " + path + ": " + e.what());
    }

    Checkpoint ckpt;
    ckpt.version = header.at("version").get<uint32_t>();
    if (ckpt.version != 1)
        throw std::runtime_error("checkpoint: unsupported version " +
                                 std::to_string(ckpt.version) + " in " + path);
    ckpt.hp.kind = model_kind_from_string(header.at("kind").get<std::string>());
    ckpt.l = header.at("l").get<int>();
    ckpt.n = header.at("n").get<int>();
    const auto& hj = header.at("hyperparams");
    ckpt.hp.learning_rate = hj.at("learning_rate").get<double>();
    ckpt.hp.dropout = hj.at("dropout").get<double>();
    ckpt.hp.batch_size = hj.at("batch_size").get<int>();
    ckpt.hp.enc_layers = hj.at("enc_layers").get<int>();
    ckpt.hp.dec_layers = hj.at("dec_layers").get<int>();
    ckpt.hp.dim = hj.at("dim").get<int>();
    ckpt.hp.heads = hj.at("heads").get<int>();
    ckpt.hp.ffn_factor = hj.at("ffn_factor").get<int>();
    ckpt.hp.decomp_kernel = hj.at("decomp_kernel").get<int>();
    ckpt.hp.individual = hj.at("individual").get<bool>();
    ckpt.hp.label_len = hj.at("label_len").get<int>();
    ckpt.hp.sparsity_factor = hj.at("sparsity_factor").get<double>();
    ckpt.hp.top_k_delays = hj.at("top_k_delays").get<int>();
    ckpt.hp.paper_lstm_activations = hj.at("paper_lstm_activations").get<bool>();
    ckpt.hp.positional_encoding = hj.at("positional_encoding").get<bool>();
    ckpt.scaler.features = header.at("features").get<std::vector<std::string>>();

    const size_t m = ckpt.scaler.features.size();
    ckpt.scaler.mean.resize(m);
    ckpt.scaler.std.resize(m);
    read_doubles(f, ckpt.scaler.mean.data(), m, path);
    read_doubles(f, ckpt.scaler.std.data(), m, path);
    for (const auto& tj : header.at("tensors")) {
        Matrix t(tj.at("rows").get<int>(), tj.at("cols").get<int>());
        read_doubles(f, t.data(), t.size(), path);
        ckpt.tensors.push_back({tj.at("name").get<std::string>(), std::move(t)});
    }
    return ckpt;
}

void save_train_report_csv(const TrainReport& report, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f << "epoch,train_mse,val_mse\n";
    for (size_t i = 0; i < report.train_mse.size(); ++i) {
        f << i << "," << report.train_mse[i] << ","
          << (i < report.val_mse.size() ? report.val_mse[i]
                                        : std::numeric_limits<double>::quiet_NaN())
          << "\n";
    }
}

}  // namespace psim
