#include "psim/tune.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

namespace psim {

namespace {

double axis_low(const Axis& a) { return a.type == AxisType::kLogUniform ? std::log(a.lo) : a.lo; }
double axis_high(const Axis& a) { return a.type == AxisType::kLogUniform ? std::log(a.hi) : a.hi; }

double to_external(const Axis& a, double internal) {
    double v = a.type == AxisType::kLogUniform ? std::exp(internal) : internal;
    if (a.type == AxisType::kInt) v = std::round(v);
    return std::clamp(v, a.lo, a.hi);
}

double to_internal(const Axis& a, double external) {
    return a.type == AxisType::kLogUniform ? std::log(external) : external;
}

double random_value(const Axis& a, Rng& rng) {
    if (a.type == AxisType::kCategorical)
        return a.choices[static_cast<size_t>(rng.uniform_int(0, a.choices.size() - 1))];
    return to_external(a, rng.uniform(axis_low(a), axis_high(a)));
}

// Parzen mixture over observed internal values plus a uniform prior component.
struct AxisDensity {
    const Axis* axis;
    std::vector<double> centers;  // internal scale
    double bandwidth = 1.0;
    std::map<double, int> cat_counts;
    int cat_total = 0;

    void fit(const Axis& a, const std::vector<double>& externals) {
        axis = &a;
        if (a.type == AxisType::kCategorical) {
            cat_total = static_cast<int>(externals.size());
            for (double v : externals) cat_counts[v]++;
            return;
        }
        for (double v : externals) centers.push_back(to_internal(a, v));
        const double span = axis_high(a) - axis_low(a);
        bandwidth = std::max(1e-12, span / std::sqrt(centers.size() + 2.0));
    }

    double sample(Rng& rng) const {
        const Axis& a = *axis;
        if (a.type == AxisType::kCategorical) {
            // smoothed categorical draw
            const double alpha = 1.0;
            std::vector<double> w;
            double total = 0.0;
            for (double c : a.choices) {
                auto it = cat_counts.find(c);
                double wi = alpha + (it == cat_counts.end() ? 0 : it->second);
                w.push_back(wi);
                total += wi;
            }
            double r = rng.uniform(0.0, total);
            for (size_t i = 0; i < w.size(); ++i) {
                r -= w[i];
                if (r <= 0) return a.choices[i];
            }
            return a.choices.back();
        }
        // prior component keeps global exploration alive
        if (centers.empty() || rng.uniform01() < 1.0 / (centers.size() + 1.0))
            return to_external(a, rng.uniform(axis_low(a), axis_high(a)));
        const double center = centers[static_cast<size_t>(
            rng.uniform_int(0, static_cast<int64_t>(centers.size()) - 1))];
        return to_external(a, center + bandwidth * rng.normal());
    }

    double log_pdf(double external) const {
        const Axis& a = *axis;
        if (a.type == AxisType::kCategorical) {
            const double alpha = 1.0;
            auto it = cat_counts.find(external);
            double num = alpha + (it == cat_counts.end() ? 0 : it->second);
            double den = cat_total + alpha * a.choices.size();
            return std::log(num / den);
        }
        const double x = to_internal(a, external);
        const double span = axis_high(a) - axis_low(a);
        double pdf = 1.0 / std::max(span, 1e-12);  // prior
        for (double c : centers) {
            const double z = (x - c) / bandwidth;
            pdf += std::exp(-0.5 * z * z) / (bandwidth * std::sqrt(2.0 * M_PI));
        }
        pdf /= centers.size() + 1.0;
        return std::log(pdf);
    }
};

}  // namespace

bool SearchSpace::contains(const ParamPoint& point) const {
    for (const auto& a : axes) {
        auto it = point.find(a.name);
        if (it == point.end()) return false;
        const double v = it->second;
        if (a.type == AxisType::kCategorical) {
            if (std::find(a.choices.begin(), a.choices.end(), v) == a.choices.end()) return false;
        } else {
            if (v < a.lo || v > a.hi) return false;
            if (a.type == AxisType::kInt && v != std::round(v)) return false;
        }
    }
    return true;
}

TuneOutcome tpe_minimize(const SearchSpace& space,
                         const std::function<double(const ParamPoint&)>& objective,
                         const TpeConfig& cfg) {
    if (cfg.budget < 1) throw std::invalid_argument("tpe: budget must be >= 1");
    Rng rng(cfg.seed ^ 0x74706531);
    TuneOutcome out;

    auto random_point = [&] {
        ParamPoint p;
        for (const auto& a : space.axes) p[a.name] = random_value(a, rng);
        return p;
    };

    for (int trial = 0; trial < cfg.budget; ++trial) {
        ParamPoint point;
        std::vector<const Trial*> finished;
        for (const auto& t : out.trials)
            if (!t.failed) finished.push_back(&t);

        const bool explore = trial < cfg.startup_trials || finished.size() < 2 ||
                             (trial % 8) == 7;  // periodic random trial
        if (explore) {
            point = random_point();
        } else {
            std::sort(finished.begin(), finished.end(),
                      [](const Trial* a, const Trial* b) { return a->objective < b->objective; });
            const int n_good =
                std::max<int>(1, static_cast<int>(std::floor(cfg.gamma * finished.size())));
            ParamPoint best_candidate;
            double best_score = -std::numeric_limits<double>::infinity();
            std::vector<AxisDensity> good(space.axes.size()), bad(space.axes.size());
            for (size_t ai = 0; ai < space.axes.size(); ++ai) {
                std::vector<double> gvals, bvals;
                for (size_t i = 0; i < finished.size(); ++i) {
                    double v = finished[i]->point.at(space.axes[ai].name);
                    (static_cast<int>(i) < n_good ? gvals : bvals).push_back(v);
                }
                good[ai].fit(space.axes[ai], gvals);
                bad[ai].fit(space.axes[ai], bvals);
            }
            for (int c = 0; c < cfg.candidates; ++c) {
                ParamPoint cand;
                double score = 0.0;
                for (size_t ai = 0; ai < space.axes.size(); ++ai) {
                    double v = good[ai].sample(rng);
                    cand[space.axes[ai].name] = v;
                    score += good[ai].log_pdf(v) - bad[ai].log_pdf(v);
                }
                if (score > best_score) {
                    best_score = score;
                    best_candidate = cand;
                }
            }
            point = best_candidate;
        }

        Trial t;
        t.point = point;
        try {
            t.objective = objective(point);
            t.failed = !std::isfinite(t.objective);
        } catch (const std::exception&) {
            t.failed = true;
        }
        if (t.failed) t.objective = std::numeric_limits<double>::infinity();
        out.trials.push_back(std::move(t));
    }

    auto best = std::min_element(out.trials.begin(), out.trials.end(),
                                 [](const Trial& a, const Trial& b) {
                                     return a.objective < b.objective;
                                 });
    if (best == out.trials.end() || best->failed) {
        std::string msg = "tune: every trial diverged:";
        for (size_t i = 0; i < out.trials.size(); ++i) msg += " trial" + std::to_string(i);
        throw std::runtime_error(msg);
    }
    out.best = *best;
    return out;
}

HyperParams table1_profile(ModelKind kind) {
    HyperParams hp;
    hp.kind = kind;
    hp.dropout = 0.1;
    switch (kind) {
        case ModelKind::kLstm:
            hp.learning_rate = 1e-6;
            hp.batch_size = 32;
            hp.enc_layers = 2;
            hp.dim = 249;
            hp.heads = 1;
            break;
        case ModelKind::kTransformer:
            hp.learning_rate = 1e-7;
            hp.batch_size = 64;
            hp.enc_layers = 2;
            hp.dec_layers = 1;
            hp.dim = 512;
            hp.heads = 8;
            break;
        case ModelKind::kInformer:
            hp.learning_rate = 1e-7;
            hp.batch_size = 64;
            hp.enc_layers = 2;
            hp.dec_layers = 2;
            hp.dim = 512;
            hp.heads = 8;
            break;
        case ModelKind::kAutoformer:
            hp.learning_rate = 1e-7;
            hp.batch_size = 64;
            hp.enc_layers = 2;
            hp.dec_layers = 1;
            hp.dim = 512;
            hp.heads = 8;
            break;
        case ModelKind::kDLinear:
        case ModelKind::kNLinear:
            hp.learning_rate = 1e-6;
            hp.batch_size = 16;
            break;
    }
    return hp;
}

namespace {

bool is_former(ModelKind kind) {
    return kind == ModelKind::kTransformer || kind == ModelKind::kInformer ||
           kind == ModelKind::kAutoformer;
}

}  // namespace

SearchSpace table1_search_space(ModelKind kind) {
    SearchSpace s;
    s.axes.push_back({"learning_rate", AxisType::kLogUniform, 1e-7, 1e-2, {}});
    s.axes.push_back({"dropout", AxisType::kUniform, 0.0, 0.5, {}});
    s.axes.push_back({"batch_size", AxisType::kCategorical, 0, 0, {16, 32, 64}});
    if (kind == ModelKind::kLstm) {
        s.axes.push_back({"enc_layers", AxisType::kInt, 1, 3, {}});
        s.axes.push_back({"dim", AxisType::kInt, 8, 512, {}});
    } else if (is_former(kind)) {
        s.axes.push_back({"enc_layers", AxisType::kInt, 1, 3, {}});
        s.axes.push_back({"dec_layers", AxisType::kInt, 1, 2, {}});
        s.axes.push_back({"dim", AxisType::kCategorical, 0, 0, {64, 128, 256, 512}});
    }
    return s;
}

SearchSpace desk_search_space(ModelKind kind) {
    SearchSpace s;
    if (kind == ModelKind::kDLinear || kind == ModelKind::kNLinear) {
        s.axes.push_back({"learning_rate", AxisType::kLogUniform, 1e-3, 1e-1, {}});
        s.axes.push_back({"batch_size", AxisType::kCategorical, 0, 0, {16, 32, 64}});
        return s;
    }
    if (kind == ModelKind::kLstm) {
        s.axes.push_back({"learning_rate", AxisType::kLogUniform, 5e-4, 2e-2, {}});
        s.axes.push_back({"batch_size", AxisType::kCategorical, 0, 0, {32, 64}});
        s.axes.push_back({"dim", AxisType::kCategorical, 0, 0, {24, 32, 48, 64}});
        return s;
    }
    s.axes.push_back({"learning_rate", AxisType::kLogUniform, 3e-4, 5e-3, {}});
    s.axes.push_back({"batch_size", AxisType::kCategorical, 0, 0, {32, 64}});
    s.axes.push_back({"dim", AxisType::kCategorical, 0, 0, {16, 32}});
    return s;
}

HyperParams desk_defaults(ModelKind kind) {
    HyperParams hp;
    hp.kind = kind;
    switch (kind) {
        case ModelKind::kLstm:
            hp.learning_rate = 3e-3;
            hp.dim = 48;
            hp.enc_layers = 1;
            hp.batch_size = 64;
            break;
        case ModelKind::kTransformer:
        case ModelKind::kInformer:
        case ModelKind::kAutoformer:
            hp.learning_rate = 1e-3;
            hp.dim = 32;
            hp.heads = 2;
            hp.enc_layers = kind == ModelKind::kInformer ? 2 : 1;
            hp.dec_layers = 1;
            hp.batch_size = 64;
            hp.label_len = 16;
            break;
        case ModelKind::kDLinear:
        case ModelKind::kNLinear:
            hp.learning_rate = 1e-2;
            hp.batch_size = 32;
            break;
    }
    return hp;
}

ParamPoint point_from_hyperparams(const HyperParams& hp) {
    ParamPoint p;
    p["learning_rate"] = hp.learning_rate;
    p["dropout"] = hp.dropout;
    p["batch_size"] = hp.batch_size;
    if (hp.kind == ModelKind::kLstm) {
        p["enc_layers"] = hp.enc_layers;
        p["dim"] = hp.dim;
    } else if (is_former(hp.kind)) {
        p["enc_layers"] = hp.enc_layers;
        p["dec_layers"] = hp.dec_layers;
        p["dim"] = hp.dim;
    }
    return p;
}

HyperParams hyperparams_from_point(ModelKind kind, const ParamPoint& point,
                                   const HyperParams& base) {
    HyperParams hp = base;
    hp.kind = kind;
    auto get = [&](const char* name, double fallback) {
        auto it = point.find(name);
        return it == point.end() ? fallback : it->second;
    };
    hp.learning_rate = get("learning_rate", hp.learning_rate);
    hp.dropout = get("dropout", hp.dropout);
    hp.batch_size = static_cast<int>(get("batch_size", hp.batch_size));
    hp.enc_layers = static_cast<int>(get("enc_layers", hp.enc_layers));
    hp.dec_layers = static_cast<int>(get("dec_layers", hp.dec_layers));
    hp.dim = static_cast<int>(get("dim", hp.dim));
    if (is_former(kind) && hp.dim % hp.heads != 0)
        hp.dim += hp.heads - hp.dim % hp.heads;  // snap up to a head multiple
    return hp;
}

TuneOutcome tune_model(ModelKind kind, const WindowSet& train_ws, const WindowSet& val_ws,
                       const ScalerStats& scaler, const TuneModelConfig& cfg) {
    const SearchSpace space = desk_search_space(kind);
    const HyperParams base = desk_defaults(kind);
    auto objective = [&](const ParamPoint& point) {
        HyperParams hp = hyperparams_from_point(kind, point, base);
        TrainConfig tc;
        tc.epochs = cfg.epochs_per_trial;
        tc.patience = cfg.epochs_per_trial;
        tc.max_batches_per_epoch = cfg.max_batches_per_epoch;
        tc.seed = cfg.seed;
        TrainResult res = train(hp, train_ws, val_ws, scaler, tc);
        return *std::min_element(res.report.val_mse.begin(), res.report.val_mse.end());
    };
    TpeConfig tpe;
    tpe.budget = cfg.budget;
    tpe.startup_trials = std::max(2, cfg.budget / 3);
    tpe.seed = cfg.seed;
    return tpe_minimize(space, objective, tpe);
}

void save_tuning_ledger_csv(const TuneOutcome& outcome, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    std::set<std::string> keys;
    for (const auto& t : outcome.trials)
        for (const auto& [k, v] : t.point) keys.insert(k);
    f << "trial";
    for (const auto& k : keys) f << "," << k;
    f << ",val_mse\n";
    for (size_t i = 0; i < outcome.trials.size(); ++i) {
        f << i;
        for (const auto& k : keys) {
            auto it = outcome.trials[i].point.find(k);
            f << ",";
            if (it != outcome.trials[i].point.end()) f << it->second;
        }
        f << "," << outcome.trials[i].objective << "\n";
    }
}

}  // namespace psim
