#include "psim/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>

namespace psim {

namespace {

struct RepairCounter {
    std::map<std::pair<std::string, std::string>, int> counts;
    void add(const std::string& feature, const std::string& cause, int n = 1) {
        counts[{feature, cause}] += n;
    }
    std::vector<RepairEntry> entries() const {
        std::vector<RepairEntry> out;
        for (const auto& [key, n] : counts) out.push_back({key.first, key.second, n});
        return out;
    }
};

}  // namespace

CleanResult clean(const TimeSeriesDataset& ds, const CleanPolicy& policy) {
    const int n = ds.n_rows(), m = ds.n_features();
    Matrix values = ds.values();
    Matrix quality = ds.quality();
    RepairCounter log;

    // classify samples
    std::vector<std::vector<char>> bad(m, std::vector<char>(n, 0));
    std::vector<std::vector<const char*>> cause(m, std::vector<const char*>(n, nullptr));
    for (int c = 0; c < m; ++c)
        for (int r = 0; r < n; ++r) {
            double v = values(r, c);
            if (std::isnan(v)) {
                bad[c][r] = 1;
                cause[c][r] = "missing";
            } else if (quality(r, c) != 0.0) {
                bad[c][r] = 1;
                cause[c][r] = "bad_quality";
            } else if (v < 0.0) {
                if (policy.negatives == NegativePolicy::kClipZero) {
                    values(r, c) = 0.0;
                    log.add(ds.feature_names()[c], "negative");
                } else {
                    bad[c][r] = 1;
                    cause[c][r] = "negative";
                }
            }
        }

    std::set<int> drop_rows;
    if (policy.bad == BadPolicy::kDropRow) {
        for (int c = 0; c < m; ++c)
            for (int r = 0; r < n; ++r)
                if (bad[c][r]) {
                    drop_rows.insert(r);
                    log.add(ds.feature_names()[c], cause[c][r]);
                }
    } else {
        for (int c = 0; c < m; ++c) {
            int r = 0;
            while (r < n) {
                if (!bad[c][r]) {
                    ++r;
                    continue;
                }
                int run_end = r;
                while (run_end < n && bad[c][run_end]) ++run_end;
                const int run_len = run_end - r;
                if (run_len > policy.max_repair_gap) {
                    for (int i = r; i < run_end; ++i) drop_rows.insert(i);
                } else if (r == 0) {
                    throw std::runtime_error(
                        "clean: leading bad samples in feature '" + ds.feature_names()[c] +
                        "' have nothing to hold; use drop-row or trim the head");
                } else {
                    const double left = values(r - 1, c);
                    const bool have_right = run_end < n;
                    for (int i = r; i < run_end; ++i) {
                        if (policy.bad == BadPolicy::kInterpolate && have_right) {
                            double t = static_cast<double>(i - (r - 1)) /
                                       static_cast<double>(run_end - (r - 1));
                            values(i, c) = left + t * (values(run_end, c) - left);
                        } else {
                            values(i, c) = left;
                        }
                        log.add(ds.feature_names()[c], cause[c][i]);
                    }
                }
                r = run_end;
            }
        }
    }

    if (drop_rows.empty()) {
        CleanResult out{TimeSeriesDataset(ds.timestamps(), ds.feature_names(), std::move(values),
                                          std::move(quality), ds.metadata()),
                        log.entries()};
        return out;
    }

    const int kept = n - static_cast<int>(drop_rows.size());
    Matrix v2(kept, m), q2(kept, m);
    std::vector<int64_t> ts2;
    ts2.reserve(kept);
    int w = 0;
    for (int r = 0; r < n; ++r) {
        if (drop_rows.count(r)) continue;
        for (int c = 0; c < m; ++c) {
            v2(w, c) = values(r, c);
            q2(w, c) = quality(r, c);
        }
        ts2.push_back(ds.timestamps()[r]);
        ++w;
    }
    log.add("*", "dropped_rows", static_cast<int>(drop_rows.size()));
    CleanResult out{TimeSeriesDataset(std::move(ts2), ds.feature_names(), std::move(v2),
                                      std::move(q2), ds.metadata()),
                    log.entries()};
    return out;
}

void save_repair_log_csv(const std::vector<RepairEntry>& log, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f << "feature,cause,count\n";
    for (const auto& e : log) f << e.feature << "," << e.cause << "," << e.count << "\n";
}

std::vector<PearsonEntry> pearson_rank(const TimeSeriesDataset& ds, const std::string& target) {
    const int tcol = ds.feature_index(target);
    if (tcol < 0) throw std::invalid_argument("pearson_rank: unknown target '" + target + "'");
    const int n = ds.n_rows();
    if (n < 2) throw std::invalid_argument("pearson_rank: needs at least 2 samples");
    const Matrix& v = ds.values();

    auto column_stats = [&](int c) {
        double mean = 0.0;
        for (int r = 0; r < n; ++r) mean += v(r, c);
        mean /= n;
        double var = 0.0;
        for (int r = 0; r < n; ++r) var += (v(r, c) - mean) * (v(r, c) - mean);
        return std::pair<double, double>(mean, var);
    };
    auto [tmean, tvar] = column_stats(tcol);

    std::vector<PearsonEntry> out;
    for (int c = 0; c < ds.n_features(); ++c) {
        if (c == tcol) continue;
        PearsonEntry e;
        e.feature = ds.feature_names()[c];
        auto [fmean, fvar] = column_stats(c);
        if (fvar <= 0.0 || tvar <= 0.0) {
            e.zero_variance = true;
            e.r = 0.0;
        } else {
            double cov = 0.0;
            for (int r = 0; r < n; ++r) cov += (v(r, c) - fmean) * (v(r, tcol) - tmean);
            e.r = cov / std::sqrt(fvar * tvar);
        }
        out.push_back(e);
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const PearsonEntry& a, const PearsonEntry& b) {
                         return std::abs(a.r) > std::abs(b.r);
                     });
    return out;
}

std::string time_feature_name(TimeFeature f) {
    switch (f) {
        case TimeFeature::kHour: return "hour";
        case TimeFeature::kDayOfWeek: return "dow";
        case TimeFeature::kMonth: return "month";
    }
    return "?";
}

namespace {

// phase in [0,1) of the encoding's cycle
double time_fraction(TimeFeature f, int64_t epoch) {
    CivilTime c = epoch_to_civil(epoch);
    double day_frac = (c.hour * 3600.0 + c.minute * 60.0 + c.second) / 86400.0;
    switch (f) {
        case TimeFeature::kHour: return day_frac;
        case TimeFeature::kDayOfWeek: return (day_of_week(epoch) + day_frac) / 7.0;
        case TimeFeature::kMonth: return ((c.month - 1) + (c.day - 1 + day_frac) / 31.0) / 12.0;
    }
    return 0.0;
}

int64_t period_seconds(TimeFeature f) {
    switch (f) {
        case TimeFeature::kHour: return 86400;
        case TimeFeature::kDayOfWeek: return 7 * 86400;
        case TimeFeature::kMonth: return 365 * 86400;
    }
    return 0;
}

// Least-squares regression stumps, depth 2, for encoding importance.
struct TreeNode {
    int feature = -1;
    double threshold = 0.0;
    double value = 0.0;  // leaf prediction
    int left = -1, right = -1;
};

struct SplitResultT {
    int feature = -1;
    double threshold = 0.0;
    double gain = 0.0;
};

SplitResultT best_split(const Matrix& X, const std::vector<double>& resid,
                        const std::vector<int>& rows, int min_leaf) {
    SplitResultT best;
    const int nf = X.cols();
    double sum = 0.0, sum2 = 0.0;
    for (int r : rows) {
        sum += resid[r];
        sum2 += resid[r] * resid[r];
    }
    const double sse_parent = sum2 - sum * sum / rows.size();
    for (int f = 0; f < nf; ++f) {
        std::vector<int> order = rows;
        std::sort(order.begin(), order.end(),
                  [&](int a, int b) { return X(a, f) < X(b, f); });
        double lsum = 0.0, lsum2 = 0.0;
        for (size_t i = 0; i + 1 < order.size(); ++i) {
            int r = order[i];
            lsum += resid[r];
            lsum2 += resid[r] * resid[r];
            if (static_cast<int>(i) + 1 < min_leaf ||
                static_cast<int>(order.size() - i - 1) < min_leaf)
                continue;
            if (X(order[i], f) == X(order[i + 1], f)) continue;
            double rsum = sum - lsum, rsum2 = sum2 - lsum2;
            double nl = static_cast<double>(i + 1), nr = static_cast<double>(order.size() - i - 1);
            double sse = (lsum2 - lsum * lsum / nl) + (rsum2 - rsum * rsum / nr);
            double gain = sse_parent - sse;
            if (gain > best.gain) {
                best.feature = f;
                best.threshold = 0.5 * (X(order[i], f) + X(order[i + 1], f));
                best.gain = gain;
            }
        }
    }
    return best;
}

}  // namespace

TimeFeatureSelection select_time_features(const TimeSeriesDataset& ds, const std::string& target,
                                          const std::vector<TimeFeature>& candidates, int n_trees,
                                          double threshold) {
    if (n_trees < 1) throw std::invalid_argument("select_time_features: tree budget must be >= 1");
    const int tcol = ds.feature_index(target);
    if (tcol < 0)
        throw std::invalid_argument("select_time_features: unknown target '" + target + "'");

    TimeFeatureSelection out;
    const int64_t span = ds.timestamps().back() - ds.timestamps().front();
    std::vector<TimeFeature> active;
    for (TimeFeature f : candidates) {
        if (span < period_seconds(f)) {
            out.scores.push_back({f, 0.0, true});
        } else {
            active.push_back(f);
        }
    }
    if (active.empty()) return out;

    // subsample rows for speed, deterministic stride
    const int n_all = ds.n_rows();
    const int stride = std::max(1, n_all / 4000);
    std::vector<int> rows_all;
    for (int r = 0; r < n_all; r += stride) rows_all.push_back(r);
    const int n = static_cast<int>(rows_all.size());

    Matrix X(n, 2 * static_cast<int>(active.size()));
    std::vector<double> y(n);
    for (int i = 0; i < n; ++i) {
        int64_t ts = ds.timestamps()[rows_all[i]];
        for (size_t j = 0; j < active.size(); ++j) {
            double frac = time_fraction(active[j], ts);
            X(i, static_cast<int>(2 * j)) = std::sin(2.0 * M_PI * frac);
            X(i, static_cast<int>(2 * j) + 1) = std::cos(2.0 * M_PI * frac);
        }
        y[i] = ds.values()(rows_all[i], tcol);
    }

    const int n_train = std::max(2, (3 * n) / 4);
    std::vector<int> train_rows(n_train);
    std::iota(train_rows.begin(), train_rows.end(), 0);

    double base = 0.0;
    for (int r : train_rows) base += y[r];
    base /= n_train;
    std::vector<double> pred(n, base);
    std::vector<double> gain_per_dim(X.cols(), 0.0);
    const double lr = 0.3;
    const int min_leaf = 8;

    auto leaf_mean = [&](const std::vector<double>& resid, const std::vector<int>& rows,
                         const SplitResultT& sp, bool take_left) {
        double s = 0.0;
        int cnt = 0;
        for (int r : rows) {
            bool left = sp.feature < 0 || X(r, sp.feature) <= sp.threshold;
            if (left == take_left || sp.feature < 0) {
                s += resid[r];
                ++cnt;
            }
        }
        return cnt > 0 ? s / cnt : 0.0;
    };

    for (int t = 0; t < n_trees; ++t) {
        std::vector<double> resid(n);
        for (int r = 0; r < n; ++r) resid[r] = y[r] - pred[r];
        auto root = best_split(X, resid, train_rows, min_leaf);
        if (root.feature < 0) break;
        gain_per_dim[root.feature] += root.gain;
        std::vector<int> left, right;
        for (int r : train_rows)
            (X(r, root.feature) <= root.threshold ? left : right).push_back(r);
        auto sp_left = best_split(X, resid, left, min_leaf);
        auto sp_right = best_split(X, resid, right, min_leaf);
        if (sp_left.feature >= 0) gain_per_dim[sp_left.feature] += sp_left.gain;
        if (sp_right.feature >= 0) gain_per_dim[sp_right.feature] += sp_right.gain;
        const double m_ll = leaf_mean(resid, left, sp_left, true);
        const double m_lr = leaf_mean(resid, left, sp_left, false);
        const double m_rl = leaf_mean(resid, right, sp_right, true);
        const double m_rr = leaf_mean(resid, right, sp_right, false);
        for (int r = 0; r < n; ++r) {
            double delta;
            if (X(r, root.feature) <= root.threshold)
                delta = (sp_left.feature < 0 || X(r, sp_left.feature) <= sp_left.threshold) ? m_ll
                                                                                            : m_lr;
            else
                delta = (sp_right.feature < 0 || X(r, sp_right.feature) <= sp_right.threshold)
                            ? m_rl
                            : m_rr;
            pred[r] += lr * delta;
        }
    }

    // holdout R^2
    double sse = 0.0, sst = 0.0;
    for (int r = n_train; r < n; ++r) {
        sse += (y[r] - pred[r]) * (y[r] - pred[r]);
        sst += (y[r] - base) * (y[r] - base);
    }
    double r2 = sst > 0.0 ? std::max(0.0, 1.0 - sse / sst) : 0.0;
    double total_gain = std::accumulate(gain_per_dim.begin(), gain_per_dim.end(), 0.0);

    for (size_t j = 0; j < active.size(); ++j) {
        double share = total_gain > 0.0
                           ? (gain_per_dim[2 * j] + gain_per_dim[2 * j + 1]) / total_gain
                           : 0.0;
        TimeFeatureScore s{active[j], r2 * share, false};
        out.scores.push_back(s);
        if (s.score >= threshold) out.chosen.push_back(active[j]);
    }
    return out;
}

TimeSeriesDataset append_time_features(const TimeSeriesDataset& ds,
                                       const std::vector<TimeFeature>& chosen) {
    if (chosen.empty()) return ds;
    const int n = ds.n_rows(), m = ds.n_features();
    const int extra = 2 * static_cast<int>(chosen.size());
    Matrix v(n, m + extra), q(n, m + extra, 0.0);
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < m; ++c) {
            v(r, c) = ds.values()(r, c);
            q(r, c) = ds.quality()(r, c);
        }
    std::vector<std::string> names = ds.feature_names();
    for (size_t j = 0; j < chosen.size(); ++j) {
        names.push_back(time_feature_name(chosen[j]) + "_sin");
        names.push_back(time_feature_name(chosen[j]) + "_cos");
        for (int r = 0; r < n; ++r) {
            double frac = time_fraction(chosen[j], ds.timestamps()[r]);
            v(r, m + static_cast<int>(2 * j)) = std::sin(2.0 * M_PI * frac);
            v(r, m + static_cast<int>(2 * j) + 1) = std::cos(2.0 * M_PI * frac);
        }
    }
    return TimeSeriesDataset(ds.timestamps(), std::move(names), std::move(v), std::move(q),
                             ds.metadata());
}

SplitIndices split_indices(int n_rows, const SplitSpec& spec, int l) {
    if (spec.train_fraction <= 0.0 || spec.train_fraction >= 1.0 ||
        spec.validation_fraction <= 0.0 || spec.validation_fraction >= 1.0)
        throw std::invalid_argument("split: fractions must lie in (0,1)");
    const int train_total = static_cast<int>(std::floor(n_rows * spec.train_fraction + 1e-9));
    const int train_only =
        static_cast<int>(std::floor(train_total * (1.0 - spec.validation_fraction) + 1e-9));
    SplitIndices s;
    s.train_begin = 0;
    s.train_end = train_only;
    s.val_begin = train_only;
    s.val_end = train_total;
    s.test_begin = train_total;
    s.test_end = n_rows;
    const int need = l + 1;
    const int tr = s.train_end - s.train_begin;
    const int va = s.val_end - s.val_begin;
    const int te = s.test_end - s.test_begin;
    if (tr < need || va < need || te < need)
        throw std::invalid_argument(
            "split: every split needs at least l+1 = " + std::to_string(need) + " rows, got train " +
            std::to_string(tr) + ", validation " + std::to_string(va) + ", test " +
            std::to_string(te));
    return s;
}

ScalerStats fit_scaler(const Matrix& train_values, const std::vector<std::string>& features) {
    const int n = train_values.rows(), m = train_values.cols();
    if (n < 2) throw std::invalid_argument("fit_scaler: needs at least 2 rows");
    ScalerStats s;
    s.features = features;
    s.mean.resize(m);
    s.std.resize(m);
    for (int c = 0; c < m; ++c) {
        double mean = 0.0;
        for (int r = 0; r < n; ++r) mean += train_values(r, c);
        mean /= n;
        double var = 0.0;
        for (int r = 0; r < n; ++r)
            var += (train_values(r, c) - mean) * (train_values(r, c) - mean);
        var /= n;
        if (var <= 0.0)
            throw std::invalid_argument("fit_scaler: feature '" +
                                        (c < static_cast<int>(features.size()) ? features[c]
                                                                               : std::to_string(c)) +
                                        "' has zero variance");
        s.mean[c] = mean;
        s.std[c] = std::sqrt(var);
    }
    return s;
}

Matrix apply_scaler(const ScalerStats& s, const Matrix& values) {
    if (values.cols() != static_cast<int>(s.mean.size()))
        throw std::invalid_argument("apply_scaler: feature count mismatch");
    Matrix out = values;
    for (int r = 0; r < out.rows(); ++r)
        for (int c = 0; c < out.cols(); ++c) out(r, c) = (out(r, c) - s.mean[c]) / s.std[c];
    return out;
}

Matrix invert_scaler(const ScalerStats& s, const Matrix& values) {
    if (values.cols() != static_cast<int>(s.mean.size()))
        throw std::invalid_argument("invert_scaler: feature count mismatch");
    Matrix out = values;
    for (int r = 0; r < out.rows(); ++r)
        for (int c = 0; c < out.cols(); ++c) out(r, c) = out(r, c) * s.std[c] + s.mean[c];
    return out;
}

WindowSet::WindowSet(Matrix standardized, int l, int offset, int target_offset)
    : data_(std::move(standardized)), l_(l), offset_(offset), target_offset_(target_offset) {
    if (l < 1) throw std::invalid_argument("make_windows: l must be >= 1");
    if (target_offset < 1) throw std::invalid_argument("make_windows: target offset must be >= 1");
    if (data_.rows() < l + target_offset)
        throw std::invalid_argument("make_windows: split has " + std::to_string(data_.rows()) +
                                    " rows; needs at least l+" + std::to_string(target_offset) +
                                    " = " + std::to_string(l + target_offset));
}

int WindowSet::count() const { return data_.rows() - l_ - (target_offset_ - 1); }

Matrix WindowSet::window(int i) const { return data_.slice_rows(i, i + l_); }

Matrix WindowSet::target(int i) const {
    int t = i + l_ - 1 + target_offset_;
    return data_.slice_rows(t, t + 1);
}

WindowSet make_windows(const Matrix& standardized, int l, int offset, int target_offset) {
    return WindowSet(standardized, l, offset, target_offset);
}

}  // namespace psim
