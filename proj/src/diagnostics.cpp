#include "psim/diagnostics.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <future>

#include "svg_plot.hpp"

namespace psim {

std::vector<double> stepwise_mse(const Matrix& pred_std, const Matrix& true_std) {
    if (!pred_std.same_shape(true_std))
        throw std::invalid_argument("stepwise_mse: prediction/truth misaligned");
    std::vector<double> out(pred_std.rows());
    for (int t = 0; t < pred_std.rows(); ++t) {
        double acc = 0.0;
        for (int d = 0; d < pred_std.cols(); ++d) {
            const double e = pred_std(t, d) - true_std(t, d);
            acc += e * e;
        }
        out[t] = acc;
    }
    return out;
}

std::vector<double> normalize_curve(const std::vector<double>& mse) {
    if (mse.empty()) throw std::invalid_argument("normalize_curve: empty sequence");
    double lo = mse[0], hi = mse[0];
    for (double v : mse) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    std::vector<double> out(mse.size(), 0.0);
    if (hi > lo)
        for (size_t i = 0; i < mse.size(); ++i) out[i] = (mse[i] - lo) / (hi - lo);
    return out;
}

GrowthStat growth_statistic(const std::vector<double>& mse) {
    if (mse.size() < 20)
        throw std::invalid_argument("growth_statistic: needs at least 20 steps, got " +
                                    std::to_string(mse.size()));
    const size_t decile = mse.size() / 10;
    GrowthStat g;
    for (size_t i = 0; i < decile; ++i) g.early_mean += mse[i];
    for (size_t i = mse.size() - decile; i < mse.size(); ++i) g.late_mean += mse[i];
    g.early_mean /= decile;
    g.late_mean /= decile;
    if (g.early_mean > 0.0)
        g.ratio = g.late_mean / g.early_mean;
    else
        g.ratio = g.late_mean > 0.0 ? std::numeric_limits<double>::infinity() : 1.0;
    return g;
}

SequenceSuite default_suite(int n_rows, int l) {
    auto at = [&](double frac) { return std::max(l, static_cast<int>(n_rows * frac)); };
    SequenceSuite suite;
    suite.sequences.push_back({"steady", at(0.852)});
    suite.sequences.push_back({"trend-shift", at(0.862)});
    suite.sequences.push_back({"disturbance", at(0.903)});
    suite.sequences.push_back({"sensor-burst", at(0.942)});
    return suite;
}

std::vector<std::vector<ErrorCurve>> multi_sequence_eval(const std::vector<EvalEntry>& models,
                                                         const TimeSeriesDataset& dataset,
                                                         const SequenceSuite& suite,
                                                         int episode_len,
                                                         const EnvConfig& base_config) {
    std::vector<std::vector<ErrorCurve>> grid(models.size());
    std::vector<std::future<ErrorCurve>> futures;

    auto run_cell = [&](const EvalEntry& entry, const SequenceSpec& seq) {
        ErrorCurve curve;
        curve.model_label = entry.label;
        curve.sequence_label = seq.label;
        curve.start_index = seq.start_index;
        try {
            EnvConfig cfg = base_config;
            cfg.start_index = seq.start_index;
            cfg.episode_len = episode_len;
            curve.trace = replay_rollout(entry.model, entry.scaler, dataset, cfg);
            curve.step_mse = stepwise_mse(curve.trace.pred_std, curve.trace.true_std);
            curve.normalized = normalize_curve(curve.step_mse);
            curve.growth = growth_statistic(curve.step_mse);
            curve.one_step_mse = curve.step_mse.front();
            curve.final_mse = curve.step_mse.back();
        } catch (const std::exception& e) {
            curve.error = e.what();
        }
        return curve;
    };

    for (const auto& entry : models)
        for (const auto& seq : suite.sequences)
            futures.push_back(std::async(std::launch::async, run_cell, std::cref(entry),
                                         std::cref(seq)));
    for (size_t mi = 0; mi < models.size(); ++mi)
        for (size_t si = 0; si < suite.sequences.size(); ++si)
            grid[mi].push_back(futures[mi * suite.sequences.size() + si].get());
    return grid;
}

std::vector<std::string> render_report(const std::vector<std::vector<ErrorCurve>>& curves,
                                       const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    std::vector<std::string> written;

    auto emit = [&](const std::string& name, const std::string& title, const std::string& ylab,
                    const std::vector<svg::Series>& series) {
        const std::string path = (fs::path(out_dir) / name).string();
        svg::write_line_plot(path, title, "step", ylab, series);
        written.push_back(path);
    };

    // per-sequence overlays of predicted vs true objective
    if (!curves.empty()) {
        const size_t n_seq = curves[0].size();
        for (size_t si = 0; si < n_seq; ++si) {
            std::vector<svg::Series> series;
            std::string label = "sequence";
            for (const auto& row : curves) {
                if (si >= row.size() || !row[si].ok()) continue;
                label = row[si].sequence_label;
                if (series.empty()) {
                    svg::Series truth{"true", {}};
                    for (const auto& r : row[si].trace.records)
                        truth.ys.push_back(r.true_objective);
                    series.push_back(std::move(truth));
                }
                svg::Series s{row[si].model_label, {}};
                for (const auto& r : row[si].trace.records) s.ys.push_back(r.pred_objective);
                series.push_back(std::move(s));
            }
            if (!series.empty())
                emit("rollout_" + label + ".svg", "objective, " + label + " sequence",
                     "objective", series);
        }
    }

    // per-model stepwise and normalized error curves
    for (const auto& row : curves) {
        if (row.empty()) continue;
        std::vector<svg::Series> raw, norm;
        for (const auto& c : row) {
            if (!c.ok()) continue;
            svg::Series a{c.sequence_label, {}};
            a.ys = c.step_mse;
            raw.push_back(std::move(a));
            svg::Series b{c.sequence_label, {}};
            b.ys = c.normalized;
            norm.push_back(std::move(b));
        }
        if (!raw.empty()) {
            emit("mse_" + row[0].model_label + ".svg",
                 "step-wise error, " + row[0].model_label, "sum sq err", raw);
            emit("mse_norm_" + row[0].model_label + ".svg",
                 "normalized step-wise error, " + row[0].model_label, "normalized", norm);
        }
    }

    const std::string summary_path = (fs::path(out_dir) / "summary.csv").string();
    std::ofstream f(summary_path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + summary_path);
    f << "model,sequence,one_step_mse,growth_ratio,final_mse\n";
    for (const auto& row : curves)
        for (const auto& c : row) {
            f << c.model_label << "," << c.sequence_label << ",";
            if (c.ok())
                f << c.one_step_mse << "," << c.growth.ratio << "," << c.final_mse;
            else
                f << "error,error,error";
            f << "\n";
        }
    f.close();
    written.push_back(summary_path);
    return written;
}

}  // namespace psim
