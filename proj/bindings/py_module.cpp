#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "psim/diagnostics.hpp"
#include "psim/env.hpp"
#include "psim/forecast_ops.hpp"
#include "psim/models.hpp"
#include "psim/oracle_model.hpp"
#include "psim/plant.hpp"
#include "psim/preprocess.hpp"
#include "psim/training.hpp"
#include "psim/tune.hpp"

namespace py = pybind11;
using namespace psim;

namespace {

Matrix to_matrix(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() == 1) {
        Matrix m(1, static_cast<int>(a.shape(0)));
        std::memcpy(m.data(), a.data(), sizeof(double) * m.size());
        return m;
    }
    if (a.ndim() != 2) throw std::invalid_argument("expected a 1-D or 2-D array");
    Matrix m(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
    std::memcpy(m.data(), a.data(), sizeof(double) * m.size());
    return m;
}

py::array_t<double> to_numpy(const Matrix& m) {
    py::array_t<double> a({m.rows(), m.cols()});
    std::memcpy(a.mutable_data(), m.data(), sizeof(double) * m.size());
    return a;
}

HyperParams hp_from_kwargs(ModelKind kind, const py::dict& kw) {
    HyperParams hp = desk_defaults(kind);
    for (auto item : kw) {
        const std::string key = py::cast<std::string>(item.first);
        if (key == "learning_rate") hp.learning_rate = py::cast<double>(item.second);
        else if (key == "dropout") hp.dropout = py::cast<double>(item.second);
        else if (key == "batch_size") hp.batch_size = py::cast<int>(item.second);
        else if (key == "enc_layers") hp.enc_layers = py::cast<int>(item.second);
        else if (key == "dec_layers") hp.dec_layers = py::cast<int>(item.second);
        else if (key == "dim") hp.dim = py::cast<int>(item.second);
        else if (key == "heads") hp.heads = py::cast<int>(item.second);
        else if (key == "ffn_factor") hp.ffn_factor = py::cast<int>(item.second);
        else if (key == "decomp_kernel") hp.decomp_kernel = py::cast<int>(item.second);
        else if (key == "individual") hp.individual = py::cast<bool>(item.second);
        else if (key == "label_len") hp.label_len = py::cast<int>(item.second);
        else if (key == "sparsity_factor") hp.sparsity_factor = py::cast<double>(item.second);
        else if (key == "top_k_delays") hp.top_k_delays = py::cast<int>(item.second);
        else if (key == "paper_lstm_activations")
            hp.paper_lstm_activations = py::cast<bool>(item.second);
        else if (key == "positional_encoding")
            hp.positional_encoding = py::cast<bool>(item.second);
        else throw std::invalid_argument("unknown hyperparameter '" + key + "'");
    }
    return hp;
}

struct PyModel {
    std::shared_ptr<ForecastModel> model;
    ScalerStats scaler;

    py::array_t<double> predict(const py::array_t<double>& window, int64_t target_row) const {
        PredictContext ctx;
        ctx.absolute_target_row = target_row;
        return to_numpy(model->predict(to_matrix(window), ctx));
    }
};

EnvConfig env_config_from_kwargs(const TimeSeriesDataset& ds, const py::dict& kw) {
    EnvConfig cfg;
    cfg.action_col = ds.feature_index("dosage");
    cfg.objective_col = ds.feature_index("phosphate");
    for (auto item : kw) {
        const std::string key = py::cast<std::string>(item.first);
        if (key == "action_col") cfg.action_col = py::cast<int>(item.second);
        else if (key == "objective_col") cfg.objective_col = py::cast<int>(item.second);
        else if (key == "start_index") cfg.start_index = py::cast<int>(item.second);
        else if (key == "episode_len") cfg.episode_len = py::cast<int>(item.second);
        else if (key == "stride") cfg.stride = py::cast<int>(item.second);
        else if (key == "gamma") cfg.gamma = py::cast<double>(item.second);
        else if (key == "w_p") cfg.w_p = py::cast<double>(item.second);
        else if (key == "w_u") cfg.w_u = py::cast<double>(item.second);
        else if (key == "setpoint") cfg.setpoint = py::cast<double>(item.second);
        else if (key == "divergence_guard") cfg.divergence_guard = py::cast<double>(item.second);
        else throw std::invalid_argument("unknown env option '" + key + "'");
    }
    return cfg;
}

}  // namespace

PYBIND11_MODULE(_psim, m) {
    m.doc() = "surrogate process simulator toolkit (C++ core)";

    py::class_<TimeSeriesDataset>(m, "Dataset")
        .def_property_readonly("n_rows", &TimeSeriesDataset::n_rows)
        .def_property_readonly("n_features", &TimeSeriesDataset::n_features)
        .def_property_readonly("feature_names",
                               [](const TimeSeriesDataset& ds) { return ds.feature_names(); })
        .def_property_readonly("timestamps",
                               [](const TimeSeriesDataset& ds) { return ds.timestamps(); })
        .def_property_readonly("values",
                               [](const TimeSeriesDataset& ds) { return to_numpy(ds.values()); })
        .def_property_readonly("quality",
                               [](const TimeSeriesDataset& ds) { return to_numpy(ds.quality()); })
        .def("feature_index", &TimeSeriesDataset::feature_index)
        .def("save", &save_dataset_csv, py::arg("path"));

    m.def("load_dataset", &load_dataset, py::arg("path"));

    m.def(
        "generate",
        [](int duration, uint64_t seed, bool measure_biomass, bool scenario, double gain,
           double setpoint) {
            PlantParams params = PlantParams::defaults();
            params.measure_biomass = measure_biomass;
            ControllerConfig controller;
            controller.gain = gain;
            controller.setpoint = setpoint;
            ScenarioConfig sc;
            if (scenario) sc = default_scenario(duration, params);
            sc.disturbances.seed = seed;
            sc.sensors.seed = seed ^ 0x5;
            return generate_dataset(params, controller, sc.disturbances, sc.sensors, duration,
                                    seed);
        },
        py::arg("duration"), py::arg("seed") = 0, py::arg("measure_biomass") = false,
        py::arg("scenario") = true, py::arg("gain") = -6.0, py::arg("setpoint") = 1.2,
        "Simulate the synthetic plant closed-loop into a dataset");

    m.def(
        "clean",
        [](const TimeSeriesDataset& ds, const std::string& bad, const std::string& neg,
           int max_gap) {
            CleanPolicy policy;
            if (bad == "hold-last") policy.bad = BadPolicy::kHoldLast;
            else if (bad == "interpolate") policy.bad = BadPolicy::kInterpolate;
            else if (bad == "drop-row") policy.bad = BadPolicy::kDropRow;
            else throw std::invalid_argument("bad policy must be hold-last|interpolate|drop-row");
            if (neg == "clip-zero") policy.negatives = NegativePolicy::kClipZero;
            else if (neg == "mark-bad") policy.negatives = NegativePolicy::kMarkBad;
            else throw std::invalid_argument("negative policy must be clip-zero|mark-bad");
            policy.max_repair_gap = max_gap;
            CleanResult res = clean(ds, policy);
            py::list log;
            for (const auto& e : res.log) log.append(py::make_tuple(e.feature, e.cause, e.count));
            return py::make_tuple(res.dataset, log);
        },
        py::arg("dataset"), py::arg("bad_policy") = "hold-last",
        py::arg("negative_policy") = "clip-zero", py::arg("max_gap") = 30);

    m.def("pearson_rank", [](const TimeSeriesDataset& ds, const std::string& target) {
        py::list out;
        for (const auto& e : pearson_rank(ds, target))
            out.append(py::make_tuple(e.feature, e.r, e.zero_variance));
        return out;
    });

    m.def(
        "split",
        [](int n_rows, int l, double train_fraction, double validation_fraction) {
            SplitSpec spec{train_fraction, validation_fraction};
            SplitIndices s = split_indices(n_rows, spec, l);
            return py::make_tuple(py::make_tuple(s.train_begin, s.train_end),
                                  py::make_tuple(s.val_begin, s.val_end),
                                  py::make_tuple(s.test_begin, s.test_end));
        },
        py::arg("n_rows"), py::arg("l"), py::arg("train_fraction") = 0.85,
        py::arg("validation_fraction") = 0.15);

    py::class_<ScalerStats>(m, "Scaler")
        .def_property_readonly("features", [](const ScalerStats& s) { return s.features; })
        .def_property_readonly("mean", [](const ScalerStats& s) { return s.mean; })
        .def_property_readonly("std", [](const ScalerStats& s) { return s.std; })
        .def("apply",
             [](const ScalerStats& s, const py::array_t<double>& v) {
                 return to_numpy(apply_scaler(s, to_matrix(v)));
             })
        .def("invert", [](const ScalerStats& s, const py::array_t<double>& v) {
            return to_numpy(invert_scaler(s, to_matrix(v)));
        });

    m.def("fit_scaler", [](const py::array_t<double>& values,
                           const std::vector<std::string>& features) {
        return fit_scaler(to_matrix(values), features);
    });

    py::class_<PyModel>(m, "Model")
        .def_property_readonly("kind",
                               [](const PyModel& p) { return to_string(p.model->kind()); })
        .def_property_readonly("window_len",
                               [](const PyModel& p) { return p.model->window_len(); })
        .def_property_readonly("n_features",
                               [](const PyModel& p) { return p.model->n_features(); })
        .def_property_readonly("scaler", [](const PyModel& p) { return p.scaler; })
        .def("predict", &PyModel::predict, py::arg("window"), py::arg("target_row") = -1);

    m.def(
        "train",
        [](const std::string& kind_name, const py::array_t<double>& train_std,
           const py::array_t<double>& val_std, const ScalerStats& scaler, int l, int epochs,
           uint64_t seed, int max_batches, const py::dict& hyper) {
            ModelKind kind = model_kind_from_string(kind_name);
            HyperParams hp = hp_from_kwargs(kind, hyper);
            WindowSet train_ws = make_windows(to_matrix(train_std), l);
            WindowSet val_ws = make_windows(to_matrix(val_std), l);
            TrainConfig cfg;
            cfg.epochs = epochs;
            cfg.seed = seed;
            cfg.max_batches_per_epoch = max_batches;
            TrainResult res = train(hp, train_ws, val_ws, scaler, cfg);
            py::dict report;
            report["train_mse"] = res.report.train_mse;
            report["val_mse"] = res.report.val_mse;
            report["best_epoch"] = res.report.best_epoch;
            report["diverged"] = res.report.diverged;
            PyModel model{std::shared_ptr<ForecastModel>(model_from_checkpoint(res.checkpoint)),
                          res.checkpoint.scaler};
            Checkpoint ckpt = res.checkpoint;
            return py::make_tuple(model, report,
                                  py::cpp_function([ckpt](const std::string& path) {
                                      save_checkpoint(ckpt, path);
                                  }));
        },
        py::arg("kind"), py::arg("train_std"), py::arg("val_std"), py::arg("scaler"),
        py::arg("l"), py::arg("epochs") = 10, py::arg("seed") = 0, py::arg("max_batches") = 0,
        py::arg("hyper") = py::dict(),
        "Train a forecaster on standardized splits; returns (model, report, save_fn)");

    m.def(
        "evaluate",
        [](const PyModel& model, const py::array_t<double>& test_std, int l) {
            WindowSet ws = make_windows(to_matrix(test_std), l);
            EvalMetrics metrics = evaluate(*model.model, ws);
            py::dict out;
            out["mse"] = metrics.mse;
            out["nmse"] = metrics.nmse;
            out["accuracy"] = metrics.accuracy;
            return out;
        },
        py::arg("model"), py::arg("test_std"), py::arg("l"));

    m.def("load_model", [](const std::string& path) {
        Checkpoint ckpt = load_checkpoint(path);
        return PyModel{std::shared_ptr<ForecastModel>(model_from_checkpoint(ckpt)), ckpt.scaler};
    });

    m.def(
        "oracle_model",
        [](const ScalerStats& scaler, int l) {
            return PyModel{std::make_shared<OraclePlantModel>(PlantParams::defaults(),
                                                              DisturbanceProfile{}, scaler, l),
                           scaler};
        },
        py::arg("scaler"), py::arg("l"), "Exact plant dynamics behind the forecaster contract");

    py::class_<SimEnv>(m, "SimEnv")
        .def(py::init([](const PyModel& model, const TimeSeriesDataset& ds, const py::dict& kw) {
                 return SimEnv(model.model, model.scaler, ds, env_config_from_kwargs(ds, kw));
             }),
             py::arg("model"), py::arg("dataset"), py::arg("config") = py::dict())
        .def("reset", [](SimEnv& env) { return to_numpy(env.reset()); })
        .def("step",
             [](SimEnv& env, double action) {
                 StepResult r = env.step(action);
                 py::dict info;
                 info["step"] = r.step;
                 info["total_reward"] = r.total_reward;
                 info["diverged"] = r.diverged;
                 return py::make_tuple(to_numpy(r.state), r.reward, r.done, info);
             })
        .def_property_readonly("done", &SimEnv::done)
        .def_property_readonly("rows_predicted", &SimEnv::rows_predicted);

    m.def(
        "replay_rollout",
        [](const PyModel& model, const TimeSeriesDataset& ds, const py::dict& kw) {
            RolloutTrace trace =
                replay_rollout(model.model, model.scaler, ds, env_config_from_kwargs(ds, kw));
            py::dict out;
            std::vector<double> action, pred_obj, true_obj, reward_v, mse;
            for (const auto& r : trace.records) {
                action.push_back(r.action);
                pred_obj.push_back(r.pred_objective);
                true_obj.push_back(r.true_objective);
                reward_v.push_back(r.reward);
                mse.push_back(r.step_mse);
            }
            out["action"] = action;
            out["pred_obj"] = pred_obj;
            out["true_obj"] = true_obj;
            out["reward"] = reward_v;
            out["step_mse"] = mse;
            out["pred_std"] = to_numpy(trace.pred_std);
            out["true_std"] = to_numpy(trace.true_std);
            out["diverged"] = trace.diverged;
            return out;
        },
        py::arg("model"), py::arg("dataset"), py::arg("config"));

    m.def("cumulative_reward", &cumulative_reward, py::arg("rewards"), py::arg("gamma"));
    m.def("stepwise_mse", [](const py::array_t<double>& pred, const py::array_t<double>& truth) {
        return stepwise_mse(to_matrix(pred), to_matrix(truth));
    });
    m.def("normalize_curve", &normalize_curve);
    m.def("growth_statistic", [](const std::vector<double>& mse) {
        GrowthStat g = growth_statistic(mse);
        return py::make_tuple(g.early_mean, g.late_mean, g.ratio);
    });

    m.def("attention", [](const py::array_t<double>& q, const py::array_t<double>& k,
                          const py::array_t<double>& v) {
        return to_numpy(attention(to_matrix(q), to_matrix(k), to_matrix(v)));
    });
    m.def(
        "probsparse_attention",
        [](const py::array_t<double>& q, const py::array_t<double>& k,
           const py::array_t<double>& v, double c) {
            auto res = probsparse_attention(to_matrix(q), to_matrix(k), to_matrix(v), c);
            return py::make_tuple(to_numpy(res.output), res.selected_queries, res.u);
        },
        py::arg("q"), py::arg("k"), py::arg("v"), py::arg("c") = 1.0);
    m.def(
        "series_decompose",
        [](const py::array_t<double>& x, int kernel) {
            auto [remainder, trend] = series_decompose(to_matrix(x), kernel);
            return py::make_tuple(to_numpy(remainder), to_numpy(trend));
        },
        py::arg("x"), py::arg("kernel") = 25);
    m.def("autocorrelation_scores",
          [](const py::array_t<double>& q, const py::array_t<double>& k) {
              return autocorrelation_scores(to_matrix(q), to_matrix(k));
          });
    m.def("top_delays", &top_delays, py::arg("scores"), py::arg("k"));
}
