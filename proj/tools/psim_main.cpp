// psim: synthetic-plant surrogate modeling pipeline.
// Subcommands: generate, preprocess, tune, train, rollout, report.
// Exit codes: 0 success, 1 usage/config error, 2 runtime failure.

#include <CLI11.hpp>
#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "psim/diagnostics.hpp"
#include "psim/env.hpp"
#include "psim/oracle_model.hpp"
#include "psim/plant.hpp"
#include "psim/preprocess.hpp"
#include "psim/training.hpp"
#include "psim/tune.hpp"

namespace fs = std::filesystem;
using namespace psim;

namespace {

std::string default_out_root() {
    const char* env = std::getenv("PSIM_OUT");
    return env && *env ? env : "psim_out";
}

std::string fmt_double(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

void save_scaler_csv(const ScalerStats& s, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f << "feature,mean,std\n";
    for (size_t i = 0; i < s.features.size(); ++i)
        f << s.features[i] << "," << fmt_double(s.mean[i]) << "," << fmt_double(s.std[i]) << "\n";
}

ScalerStats load_scaler_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open scaler file: " + path);
    std::string line;
    std::getline(f, line);
    ScalerStats s;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        auto c1 = line.find(','), c2 = line.rfind(',');
        if (c1 == std::string::npos || c2 == c1)
            throw std::runtime_error("bad scaler row: " + line);
        s.features.push_back(line.substr(0, c1));
        s.mean.push_back(std::stod(line.substr(c1 + 1, c2 - c1 - 1)));
        s.std.push_back(std::stod(line.substr(c2 + 1)));
    }
    return s;
}

void save_splits_csv(const SplitIndices& s, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f << "split,begin,end\n";
    f << "train," << s.train_begin << "," << s.train_end << "\n";
    f << "validation," << s.val_begin << "," << s.val_end << "\n";
    f << "test," << s.test_begin << "," << s.test_end << "\n";
}

SplitIndices load_splits_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open splits file: " + path);
    std::string line;
    std::getline(f, line);
    SplitIndices s;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        auto c1 = line.find(','), c2 = line.rfind(',');
        std::string name = line.substr(0, c1);
        int b = std::stoi(line.substr(c1 + 1, c2 - c1 - 1));
        int e = std::stoi(line.substr(c2 + 1));
        if (name == "train") {
            s.train_begin = b;
            s.train_end = e;
        } else if (name == "validation") {
            s.val_begin = b;
            s.val_end = e;
        } else if (name == "test") {
            s.test_begin = b;
            s.test_end = e;
        }
    }
    return s;
}

void save_meta_ini(const std::string& path, int l, const std::string& target) {
    std::ofstream f(path, std::ios::binary);
    f << "l=" << l << "\n" << "target=" << target << "\n";
}

int load_meta_l(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open preprocess meta: " + path);
    std::string line;
    while (std::getline(f, line))
        if (line.rfind("l=", 0) == 0) return std::stoi(line.substr(2));
    throw std::runtime_error("preprocess meta has no window length: " + path);
}

struct PreprocessedData {
    TimeSeriesDataset dataset;
    SplitIndices splits;
    ScalerStats scaler;
    int l = 0;
};

PreprocessedData load_preprocessed(const std::string& dir) {
    PreprocessedData pre;
    pre.dataset = load_dataset((fs::path(dir) / "cleaned.csv").string());
    pre.splits = load_splits_csv((fs::path(dir) / "splits.csv").string());
    pre.scaler = load_scaler_csv((fs::path(dir) / "scaler.csv").string());
    pre.l = load_meta_l((fs::path(dir) / "preprocess.ini").string());
    return pre;
}

WindowSet windows_for(const PreprocessedData& pre, int begin, int end) {
    Matrix std_vals = apply_scaler(pre.scaler, pre.dataset.values().slice_rows(begin, end));
    return make_windows(std_vals, pre.l, begin);
}

void add_plant_options(CLI::App* cmd, PlantParams& plant, ControllerConfig& controller) {
    cmd->add_option("--plant.sampling_minutes", plant.sampling_minutes);
    cmd->add_option("--plant.influent_phosphate", plant.influent_phosphate);
    cmd->add_option("--plant.influent_nitrate", plant.influent_nitrate);
    cmd->add_option("--plant.influent_ammonia", plant.influent_ammonia);
    cmd->add_option("--plant.temperature_mean", plant.temperature_mean);
    cmd->add_option("--plant.diurnal_period_minutes", plant.diurnal_period_minutes);
    cmd->add_option("--plant.diurnal_amp_phosphate", plant.diurnal_amp_phosphate);
    cmd->add_option("--plant.diurnal_amp_nitrate", plant.diurnal_amp_nitrate);
    cmd->add_option("--plant.diurnal_amp_ammonia", plant.diurnal_amp_ammonia);
    cmd->add_option("--plant.diurnal_amp_temperature", plant.diurnal_amp_temperature);
    cmd->add_option("--plant.tau_phosphate", plant.tau_phosphate);
    cmd->add_option("--plant.tau_nitrate", plant.tau_nitrate);
    cmd->add_option("--plant.tau_ammonia", plant.tau_ammonia);
    cmd->add_option("--plant.tau_biomass", plant.tau_biomass);
    cmd->add_option("--plant.tau_temperature", plant.tau_temperature);
    cmd->add_option("--plant.removal_gain", plant.removal_gain);
    cmd->add_option("--plant.bio_uptake_rate", plant.bio_uptake_rate);
    cmd->add_option("--plant.nitrification_rate", plant.nitrification_rate);
    cmd->add_option("--plant.denitrification_rate", plant.denitrification_rate);
    cmd->add_option("--plant.half_sat", plant.half_sat);
    cmd->add_option("--plant.biomass_half_sat", plant.biomass_half_sat);
    cmd->add_option("--plant.u_min", plant.u_min);
    cmd->add_option("--plant.u_max", plant.u_max);
    cmd->add_option("--plant.equilibrium_dosage", plant.equilibrium_dosage);
    cmd->add_flag("--plant.measure_biomass", plant.measure_biomass);
    cmd->add_option("--controller.gain", controller.gain);
    cmd->add_option("--controller.setpoint", controller.setpoint);
}

void add_model_options(CLI::App* cmd, HyperParams& hp) {
    cmd->add_option("--model.learning_rate", hp.learning_rate);
    cmd->add_option("--model.dropout", hp.dropout);
    cmd->add_option("--model.batch_size", hp.batch_size);
    cmd->add_option("--model.enc_layers", hp.enc_layers);
    cmd->add_option("--model.dec_layers", hp.dec_layers);
    cmd->add_option("--model.dim", hp.dim);
    cmd->add_option("--model.heads", hp.heads);
    cmd->add_option("--model.ffn_factor", hp.ffn_factor);
    cmd->add_option("--model.decomp_kernel", hp.decomp_kernel);
    cmd->add_option("--model.label_len", hp.label_len);
    cmd->add_option("--model.sparsity_factor", hp.sparsity_factor);
    cmd->add_option("--model.top_k_delays", hp.top_k_delays);
    cmd->add_flag("--model.paper_lstm_activations", hp.paper_lstm_activations);
}

void add_env_options(CLI::App* cmd, EnvConfig& env, int& p, int& M) {
    cmd->add_option("--env.action_col", env.action_col, "action column index (default: dosage)");
    cmd->add_option("--env.objective_col", env.objective_col,
                    "objective column index (default: phosphate)");
    cmd->add_option("-p,--env.start_index", p, "first dataset row to predict");
    cmd->add_option("-M,--env.episode_len", M, "episode length");
    cmd->add_option("-N,--env.stride", env.stride);
    cmd->add_option("--env.gamma", env.gamma);
    cmd->add_option("--env.w_p", env.w_p);
    cmd->add_option("--env.w_u", env.w_u);
    cmd->add_option("--env.setpoint", env.setpoint);
    cmd->add_option("--env.divergence_guard", env.divergence_guard);
}

void resolve_env_columns(EnvConfig& env, const TimeSeriesDataset& ds) {
    if (env.action_col < 0) env.action_col = ds.feature_index("dosage");
    if (env.objective_col < 0) env.objective_col = ds.feature_index("phosphate");
    if (env.action_col < 0 || env.objective_col < 0)
        throw std::runtime_error(
            "env: could not resolve action/objective columns; pass --env.action_col and "
            "--env.objective_col");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"synthetic-plant surrogate modeling pipeline"};
    app.require_subcommand(1);
    app.set_config("--config", "", "declarative config file (flags override it)");
    app.allow_config_extras(CLI::config_extras_mode::error);

    uint64_t seed = 0;
    std::string out_dir = default_out_root();
    app.add_option("--seed", seed, "master seed")->capture_default_str();
    app.add_option("--out", out_dir, "output directory root")->capture_default_str();

    // ---- generate ----------------------------------------------------------
    auto* gen = app.add_subcommand("generate", "simulate the plant into a dataset CSV");
    PlantParams plant = PlantParams::defaults();
    ControllerConfig controller;
    int duration = 50000;
    bool no_scenario = false;
    std::string gen_file = "dataset.csv";
    gen->add_option("--duration", duration, "number of rows")->capture_default_str();
    gen->add_flag("--steady", no_scenario, "disable the default disturbance scenario");
    gen->add_option("--file", gen_file, "output file name")->capture_default_str();
    add_plant_options(gen, plant, controller);

    // ---- preprocess --------------------------------------------------------
    auto* pre = app.add_subcommand("preprocess", "clean, select, split, and standardize");
    std::string pre_dataset;
    int window_l = 240;
    std::string bad_policy = "hold-last", neg_policy = "clip-zero";
    int max_gap = 30;
    std::string time_features = "off";
    std::string target_feature = "phosphate";
    SplitSpec split_spec;
    pre->add_option("--dataset", pre_dataset, "input dataset CSV")->required();
    pre->add_option("-l,--window", window_l, "window length in samples")->capture_default_str();
    pre->add_option("--clean.bad_policy", bad_policy, "hold-last | interpolate | drop-row")
        ->capture_default_str();
    pre->add_option("--clean.negative_policy", neg_policy, "clip-zero | mark-bad")
        ->capture_default_str();
    pre->add_option("--clean.max_gap", max_gap)->capture_default_str();
    pre->add_option("--features.time", time_features, "off | auto")->capture_default_str();
    pre->add_option("--features.target", target_feature)->capture_default_str();
    pre->add_option("--split.train_fraction", split_spec.train_fraction)->capture_default_str();
    pre->add_option("--split.validation_fraction", split_spec.validation_fraction)
        ->capture_default_str();

    // ---- tune ---------------------------------------------------------------
    auto* tune_cmd = app.add_subcommand("tune", "TPE hyperparameter search");
    std::string tune_pre_dir, tune_model_name = "dlinear";
    TuneModelConfig tune_cfg;
    tune_cmd->add_option("--pre", tune_pre_dir, "preprocess output directory")->required();
    tune_cmd->add_option("--model", tune_model_name, "model kind")->capture_default_str();
    tune_cmd->add_option("--budget", tune_cfg.budget)->capture_default_str();
    tune_cmd->add_option("--trial_epochs", tune_cfg.epochs_per_trial)->capture_default_str();
    tune_cmd->add_option("--trial_batches", tune_cfg.max_batches_per_epoch)
        ->capture_default_str();

    // ---- train --------------------------------------------------------------
    auto* train_cmd = app.add_subcommand("train", "train one model and save its checkpoint");
    std::string train_pre_dir, train_model = "dlinear";
    HyperParams train_hp;
    TrainConfig train_cfg;
    bool use_table1 = false;
    train_cmd->add_option("--pre", train_pre_dir, "preprocess output directory")->required();
    train_cmd->add_option("--model", train_model, "model kind")->capture_default_str();
    train_cmd->add_option("--epochs", train_cfg.epochs)->capture_default_str();
    train_cmd->add_option("--patience", train_cfg.patience)->capture_default_str();
    train_cmd->add_option("--max_batches", train_cfg.max_batches_per_epoch)
        ->capture_default_str();
    train_cmd->add_flag("--table1", use_table1, "use the paper-scale tuned profile");
    add_model_options(train_cmd, train_hp);

    // ---- rollout --------------------------------------------------------------
    auto* roll = app.add_subcommand("rollout", "dataset-replay rollout through a checkpoint");
    std::string roll_dataset, roll_ckpt;
    EnvConfig roll_env;
    int roll_p = -1, roll_M = 300;
    bool roll_oracle = false;
    roll->add_option("--dataset", roll_dataset, "dataset CSV")->required();
    roll->add_option("--checkpoint", roll_ckpt, "model checkpoint");
    roll->add_flag("--oracle", roll_oracle, "use the exact plant dynamics as the model");
    add_env_options(roll, roll_env, roll_p, roll_M);

    // ---- report --------------------------------------------------------------
    auto* rep = app.add_subcommand("report", "multi-sequence rollout evaluation and plots");
    std::string rep_dataset;
    std::vector<std::string> rep_ckpts;
    EnvConfig rep_env;
    int rep_M = 300;
    bool rep_oracle = false;
    int rep_l = 240;
    int rep_unused_p = -1;
    rep->add_option("--dataset", rep_dataset, "dataset CSV")->required();
    rep->add_option("--checkpoints", rep_ckpts, "checkpoint files")->expected(-1);
    rep->add_flag("--with-oracle", rep_oracle, "include the exact-dynamics model");
    rep->add_option("-l,--window", rep_l, "window length for the oracle model")
        ->capture_default_str();
    add_env_options(rep, rep_env, rep_unused_p, rep_M);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        return 1;
    }

    try {
        fs::create_directories(out_dir);

        if (*gen) {
            ScenarioConfig scenario;
            if (!no_scenario) scenario = default_scenario(duration, plant);
            scenario.disturbances.seed = seed;
            scenario.sensors.seed = seed ^ 0x5;
            TimeSeriesDataset ds = generate_dataset(plant, controller, scenario.disturbances,
                                                    scenario.sensors, duration, seed);
            const std::string path = (fs::path(out_dir) / gen_file).string();
            save_dataset_csv(ds, path);
            std::cout << "wrote " << path << " (" << ds.n_rows() << " rows, "
                      << ds.n_features() << " features)\n";
        }

        if (*pre) {
            TimeSeriesDataset ds = load_dataset(pre_dataset);
            CleanPolicy policy;
            if (bad_policy == "hold-last") policy.bad = BadPolicy::kHoldLast;
            else if (bad_policy == "interpolate") policy.bad = BadPolicy::kInterpolate;
            else if (bad_policy == "drop-row") policy.bad = BadPolicy::kDropRow;
            else throw std::runtime_error("unknown clean.bad_policy '" + bad_policy + "'");
            if (neg_policy == "clip-zero") policy.negatives = NegativePolicy::kClipZero;
            else if (neg_policy == "mark-bad") policy.negatives = NegativePolicy::kMarkBad;
            else throw std::runtime_error("unknown clean.negative_policy '" + neg_policy + "'");
            policy.max_repair_gap = max_gap;

            CleanResult cleaned = clean(ds, policy);
            if (time_features == "auto") {
                auto sel = select_time_features(cleaned.dataset, target_feature);
                cleaned.dataset = append_time_features(cleaned.dataset, sel.chosen);
                std::cout << "time features selected: " << sel.chosen.size() << "\n";
            } else if (time_features != "off") {
                throw std::runtime_error("features.time must be off or auto");
            }
            auto ranked = pearson_rank(cleaned.dataset, target_feature);
            std::cout << "pearson ranking vs " << target_feature << ":";
            for (const auto& e : ranked) std::cout << " " << e.feature << "=" << e.r;
            std::cout << "\n";

            SplitIndices splits = split_indices(cleaned.dataset.n_rows(), split_spec, window_l);
            ScalerStats scaler = fit_scaler(
                cleaned.dataset.values().slice_rows(splits.train_begin, splits.train_end),
                cleaned.dataset.feature_names());

            save_dataset_csv(cleaned.dataset, (fs::path(out_dir) / "cleaned.csv").string());
            save_repair_log_csv(cleaned.log, (fs::path(out_dir) / "repair_log.csv").string());
            save_splits_csv(splits, (fs::path(out_dir) / "splits.csv").string());
            save_scaler_csv(scaler, (fs::path(out_dir) / "scaler.csv").string());
            save_meta_ini((fs::path(out_dir) / "preprocess.ini").string(), window_l,
                          target_feature);
            std::cout << "preprocess artifacts in " << out_dir << " (train "
                      << splits.train_end - splits.train_begin << ", val "
                      << splits.val_end - splits.val_begin << ", test "
                      << splits.test_end - splits.test_begin << ")\n";
        }

        if (*tune_cmd) {
            PreprocessedData data = load_preprocessed(tune_pre_dir);
            ModelKind kind = model_kind_from_string(tune_model_name);
            WindowSet train_ws = windows_for(data, data.splits.train_begin, data.splits.train_end);
            WindowSet val_ws = windows_for(data, data.splits.val_begin, data.splits.val_end);
            tune_cfg.seed = seed;
            TuneOutcome outcome = tune_model(kind, train_ws, val_ws, data.scaler, tune_cfg);
            const std::string ledger =
                (fs::path(out_dir) / ("tuning_ledger_" + tune_model_name + ".csv")).string();
            save_tuning_ledger_csv(outcome, ledger);
            const std::string best_path =
                (fs::path(out_dir) / ("best_" + tune_model_name + ".ini")).string();
            std::ofstream best(best_path, std::ios::binary);
            for (const auto& [k, v] : outcome.best.point)
                best << "model." << k << "=" << fmt_double(v) << "\n";
            best.close();
            std::cout << "best " << tune_model_name << " val_mse " << outcome.best.objective
                      << "; wrote " << best_path << " and " << ledger << "\n";
        }

        if (*train_cmd) {
            PreprocessedData data = load_preprocessed(train_pre_dir);
            ModelKind kind = model_kind_from_string(train_model);
            HyperParams hp = use_table1 ? table1_profile(kind) : desk_defaults(kind);
            // explicit --model.* overrides win over the profile
            HyperParams flags = train_hp;
            flags.kind = kind;
            if (train_cmd->count("--model.learning_rate")) hp.learning_rate = flags.learning_rate;
            if (train_cmd->count("--model.dropout")) hp.dropout = flags.dropout;
            if (train_cmd->count("--model.batch_size")) hp.batch_size = flags.batch_size;
            if (train_cmd->count("--model.enc_layers")) hp.enc_layers = flags.enc_layers;
            if (train_cmd->count("--model.dec_layers")) hp.dec_layers = flags.dec_layers;
            if (train_cmd->count("--model.dim")) hp.dim = flags.dim;
            if (train_cmd->count("--model.heads")) hp.heads = flags.heads;
            if (train_cmd->count("--model.ffn_factor")) hp.ffn_factor = flags.ffn_factor;
            if (train_cmd->count("--model.decomp_kernel")) hp.decomp_kernel = flags.decomp_kernel;
            if (train_cmd->count("--model.label_len")) hp.label_len = flags.label_len;
            if (train_cmd->count("--model.sparsity_factor"))
                hp.sparsity_factor = flags.sparsity_factor;
            if (train_cmd->count("--model.top_k_delays")) hp.top_k_delays = flags.top_k_delays;
            if (train_cmd->count("--model.paper_lstm_activations"))
                hp.paper_lstm_activations = flags.paper_lstm_activations;
            hp.kind = kind;

            WindowSet train_ws = windows_for(data, data.splits.train_begin, data.splits.train_end);
            WindowSet val_ws = windows_for(data, data.splits.val_begin, data.splits.val_end);
            WindowSet test_ws = windows_for(data, data.splits.test_begin, data.splits.test_end);
            train_cfg.seed = seed;
            TrainResult res = train(hp, train_ws, val_ws, data.scaler, train_cfg);
            EvalMetrics metrics = evaluate_checkpoint(res.checkpoint, test_ws);

            const std::string ckpt_path =
                (fs::path(out_dir) / (train_model + ".ckpt")).string();
            save_checkpoint(res.checkpoint, ckpt_path);
            save_train_report_csv(
                res.report, (fs::path(out_dir) / (train_model + "_report.csv")).string());
            std::cout << train_model << ": best epoch " << res.report.best_epoch
                      << ", test mse " << metrics.mse << ", nmse " << metrics.nmse
                      << ", accuracy " << metrics.accuracy
                      << (res.report.diverged ? " (diverged early)" : "") << "\n";
            std::cout << "wrote " << ckpt_path << "\n";
        }

        if (*roll) {
            TimeSeriesDataset ds = load_dataset(roll_dataset);
            resolve_env_columns(roll_env, ds);
            std::shared_ptr<const ForecastModel> model;
            ScalerStats scaler;
            if (roll_oracle) {
                scaler = fit_scaler(ds.values(), ds.feature_names());
                model = std::make_shared<OraclePlantModel>(PlantParams::defaults(),
                                                           DisturbanceProfile{}, scaler,
                                                           roll_p > 0 ? std::min(240, roll_p)
                                                                      : 240);
            } else {
                if (roll_ckpt.empty())
                    throw std::runtime_error("rollout: pass --checkpoint or --oracle");
                Checkpoint ckpt = load_checkpoint(roll_ckpt);
                scaler = ckpt.scaler;
                model = std::shared_ptr<const ForecastModel>(model_from_checkpoint(ckpt));
            }
            roll_env.start_index = roll_p >= 0 ? roll_p : model->window_len();
            roll_env.episode_len = roll_M;
            RolloutTrace trace = replay_rollout(model, scaler, ds, roll_env);
            const std::string path = (fs::path(out_dir) / "trace.csv").string();
            save_trace_csv(trace, path);
            double total = 0.0;
            std::vector<double> rewards;
            for (const auto& r : trace.records) rewards.push_back(r.reward);
            total = cumulative_reward(rewards, roll_env.gamma);
            std::cout << "rollout: " << trace.records.size() << " steps, discounted return "
                      << total << (trace.diverged ? " (diverged)" : "") << "\n";
            std::cout << "wrote " << path << "\n";
        }

        if (*rep) {
            TimeSeriesDataset ds = load_dataset(rep_dataset);
            resolve_env_columns(rep_env, ds);
            std::vector<EvalEntry> entries;
            int l_hint = rep_l;
            for (const auto& path : rep_ckpts) {
                Checkpoint ckpt = load_checkpoint(path);
                l_hint = ckpt.l;
                entries.push_back({to_string(ckpt.hp.kind),
                                   std::shared_ptr<const ForecastModel>(
                                       model_from_checkpoint(ckpt)),
                                   ckpt.scaler});
            }
            if (rep_oracle) {
                ScalerStats scaler = fit_scaler(ds.values(), ds.feature_names());
                entries.push_back({"oracle",
                                   std::make_shared<OraclePlantModel>(PlantParams::defaults(),
                                                                      DisturbanceProfile{},
                                                                      scaler, l_hint),
                                   scaler});
            }
            if (entries.empty())
                throw std::runtime_error("report: pass --checkpoints and/or --with-oracle");
            SequenceSuite suite = default_suite(ds.n_rows(), l_hint);
            auto curves = multi_sequence_eval(entries, ds, suite, rep_M, rep_env);
            auto files = render_report(curves, out_dir);
            for (const auto& row : curves)
                for (const auto& c : row) {
                    std::cout << c.model_label << " x " << c.sequence_label << ": ";
                    if (c.ok())
                        std::cout << "one-step " << c.one_step_mse << ", growth "
                                  << c.growth.ratio << ", final " << c.final_mse << "\n";
                    else
                        std::cout << "error: " << c.error << "\n";
                }
            std::cout << "wrote " << files.size() << " files under " << out_dir << "\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
