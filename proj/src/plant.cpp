#include "psim/plant.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace psim {

bool PlantState::all_finite() const {
    return std::isfinite(phosphate) && std::isfinite(nitrate) && std::isfinite(ammonia) &&
           std::isfinite(biomass_activity) && std::isfinite(temperature);
}

void PlantParams::validate() const {
    if (sampling_minutes <= 0) throw std::invalid_argument("plant: sampling interval must be > 0");
    for (double tau : {tau_phosphate, tau_nitrate, tau_ammonia, tau_biomass, tau_temperature})
        if (tau <= 0) throw std::invalid_argument("plant: time constants must be > 0");
    if (u_min > u_max) throw std::invalid_argument("plant: u_min must be <= u_max");
    if (half_sat <= 0 || biomass_half_sat <= 0)
        throw std::invalid_argument("plant: half-saturation constants must be > 0");
    if (diurnal_period_minutes <= 0)
        throw std::invalid_argument("plant: diurnal period must be > 0");
}

void DisturbanceProfile::validate() const {
    for (const auto& e : schedule) {
        if (e.duration < 0) throw std::invalid_argument("disturbance: duration must be >= 0");
        if (e.target != "influent_phosphate" && e.target != "influent_nitrate" &&
            e.target != "influent_ammonia" && e.target != "temperature")
            throw std::invalid_argument("disturbance: unknown target '" + e.target + "'");
    }
    // entries must not overlap per target
    std::map<std::string, std::vector<std::pair<int, int>>> spans;
    for (const auto& e : schedule) spans[e.target].push_back({e.start, e.start + e.duration});
    for (auto& [target, v] : spans) {
        std::sort(v.begin(), v.end());
        for (size_t i = 1; i < v.size(); ++i)
            if (v[i].first < v[i - 1].second)
                throw std::invalid_argument("disturbance: overlapping schedule entries for " +
                                            target);
    }
    for (double s : {noise_std_phosphate, noise_std_nitrate, noise_std_ammonia,
                     noise_std_temperature})
        if (s < 0) throw std::invalid_argument("disturbance: noise std must be >= 0");
}

Disturbance DisturbanceProfile::scheduled_at(int step) const {
    Disturbance d;
    for (const auto& e : schedule) {
        if (step < e.start || step >= e.start + e.duration) continue;
        if (e.target == "influent_phosphate") d.influent_phosphate += e.magnitude;
        else if (e.target == "influent_nitrate") d.influent_nitrate += e.magnitude;
        else if (e.target == "influent_ammonia") d.influent_ammonia += e.magnitude;
        else d.temperature += e.magnitude;
    }
    return d;
}

void SensorModel::validate() const {
    if (failure_probability < 0 || failure_probability > 1)
        throw std::invalid_argument("sensors: failure probability must be in [0,1]");
    for (double s : noise_std)
        if (s < 0) throw std::invalid_argument("sensors: noise std must be >= 0");
    for (const auto& b : bursts) {
        if (b.duration < 0) throw std::invalid_argument("sensors: burst duration must be >= 0");
        if (b.probability < 0 || b.probability > 1)
            throw std::invalid_argument("sensors: burst probability must be in [0,1]");
    }
}

double SensorModel::failure_probability_at(int step) const {
    double p = failure_probability;
    for (const auto& b : bursts)
        if (step >= b.start && step < b.start + b.duration) p = std::max(p, b.probability);
    return p;
}

SensorSimulator::SensorSimulator(SensorModel model, uint64_t seed_mix)
    : model_(std::move(model)), rng_(model_.seed ^ seed_mix) {
    model_.validate();
}

SensorReading SensorSimulator::measure(const std::vector<double>& truth, int step) {
    SensorReading r;
    r.values.resize(truth.size());
    r.quality.assign(truth.size(), 0);
    if (last_reading_.empty()) last_reading_ = truth;
    const double pfail = model_.failure_probability_at(step);
    for (size_t i = 0; i < truth.size(); ++i) {
        double std = i < model_.noise_std.size() ? model_.noise_std[i] : 0.0;
        double reading = truth[i] + (std > 0.0 ? rng_.normal(0.0, std) : 0.0);
        bool failed = pfail > 0.0 && rng_.uniform01() < pfail;
        if (!failed) {
            r.values[i] = reading;
            last_reading_[i] = reading;
        } else {
            r.quality[i] = 1;
            switch (model_.failure_mode) {
                case FailureMode::kHoldLast: r.values[i] = last_reading_[i]; break;
                case FailureMode::kDropout: r.values[i] = std::numeric_limits<double>::quiet_NaN(); break;
                case FailureMode::kSpike: r.values[i] = reading * 10.0; break;
            }
        }
    }
    return r;
}

namespace {
double sat(double x, double k) { return x / (x + k); }
}  // namespace

PlantState step_plant(const PlantState& state, double dosage, const Disturbance& d,
                      const PlantParams& p) {
    if (!state.all_finite() || !std::isfinite(dosage) || !std::isfinite(d.influent_phosphate) ||
        !std::isfinite(d.influent_nitrate) || !std::isfinite(d.influent_ammonia) ||
        !std::isfinite(d.temperature))
        throw std::invalid_argument("step_plant: non-finite input");
    const double dt = p.sampling_minutes;
    const double u = std::clamp(dosage, p.u_min, p.u_max);
    const double b = state.biomass_activity;

    PlantState next;
    next.phosphate = state.phosphate +
                     dt / p.tau_phosphate * (p.influent_phosphate + d.influent_phosphate -
                                             state.phosphate) -
                     dt * (p.removal_gain * u + p.bio_uptake_rate * b) *
                         sat(state.phosphate, p.half_sat);
    const double nitrified = dt * p.nitrification_rate * b * sat(state.ammonia, p.half_sat);
    next.nitrate = state.nitrate +
                   dt / p.tau_nitrate * (p.influent_nitrate + d.influent_nitrate - state.nitrate) +
                   nitrified - dt * p.denitrification_rate * b * sat(state.nitrate, p.half_sat);
    next.ammonia = state.ammonia +
                   dt / p.tau_ammonia * (p.influent_ammonia + d.influent_ammonia - state.ammonia) -
                   nitrified;
    const double nutrients = state.ammonia + state.nitrate;
    const double b_target = nutrients / (nutrients + p.biomass_half_sat);
    next.biomass_activity = b + dt / p.tau_biomass * (b_target - b);
    next.temperature = state.temperature +
                       dt / p.tau_temperature *
                           (p.temperature_mean + d.temperature - state.temperature);

    next.phosphate = std::max(0.0, next.phosphate);
    next.nitrate = std::max(0.0, next.nitrate);
    next.ammonia = std::max(0.0, next.ammonia);
    next.biomass_activity = std::clamp(next.biomass_activity, 0.0, 1.0);
    return next;
}

double dose_controller(double y_m, double y_d, double gain, double u_min, double u_max) {
    if (u_min > u_max) throw std::invalid_argument("dose_controller: u_min > u_max");
    if (!std::isfinite(y_m))
        throw std::invalid_argument("dose_controller: non-finite measurement");
    return std::clamp(gain * (y_d - y_m), u_min, u_max);
}

PlantState solve_equilibrium(const PlantParams& p, double dosage) {
    p.validate();
    PlantState s;
    s.phosphate = p.influent_phosphate;
    s.nitrate = p.influent_nitrate;
    s.ammonia = p.influent_ammonia;
    s.biomass_activity = 0.5;
    s.temperature = p.temperature_mean;
    Disturbance zero;
    for (int i = 0; i < 200000; ++i) {
        PlantState next = step_plant(s, dosage, zero, p);
        if (next.phosphate == s.phosphate && next.nitrate == s.nitrate &&
            next.ammonia == s.ammonia && next.biomass_activity == s.biomass_activity &&
            next.temperature == s.temperature)
            return next;
        s = next;
    }
    return s;
}

Disturbance diurnal_disturbance(const PlantParams& p, int step) {
    const double t_min = step * p.sampling_minutes;
    const double omega = 2.0 * M_PI / p.diurnal_period_minutes;
    Disturbance d;
    d.influent_phosphate = p.diurnal_amp_phosphate * std::sin(omega * t_min + p.diurnal_phase_phosphate);
    d.influent_nitrate = p.diurnal_amp_nitrate * std::sin(omega * t_min + p.diurnal_phase_nitrate);
    d.influent_ammonia = p.diurnal_amp_ammonia * std::sin(omega * t_min + p.diurnal_phase_ammonia);
    d.temperature = p.diurnal_amp_temperature * std::sin(omega * t_min + p.diurnal_phase_temperature);
    return d;
}

std::vector<std::string> plant_feature_names(const PlantParams& params) {
    std::vector<std::string> names{"phosphate", "nitrate", "ammonia"};
    if (params.measure_biomass) names.push_back("biomass");
    names.push_back("temperature");
    names.push_back("dosage");
    return names;
}

TimeSeriesDataset generate_dataset(const PlantParams& params, const ControllerConfig& controller,
                                   const DisturbanceProfile& disturbances,
                                   const SensorModel& sensors, int duration, uint64_t seed,
                                   int64_t start_epoch_seconds) {
    params.validate();
    disturbances.validate();
    sensors.validate();
    if (duration < 1) throw std::invalid_argument("generate_dataset: duration must be >= 1");

    Rng seeder(seed);
    Rng noise_rng = seeder.fork(disturbances.seed ^ 0x1);
    SensorSimulator sensor_sim(sensors, seeder.fork(0x2).next());

    const auto names = plant_feature_names(params);
    const int m = static_cast<int>(names.size());
    const int n_measured = m - 1;  // dosage column is the actuator log
    Matrix values(duration, m), quality(duration, m, 0.0);
    std::vector<int64_t> timestamps(duration);

    PlantState state = solve_equilibrium(params, params.equilibrium_dosage);
    double y_ctrl = controller.setpoint;  // last finite phosphate reading
    bool have_reading = false;

    const int64_t step_seconds = static_cast<int64_t>(params.sampling_minutes * 60.0);
    for (int k = 0; k < duration; ++k) {
        timestamps[k] = start_epoch_seconds + static_cast<int64_t>(k) * step_seconds;

        Disturbance d = disturbances.scheduled_at(k);
        const Disturbance diurnal = diurnal_disturbance(params, k);
        d.influent_phosphate += diurnal.influent_phosphate;
        d.influent_nitrate += diurnal.influent_nitrate;
        d.influent_ammonia += diurnal.influent_ammonia;
        d.temperature += diurnal.temperature;
        if (disturbances.noise_std_phosphate > 0)
            d.influent_phosphate += noise_rng.normal(0.0, disturbances.noise_std_phosphate);
        if (disturbances.noise_std_nitrate > 0)
            d.influent_nitrate += noise_rng.normal(0.0, disturbances.noise_std_nitrate);
        if (disturbances.noise_std_ammonia > 0)
            d.influent_ammonia += noise_rng.normal(0.0, disturbances.noise_std_ammonia);
        if (disturbances.noise_std_temperature > 0)
            d.temperature += noise_rng.normal(0.0, disturbances.noise_std_temperature);

        std::vector<double> truth{state.phosphate, state.nitrate, state.ammonia};
        if (params.measure_biomass) truth.push_back(state.biomass_activity);
        truth.push_back(state.temperature);
        SensorReading reading = sensor_sim.measure(truth, k);

        if (std::isfinite(reading.values[0])) {
            y_ctrl = reading.values[0];
            have_reading = true;
        }
        const double u = have_reading
                             ? dose_controller(y_ctrl, controller.setpoint, controller.gain,
                                               params.u_min, params.u_max)
                             : std::clamp(0.0, params.u_min, params.u_max);

        for (int c = 0; c < n_measured; ++c) {
            values(k, c) = reading.values[c];
            quality(k, c) = reading.quality[c];
        }
        values(k, m - 1) = u;

        state = step_plant(state, u, d, params);
    }

    std::map<std::string, std::string> meta{
        {"source", "psim-synthetic-plant"},
        {"sampling_minutes", std::to_string(params.sampling_minutes)},
        {"seed", std::to_string(seed)},
    };
    return TimeSeriesDataset(std::move(timestamps), names, std::move(values), std::move(quality),
                             std::move(meta));
}

ScenarioConfig default_scenario(int duration, const PlantParams& params) {
    ScenarioConfig sc;
    sc.disturbances.noise_std_phosphate = 0.05;
    sc.disturbances.noise_std_nitrate = 0.05;
    sc.disturbances.noise_std_ammonia = 0.05;
    sc.disturbances.noise_std_temperature = 0.05;
    auto at = [&](double frac) { return static_cast<int>(duration * frac); };
    sc.disturbances.schedule.push_back(
        {at(0.86), at(0.92) - at(0.86), "influent_phosphate", 1.5});
    sc.disturbances.schedule.push_back(
        {at(0.905), at(0.92) - at(0.905), "influent_ammonia", 2.5});

    sc.sensors.noise_std = {0.005, 0.02, 0.02};
    if (params.measure_biomass) sc.sensors.noise_std.push_back(0.002);
    sc.sensors.noise_std.push_back(0.05);
    sc.sensors.failure_probability = 0.002;
    sc.sensors.failure_mode = FailureMode::kHoldLast;
    sc.sensors.bursts.push_back({at(0.945), at(0.951) - at(0.945), 0.35});
    return sc;
}

}  // namespace psim
