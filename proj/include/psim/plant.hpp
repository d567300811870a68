#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "psim/dataset.hpp"
#include "psim/matrix.hpp"

namespace psim {

/**
 * Synthetic phosphorus-removal plant: a nonlinear first-order tank model per
 * species with a feedback dosing controller. It generates closed-loop
 * datasets in the standard CSV format so the whole pipeline can be exercised
 * against known dynamics.
 *
 * Discrete dynamics, dt in minutes, sat(x) = x / (x + half_sat):
 *   P'  = P + (dt/tau_P) (inP + dP - P) - dt (k_dose u + k_bio b) sat(P)
 *   N'  = N + (dt/tau_N) (inN + dN - N) + dt k_nitr b sat(A) - dt k_denit b sat(N)
 *   A'  = A + (dt/tau_A) (inA + dA - A) - dt k_nitr b sat(A)
 *   b'  = b + (dt/tau_b) (b_tgt - b),  b_tgt = (A + N) / (A + N + K_b)
 *   T'  = T + (dt/tau_T) (Tmean + dT - T)
 * Concentrations are clamped at 0 and b at [0,1]. dP..dT come from the
 * per-step disturbance vector (diurnal + scheduled events + process noise).
 */
struct PlantState {
    double phosphate = 0.0;         // mg/L
    double nitrate = 0.0;           // mg/L
    double ammonia = 0.0;           // mg/L
    double biomass_activity = 0.0;  // dimensionless, [0,1]
    double temperature = 0.0;       // degC

    bool all_finite() const;
};

struct PlantParams {
    double sampling_minutes = 2.0;

    // influent mean levels per species
    double influent_phosphate = 6.0;
    double influent_nitrate = 7.0;
    double influent_ammonia = 5.0;
    double temperature_mean = 15.0;

    // diurnal forcing
    double diurnal_period_minutes = 1440.0;
    double diurnal_amp_phosphate = 1.5;
    double diurnal_amp_nitrate = 1.5;
    double diurnal_amp_ammonia = 1.2;
    double diurnal_amp_temperature = 4.0;
    double diurnal_phase_phosphate = 0.0;
    double diurnal_phase_nitrate = 0.4;
    double diurnal_phase_ammonia = 0.7;
    double diurnal_phase_temperature = 1.5707963267948966;

    // time constants (minutes)
    double tau_phosphate = 60.0;
    double tau_nitrate = 90.0;
    double tau_ammonia = 75.0;
    double tau_biomass = 180.0;
    double tau_temperature = 240.0;

    // removal kinetics
    double removal_gain = 0.05;       // per unit dosage (k_dose)
    double bio_uptake_rate = 0.08;    // k_bio
    double nitrification_rate = 0.02; // k_nitr
    double denitrification_rate = 0.03;
    double half_sat = 1.0;
    double biomass_half_sat = 6.0;

    // actuator bounds, m3/h
    double u_min = 0.0;
    double u_max = 10.0;

    double equilibrium_dosage = 2.0;
    bool measure_biomass = false;  // expose the biomass state as a sensor channel

    void validate() const;
    static PlantParams defaults() { return PlantParams{}; }
};

/// Per-step additive disturbance on the influent/ambient levels.
struct Disturbance {
    double influent_phosphate = 0.0;
    double influent_nitrate = 0.0;
    double influent_ammonia = 0.0;
    double temperature = 0.0;
};

struct DisturbanceEvent {
    int start = 0;
    int duration = 0;
    std::string target;  // influent_phosphate | influent_nitrate | influent_ammonia | temperature
    double magnitude = 0.0;
};

struct DisturbanceProfile {
    std::vector<DisturbanceEvent> schedule;
    double noise_std_phosphate = 0.0;
    double noise_std_nitrate = 0.0;
    double noise_std_ammonia = 0.0;
    double noise_std_temperature = 0.0;
    uint64_t seed = 0;

    void validate() const;
    /// Scheduled offsets at step k (no noise, no diurnal).
    Disturbance scheduled_at(int step) const;
};

enum class FailureMode { kHoldLast, kDropout, kSpike };

struct SensorBurst {
    int start = 0;
    int duration = 0;
    double probability = 1.0;
};

struct SensorModel {
    std::vector<double> noise_std;  // per measured feature; empty = all zero
    double failure_probability = 0.0;
    FailureMode failure_mode = FailureMode::kHoldLast;
    std::vector<SensorBurst> bursts;  // windows of elevated failure probability
    uint64_t seed = 0;

    void validate() const;
    double failure_probability_at(int step) const;
};

struct SensorReading {
    std::vector<double> values;
    std::vector<int> quality;  // 0 good, 1 bad
};

/// Stateful sensor bank: draws noise and failures deterministically from the
/// model's seed and remembers the last reading for hold-last failures.
class SensorSimulator {
public:
    SensorSimulator(SensorModel model, uint64_t seed_mix);
    SensorReading measure(const std::vector<double>& truth, int step);

private:
    SensorModel model_;
    Rng rng_;
    std::vector<double> last_reading_;
};

/// One step of the plant map; deterministic, disturbance supplied by caller.
PlantState step_plant(const PlantState& state, double dosage, const Disturbance& d,
                      const PlantParams& params);

/// Eq-style proportional feedback: u = clamp(K * (y_d - y_m), u_min, u_max).
double dose_controller(double y_m, double y_d, double gain, double u_min, double u_max);

/// Fixed point of the zero-disturbance map at constant dosage, by iteration.
PlantState solve_equilibrium(const PlantParams& params, double dosage);

/// Deterministic diurnal forcing at a given step index.
Disturbance diurnal_disturbance(const PlantParams& params, int step);

/// Measured feature names for a given parameterization (dosage column last).
std::vector<std::string> plant_feature_names(const PlantParams& params);

struct ControllerConfig {
    double gain = -6.0;     // negative: dosage rises when phosphate exceeds setpoint
    double setpoint = 1.2;  // mg/L
};

/**
 * Closed-loop dataset generation: controller in the loop acting on measured
 * phosphate (holding its last finite reading through sensor dropouts). Row k
 * logs the sensor readings of the state at step k and the dosage applied over
 * [k, k+1). Deterministic per seed.
 */
TimeSeriesDataset generate_dataset(const PlantParams& params, const ControllerConfig& controller,
                                   const DisturbanceProfile& disturbances,
                                   const SensorModel& sensors, int duration, uint64_t seed,
                                   int64_t start_epoch_seconds = 1622505600 /* 2021-06-01 */);

struct ScenarioConfig {
    DisturbanceProfile disturbances;
    SensorModel sensors;
};

/**
 * Default stochastic scenario: baseline process/sensor noise plus, inside the
 * final 15% of the run, an influent trend shift, an ammonia spike, and a
 * sensor-failure burst. Gives rollout evaluations four distinct regimes
 * (steady / trend shift / disturbance / sensor failure).
 */
ScenarioConfig default_scenario(int duration, const PlantParams& params);

}  // namespace psim
