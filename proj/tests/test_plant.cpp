#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "psim/plant.hpp"

using namespace psim;

namespace {
PlantState random_admissible_state(Rng& rng) {
    PlantState s;
    s.phosphate = rng.uniform(0.0, 12.0);
    s.nitrate = rng.uniform(0.0, 15.0);
    s.ammonia = rng.uniform(0.0, 12.0);
    s.biomass_activity = rng.uniform(0.0, 1.0);
    s.temperature = rng.uniform(5.0, 25.0);
    return s;
}
}  // namespace

TEST_CASE("equilibrium state is a fixed point of the zero-disturbance map") {
    auto p = PlantParams::defaults();
    PlantState eq = solve_equilibrium(p, p.equilibrium_dosage);
    PlantState next = step_plant(eq, p.equilibrium_dosage, Disturbance{}, p);
    CHECK(std::abs(next.phosphate - eq.phosphate) <= 1e-12);
    CHECK(std::abs(next.nitrate - eq.nitrate) <= 1e-12);
    CHECK(std::abs(next.ammonia - eq.ammonia) <= 1e-12);
    CHECK(std::abs(next.biomass_activity - eq.biomass_activity) <= 1e-12);
    CHECK(std::abs(next.temperature - eq.temperature) <= 1e-12);
    // sane operating point
    CHECK(eq.phosphate > 0.0);
    CHECK(eq.biomass_activity > 0.0);
    CHECK(eq.biomass_activity < 1.0);
}

TEST_CASE("doubled dosage for one step lowers next-step phosphate") {
    auto p = PlantParams::defaults();
    PlantState eq = solve_equilibrium(p, p.equilibrium_dosage);
    PlantState base = step_plant(eq, p.equilibrium_dosage, Disturbance{}, p);
    PlantState dosed = step_plant(eq, 2.0 * p.equilibrium_dosage, Disturbance{}, p);
    CHECK(dosed.phosphate < base.phosphate);
}

TEST_CASE("influent phosphate disturbance raises the peak above baseline") {
    auto p = PlantParams::defaults();
    PlantState eq = solve_equilibrium(p, p.equilibrium_dosage);
    PlantState a = eq, b = eq;
    double peak_base = 0.0, peak_dist = 0.0;
    for (int k = 0; k < 40; ++k) {
        Disturbance d;
        if (k < 10) d.influent_phosphate = 2.0;
        a = step_plant(a, p.equilibrium_dosage, Disturbance{}, p);
        b = step_plant(b, p.equilibrium_dosage, d, p);
        peak_base = std::max(peak_base, a.phosphate);
        peak_dist = std::max(peak_dist, b.phosphate);
    }
    CHECK(peak_dist > peak_base);
}

TEST_CASE("one-step phosphate is non-increasing in dosage over the admissible box") {
    auto p = PlantParams::defaults();
    Rng rng(99);
    for (int i = 0; i < 200; ++i) {
        PlantState s = random_admissible_state(rng);
        double u1 = rng.uniform(p.u_min, p.u_max);
        double u2 = rng.uniform(p.u_min, p.u_max);
        if (u1 > u2) std::swap(u1, u2);
        PlantState lo = step_plant(s, u1, Disturbance{}, p);
        PlantState hi = step_plant(s, u2, Disturbance{}, p);
        CHECK(hi.phosphate <= lo.phosphate);
    }
}

TEST_CASE("step_plant rejects non-finite input") {
    auto p = PlantParams::defaults();
    PlantState s = solve_equilibrium(p, 2.0);
    CHECK_THROWS_AS(step_plant(s, std::nan(""), Disturbance{}, p), std::invalid_argument);
    s.phosphate = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(step_plant(s, 1.0, Disturbance{}, p), std::invalid_argument);
}

TEST_CASE("dose controller follows the clamped proportional law") {
    CHECK(dose_controller(0.6, 1.0, 2.0, 0.0, 10.0) == doctest::Approx(0.8));
    // zero error clamps to u_min
    CHECK(dose_controller(1.0, 1.0, 2.0, 0.5, 10.0) == doctest::Approx(0.5));
    CHECK(dose_controller(1.0, 1.0, 2.0, 0.0, 10.0) == doctest::Approx(0.0));
    // negative gain doses when the measurement exceeds the setpoint
    CHECK(dose_controller(1.5, 1.0, -2.0, 0.0, 10.0) == doctest::Approx(1.0));
    CHECK_THROWS_AS(dose_controller(std::nan(""), 1.0, 1.0, 0.0, 1.0), std::invalid_argument);
}

TEST_CASE("noise-free sensors reproduce the state exactly with good quality") {
    SensorModel sm;
    sm.noise_std = {0.0, 0.0, 0.0};
    SensorSimulator sim(sm, 42);
    std::vector<double> truth{1.5, 2.5, 3.5};
    auto r = sim.measure(truth, 0);
    for (int i = 0; i < 3; ++i) {
        CHECK(r.values[i] == truth[i]);
        CHECK(r.quality[i] == 0);
    }
}

TEST_CASE("forced hold-last failure freezes the first reading") {
    SensorModel sm;
    sm.noise_std = {0.0};
    sm.failure_probability = 1.0;
    sm.failure_mode = FailureMode::kHoldLast;
    SensorSimulator sim(sm, 1);
    auto r0 = sim.measure({5.0}, 0);
    CHECK(r0.quality[0] == 1);
    CHECK(r0.values[0] == 5.0);  // nothing older than the current truth
    auto r1 = sim.measure({9.0}, 1);
    CHECK(r1.quality[0] == 1);
    CHECK(r1.values[0] == 5.0);
    auto r2 = sim.measure({-3.0}, 2);
    CHECK(r2.values[0] == 5.0);
}

TEST_CASE("sensor noise std is recovered by a Monte Carlo estimate") {
    SensorModel sm;
    sm.noise_std = {0.1};
    SensorSimulator sim(sm, 7);
    const int n = 10000;
    double sum = 0.0, sum2 = 0.0;
    for (int i = 0; i < n; ++i) {
        double v = sim.measure({2.0}, i).values[0];
        sum += v;
        sum2 += v * v;
    }
    double mean = sum / n;
    double std = std::sqrt(sum2 / n - mean * mean);
    CHECK(std > 0.09);
    CHECK(std < 0.11);
}

TEST_CASE("generated dataset has the contracted shape and determinism") {
    auto p = PlantParams::defaults();
    DisturbanceProfile dist;
    SensorModel sensors;
    TimeSeriesDataset ds = generate_dataset(p, ControllerConfig{}, dist, sensors, 1000, 11);
    CHECK(ds.n_rows() == 1000);
    CHECK(ds.n_features() == 5);
    CHECK(ds.feature_names().back() == "dosage");
    TimeSeriesDataset ds2 = generate_dataset(p, ControllerConfig{}, dist, sensors, 1000, 11);
    CHECK(ds == ds2);
    sensors.noise_std = {0.01, 0.01, 0.01, 0.01};
    TimeSeriesDataset na = generate_dataset(p, ControllerConfig{}, dist, sensors, 1000, 11);
    TimeSeriesDataset nb = generate_dataset(p, ControllerConfig{}, dist, sensors, 1000, 12);
    CHECK_FALSE(na.values() == nb.values());
}

TEST_CASE("generated dataset round-trips through CSV byte-identically") {
    auto p = PlantParams::defaults();
    DisturbanceProfile dist;
    dist.noise_std_phosphate = 0.05;
    SensorModel sensors;
    sensors.noise_std = {0.005, 0.02, 0.02, 0.05};
    sensors.failure_probability = 0.01;
    TimeSeriesDataset ds = generate_dataset(p, ControllerConfig{}, dist, sensors, 500, 3);
    auto tmp = std::filesystem::temp_directory_path() / "psim_roundtrip.csv";
    save_dataset_csv(ds, tmp.string());
    TimeSeriesDataset back = load_dataset(tmp.string());
    CHECK(back == ds);
    std::filesystem::remove(tmp);
}

TEST_CASE("failure fraction stays inside the 99% binomial interval") {
    auto p = PlantParams::defaults();
    DisturbanceProfile dist;
    SensorModel sensors;
    sensors.failure_probability = 0.01;
    const int n = 25000;  // 4 measured channels -> 100k samples
    TimeSeriesDataset ds = generate_dataset(p, ControllerConfig{}, dist, sensors, n, 5);
    double bad = 0.0;
    long total = 0;
    for (int r = 0; r < ds.n_rows(); ++r)
        for (int c = 0; c < ds.n_features() - 1; ++c) {  // dosage log is always good
            bad += ds.quality()(r, c);
            ++total;
        }
    double frac = bad / static_cast<double>(total);
    double sigma = std::sqrt(0.01 * 0.99 / static_cast<double>(total));
    CHECK(frac > 0.01 - 2.576 * sigma);
    CHECK(frac < 0.01 + 2.576 * sigma);
}

TEST_CASE("concentrations stay non-negative over long runs with heavy disturbances") {
    auto p = PlantParams::defaults();
    DisturbanceProfile dist;
    dist.noise_std_phosphate = 0.5;
    dist.noise_std_nitrate = 0.5;
    dist.noise_std_ammonia = 0.5;
    dist.schedule.push_back({10000, 5000, "influent_phosphate", -6.0});
    dist.schedule.push_back({40000, 5000, "influent_ammonia", -5.0});
    SensorModel sensors;
    TimeSeriesDataset ds = generate_dataset(p, ControllerConfig{}, dist, sensors, 100000, 21);
    int pcol = ds.feature_index("phosphate");
    int ncol = ds.feature_index("nitrate");
    int acol = ds.feature_index("ammonia");
    for (int r = 0; r < ds.n_rows(); ++r) {
        CHECK(ds.values()(r, pcol) >= 0.0);
        CHECK(ds.values()(r, ncol) >= 0.0);
        CHECK(ds.values()(r, acol) >= 0.0);
    }
}

TEST_CASE("closed-loop regulation settles near the setpoint") {
    // Stronger gain than the dataset default: documented settling horizon of
    // 1500 steps to within +-10% of the setpoint, no disturbances.
    auto p = PlantParams::defaults();
    p.diurnal_amp_phosphate = 0.0;
    p.diurnal_amp_nitrate = 0.0;
    p.diurnal_amp_ammonia = 0.0;
    p.diurnal_amp_temperature = 0.0;
    ControllerConfig ctl;
    ctl.gain = -30.0;
    ctl.setpoint = 1.2;
    DisturbanceProfile dist;
    SensorModel sensors;
    TimeSeriesDataset ds = generate_dataset(p, ctl, dist, sensors, 2500, 1);
    int pcol = ds.feature_index("phosphate");
    for (int r = 1500; r < ds.n_rows(); ++r) {
        CHECK(ds.values()(r, pcol) == doctest::Approx(ctl.setpoint).epsilon(0.10));
    }
}

TEST_CASE("invalid configurations are rejected before simulation") {
    auto p = PlantParams::defaults();
    p.tau_phosphate = 0.0;
    CHECK_THROWS_AS(
        generate_dataset(p, ControllerConfig{}, DisturbanceProfile{}, SensorModel{}, 10, 1),
        std::invalid_argument);
    auto q = PlantParams::defaults();
    CHECK_THROWS_AS(
        generate_dataset(q, ControllerConfig{}, DisturbanceProfile{}, SensorModel{}, 0, 1),
        std::invalid_argument);
    DisturbanceProfile overlap;
    overlap.schedule.push_back({0, 10, "influent_phosphate", 1.0});
    overlap.schedule.push_back({5, 10, "influent_phosphate", 1.0});
    CHECK_THROWS_AS(overlap.validate(), std::invalid_argument);
    SensorModel bad;
    bad.failure_probability = 1.5;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}
