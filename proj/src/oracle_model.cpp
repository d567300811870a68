#include "psim/oracle_model.hpp"

namespace psim {

namespace {

int require_feature(const ScalerStats& scaler, const std::string& name) {
    for (size_t i = 0; i < scaler.features.size(); ++i)
        if (scaler.features[i] == name) return static_cast<int>(i);
    throw std::invalid_argument("oracle model: schema is missing feature '" + name + "'");
}

HyperParams oracle_hp() {
    HyperParams hp;
    hp.kind = ModelKind::kDLinear;  // placeholder kind; never trained
    return hp;
}

}  // namespace

OraclePlantModel::OraclePlantModel(PlantParams params, DisturbanceProfile schedule,
                                   ScalerStats scaler, int l)
    : ForecastModel(ModelKind::kDLinear, oracle_hp(), l,
                    static_cast<int>(scaler.features.size())),
      params_(std::move(params)),
      schedule_(std::move(schedule)),
      scaler_(std::move(scaler)) {
    params_.validate();
    col_phosphate_ = require_feature(scaler_, "phosphate");
    col_nitrate_ = require_feature(scaler_, "nitrate");
    col_ammonia_ = require_feature(scaler_, "ammonia");
    col_biomass_ = require_feature(scaler_, "biomass");
    col_temperature_ = require_feature(scaler_, "temperature");
    col_dosage_ = require_feature(scaler_, "dosage");
}

Matrix OraclePlantModel::predict(const Matrix& window, const PredictContext& ctx) const {
    if (window.rows() != l_ || window.cols() != n_)
        throw std::invalid_argument("oracle model: window shape mismatch");
    if (ctx.absolute_target_row < 0)
        throw std::invalid_argument(
            "oracle model: needs the absolute target row (time-varying forcing)");
    Matrix raw = invert_scaler(scaler_, window.slice_rows(l_ - 1, l_));
    PlantState s;
    s.phosphate = raw(0, col_phosphate_);
    s.nitrate = raw(0, col_nitrate_);
    s.ammonia = raw(0, col_ammonia_);
    s.biomass_activity = raw(0, col_biomass_);
    s.temperature = raw(0, col_temperature_);
    const double u = raw(0, col_dosage_);

    const int k = static_cast<int>(ctx.absolute_target_row) - 1;  // step that produced the row
    Disturbance d = schedule_.scheduled_at(k);
    const Disturbance diurnal = diurnal_disturbance(params_, k);
    d.influent_phosphate += diurnal.influent_phosphate;
    d.influent_nitrate += diurnal.influent_nitrate;
    d.influent_ammonia += diurnal.influent_ammonia;
    d.temperature += diurnal.temperature;

    PlantState next = step_plant(s, u, d, params_);
    Matrix out(1, n_);
    out(0, col_phosphate_) = next.phosphate;
    out(0, col_nitrate_) = next.nitrate;
    out(0, col_ammonia_) = next.ammonia;
    out(0, col_biomass_) = next.biomass_activity;
    out(0, col_temperature_) = next.temperature;
    out(0, col_dosage_) = u;  // replaced by the next injected action
    return apply_scaler(scaler_, out);
}

}  // namespace psim
