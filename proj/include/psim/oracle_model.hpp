#pragma once

#include "psim/forecast.hpp"
#include "psim/plant.hpp"
#include "psim/preprocess.hpp"

namespace psim {

/**
 * The exact synthetic-plant dynamics wrapped behind the forecaster contract.
 * Reads the full plant state and the applied dosage from the newest window
 * row, advances the true map one step, and returns the next row. Requires a
 * dataset generated with the biomass channel measured (the state must be
 * fully observable) and the absolute target row in the PredictContext (the
 * diurnal forcing is time-varying).
 */
class OraclePlantModel : public ForecastModel {
public:
    OraclePlantModel(PlantParams params, DisturbanceProfile schedule, ScalerStats scaler, int l);

    Matrix predict(const Matrix& window, const PredictContext& ctx) const override;

protected:
    ad::NodeId forward_graph(ad::Tape&, ad::NodeId, const std::vector<ad::NodeId>&,
                             Rng*) const override {
        throw std::logic_error("oracle model: no trainable graph");
    }

private:
    PlantParams params_;
    DisturbanceProfile schedule_;
    ScalerStats scaler_;
    int col_phosphate_, col_nitrate_, col_ammonia_, col_biomass_, col_temperature_, col_dosage_;
};

}  // namespace psim
