#pragma once

#include <Eigen/Dense>
#include <stdexcept>

namespace mheq::model {

// Two-state prediction template shared by the estimator and the controller:
// a double integrator in the measured position, driven through the total
// mass, discretized exactly at the sampling period. Learned model
// corrections are added on top of this template.
struct ModelTemplate {
  Eigen::Matrix2d A0;
  Eigen::Vector2d B0;
  double dt = 0.1;
};

inline ModelTemplate make_template(double dt, double total_mass) {
  if (!(dt > 0.0)) {
    throw std::invalid_argument("model: dt must be positive");
  }
  if (!(total_mass > 0.0)) {
    throw std::invalid_argument("model: total mass must be positive");
  }
  ModelTemplate t;
  t.A0 << 1.0, dt, 0.0, 1.0;
  t.B0 << dt * dt / (2.0 * total_mass), dt / total_mass;
  t.dt = dt;
  return t;
}

// Template plus additive corrections: the model both optimizers predict with.
struct ControlModel {
  Eigen::Matrix2d A;
  Eigen::Vector2d B;
};

inline ControlModel apply_bias(const ModelTemplate& t,
                               const Eigen::Matrix2d& a_bias,
                               const Eigen::Vector2d& b_bias) {
  return ControlModel{t.A0 + a_bias, t.B0 + b_bias};
}

}  // namespace mheq::model
