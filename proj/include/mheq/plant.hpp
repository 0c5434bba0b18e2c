#pragma once

#include <Eigen/Core>
#include <utility>

#include "mheq/rng.hpp"

namespace mheq::plant {

// True plant state: [x1, x2, x3, x4] = positions of mass 1 and 2, then their
// velocities. Only this module ever sees the full state.
using PlantState = Eigen::Vector4d;

struct PlantParams {
  double m1 = 0.8;   // kg
  double m2 = 0.5;   // kg
  double k = 25.0;   // N/m
  double b = 3.0;    // N s/m
  double dt = 0.1;   // s
  double sigma_zeta = 0.02;  // process noise std dev, enters on x4
  double sigma_eta = 0.05;   // measurement noise std dev on y
  // RK4 substeps per sampling period. The internal spring mode has |lambda|*dt
  // close to 1 at the nominal parameters, so a single RK4 step is far too
  // coarse; 20 substeps keep the per-step defect below 1e-7.
  int rk4_substeps = 20;

  void validate() const;  // throws std::invalid_argument
};

// Continuous-time state-space matrices (A, B) of the two-mass-spring-damper.
std::pair<Eigen::Matrix4d, Eigen::Vector4d> state_space(const PlantParams& p);

// dx/dt = A x + B u.
Eigen::Vector4d continuous_dynamics(const PlantParams& p, const PlantState& x,
                                    double u);

// Integrates one sampling period with fixed-step RK4, then adds process noise
// on the velocity of mass 2.
PlantState step_plant(const PlantParams& p, const PlantState& x, double u,
                      GaussianStream& noise);

// y = x2 + eta.
double measure(const PlantParams& p, const PlantState& x,
               GaussianStream& noise);

}  // namespace mheq::plant
