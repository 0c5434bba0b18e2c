#include "mheq/plant.hpp"

#include <cmath>
#include <stdexcept>

namespace mheq::plant {

void PlantParams::validate() const {
  if (!(m1 > 0.0) || !(m2 > 0.0) || !(k > 0.0) || !(b > 0.0) || !(dt > 0.0)) {
    throw std::invalid_argument("plant: m1, m2, k, b, dt must be positive");
  }
  if (sigma_zeta < 0.0 || sigma_eta < 0.0) {
    throw std::invalid_argument("plant: noise std devs must be non-negative");
  }
  if (rk4_substeps < 1) {
    throw std::invalid_argument("plant: rk4_substeps must be >= 1");
  }
}

std::pair<Eigen::Matrix4d, Eigen::Vector4d> state_space(const PlantParams& p) {
  Eigen::Matrix4d A;
  A << 0, 0, 1, 0,                                  //
      0, 0, 0, 1,                                   //
      -p.k / p.m1, p.k / p.m1, -p.b / p.m1, p.b / p.m1,  //
      p.k / p.m2, -p.k / p.m2, p.b / p.m2, -p.b / p.m2;
  Eigen::Vector4d B(0.0, 0.0, 1.0 / p.m1, 0.0);
  return {A, B};
}

Eigen::Vector4d continuous_dynamics(const PlantParams& p, const PlantState& x,
                                    double u) {
  const auto [A, B] = state_space(p);
  return A * x + B * u;
}

PlantState step_plant(const PlantParams& p, const PlantState& x, double u,
                      GaussianStream& noise) {
  const auto [A, B] = state_space(p);
  const Eigen::Vector4d Bu = B * u;
  const double h = p.dt / p.rk4_substeps;

  PlantState s = x;
  for (int i = 0; i < p.rk4_substeps; ++i) {
    const Eigen::Vector4d k1 = A * s + Bu;
    const Eigen::Vector4d k2 = A * (s + 0.5 * h * k1) + Bu;
    const Eigen::Vector4d k3 = A * (s + 0.5 * h * k2) + Bu;
    const Eigen::Vector4d k4 = A * (s + h * k3) + Bu;
    s += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  s(3) += noise.sample(p.sigma_zeta);
  return s;
}

double measure(const PlantParams& p, const PlantState& x,
               GaussianStream& noise) {
  return x(1) + noise.sample(p.sigma_eta);
}

}  // namespace mheq::plant
