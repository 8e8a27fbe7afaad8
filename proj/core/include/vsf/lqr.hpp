#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "vsf/scenario.hpp"

namespace vsf {

struct BicycleState {
  double x{0.0};
  double y{0.0};
  double heading{0.0};
  double speed{0.0};
};

struct Control {
  double accel{0.0};
  double steer{0.0};
};

using StateMatrix = Eigen::Matrix4d;
using InputMatrix = Eigen::Matrix<double, 4, 2>;
using GainMatrix = Eigen::Matrix<double, 2, 4>;
using StateVector = Eigen::Vector4d;

struct LqrConfig {
  double wheelbase{2.7};
  double dt{kDefaultDt};
  StateMatrix Q{Eigen::Vector4d(1.0, 1.0, 0.5, 0.5).asDiagonal()};
  Eigen::Matrix2d R{Eigen::Vector2d(0.1, 0.1).asDiagonal()};
  double steer_limit{0.6};
  double accel_min{-6.0};
  double accel_max{4.0};
  double feasible_max_pos_err{1.0};

  /// tan(steer_limit) / wheelbase
  [[nodiscard]] double max_curvature() const;
};

void validate(const LqrConfig& cfg);

/// Forward-Euler kinematic bicycle, state (x, y, heading, speed), control (accel, steer).
BicycleState bicycle_step(const BicycleState& s, const Control& u, const LqrConfig& cfg);

struct Linearization {
  StateMatrix A;
  InputMatrix B;
};

/// Analytic Jacobians of bicycle_step about (ref_state, ref_control).
Linearization linearize(const BicycleState& ref_state, const Control& ref_control, const LqrConfig& cfg);

struct RiccatiSolution {
  std::vector<GainMatrix> gains;        // K_0 .. K_{N-1}
  std::vector<StateMatrix> cost_to_go;  // P_0 .. P_N
};

/// Finite-horizon backward recursion with P_N = Q. Throws NumericalFailure on non-finite input.
RiccatiSolution solve_riccati(std::span<const StateMatrix> A_seq, std::span<const InputMatrix> B_seq,
                              const StateMatrix& Q, const Eigen::Matrix2d& R);

/// Accel from speed differences, steer from heading increments: atan(L * dtheta / (v * dt)).
std::vector<Control> reference_controls(const Trajectory& candidate, const LqrConfig& cfg);

struct TrackingDiagnostics {
  double max_pos_err{0.0};
  bool feasible{true};
  double tracking_cost{0.0};  // sum e'Qe + du'R du
};

struct TrackingResult {
  Trajectory simulated;
  std::vector<Control> controls;
  TrackingDiagnostics diagnostics;
};

/// Closed-loop LQR rollout with clamped controls. Throws HorizonMismatch when dt differs.
TrackingResult track_trajectory(const Trajectory& candidate, const BicycleState& init, const LqrConfig& cfg = {});

/// Same rollout with the feedback term removed.
TrackingResult open_loop_rollout(const Trajectory& candidate, const BicycleState& init, const LqrConfig& cfg = {});

BicycleState to_bicycle(const TrajectorySample& s);

}  // namespace vsf
