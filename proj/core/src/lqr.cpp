#include "vsf/lqr.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "vsf/error.hpp"

namespace vsf {

namespace {

StateVector to_vector(const BicycleState& s) { return {s.x, s.y, s.heading, s.speed}; }

StateVector state_error(const BicycleState& s, const BicycleState& ref) {
  StateVector e = to_vector(s) - to_vector(ref);
  e(2) = normalize_angle(e(2));
  return e;
}

Control clamp_control(Control u, const LqrConfig& cfg) {
  return {std::clamp(u.accel, cfg.accel_min, cfg.accel_max), std::clamp(u.steer, -cfg.steer_limit, cfg.steer_limit)};
}

TrackingResult rollout(const Trajectory& candidate, const BicycleState& init, const LqrConfig& cfg, bool feedback) {
  validate(cfg);
  if (candidate.empty()) throw Error(ErrorCode::EmptyTrajectory, "cannot track an empty trajectory");
  if (std::abs(candidate.dt - cfg.dt) > 1e-9) {
    throw Error(ErrorCode::HorizonMismatch, "candidate dt differs from the controller dt");
  }
  const std::size_t n = candidate.size() - 1;
  const auto u_ref = reference_controls(candidate, cfg);
  std::vector<BicycleState> x_ref(candidate.size());
  for (std::size_t k = 0; k < candidate.size(); ++k) x_ref[k] = to_bicycle(candidate[k]);

  RiccatiSolution riccati;
  if (feedback && n > 0) {
    std::vector<StateMatrix> A(n);
    std::vector<InputMatrix> B(n);
    for (std::size_t k = 0; k < n; ++k) {
      const auto lin = linearize(x_ref[k], u_ref[k], cfg);
      A[k] = lin.A;
      B[k] = lin.B;
    }
    riccati = solve_riccati(A, B, cfg.Q, cfg.R);
  }

  TrackingResult out;
  out.simulated.dt = candidate.dt;
  out.simulated.samples.reserve(candidate.size());
  BicycleState x = init;
  x.heading = normalize_angle(x.heading);
  auto record = [&](std::size_t k) {
    const StateVector e = state_error(x, x_ref[k]);
    out.diagnostics.tracking_cost += e.dot(cfg.Q * e);
    out.diagnostics.max_pos_err = std::max(out.diagnostics.max_pos_err, std::hypot(e(0), e(1)));
    out.simulated.samples.push_back({candidate[k].t, {x.x, x.y, x.heading}, x.speed});
  };
  for (std::size_t k = 0; k < n; ++k) {
    record(k);
    Control u = u_ref[k];
    if (feedback) {
      const Eigen::Vector2d du = -riccati.gains[k] * state_error(x, x_ref[k]);
      u.accel += du(0);
      u.steer += du(1);
    }
    u = clamp_control(u, cfg);
    const Eigen::Vector2d du(u.accel - u_ref[k].accel, u.steer - u_ref[k].steer);
    out.diagnostics.tracking_cost += du.dot(cfg.R * du);
    // Speed cannot go negative; the applied accel is what the state actually saw.
    if (x.speed + u.accel * cfg.dt < 0.0) u.accel = -x.speed / cfg.dt;
    out.controls.push_back(u);
    x = bicycle_step(x, u, cfg);
    x.speed = std::max(x.speed, 0.0);  // v - (v/dt)*dt can round below zero
  }
  record(n);
  out.diagnostics.feasible = out.diagnostics.max_pos_err <= cfg.feasible_max_pos_err;
  return out;
}

}  // namespace

double LqrConfig::max_curvature() const { return std::tan(steer_limit) / wheelbase; }

void validate(const LqrConfig& cfg) {
  auto bad = [](const char* m) { throw Error(ErrorCode::InvalidConfig, m); };
  if (!(cfg.dt > 0.0)) bad("dt must be > 0");
  if (!(cfg.wheelbase > 0.0)) bad("wheelbase must be > 0");
  if (!(cfg.steer_limit > 0.0 && cfg.steer_limit < std::numbers::pi / 2)) bad("steer_limit must lie in (0, pi/2)");
  if (!(cfg.accel_min <= 0.0 && cfg.accel_max >= 0.0)) bad("accel limits must bracket 0");
  if (!cfg.Q.isApprox(cfg.Q.transpose())) bad("Q must be symmetric");
  if (!cfg.R.isApprox(cfg.R.transpose())) bad("R must be symmetric");
  Eigen::SelfAdjointEigenSolver<StateMatrix> qs(cfg.Q);
  if (qs.eigenvalues().minCoeff() < -1e-12) bad("Q must be positive semidefinite");
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> rs(cfg.R);
  if (rs.eigenvalues().minCoeff() <= 0.0) bad("R must be positive definite");
}

BicycleState bicycle_step(const BicycleState& s, const Control& u, const LqrConfig& cfg) {
  BicycleState n;
  n.x = s.x + s.speed * std::cos(s.heading) * cfg.dt;
  n.y = s.y + s.speed * std::sin(s.heading) * cfg.dt;
  n.heading = normalize_angle(s.heading + s.speed / cfg.wheelbase * std::tan(u.steer) * cfg.dt);
  n.speed = s.speed + u.accel * cfg.dt;
  return n;
}

Linearization linearize(const BicycleState& ref, const Control& u, const LqrConfig& cfg) {
  const double dt = cfg.dt;
  const double c = std::cos(ref.heading);
  const double s = std::sin(ref.heading);
  const double tan_d = std::tan(u.steer);
  const double sec2 = 1.0 + tan_d * tan_d;
  Linearization lin;
  lin.A = StateMatrix::Identity();
  lin.A(0, 2) = -ref.speed * s * dt;
  lin.A(0, 3) = c * dt;
  lin.A(1, 2) = ref.speed * c * dt;
  lin.A(1, 3) = s * dt;
  lin.A(2, 3) = tan_d / cfg.wheelbase * dt;
  lin.B = InputMatrix::Zero();
  lin.B(2, 1) = ref.speed / cfg.wheelbase * sec2 * dt;
  lin.B(3, 0) = dt;
  return lin;
}

RiccatiSolution solve_riccati(std::span<const StateMatrix> A_seq, std::span<const InputMatrix> B_seq,
                              const StateMatrix& Q, const Eigen::Matrix2d& R) {
  if (A_seq.size() != B_seq.size()) throw Error(ErrorCode::LengthMismatch, "A and B sequences differ in length");
  const std::size_t n = A_seq.size();
  RiccatiSolution sol;
  sol.gains.resize(n);
  sol.cost_to_go.resize(n + 1);
  sol.cost_to_go[n] = Q;
  for (std::size_t t = n; t-- > 0;) {
    const StateMatrix& A = A_seq[t];
    const InputMatrix& B = B_seq[t];
    const StateMatrix& P = sol.cost_to_go[t + 1];
    if (!A.allFinite() || !B.allFinite() || !P.allFinite()) {
      throw Error(ErrorCode::NumericalFailure, "non-finite value in Riccati recursion");
    }
    const Eigen::Matrix2d S = R + B.transpose() * P * B;
    Eigen::LLT<Eigen::Matrix2d> llt(S);
    if (llt.info() != Eigen::Success) throw Error(ErrorCode::NumericalFailure, "R + B'PB is not positive definite");
    const GainMatrix K = llt.solve(B.transpose() * P * A);
    StateMatrix next = Q + A.transpose() * P * (A - B * K);
    sol.cost_to_go[t] = 0.5 * (next + next.transpose());
    sol.gains[t] = K;
  }
  return sol;
}

std::vector<Control> reference_controls(const Trajectory& candidate, const LqrConfig& cfg) {
  std::vector<Control> out;
  const double dt = candidate.dt;
  for (std::size_t k = 0; k + 1 < candidate.size(); ++k) {
    const auto& a = candidate[k];
    const auto& b = candidate[k + 1];
    Control u;
    u.accel = (b.speed - a.speed) / dt;
    const double dtheta = normalize_angle(b.pose.heading - a.pose.heading);
    if (a.speed > 1e-3) u.steer = std::atan(cfg.wheelbase * dtheta / (a.speed * dt));
    out.push_back(u);
  }
  return out;
}

TrackingResult track_trajectory(const Trajectory& candidate, const BicycleState& init, const LqrConfig& cfg) {
  return rollout(candidate, init, cfg, true);
}

TrackingResult open_loop_rollout(const Trajectory& candidate, const BicycleState& init, const LqrConfig& cfg) {
  return rollout(candidate, init, cfg, false);
}

BicycleState to_bicycle(const TrajectorySample& s) { return {s.pose.x, s.pose.y, s.pose.heading, s.speed}; }

}  // namespace vsf
