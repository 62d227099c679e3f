#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "bellcav/rng.hpp"

namespace bellcav::cavendish {

/// Torsion-balance relay parameters. Two large spheres ride a turntable of
/// radius beam_halflength + sphere_distance; the orientation bit rotates them
/// to +/- sphere_offset_angle, and each attracts the near small ball on the
/// suspended beam. SI units throughout.
struct CavendishConfig {
  double big_mass = 1.0;             // kg
  double small_mass = 1.0;           // kg
  double beam_halflength = 1.0;      // m
  double sphere_offset_angle = 0.5;  // rad, in (0, pi/2)
  double sphere_distance = 0.5;      // m, center-to-center at closest approach
  double torsion_constant = 24.0;    // N*m/rad
  double damping = 12.0;             // N*m*s/rad
  double moment_of_inertia = 1.0;    // kg*m^2
  double grav_constant = 1.0;        // m^3/(kg*s^2)
  double relay_noise = 0.0;          // readout bit-flip probability, in [0, 0.5]

  double readout_dead_band = 1e-9;        // rad; |theta| below this is inconclusive
  double settle_omega_threshold = 1e-6;   // rad/s
  double settle_window = 0.25;            // s of continuous quiet required

  /// Scaled parameters with settle time of a few seconds of simulated time;
  /// the default for batch runs.
  static CavendishConfig fast() { return CavendishConfig{}; }

  /// Tabletop-scale balance with realistic masses and gravitational constant.
  /// Settles in around fifteen minutes of simulated time.
  static CavendishConfig physical() {
    CavendishConfig c;
    c.big_mass = 158.0;
    c.small_mass = 0.73;
    c.beam_halflength = 0.9;
    c.sphere_offset_angle = 0.35;
    c.sphere_distance = 0.225;
    c.torsion_constant = 2.6e-4;
    c.damping = 0.05;
    c.moment_of_inertia = 1.18;
    c.grav_constant = 6.674e-11;
    c.settle_omega_threshold = 1e-8;
    c.settle_window = 10.0;
    return c;
  }

  void validate() const {
    auto positive = [](double v, const char* name) {
      if (!(v > 0.0) || !std::isfinite(v))
        throw std::invalid_argument(std::string(name) + " must be positive and finite");
    };
    positive(big_mass, "big_mass");
    positive(small_mass, "small_mass");
    positive(beam_halflength, "beam_halflength");
    positive(sphere_distance, "sphere_distance");
    positive(torsion_constant, "torsion_constant");
    positive(moment_of_inertia, "moment_of_inertia");
    positive(readout_dead_band, "readout_dead_band");
    positive(settle_omega_threshold, "settle_omega_threshold");
    positive(settle_window, "settle_window");
    if (!(grav_constant >= 0.0) || !std::isfinite(grav_constant))
      throw std::invalid_argument("grav_constant must be nonnegative and finite");
    if (!(damping >= 0.0) || !std::isfinite(damping))
      throw std::invalid_argument("damping must be nonnegative and finite");
    if (!(relay_noise >= 0.0 && relay_noise <= 0.5))
      throw std::invalid_argument("relay_noise must lie in [0, 0.5]");
    if (!(sphere_offset_angle > 0.0 && sphere_offset_angle < std::numbers::pi / 2.0))
      throw std::invalid_argument("sphere_offset_angle must lie in (0, pi/2)");
  }

  friend bool operator==(const CavendishConfig&, const CavendishConfig&) = default;
};

struct PendulumState {
  double theta = 0.0;  // rad
  double omega = 0.0;  // rad/s
  double t = 0.0;      // s

  void validate() const {
    if (!std::isfinite(theta) || !std::isfinite(omega) || !std::isfinite(t))
      throw std::invalid_argument("pendulum state must be finite");
  }

  friend bool operator==(const PendulumState&, const PendulumState&) = default;
};

struct Trajectory {
  int orientation_bit = 0;
  double dt = 0.0;
  std::vector<PendulumState> samples;
};

/// One relayed bit with settle diagnostics.
struct RelayRecord {
  int input_bit = 0;
  int output_bit = 0;
  double settle_time = 0.0;        // s, first time the quiet window closed
  double equilibrium_angle = 0.0;  // rad, final beam angle
  std::vector<std::pair<double, double>> trajectory_summary;  // (t, theta)

  friend bool operator==(const RelayRecord&, const RelayRecord&) = default;
};

class UnstableIntegration : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InconclusiveReadout : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

/// The torque formula without validation, shared by the public entry point
/// and the integrator's inner loop.
inline double torque_unchecked(const CavendishConfig& c, double theta, int orientation_bit) {
  const double arm = c.beam_halflength;
  const double ring = arm + c.sphere_distance;
  const double phi = (orientation_bit == 1 ? 1.0 : -1.0) * c.sphere_offset_angle;
  const double delta = phi - theta;
  const double r2 = arm * arm + ring * ring - 2.0 * arm * ring * std::cos(delta);
  return 2.0 * c.grav_constant * c.big_mass * c.small_mass * arm * ring * std::sin(delta) /
         (r2 * std::sqrt(r2));
}

}  // namespace detail

/// Net gravitational torque on the beam for a given beam angle and sphere
/// orientation. Both sphere/near-ball pairs contribute equally:
///   tau = 2 G M m L R sin(phi - theta) / (L^2 + R^2 - 2 L R cos(phi - theta))^(3/2)
/// with R = L + d and phi = +/- sphere_offset_angle selected by the bit.
/// Antisymmetric under a bit flip at theta = 0; |tau| <= 2 G M m L / d^2.
inline double gravity_torque(const CavendishConfig& config, double theta, int orientation_bit) {
  config.validate();
  if (orientation_bit != 0 && orientation_bit != 1)
    throw std::invalid_argument("orientation bit must be 0 or 1");
  if (!std::isfinite(theta)) throw std::invalid_argument("theta must be finite");
  return detail::torque_unchecked(config, theta, orientation_bit);
}

namespace detail {

/// Fixed-step RK4 on I theta'' = -kappa theta - gamma theta' + tau(theta).
/// Integration stops early once |omega| has stayed below the settle threshold
/// for a full settle window; otherwise it runs to t_max.
template <typename TorqueFn>
Trajectory integrate(const CavendishConfig& config, PendulumState initial, int orientation_bit,
                     double dt, double t_max, TorqueFn&& torque) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("dt must be positive");
  if (!(t_max >= dt) || !std::isfinite(t_max)) throw std::invalid_argument("t_max must be >= dt");
  initial.validate();

  const double inv_inertia = 1.0 / config.moment_of_inertia;
  const double kappa = config.torsion_constant;
  const double gamma = config.damping;
  auto accel = [&](double theta, double omega) {
    return (-kappa * theta - gamma * omega + torque(theta)) * inv_inertia;
  };

  Trajectory traj;
  traj.orientation_bit = orientation_bit;
  traj.dt = dt;
  traj.samples.reserve(static_cast<std::size_t>(t_max / dt) + 2);
  traj.samples.push_back(initial);

  double theta = initial.theta;
  double omega = initial.omega;
  double quiet_since = std::abs(omega) < config.settle_omega_threshold
                           ? initial.t
                           : std::numeric_limits<double>::infinity();

  const auto steps = static_cast<std::size_t>(std::floor(t_max / dt + 1e-9));
  for (std::size_t step = 1; step <= steps; ++step) {
    const double k1t = omega;
    const double k1w = accel(theta, omega);
    const double k2t = omega + 0.5 * dt * k1w;
    const double k2w = accel(theta + 0.5 * dt * k1t, omega + 0.5 * dt * k1w);
    const double k3t = omega + 0.5 * dt * k2w;
    const double k3w = accel(theta + 0.5 * dt * k2t, omega + 0.5 * dt * k2w);
    const double k4t = omega + dt * k3w;
    const double k4w = accel(theta + dt * k3t, omega + dt * k3w);
    theta += dt / 6.0 * (k1t + 2.0 * k2t + 2.0 * k3t + k4t);
    omega += dt / 6.0 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w);
    const double t = initial.t + static_cast<double>(step) * dt;

    if (!std::isfinite(theta) || !std::isfinite(omega) ||
        std::abs(theta) > std::numbers::pi / 2.0)
      throw UnstableIntegration("beam angle left (-pi/2, pi/2) at t=" + std::to_string(t) +
                                "; use a smaller dt");

    traj.samples.push_back({theta, omega, t});

    // Mirror of detail::settle_time below, so early stop and readout agree.
    if (std::abs(omega) < config.settle_omega_threshold) {
      if (quiet_since > t) quiet_since = t;
      if (t - quiet_since >= config.settle_window) break;
    } else {
      quiet_since = std::numeric_limits<double>::infinity();
    }
  }
  return traj;
}

}  // namespace detail

/// Relay dynamics under the configured gravitational torque.
inline Trajectory integrate_pendulum(const CavendishConfig& config, const PendulumState& initial,
                                     int orientation_bit, double dt, double t_max) {
  config.validate();
  if (orientation_bit != 0 && orientation_bit != 1)
    throw std::invalid_argument("orientation bit must be 0 or 1");
  auto torque = [&config, orientation_bit](double theta) {
    return detail::torque_unchecked(config, theta, orientation_bit);
  };
  return detail::integrate(config, initial, orientation_bit, dt, t_max, torque);
}

/// Test hook: same integrator with an arbitrary torque profile.
template <typename TorqueFn>
Trajectory integrate_with_torque(const CavendishConfig& config, const PendulumState& initial,
                                 double dt, double t_max, TorqueFn&& torque) {
  config.validate();
  return detail::integrate(config, initial, 0, dt, t_max, std::forward<TorqueFn>(torque));
}

namespace detail {

/// First time at which |omega| stayed below threshold for a full window.
/// Returns infinity when the trajectory never settles.
inline double settle_time(const Trajectory& traj, const CavendishConfig& config) {
  double quiet_since = std::numeric_limits<double>::infinity();
  for (const auto& s : traj.samples) {
    if (std::abs(s.omega) < config.settle_omega_threshold) {
      if (quiet_since > s.t) quiet_since = s.t;
      if (s.t - quiet_since >= config.settle_window) return s.t;
    } else {
      quiet_since = std::numeric_limits<double>::infinity();
    }
  }
  return std::numeric_limits<double>::infinity();
}

}  // namespace detail

/// Binarize a settled trajectory into the macroscopic pointer bit, flipping
/// it with the configured relay noise probability. A trajectory that never
/// settles, or settles inside the dead band, is inconclusive rather than a
/// silently fabricated bit.
inline RelayRecord readout(const Trajectory& traj, const CavendishConfig& config,
                           RandomStream& rng) {
  config.validate();
  if (traj.samples.empty()) throw std::invalid_argument("readout on empty trajectory");

  const double settled_at = detail::settle_time(traj, config);
  if (!std::isfinite(settled_at))
    throw InconclusiveReadout("trajectory did not settle within t_max; extend t_max");

  const double theta_final = traj.samples.back().theta;
  if (std::abs(theta_final) <= config.readout_dead_band)
    throw InconclusiveReadout("equilibrium angle inside dead band; no pointer bit");

  RelayRecord record;
  record.input_bit = traj.orientation_bit;
  record.settle_time = settled_at;
  record.equilibrium_angle = theta_final;
  record.output_bit = theta_final > 0.0 ? 1 : 0;
  // Always draw, so the stream advances identically for every noise level.
  const double u = rng.next_double();
  if (u < config.relay_noise) record.output_bit ^= 1;

  const std::size_t n = traj.samples.size();
  const std::size_t stride = std::max<std::size_t>(1, n / 32);
  for (std::size_t i = 0; i < n; i += stride)
    record.trajectory_summary.emplace_back(traj.samples[i].t, traj.samples[i].theta);
  if (record.trajectory_summary.back().first != traj.samples.back().t)
    record.trajectory_summary.emplace_back(traj.samples.back().t, theta_final);
  return record;
}

/// Full relay of one orientation bit from a resting balance.
inline RelayRecord run_relay(const CavendishConfig& config, int orientation_bit, double dt,
                             double t_max, RandomStream& rng) {
  return readout(integrate_pendulum(config, PendulumState{}, orientation_bit, dt, t_max), config,
                 rng);
}

inline void write_trajectory_csv(std::ostream& out, const Trajectory& traj) {
  out << "t,theta,omega\n";
  for (const auto& s : traj.samples)
    out << s.t << ',' << s.theta << ',' << s.omega << '\n';
}

inline void to_json(nlohmann::json& j, const CavendishConfig& c) {
  j = nlohmann::json{{"big_mass", c.big_mass},
                     {"small_mass", c.small_mass},
                     {"beam_halflength", c.beam_halflength},
                     {"sphere_offset_angle", c.sphere_offset_angle},
                     {"sphere_distance", c.sphere_distance},
                     {"torsion_constant", c.torsion_constant},
                     {"damping", c.damping},
                     {"moment_of_inertia", c.moment_of_inertia},
                     {"grav_constant", c.grav_constant},
                     {"relay_noise", c.relay_noise},
                     {"readout_dead_band", c.readout_dead_band},
                     {"settle_omega_threshold", c.settle_omega_threshold},
                     {"settle_window", c.settle_window}};
}

inline void from_json(const nlohmann::json& j, CavendishConfig& c) {
  c = CavendishConfig{};
  if (j.contains("preset")) {
    const auto preset = j.at("preset").get<std::string>();
    if (preset == "fast")
      c = CavendishConfig::fast();
    else if (preset == "physical")
      c = CavendishConfig::physical();
    else
      throw std::invalid_argument("unknown cavendish preset: " + preset);
  }
  auto load = [&](const char* key, double& field) {
    if (j.contains(key)) field = j.at(key).get<double>();
  };
  load("big_mass", c.big_mass);
  load("small_mass", c.small_mass);
  load("beam_halflength", c.beam_halflength);
  load("sphere_offset_angle", c.sphere_offset_angle);
  load("sphere_distance", c.sphere_distance);
  load("torsion_constant", c.torsion_constant);
  load("damping", c.damping);
  load("moment_of_inertia", c.moment_of_inertia);
  load("grav_constant", c.grav_constant);
  load("relay_noise", c.relay_noise);
  load("readout_dead_band", c.readout_dead_band);
  load("settle_omega_threshold", c.settle_omega_threshold);
  load("settle_window", c.settle_window);
}

}  // namespace bellcav::cavendish
