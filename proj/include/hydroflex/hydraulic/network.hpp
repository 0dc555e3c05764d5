#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace hydroflex::hydraulic {

inline constexpr double kGravity = 9.81;
inline constexpr double kWaterDensity = 1000.0;

// ---------------------------------------------------------------------------
// Elements
// ---------------------------------------------------------------------------

/// Elastic pipe solved with the method of characteristics. Positive discharge
/// flows from the upstream port to the downstream port.
struct Pipe {
  std::string id;
  double length_m = 0.0;
  double diameter_m = 0.0;
  double wave_speed_ms = 0.0;
  double friction_factor = 0.0;  // Darcy-Weisbach lambda
  int n_segments = 1;

  double area_m2() const;
};

/// Open surge tank; `level` is the absolute water surface elevation.
struct SurgeTank {
  std::string id;
  double cross_section_m2 = 0.0;
  double base_elevation_m = 0.0;
  double min_level_m = 0.0;
  double max_level_m = 0.0;
  double throttle_loss = 0.0;  // m / (m3/s)^2, zero for an unthrottled tank
};

/// Constant-head boundary.
struct Reservoir {
  std::string id;
  double elevation_m = 0.0;
};

/// Orifice valve, Q = Cv * opening * sqrt(dH). Without a downstream junction it
/// discharges to `outlet_head_m`.
struct Valve {
  std::string id;
  double discharge_coefficient = 0.0;  // m^2.5/s at full opening
  double opening = 1.0;
  std::optional<double> outlet_head_m;
};

/// Hydraulic machine boundary. Upstream port is the high-pressure side in
/// turbine mode, positive discharge is turbine flow.
struct MachineNode {
  std::string id;
};

using Element = std::variant<Pipe, SurgeTank, Reservoir, Valve, MachineNode>;

enum class Port { Single, Upstream, Downstream };

struct PortRef {
  std::string element;
  Port port = Port::Single;
};

struct Junction {
  std::string id;
  std::vector<PortRef> ports;
};

struct NetworkSpec {
  std::vector<Element> elements;
  std::vector<Junction> junctions;
};

const std::string& element_id(const Element& e);

// ---------------------------------------------------------------------------
// Machine coupling
// ---------------------------------------------------------------------------

/// Quasi-static machine response in SI units with partial derivatives.
struct MachineResponse {
  double discharge = 0.0;  // m3/s
  double torque = 0.0;     // N m, hydraulic torque on the runner
  double dq_domega = 0.0;
  double dq_dhead = 0.0;
  double dt_domega = 0.0;
  double dt_dhead = 0.0;
  double dq_dopening = 0.0;
  double dt_dopening = 0.0;
};

class MachineModel {
 public:
  virtual ~MachineModel() = default;
  virtual MachineResponse evaluate(double omega_rad_s, double head_m, double opening) const = 0;
};

enum class RotorMode { Offline, Locked, Free };

/// Per-step drive of one machine node, values at the end of the step.
struct MachineDrive {
  const MachineModel* model = nullptr;
  RotorMode mode = RotorMode::Offline;
  double opening = 0.0;
  double omega = 0.0;                // Locked: prescribed speed
  double inertia = 0.0;              // Free: kg m^2
  double electrical_power_w = 0.0;   // Free: generator convention
};

/// Steady-state request for one machine node.
struct MachineSetpoint {
  enum class Kind { Offline, Opening, PowerByOpening, PowerBySpeed };
  Kind kind = Kind::Offline;
  const MachineModel* model = nullptr;
  double omega = 0.0;             // fixed speed, or initial guess for PowerBySpeed
  double opening = 0.0;           // fixed opening, or initial guess for PowerByOpening
  double mechanical_power_w = 0.0;
};

// ---------------------------------------------------------------------------
// State
// ---------------------------------------------------------------------------

struct MachineState {
  double discharge_m3s = 0.0;
  double head_m = 0.0;  // upstream minus downstream piezometric head
  double torque_nm = 0.0;
  double omega_rad_s = 0.0;
  double opening = 0.0;
  double electrical_torque_nm = 0.0;
  bool online = false;
};

struct PipeProfile {
  std::vector<double> head_m;
  std::vector<double> discharge_m3s;
};

struct NetworkState {
  double time_s = 0.0;
  std::vector<double> junction_head_m;
  std::vector<PipeProfile> pipes;
  std::vector<double> tank_level_m;
  std::vector<double> tank_inflow_m3s;
  std::vector<double> valve_discharge_m3s;
  std::vector<MachineState> machines;
};

struct SolverSettings {
  double dt_s = 0.01;
  int max_iterations = 40;
  double tolerance = 1e-10;
};

// ---------------------------------------------------------------------------
// Network
// ---------------------------------------------------------------------------

class HydraulicNetwork {
 public:
  HydraulicNetwork(NetworkSpec spec, SolverSettings settings);

  std::size_t element_count() const { return spec_.elements.size(); }
  std::size_t junction_count() const { return spec_.junctions.size(); }
  std::size_t pipe_count() const { return pipes_.size(); }
  std::size_t tank_count() const { return tanks_.size(); }
  std::size_t valve_count() const { return valves_.size(); }
  std::size_t machine_count() const { return machines_.size(); }

  const NetworkSpec& spec() const { return spec_; }
  const SolverSettings& settings() const { return settings_; }

  int pipe_index(const std::string& id) const;
  int tank_index(const std::string& id) const;
  int valve_index(const std::string& id) const;
  int machine_index(const std::string& id) const;
  int reservoir_index(const std::string& id) const;
  int junction_index(const std::string& id) const;

  /// Wave speed after rounding the pipe travel time to a whole number of steps.
  double effective_wave_speed(int pipe) const;
  /// Reach travel time in solver steps.
  int reach_lag_steps(int pipe) const;
  /// Computational reaches; n_segments raised to the next divisor of the
  /// pipe travel time in steps.
  int reach_count(int pipe) const;

  void set_reservoir_elevation(int reservoir, double elevation_m);
  void set_valve_opening(int valve, double opening);
  double reservoir_elevation(int reservoir) const;

  /// Solves the stationary problem and initialises the transient history.
  /// Throws SimulationError when Newton does not converge.
  const NetworkState& steady_state(std::span<const MachineSetpoint> machines);

  /// Largest scaled residual of the last steady solve.
  double steady_residual() const { return steady_residual_; }

  /// Advances by one solver step.
  const NetworkState& step(std::span<const MachineDrive> machines);

  const NetworkState& state() const { return state_; }

  /// Signed discharge sum at a junction for the current state (inflow positive).
  double junction_imbalance(int junction) const;
  double max_junction_imbalance() const;

 private:
  struct PipeModel {
    double area = 0.0;
    double dx = 0.0;
    double wave_speed = 0.0;
    double impedance = 0.0;  // B = a / (g A)
    double friction = 0.0;   // R = lambda dx / (2 g D A^2)
    double total_friction = 0.0;
    int nodes = 0;
    int lag = 1;
    int newest = 0;
    std::vector<std::vector<double>> head;
    std::vector<std::vector<double>> flow;
    int up_junction = -1;
    int down_junction = -1;
  };
  struct TankModel {
    SurgeTank spec;
    int junction = -1;
  };
  struct ValveModel {
    Valve spec;
    int up_junction = -1;
    int down_junction = -1;
  };
  struct MachineModelRef {
    int up_junction = -1;
    int down_junction = -1;
  };
  struct JunctionModel {
    int reservoir = -1;  // fixed head when >= 0
    int unknown = -1;    // index into the head unknowns
  };

  double head_at(int junction, const std::vector<double>& free_heads) const;
  void check_finite_and_limits() const;

  NetworkSpec spec_;
  SolverSettings settings_;
  std::vector<PipeModel> pipes_;
  std::vector<TankModel> tanks_;
  std::vector<ValveModel> valves_;
  std::vector<MachineModelRef> machines_;
  std::vector<Reservoir> reservoirs_;
  std::vector<JunctionModel> junctions_;
  std::vector<std::string> pipe_ids_, tank_ids_, valve_ids_, machine_ids_, reservoir_ids_;
  int free_junctions_ = 0;
  NetworkState state_;
  double steady_residual_ = 0.0;
  bool initialised_ = false;
};

/// Validates the spec and builds a network. Throws ConfigError on dangling
/// ports, duplicate ids or non-positive geometry.
HydraulicNetwork build_network(const NetworkSpec& spec, const SolverSettings& settings);

/// Darcy-Weisbach head loss of a full pipe at discharge q.
double darcy_head_loss(const Pipe& pipe, double discharge_m3s);

}  // namespace hydroflex::hydraulic
