#pragma once

#include <functional>
#include <string>

#include "hydroflex/plant/simulator.hpp"
#include "hydroflex/qualification/envelopes.hpp"

namespace hydroflex::qualification {

enum class TestMode { Turbine, Pump, Hsc };

const char* to_string(TestMode m);

/// Report plus the trace of the run that decided it.
struct TestRun {
  ComplianceReport report;
  plant::Trace trace;
};

/// Inertial power of a synchronous machine at nominal speed; falling
/// frequency gives a positive injection.
double inertial_power(double tau_m_s, double power_base_mw, double rocof_hz_s, double nominal_frequency_hz);

/// Reactive power available at the given active power, sqrt(S^2 - P^2).
double voltvar_capability(double s_rated_mva, double p_mw);

/// Largest x in [lo, hi] with pass(x), assuming pass is monotone; lo when
/// nothing above it passes. Bisection stops at `resolution`.
double bisect_capability(double lo, double hi, double resolution, const std::function<bool(double)>& pass);

/// Reserve offered for a frequency step in the given mode: droop response
/// capped by the headroom around the initial point.
double fcr_reserve(const plant::PlantSimulator& sim, std::size_t unit, unit::Mode mode);

/// Single FCR step. direction +1 is under-frequency (more generation).
TestRun run_fcr_test(const plant::PlantSimulator& sim, TestMode mode, double direction);
/// Both directions; capability is the smaller sustained response. A reserve
/// that fails the envelope is reduced until it passes.
TestRun run_fcr(const plant::PlantSimulator& sim, TestMode mode);

/// aFRR ramp of 2 PR in the given direction (+1 loading).
TestRun run_afrr_test(const plant::PlantSimulator& sim, TestMode mode, double direction);
TestRun run_afrr(const plant::PlantSimulator& sim, TestMode mode);

/// One FFR delivery of `capacity_mw` starting from speed n0 (0: middle).
TestRun run_ffr_test(const plant::PlantSimulator& sim, TestMode mode, double capacity_mw, double n0_rpm = 0.0);
/// Largest compliant FFR capacity.
TestRun run_ffr(const plant::PlantSimulator& sim, TestMode mode, double n0_rpm = 0.0);

/// Resistive load step on the islanded unit at speed no load.
TestRun run_black_start_test(const plant::PlantSimulator& sim, double load_mw, double n0_rpm = 0.0);
/// Largest accepted load. Variable-speed units report it at the first configured
/// initial speed and list every configured speed in the metrics.
TestRun black_start_capacity(const plant::PlantSimulator& sim);
TestRun black_start_capacity_at(const plant::PlantSimulator& sim, double n0_rpm);

/// Frequency ramp on a grid-locked unit, peak inertial exchange.
TestRun synchronous_inertia_test(const plant::PlantSimulator& sim, TestMode mode);
/// Frequency ramp on a variable-speed unit with inertia emulation.
TestRun synthetic_inertia_test(const plant::PlantSimulator& sim, TestMode mode, bool emulation = true);

}  // namespace hydroflex::qualification
