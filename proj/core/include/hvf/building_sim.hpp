#pragma once

// Five-zone lumped-capacitance office model producing the training data set.
// Zones 0..3 are the south, east, north and west perimeter zones (each with one
// operable window), zone 4 is the interior core.

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "hvf/calendar.hpp"
#include "hvf/dataset.hpp"

namespace hvf::sim {

inline constexpr std::size_t kZones = 5;
inline constexpr std::size_t kWindows = 4;
inline constexpr double kAirDensity = 1.2;    // kg/m³
inline constexpr double kAirHeatCapacity = 1005.0;  // J/(kg·K)
inline constexpr double kGravity = 9.81;

using Rng = std::mt19937_64;

struct ZoneGeometry {
  std::string name;
  double floor_area = 0;       // m²
  double volume = 0;           // m³
  double wall_area = 0;        // opaque exterior wall, m²
  double window_area = 0;      // glazing, m²
  double facade_azimuth = 0;   // degrees from south, east negative
};

struct BuildingSpec {
  double length = 30.0, width = 15.0, height = 2.4;
  double perimeter_depth = 4.57;
  double u_ext = 2.8, u_int = 1.6, u_window = 0.7;  // W/(m²·K)
  double window_to_wall = 0.3;
  double solar_g_value = 0.4;
  double shade_transmittance = 0.3;  // solar fraction admitted with the shade down
  double shade_threshold_c = 23.0;
  double capacitance_multiplier = 5.0;  // × zone air heat capacity
  double heating_capacity_w = 60000.0;
  double cooling_capacity_w = 30000.0;
  double thermostat_gain_w_per_k = 20000.0;
  // wind-and-stack open-area ventilation
  double wind_coefficient = 0.3;
  double discharge_coefficient = 0.6;
  double stack_height = 0.8;  // m
  double window_open_area = 1.0;  // m²
  // internal gains
  double occupant_gain_w = 100.0;
  double lighting_w_per_m2 = 8.0;

  std::array<ZoneGeometry, kZones> zones{};
  /// Interior wall area between zones, symmetric, zero diagonal.
  std::array<std::array<double, kZones>, kZones> interior_wall_area{};

  double capacitance(std::size_t zone) const;
  double envelope_conductance(std::size_t zone) const;  // W/K
  double interzone_conductance(std::size_t a, std::size_t b) const;
  bool has_window(std::size_t zone) const { return zone < kWindows; }

  /// Throws ConfigError naming the first inadmissible field.
  void validate() const;
};

/// Geometry derived from the footprint: trapezoidal perimeter zones around a core.
BuildingSpec default_building();

struct ZoneState {
  double t_in = 20.0;     // °C
  bool shade_active = false;
  bool window_open = false;
  double hvac_power = 0.0;  // W, positive = heating (step average)
};

struct WeatherRecord {
  Timestamp timestamp{};
  double t_out = 0;   // °C
  double rh = 0;      // %
  double wind = 0;    // m/s
  double dni = 0;     // W/m²
  double dhi = 0;     // W/m²
};

struct ScheduleSet {
  std::array<std::vector<double>, kZones> occupancy;  // persons
  std::array<std::vector<double>, kZones> equipment;  // W
  std::vector<bool> lighting;
  std::vector<bool> holiday;
};

struct SetpointSeries {
  std::array<std::vector<double>, kZones> heating;
  std::array<std::vector<double>, kZones> cooling;
};

struct WindowSignals {
  std::array<std::vector<bool>, kWindows> open;
  /// Steps at which a new open pulse started, per window.
  std::array<std::vector<std::size_t>, kWindows> events;
  /// Steps at which a pulse could have started (not inside one), per window.
  std::array<std::size_t, kWindows> eligible_steps{};
};

struct MprsOptions {
  double low = 18.0, high = 22.0, increment = 0.5;
  double cooling_offset = 5.0;
  double setback_heating = 15.0, setback_cooling = 30.0;
  std::size_t min_hold_steps = 1, max_hold_steps = 16;
};

/// Multi-level pseudo-random heating setpoints during occupied hours, setback otherwise.
SetpointSeries generate_mprs_setpoints(Rng& rng, const Calendar& calendar,
                                       const MprsOptions& options = {});

/// Each step outside an open pulse starts a 2-step (30 min) pulse with probability p_open.
WindowSignals generate_prbs_windows(Rng& rng, const Calendar& calendar, double p_open,
                                    std::size_t pulse_steps = 2);

/// Stochastic occupancy/equipment/lighting schedules for every zone.
ScheduleSet generate_schedules(Rng& rng, const Calendar& calendar, const BuildingSpec& spec);

struct WeatherOptions {
  double annual_mean_c = 10.0;
  double seasonal_amplitude_c = 7.0;
  double diurnal_amplitude_c = 4.0;
  double noise_sd_c = 1.5;
  double mean_wind = 3.5;
};

/// Seasonal + diurnal temperature with AR(1) noise, half-sine irradiance,
/// reflected AR(1) wind; every field clamped to its admissible interval.
std::vector<WeatherRecord> synth_weather(Rng& rng, const Calendar& calendar,
                                         const WeatherOptions& options = {});

/// Header `timestamp,t_out_c,rh_pct,wind_mps,dni_wm2,dhi_wm2`.
void write_weather_csv(const std::vector<WeatherRecord>& records, const std::filesystem::path& path);
std::vector<WeatherRecord> load_weather_csv(const std::filesystem::path& path);

/// Wind-and-stack flow through an open area, m³/s. The two drivers combine in
/// quadrature.
double ventilation_flow(double open_area, double wind, double t_in, double t_out,
                        double wind_coefficient = 0.3, double discharge_coefficient = 0.6,
                        double stack_height = 0.8);

/// Boundary conditions a zone sees over one inner step.
struct ZoneDrivers {
  double t_out = 10.0;
  double wind = 0.0;
  double solar_gain_w = 0.0;     // before shading
  double internal_gain_w = 0.0;
  bool window_open = false;
  double heat_setpoint = 15.0, cool_setpoint = 30.0;
  std::array<double, kZones> neighbor_t{};  // indexed by zone; own entry ignored
};

/// Step-averaged heat flows into the zone (W) and the resulting temperature change.
struct FluxAudit {
  double envelope = 0, interzone = 0, solar = 0, internal = 0, hvac = 0, ventilation = 0;
  double capacitance = 0;  // J/K
  double dt = 0;           // s
  double delta_t = 0;      // K
  double total() const { return envelope + interzone + solar + internal + hvac + ventilation; }
};

/// Net heat-balance right-hand side divided by C (K/s) at the given state,
/// including the thermostat response at that temperature.
double zone_derivative(const BuildingSpec& spec, std::size_t zone, double t_in,
                       const ZoneDrivers& drivers);

/// Advances one zone by dt seconds. Neighbour and outdoor temperatures are
/// held fixed over the step; within it the linear balance
///   C·dT/dt = Σ G_k (T_k − T) + gains
/// is integrated in closed form. Throws SimulationError when the result leaves
/// [−50, 60] °C.
ZoneState step_zone(const BuildingSpec& spec, std::size_t zone, const ZoneState& state,
                    const ZoneDrivers& drivers, double dt, FluxAudit* audit = nullptr);

/// Irradiance-driven solar gain through a zone's glazing (before shading), W.
double solar_gain(const BuildingSpec& spec, std::size_t zone, const WeatherRecord& weather);

struct SimulationOptions {
  double inner_step_s = 60.0;
  double initial_t_in = 20.0;
  bool hvac_enabled = true;
};

/// Optional per-inner-step observer (output step, zone, audit).
using AuditObserver = std::function<void(std::size_t, std::size_t, const FluxAudit&)>;

/// Runs the building over the calendar. Row k holds the drivers of interval k
/// and the zone temperatures at its start instant.
SimulatedDataset simulate(const BuildingSpec& spec, const Calendar& calendar,
                          const std::vector<WeatherRecord>& weather, const ScheduleSet& schedules,
                          const SetpointSeries& setpoints, const WindowSignals& windows,
                          const SimulationOptions& options = {}, const AuditObserver& observer = {});

}  // namespace hvf::sim
