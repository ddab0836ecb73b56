#include "hvf/building_sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>

#include "csv.hpp"
#include "hvf/errors.hpp"

namespace hvf::sim {
namespace {

constexpr double kPi = std::numbers::pi;

double clamp(double v, double lo, double hi) { return std::min(std::max(v, lo), hi); }

}  // namespace

// ---------------------------------------------------------------------------
// building

double BuildingSpec::capacitance(std::size_t zone) const {
  return capacitance_multiplier * kAirDensity * kAirHeatCapacity * zones[zone].volume;
}

double BuildingSpec::envelope_conductance(std::size_t zone) const {
  return u_ext * zones[zone].wall_area + u_window * zones[zone].window_area;
}

double BuildingSpec::interzone_conductance(std::size_t a, std::size_t b) const {
  return u_int * interior_wall_area[a][b];
}

void BuildingSpec::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0)) throw ConfigError(std::string("building: ") + name + " must be positive");
  };
  positive(length, "length");
  positive(width, "width");
  positive(height, "height");
  positive(u_ext, "u_ext");
  positive(u_int, "u_int");
  positive(u_window, "u_window");
  positive(capacitance_multiplier, "capacitance_multiplier");
  positive(heating_capacity_w, "heating_capacity_w");
  positive(cooling_capacity_w, "cooling_capacity_w");
  positive(thermostat_gain_w_per_k, "thermostat_gain_w_per_k");
  positive(wind_coefficient, "wind_coefficient");
  positive(discharge_coefficient, "discharge_coefficient");
  positive(stack_height, "stack_height");
  if (window_open_area < 0) throw ConfigError("building: window_open_area must be non-negative");
  if (!(2 * perimeter_depth < std::min(length, width))) {
    throw ConfigError("building: perimeter_depth leaves no core zone");
  }
  for (std::size_t z = 0; z < kZones; ++z) {
    positive(zones[z].floor_area, "zone floor_area");
    positive(zones[z].volume, "zone volume");
    if (has_window(z)) {
      positive(zones[z].wall_area, "zone wall_area");
      positive(zones[z].window_area, "zone window_area");
    } else if (zones[z].window_area != 0.0) {
      throw ConfigError("building: interior zone cannot have a window");
    }
    for (std::size_t o = 0; o < kZones; ++o) {
      if (interior_wall_area[z][o] != interior_wall_area[o][z]) {
        throw ConfigError("building: interior wall adjacency is not symmetric");
      }
      if (interior_wall_area[z][o] < 0) throw ConfigError("building: negative interior wall area");
    }
    if (interior_wall_area[z][z] != 0.0) throw ConfigError("building: zone adjacent to itself");
  }
}

BuildingSpec default_building() {
  BuildingSpec b;
  const double d = b.perimeter_depth, L = b.length, W = b.width, H = b.height;
  const double long_area = (L + (L - 2 * d)) / 2 * d;
  const double short_area = (W + (W - 2 * d)) / 2 * d;
  const double facade[4] = {L, W, L, W};
  const double floor[4] = {long_area, short_area, long_area, short_area};
  const char* names[4] = {"SPACE1-1", "SPACE2-1", "SPACE3-1", "SPACE4-1"};
  const double azimuth[4] = {0.0, -90.0, 180.0, 90.0};
  for (std::size_t z = 0; z < 4; ++z) {
    const double gross = facade[z] * H;
    b.zones[z] = ZoneGeometry{names[z], floor[z], floor[z] * H, gross * (1 - b.window_to_wall),
                              gross * b.window_to_wall, azimuth[z]};
  }
  const double core_area = (L - 2 * d) * (W - 2 * d);
  b.zones[4] = ZoneGeometry{"SPACE5-1", core_area, core_area * H, 0.0, 0.0, 0.0};

  const double corner_wall = d * std::sqrt(2.0) * H;
  for (std::size_t z = 0; z < 4; ++z) {
    const std::size_t next = (z + 1) % 4;
    b.interior_wall_area[z][next] = b.interior_wall_area[next][z] = corner_wall;
    const double inner_edge = (z % 2 == 0 ? L : W) - 2 * d;
    b.interior_wall_area[z][4] = b.interior_wall_area[4][z] = inner_edge * H;
  }
  return b;
}

// ---------------------------------------------------------------------------
// excitation signals and schedules

SetpointSeries generate_mprs_setpoints(Rng& rng, const Calendar& calendar, const MprsOptions& o) {
  if (!(o.increment > 0) || o.high < o.low || o.min_hold_steps == 0 || o.max_hold_steps < o.min_hold_steps) {
    throw ConfigError("mPRS options are inconsistent");
  }
  const auto levels = static_cast<int>(std::lround((o.high - o.low) / o.increment));
  std::uniform_int_distribution<int> level_dist(0, levels);
  std::uniform_int_distribution<std::size_t> hold_dist(o.min_hold_steps, o.max_hold_steps);
  const std::size_t n = calendar.steps();
  std::vector<bool> occupied(n);
  for (std::size_t k = 0; k < n; ++k) occupied[k] = calendar.is_occupied(k);

  SetpointSeries s;
  for (std::size_t z = 0; z < kZones; ++z) {
    s.heating[z].resize(n);
    s.cooling[z].resize(n);
    std::size_t remaining = 0;
    double level = o.low;
    for (std::size_t k = 0; k < n; ++k) {
      if (!occupied[k]) {
        remaining = 0;
        s.heating[z][k] = o.setback_heating;
        s.cooling[z][k] = o.setback_cooling;
        continue;
      }
      if (remaining == 0) {
        level = o.low + o.increment * level_dist(rng);
        remaining = hold_dist(rng);
      }
      --remaining;
      s.heating[z][k] = level;
      s.cooling[z][k] = level + o.cooling_offset;
    }
  }
  return s;
}

WindowSignals generate_prbs_windows(Rng& rng, const Calendar& calendar, double p_open,
                                    std::size_t pulse_steps) {
  if (!(p_open >= 0.0 && p_open <= 1.0)) throw ConfigError("p_open must lie in [0, 1]");
  if (pulse_steps == 0) throw ConfigError("window pulse length must be at least one step");
  const std::size_t n = calendar.steps();
  std::bernoulli_distribution trigger(p_open);
  WindowSignals w;
  for (std::size_t i = 0; i < kWindows; ++i) {
    w.open[i].assign(n, false);
    std::size_t k = 0;
    while (k < n) {
      ++w.eligible_steps[i];
      if (trigger(rng)) {
        w.events[i].push_back(k);
        for (std::size_t j = k; j < std::min(n, k + pulse_steps); ++j) w.open[i][j] = true;
        k += pulse_steps;
      } else {
        ++k;
      }
    }
  }
  return w;
}

ScheduleSet generate_schedules(Rng& rng, const Calendar& calendar, const BuildingSpec& spec) {
  const std::size_t n = calendar.steps();
  ScheduleSet s;
  s.lighting.resize(n);
  s.holiday.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    const Timestamp t = calendar.at(k);
    s.lighting[k] = calendar.is_occupied(t);
    s.holiday[k] = calendar.is_holiday(t);
  }
  // Arrival in [07:00, 09:00), departure in [16:00, 19:00), lunch dip 12–13.
  std::uniform_int_distribution<std::size_t> arrival(28, 35);
  std::uniform_int_distribution<std::size_t> departure(64, 75);
  for (std::size_t z = 0; z < kZones; ++z) {
    const int capacity = std::clamp(static_cast<int>(std::lround(spec.zones[z].floor_area / 10.0)), 1, 30);
    s.occupancy[z].assign(n, 0.0);
    s.equipment[z].assign(n, 0.0);
    for (std::size_t day = 0; day < calendar.days(); ++day) {
      const std::size_t a = arrival(rng), dep = departure(rng);
      for (std::size_t q = 0; q < kStepsPerDay; ++q) {
        const std::size_t k = day * kStepsPerDay + q;
        const bool working = calendar.is_working_day(calendar.at(k));
        double persons = 0.0;
        if (working && q >= a && q < dep && calendar.is_occupied(k)) {
          const double presence = (q >= 48 && q < 52) ? 0.45 : 0.85;
          std::binomial_distribution<int> present(capacity, presence);
          persons = present(rng);
        }
        s.occupancy[z][k] = persons;
        const double base = working && s.lighting[k] ? 120.0 : 40.0;
        s.equipment[z][k] = std::min(1000.0, base + 60.0 * persons);
      }
    }
  }
  return s;
}

// ---------------------------------------------------------------------------
// weather

std::vector<WeatherRecord> synth_weather(Rng& rng, const Calendar& calendar, const WeatherOptions& o) {
  const std::size_t n = calendar.steps();
  std::normal_distribution<double> unit(0.0, 1.0);
  std::vector<WeatherRecord> out(n);
  const double phi_t = 0.995;
  const double innov_t = o.noise_sd_c * std::sqrt(1 - phi_t * phi_t);
  const double phi_w = 0.98;
  double noise_t = 0.0, wind = o.mean_wind, cloud = 0.5;
  std::uniform_real_distribution<double> cloud_jump(0.0, 1.0);
  for (std::size_t k = 0; k < n; ++k) {
    const Timestamp t = calendar.at(k);
    const double hour = fractional_hour(t);
    const double doy = day_of_year(t);
    if (k % kStepsPerDay == 0) cloud = clamp(0.6 * cloud + 0.4 * cloud_jump(rng), 0.0, 1.0);
    noise_t = phi_t * noise_t + innov_t * unit(rng);
    wind = std::abs(o.mean_wind + phi_w * (wind - o.mean_wind) + 0.5 * unit(rng));

    const double seasonal = -std::cos(2 * kPi * (doy - 15.0) / 365.0);
    const double diurnal = -std::cos(2 * kPi * (hour - 3.0) / 24.0);
    WeatherRecord r;
    r.timestamp = t;
    r.t_out = clamp(o.annual_mean_c + o.seasonal_amplitude_c * seasonal + o.diurnal_amplitude_c * diurnal +
                        noise_t,
                    -30.0, 40.0);
    r.rh = clamp(75.0 - 10.0 * seasonal - 12.0 * diurnal - 2.0 * noise_t, 0.0, 100.0);
    r.wind = clamp(wind, 0.0, 25.0);

    const double day_length = 12.0 + 5.0 * std::sin(2 * kPi * (doy - 80.0) / 365.0);
    const double sunrise = 12.0 - day_length / 2, sunset = 12.0 + day_length / 2;
    double shape = 0.0;
    if (hour > sunrise && hour < sunset) shape = std::sin(kPi * (hour - sunrise) / day_length);
    r.dni = clamp(900.0 * (1.0 - 0.85 * cloud) * shape, 0.0, 1300.0);
    r.dhi = clamp((60.0 + 220.0 * cloud) * shape, 0.0, 1300.0);
    out[k] = r;
  }
  return out;
}

void write_weather_csv(const std::vector<WeatherRecord>& records, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out << "timestamp,t_out_c,rh_pct,wind_mps,dni_wm2,dhi_wm2\n";
  char buf[160];
  for (const auto& r : records) {
    std::snprintf(buf, sizeof buf, ",%.6f,%.6f,%.6f,%.6f,%.6f\n", r.t_out, r.rh, r.wind, r.dni, r.dhi);
    out << format_timestamp(r.timestamp) << buf;
  }
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

std::vector<WeatherRecord> load_weather_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open weather file '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line)) throw ParseError("weather file is empty");
  const auto header = detail::split_csv_line(line);
  const std::vector<std::string> required = {"timestamp", "t_out_c", "rh_pct", "wind_mps", "dni_wm2", "dhi_wm2"};
  std::vector<std::size_t> index;
  for (const auto& name : required) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw ParseError("weather row 1: missing column '" + name + "'");
    index.push_back(static_cast<std::size_t>(it - header.begin()));
  }
  struct Range {
    double lo, hi;
  };
  const Range ranges[5] = {{-30, 40}, {0, 100}, {0, 25}, {0, 1300}, {0, 1300}};

  std::vector<WeatherRecord> out;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = detail::split_csv_line(line);
    const std::string where = "weather row " + std::to_string(row);
    if (f.size() != header.size()) throw ParseError(where + ": wrong field count");
    auto ts = parse_timestamp(f[index[0]]);
    if (!ts) throw ParseError(where + ": bad timestamp '" + f[index[0]] + "'");
    if (!out.empty()) {
      const auto gap = *ts - out.back().timestamp;
      if (gap <= std::chrono::seconds{0}) throw ParseError(where + ": timestamps not increasing");
      if (gap != std::chrono::seconds{kStepSeconds}) throw ParseError(where + ": gap in 15-minute cadence");
    }
    double v[5];
    for (std::size_t c = 0; c < 5; ++c) {
      auto parsed = detail::parse_double(f[index[c + 1]]);
      if (!parsed) throw ParseError(where + ": bad value in column '" + required[c + 1] + "'");
      if (*parsed < ranges[c].lo || *parsed > ranges[c].hi) {
        throw ParseError(where + ": " + required[c + 1] + " = " + f[index[c + 1]] + " outside [" +
                         std::to_string(ranges[c].lo) + ", " + std::to_string(ranges[c].hi) + "]");
      }
      v[c] = *parsed;
    }
    out.push_back(WeatherRecord{*ts, v[0], v[1], v[2], v[3], v[4]});
  }
  if (out.empty()) throw ParseError("weather file has no records");
  return out;
}

// ---------------------------------------------------------------------------
// physics

double ventilation_flow(double open_area, double wind, double t_in, double t_out, double wind_coefficient,
                        double discharge_coefficient, double stack_height) {
  if (open_area < 0) throw ConfigError("ventilation_flow: open area must be non-negative");
  const double q_wind = wind_coefficient * open_area * std::abs(wind);
  const double q_stack = discharge_coefficient * open_area *
                         std::sqrt(2.0 * kGravity * stack_height * std::abs(t_in - t_out) / (t_in + 273.15));
  return std::hypot(q_wind, q_stack);
}

double solar_gain(const BuildingSpec& spec, std::size_t zone, const WeatherRecord& w) {
  if (!spec.has_window(zone)) return 0.0;
  const double hour = fractional_hour(w.timestamp);
  const double doy = day_of_year(w.timestamp);
  const double day_length = 12.0 + 5.0 * std::sin(2 * kPi * (doy - 80.0) / 365.0);
  const double sunrise = 12.0 - day_length / 2;
  double vertical = 0.5 * w.dhi;
  if (hour > sunrise && hour < sunrise + day_length) {
    const double frac = (hour - sunrise) / day_length;
    const double sun_azimuth = -90.0 + 180.0 * frac;
    const double max_elevation = 32.0 + 22.0 * std::sin(2 * kPi * (doy - 80.0) / 365.0);
    const double elevation = max_elevation * std::sin(kPi * frac);
    const double incidence = std::cos((sun_azimuth - spec.zones[zone].facade_azimuth) * kPi / 180.0) *
                             std::cos(elevation * kPi / 180.0);
    vertical += w.dni * std::max(0.0, incidence);
  }
  return spec.zones[zone].window_area * spec.solar_g_value * vertical;
}

namespace {

/// Linear balance C·dT/dt = constant − conductance·T plus bookkeeping for the audit.
struct Balance {
  double conductance = 0;
  double constant = 0;
  double vent_g = 0, env_g = 0;
  std::array<double, kZones> inter_g{};
  double solar = 0, internal = 0;
};

Balance passive_balance(const BuildingSpec& spec, std::size_t zone, double t_in, const ZoneDrivers& d) {
  Balance b;
  b.env_g = spec.envelope_conductance(zone);
  b.conductance += b.env_g;
  b.constant += b.env_g * d.t_out;
  for (std::size_t o = 0; o < kZones; ++o) {
    if (o == zone) continue;
    b.inter_g[o] = spec.interzone_conductance(zone, o);
    b.conductance += b.inter_g[o];
    b.constant += b.inter_g[o] * d.neighbor_t[o];
  }
  if (d.window_open && spec.has_window(zone)) {
    const double q = ventilation_flow(spec.window_open_area, d.wind, t_in, d.t_out, spec.wind_coefficient,
                                      spec.discharge_coefficient, spec.stack_height);
    b.vent_g = kAirDensity * kAirHeatCapacity * q;
    b.conductance += b.vent_g;
    b.constant += b.vent_g * d.t_out;
  }
  const bool shaded = d.t_out > spec.shade_threshold_c;
  b.solar = d.solar_gain_w * (shaded ? spec.shade_transmittance : 1.0);
  b.internal = d.internal_gain_w;
  b.constant += b.solar + b.internal;
  return b;
}

double thermostat_power(const BuildingSpec& spec, double t, const ZoneDrivers& d) {
  const double k = spec.thermostat_gain_w_per_k;
  if (t < d.heat_setpoint) return std::min(k * (d.heat_setpoint - t), spec.heating_capacity_w);
  if (t > d.cool_setpoint) return -std::min(k * (t - d.cool_setpoint), spec.cooling_capacity_w);
  return 0.0;
}

struct Solution {
  double t_end = 0, t_mean = 0;
};

Solution solve(double t0, double conductance, double constant, double capacitance, double dt) {
  const double t_inf = constant / conductance;
  const double x = conductance * dt / capacitance;
  const double decay = std::exp(-x);
  // (1 − e^{−x})/x, series near 0
  const double avg = x < 1e-8 ? 1.0 - x / 2 : -std::expm1(-x) / x;
  return Solution{t_inf + (t0 - t_inf) * decay, t_inf + (t0 - t_inf) * avg};
}

}  // namespace

double zone_derivative(const BuildingSpec& spec, std::size_t zone, double t_in, const ZoneDrivers& d) {
  const Balance b = passive_balance(spec, zone, t_in, d);
  return (b.constant - b.conductance * t_in + thermostat_power(spec, t_in, d)) / spec.capacitance(zone);
}

ZoneState step_zone(const BuildingSpec& spec, std::size_t zone, const ZoneState& state, const ZoneDrivers& d,
                    double dt, FluxAudit* audit) {
  if (!(dt > 0)) throw ConfigError("step_zone: dt must be positive");
  const double t0 = state.t_in;
  const double cap = spec.capacitance(zone);
  const Balance b = passive_balance(spec, zone, t0, d);
  const double k = spec.thermostat_gain_w_per_k;
  const double heat = d.heat_setpoint, cool = d.cool_setpoint;

  // The thermostat makes the right-hand side piecewise linear in T with
  // breakpoints below. The trajectory is monotone, so each piece is solved in
  // closed form up to the instant it reaches the next breakpoint.
  const std::array<double, 4> brk = {heat - spec.heating_capacity_w / k, heat, cool,
                                     cool + spec.cooling_capacity_w / k};
  auto piece = [&](int r) {
    // (conductance, constant) of region r
    switch (r) {
      case 0: return std::pair{b.conductance, b.constant + spec.heating_capacity_w};
      case 1: return std::pair{b.conductance + k, b.constant + k * heat};
      case 3: return std::pair{b.conductance + k, b.constant + k * cool};
      case 4: return std::pair{b.conductance, b.constant - spec.cooling_capacity_w};
      default: return std::pair{b.conductance, b.constant};
    }
  };
  auto hvac_integral = [&](int r, double tau, double t_int) {
    switch (r) {
      case 0: return spec.heating_capacity_w * tau;
      case 1: return k * (heat * tau - t_int);
      case 3: return k * (cool * tau - t_int);
      case 4: return -spec.cooling_capacity_w * tau;
      default: return 0.0;
    }
  };

  double t = t0, remaining = dt, t_int = 0.0, h_int = 0.0;
  const double f0 = b.constant - b.conductance * t0 + thermostat_power(spec, t0, d);
  const int dir = f0 > 0 ? 1 : (f0 < 0 ? -1 : 0);
  for (int guard = 0; guard < 8 && remaining > 0; ++guard) {
    int r = 0;
    for (double x : brk) r += dir > 0 ? (x <= t) : (x < t);
    const auto [g, c] = piece(r);
    const double t_inf = c / g;
    double bound = std::numeric_limits<double>::quiet_NaN();
    if (dir > 0 && r < 4) bound = brk[r];
    if (dir < 0 && r > 0) bound = brk[r - 1];
    const bool crosses = dir != 0 && !std::isnan(bound) && (dir > 0 ? t_inf > bound : t_inf < bound);
    double tau = remaining;
    if (crosses) {
      const double hit = cap / g * std::log((t - t_inf) / (bound - t_inf));
      if (hit < remaining) tau = std::max(0.0, hit);
    }
    const Solution seg = solve(t, g, c, cap, tau);
    t_int += seg.t_mean * tau;
    h_int += hvac_integral(r, tau, seg.t_mean * tau);
    t = tau < remaining ? bound : seg.t_end;
    remaining -= tau;
  }
  t_int += t * std::max(0.0, remaining);
  const Solution sol{t, t_int / dt};
  const double hvac = h_int / dt;

  if (!(sol.t_end >= -50.0 && sol.t_end <= 60.0)) {
    throw SimulationError("zone " + std::to_string(zone + 1) + " temperature diverged to " +
                          std::to_string(sol.t_end) + " C");
  }

  if (audit) {
    FluxAudit a;
    a.envelope = b.env_g * (d.t_out - sol.t_mean);
    for (std::size_t o = 0; o < kZones; ++o) {
      if (o != zone) a.interzone += b.inter_g[o] * (d.neighbor_t[o] - sol.t_mean);
    }
    a.ventilation = b.vent_g * (d.t_out - sol.t_mean);
    a.solar = b.solar;
    a.internal = b.internal;
    a.hvac = hvac;
    a.capacitance = cap;
    a.dt = dt;
    a.delta_t = sol.t_end - t0;
    *audit = a;
  }

  ZoneState next;
  next.t_in = sol.t_end;
  next.shade_active = d.t_out > spec.shade_threshold_c;
  next.window_open = d.window_open && spec.has_window(zone);
  next.hvac_power = hvac;
  return next;
}

// ---------------------------------------------------------------------------
// simulation

SimulatedDataset simulate(const BuildingSpec& spec, const Calendar& calendar,
                          const std::vector<WeatherRecord>& weather, const ScheduleSet& schedules,
                          const SetpointSeries& setpoints, const WindowSignals& windows,
                          const SimulationOptions& options, const AuditObserver& observer) {
  spec.validate();
  const std::size_t n = calendar.steps();
  auto check_len = [n](std::size_t len, const std::string& what) {
    if (len != n) {
      throw ConfigError("simulate: " + what + " has " + std::to_string(len) + " steps, calendar has " +
                        std::to_string(n));
    }
  };
  check_len(weather.size(), "weather");
  check_len(schedules.lighting.size(), "lighting schedule");
  check_len(schedules.holiday.size(), "holiday schedule");
  for (std::size_t z = 0; z < kZones; ++z) {
    check_len(schedules.occupancy[z].size(), "occupancy schedule");
    check_len(schedules.equipment[z].size(), "equipment schedule");
    check_len(setpoints.heating[z].size(), "heating setpoints");
    check_len(setpoints.cooling[z].size(), "cooling setpoints");
  }
  for (std::size_t w = 0; w < kWindows; ++w) check_len(windows.open[w].size(), "window signal");

  const double ratio = kStepSeconds / options.inner_step_s;
  const auto inner = static_cast<std::size_t>(std::lround(ratio));
  if (!(options.inner_step_s > 0) || inner == 0 || std::abs(ratio - static_cast<double>(inner)) > 1e-9) {
    throw ConfigError("simulate: inner step must divide 900 s");
  }
  const double dt = options.inner_step_s;

  std::vector<std::string> cols = dataset_columns();
  std::vector<std::vector<double>> data(cols.size(), std::vector<double>(n));
  auto col = [&](const std::string& name) -> std::vector<double>& {
    return data[static_cast<std::size_t>(std::find(cols.begin(), cols.end(), name) - cols.begin())];
  };
  std::vector<Timestamp> ts(n);

  std::array<ZoneState, kZones> states;
  for (auto& s : states) s.t_in = options.initial_t_in;

  // Hoisted column references.
  auto& c_tout = col("t_out");
  auto& c_hout = col("h_out");
  auto& c_wout = col("w_out");
  auto& c_lnorm = col("l_norm");
  auto& c_lhor = col("l_hor");
  auto& c_hol = col("hol");
  std::array<std::vector<double>*, kZones> c_occ{}, c_eq{}, c_heat{}, c_cool{}, c_tin{};
  std::array<std::vector<double>*, kWindows> c_ws{};
  for (std::size_t z = 0; z < kZones; ++z) {
    const std::string i = std::to_string(z + 1);
    c_occ[z] = &col("occu_" + i);
    c_eq[z] = &col("e_" + i);
    c_heat[z] = &col("sp_heat_" + i);
    c_cool[z] = &col("sp_cool_" + i);
    c_tin[z] = &col("t_in_" + i);
  }
  for (std::size_t w = 0; w < kWindows; ++w) c_ws[w] = &col("ws_" + std::to_string(w + 1));

  for (std::size_t k = 0; k < n; ++k) {
    const WeatherRecord& wx = weather[k];
    ts[k] = calendar.at(k);
    c_tout[k] = wx.t_out;
    c_hout[k] = wx.rh;
    c_wout[k] = wx.wind;
    c_lnorm[k] = wx.dni;
    c_lhor[k] = wx.dhi;
    c_hol[k] = schedules.holiday[k] ? 1.0 : 0.0;
    for (std::size_t w = 0; w < kWindows; ++w) (*c_ws[w])[k] = windows.open[w][k] ? 1.0 : 0.0;

    std::array<ZoneDrivers, kZones> drivers;
    for (std::size_t z = 0; z < kZones; ++z) {
      (*c_occ[z])[k] = schedules.occupancy[z][k];
      (*c_eq[z])[k] = schedules.equipment[z][k];
      (*c_heat[z])[k] = setpoints.heating[z][k];
      (*c_cool[z])[k] = setpoints.cooling[z][k];
      (*c_tin[z])[k] = states[z].t_in;

      ZoneDrivers& d = drivers[z];
      d.t_out = wx.t_out;
      d.wind = wx.wind;
      d.solar_gain_w = solar_gain(spec, z, wx);
      d.internal_gain_w = spec.occupant_gain_w * schedules.occupancy[z][k] + schedules.equipment[z][k] +
                          (schedules.lighting[k] ? spec.lighting_w_per_m2 * spec.zones[z].floor_area : 0.0);
      d.window_open = z < kWindows && windows.open[z][k];
      if (options.hvac_enabled) {
        d.heat_setpoint = setpoints.heating[z][k];
        d.cool_setpoint = setpoints.cooling[z][k];
      } else {
        d.heat_setpoint = -1e9;
        d.cool_setpoint = 1e9;
      }
    }

    for (std::size_t i = 0; i < inner; ++i) {
      std::array<double, kZones> temps{};
      for (std::size_t z = 0; z < kZones; ++z) temps[z] = states[z].t_in;
      for (std::size_t z = 0; z < kZones; ++z) {
        drivers[z].neighbor_t = temps;
        FluxAudit audit;
        try {
          states[z] = step_zone(spec, z, states[z], drivers[z], dt, observer ? &audit : nullptr);
        } catch (const SimulationError& e) {
          throw SimulationError(std::string(e.what()) + " at " + format_timestamp(ts[k]) + " (step " +
                                std::to_string(k) + ")");
        }
        if (observer) observer(k, z, audit);
      }
    }
  }
  return SimulatedDataset(std::move(ts), std::move(cols), std::move(data));
}

}  // namespace hvf::sim
