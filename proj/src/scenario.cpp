#include "splitbargain/scenario.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace splitbargain {

namespace {

// Sub-stream ids for generate_scenario; one per sampled family.
enum StreamId : std::uint64_t {
  kStreamFreq = 1,
  kStreamPrivacy = 2,
  kStreamPayoff = 3,
  kStreamPosition = 4,
};

void require(bool ok, const std::string& field, const std::string& what) {
  if (!ok) throw validation_error(field + ": " + what);
}

}  // namespace

double dbm_per_hz_to_watt(double dbm_per_hz) {
  return std::pow(10.0, (dbm_per_hz - 30.0) / 10.0);
}

double default_payload_bits(std::size_t batch_size, std::size_t cut_width) {
  return static_cast<double>(batch_size * cut_width * 32 + batch_size * 8);
}

double Scenario::device_distance_m(std::size_t k) const {
  const auto& p = devices.at(k).position_m;
  const auto s = server_position();
  return std::hypot(p[0] - s[0], p[1] - s[1]);
}

std::size_t Scenario::total_samples() const {
  std::size_t total = 0;
  for (const auto& d : devices) total += d.num_samples;
  return total;
}

void Scenario::validate() const {
  require(!devices.empty(), "n_devices", "must be >= 1");
  require(area_side_m > 0.0, "area_side_m", "must be > 0");
  require(pathloss_exponent > 0.0, "pathloss_exponent", "must be > 0");
  for (const auto& d : devices) {
    const std::string tag = "device " + std::to_string(d.id);
    require(d.cpu_freq_hz > 0.0, tag + " cpu_freq_hz", "must be > 0");
    require(d.cycles_per_sample > 0.0, tag + " cycles_per_sample", "must be > 0");
    require(d.num_samples >= 1, tag + " num_samples", "must be >= 1");
    require(d.tx_power_watt > 0.0, tag + " tx_power_watt", "must be > 0");
    require(d.payoff_rate > 0.0, tag + " payoff_rate", "must be > 0");
    require(d.privacy_weight > 0.0, tag + " privacy_weight", "must be > 0");
    for (double c : d.position_m)
      require(c >= 0.0 && c <= area_side_m, tag + " position_m", "must lie inside the area square");
  }
  require(server.cpu_freq_hz > 0.0, "server_cpu_freq_ghz", "must be > 0");
  require(server.cycles_per_sample > 0.0, "cycles_per_sample_server", "must be > 0");
  require(server.budget > 0.0, "budget", "must be > 0");
  require(server.time_energy_balance >= 0.0 && server.time_energy_balance <= 1.0, "gamma",
          "must be in [0, 1]");
  require(server.bandwidth_hz > 0.0, "bandwidth_mhz", "must be > 0");
  require(server.noise_psd_watt_per_hz > 0.0, "noise_dbm_per_hz", "must be > 0 in linear units");
  require(server.capacitance_coeff > 0.0, "kappa", "must be > 0");
  require(server.compute_scale > 0.0, "compute_scale", "must be > 0");
  require(server.local_steps >= 1, "local_steps", "must be >= 1");
  require(server.payload_bits_per_step > 0.0, "payload_bits_per_step", "must be > 0");
}

Scenario generate_scenario(const ScenarioSpec& spec) {
  if (spec.n_devices < 1) throw validation_error("n_devices: must be >= 1");
  for (const auto& [name, r] : {std::pair<const char*, Range>{"cpu_freq_ghz_range", spec.cpu_freq_hz},
                                {"privacy_weight_range", spec.privacy_weight},
                                {"payoff_rate_range", spec.payoff_rate}}) {
    if (!(r.lo <= r.hi)) throw validation_error(std::string(name) + ": low bound exceeds high bound");
    if (!(r.lo > 0.0)) throw validation_error(std::string(name) + ": must be > 0");
  }

  RngStream root(spec.seed);
  RngStream freq = root.derive(kStreamFreq);
  RngStream privacy = root.derive(kStreamPrivacy);
  RngStream payoff = root.derive(kStreamPayoff);
  RngStream position = root.derive(kStreamPosition);

  Scenario sc;
  sc.area_side_m = spec.area_side_m;
  sc.pathloss_exponent = spec.pathloss_exponent;
  sc.rng_seed = spec.seed;

  sc.server.cpu_freq_hz = spec.server_cpu_freq_hz;
  sc.server.cycles_per_sample = spec.cycles_per_sample_server;
  sc.server.budget = spec.budget;
  sc.server.time_energy_balance = spec.gamma;
  sc.server.bandwidth_hz = spec.bandwidth_hz;
  sc.server.noise_psd_watt_per_hz = spec.noise_psd_watt_per_hz;
  sc.server.capacitance_coeff = spec.kappa;
  sc.server.compute_scale = spec.compute_scale;
  sc.server.local_steps = spec.local_steps;
  sc.server.payload_bits_per_step = spec.payload_bits_per_step;

  sc.devices.resize(spec.n_devices);
  for (std::size_t k = 0; k < spec.n_devices; ++k) {
    DeviceProfile& d = sc.devices[k];
    d.id = static_cast<int>(k);
    d.cpu_freq_hz = freq.uniform(spec.cpu_freq_hz.lo, spec.cpu_freq_hz.hi);
    d.privacy_weight = privacy.uniform(spec.privacy_weight.lo, spec.privacy_weight.hi);
    d.payoff_rate = payoff.uniform(spec.payoff_rate.lo, spec.payoff_rate.hi);
    d.position_m = {position.uniform(0.0, spec.area_side_m),
                    position.uniform(0.0, spec.area_side_m)};
    d.cycles_per_sample = spec.cycles_per_sample_device;
    d.num_samples = spec.samples_per_device;
    d.tx_power_watt = spec.tx_power_watt;
  }

  sc.validate();
  return sc;
}

namespace {

struct ConfigEntry {
  std::string value;
  int line = 0;
};

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  std::size_t b = s.find_last_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  return s.substr(a, b - a + 1);
}

double parse_number(const std::string& key, const ConfigEntry& e) {
  std::size_t pos = 0;
  double v;
  try {
    v = std::stod(e.value, &pos);
  } catch (const std::exception&) {
    throw parse_error("line " + std::to_string(e.line) + ": key '" + key +
                      "' has non-numeric value '" + e.value + "'");
  }
  if (trim(e.value.substr(pos)) != "")
    throw parse_error("line " + std::to_string(e.line) + ": key '" + key +
                      "' has trailing junk in value '" + e.value + "'");
  return v;
}

Range parse_range(const std::string& key, const ConfigEntry& e) {
  std::string v = e.value;
  for (char& c : v)
    if (c == ',') c = ' ';
  std::istringstream in(v);
  Range r;
  std::string rest;
  if (!(in >> r.lo >> r.hi) || (in >> rest))
    throw parse_error("line " + std::to_string(e.line) + ": key '" + key +
                      "' expects two numbers (low high), got '" + e.value + "'");
  return r;
}

std::string format_g(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

ScenarioSpec load_scenario_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw parse_error("cannot open scenario config: " + path.string());

  std::map<std::string, ConfigEntry> kv;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string s = trim(line);
    if (s.empty() || s[0] == '#' || s[0] == ';') continue;
    if (s.front() == '[') {
      if (s.back() != ']')
        throw parse_error("line " + std::to_string(lineno) + ": unterminated section header");
      continue;  // sections are organizational only; keys are globally unique
    }
    std::size_t eq = s.find('=');
    if (eq == std::string::npos)
      throw parse_error("line " + std::to_string(lineno) + ": expected 'key = value', got '" + s + "'");
    std::string key = trim(s.substr(0, eq));
    std::string value = trim(s.substr(eq + 1));
    if (key.empty() || value.empty())
      throw parse_error("line " + std::to_string(lineno) + ": empty key or value");
    if (kv.count(key))
      throw parse_error("line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    kv[key] = {value, lineno};
  }
  if (kv.empty()) throw parse_error("empty scenario config: " + path.string());

  ScenarioSpec spec;
  auto take = [&kv](const std::string& key) -> const ConfigEntry* {
    auto it = kv.find(key);
    return it == kv.end() ? nullptr : &it->second;
  };

  if (const auto* e = take("seed")) spec.seed = static_cast<std::uint64_t>(parse_number("seed", *e));
  if (const auto* e = take("n_devices")) {
    double n = parse_number("n_devices", *e);
    if (n < 1) throw validation_error("n_devices: must be >= 1");
    spec.n_devices = static_cast<std::size_t>(n);
  }
  if (const auto* e = take("area_side_m")) spec.area_side_m = parse_number("area_side_m", *e);
  if (const auto* e = take("pathloss_exponent"))
    spec.pathloss_exponent = parse_number("pathloss_exponent", *e);
  if (const auto* e = take("cpu_freq_ghz_range")) {
    Range r = parse_range("cpu_freq_ghz_range", *e);
    spec.cpu_freq_hz = {r.lo * 1e9, r.hi * 1e9};
  }
  if (const auto* e = take("privacy_weight_range"))
    spec.privacy_weight = parse_range("privacy_weight_range", *e);
  if (const auto* e = take("payoff_rate_range")) spec.payoff_rate = parse_range("payoff_rate_range", *e);
  if (const auto* e = take("tx_power_mw")) spec.tx_power_watt = parse_number("tx_power_mw", *e) * 1e-3;
  if (const auto* e = take("cycles_per_sample_device"))
    spec.cycles_per_sample_device = parse_number("cycles_per_sample_device", *e);
  if (const auto* e = take("cycles_per_sample_server"))
    spec.cycles_per_sample_server = parse_number("cycles_per_sample_server", *e);
  if (const auto* e = take("server_cpu_freq_ghz"))
    spec.server_cpu_freq_hz = parse_number("server_cpu_freq_ghz", *e) * 1e9;
  if (const auto* e = take("budget")) spec.budget = parse_number("budget", *e);
  if (const auto* e = take("gamma")) {
    spec.gamma = parse_number("gamma", *e);
    if (spec.gamma < 0.0 || spec.gamma > 1.0) throw validation_error("gamma: must be in [0, 1]");
  }
  if (const auto* e = take("bandwidth_mhz"))
    spec.bandwidth_hz = parse_number("bandwidth_mhz", *e) * 1e6;
  if (const auto* e = take("noise_dbm_per_hz"))
    spec.noise_psd_watt_per_hz = dbm_per_hz_to_watt(parse_number("noise_dbm_per_hz", *e));
  if (const auto* e = take("kappa")) spec.kappa = parse_number("kappa", *e);
  if (const auto* e = take("compute_scale")) {
    spec.compute_scale = parse_number("compute_scale", *e);
    if (spec.compute_scale <= 0.0) throw validation_error("compute_scale: must be > 0");
  }
  if (const auto* e = take("local_steps")) {
    double v = parse_number("local_steps", *e);
    if (v < 1) throw validation_error("local_steps: must be >= 1");
    spec.local_steps = static_cast<int>(v);
  }

  static const char* known[] = {
      "seed",          "n_devices",          "area_side_m",        "pathloss_exponent",
      "cpu_freq_ghz_range", "privacy_weight_range", "payoff_rate_range", "tx_power_mw",
      "cycles_per_sample_device", "cycles_per_sample_server", "server_cpu_freq_ghz",
      "budget",        "gamma",              "bandwidth_mhz",      "noise_dbm_per_hz",
      "kappa",         "compute_scale",      "local_steps"};
  for (const auto& [key, entry] : kv) {
    bool ok = false;
    for (const char* k : known)
      if (key == k) ok = true;
    if (!ok)
      throw parse_error("line " + std::to_string(entry.line) + ": unknown key '" + key + "'");
  }
  return spec;
}

Scenario load_scenario(const std::filesystem::path& path) {
  return generate_scenario(load_scenario_spec(path));
}

void save_scenario_spec(const ScenarioSpec& spec, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw parse_error("cannot write scenario config: " + path.string());
  out << "seed = " << spec.seed << "\n\n";
  out << "[area]\n";
  out << "area_side_m = " << format_g(spec.area_side_m) << "\n";
  out << "pathloss_exponent = " << format_g(spec.pathloss_exponent) << "\n\n";
  out << "[devices]\n";
  out << "n_devices = " << spec.n_devices << "\n";
  out << "cpu_freq_ghz_range = " << format_g(spec.cpu_freq_hz.lo / 1e9) << " "
      << format_g(spec.cpu_freq_hz.hi / 1e9) << "\n";
  out << "privacy_weight_range = " << format_g(spec.privacy_weight.lo) << " "
      << format_g(spec.privacy_weight.hi) << "\n";
  out << "payoff_rate_range = " << format_g(spec.payoff_rate.lo) << " "
      << format_g(spec.payoff_rate.hi) << "\n";
  out << "tx_power_mw = " << format_g(spec.tx_power_watt * 1e3) << "\n";
  out << "cycles_per_sample_device = " << format_g(spec.cycles_per_sample_device) << "\n\n";
  out << "[server]\n";
  out << "server_cpu_freq_ghz = " << format_g(spec.server_cpu_freq_hz / 1e9) << "\n";
  out << "cycles_per_sample_server = " << format_g(spec.cycles_per_sample_server) << "\n";
  out << "budget = " << format_g(spec.budget) << "\n";
  out << "gamma = " << format_g(spec.gamma) << "\n";
  out << "bandwidth_mhz = " << format_g(spec.bandwidth_hz / 1e6) << "\n";
  out << "noise_dbm_per_hz = " << format_g(10.0 * std::log10(spec.noise_psd_watt_per_hz) + 30.0)
      << "\n";
  out << "kappa = " << format_g(spec.kappa) << "\n";
  if (spec.compute_scale != 1.0)
    out << "compute_scale = " << format_g(spec.compute_scale) << "\n";
  out << "local_steps = " << spec.local_steps << "\n";
}

}  // namespace splitbargain
