#include "splitbargain/cli.hpp"

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <json.hpp>

#include "splitbargain/bargaining.hpp"
#include "splitbargain/data.hpp"
#include "splitbargain/errors.hpp"
#include "splitbargain/nn.hpp"
#include "splitbargain/sltrain.hpp"
#include "splitbargain/wireless.hpp"

namespace splitbargain::cli {

namespace {

using nlohmann::json;

std::string format_g(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<std::size_t> parse_widths(const std::string& csv) {
  std::vector<std::size_t> widths;
  std::size_t pos = 0;
  while (pos < csv.size()) {
    std::size_t comma = csv.find(',', pos);
    if (comma == std::string::npos) comma = csv.size();
    const std::string tok = csv.substr(pos, comma - pos);
    if (!tok.empty()) widths.push_back(static_cast<std::size_t>(std::stoul(tok)));
    pos = comma + 1;
  }
  return widths;
}

struct CommonOpts {
  std::string out_dir;
  std::string log_level = "info";
  bool seed_set = false;
  std::uint64_t seed = 0;
  bool verbose() const { return log_level != "quiet"; }

  std::filesystem::path resolve(const std::string& path) const {
    std::filesystem::path p(path);
    if (!out_dir.empty() && p.is_relative()) return std::filesystem::path(out_dir) / p;
    return p;
  }
};

struct ArchOpts {
  std::size_t input_width = kDefaultInputWidth;
  std::string hidden_csv;
  std::size_t n_classes = kDefaultClasses;

  ModelConfig model_config() const {
    ModelConfig cfg;
    cfg.input_width = input_width;
    cfg.n_classes = n_classes;
    if (!hidden_csv.empty()) cfg.hidden_widths = parse_widths(hidden_csv);
    return cfg;
  }
};

void add_arch(CLI::App* cmd, ArchOpts& arch) {
  cmd->add_option("--input-width", arch.input_width, "Model input width");
  cmd->add_option("--hidden", arch.hidden_csv, "Comma-separated hidden block widths");
  cmd->add_option("--classes", arch.n_classes, "Number of output classes");
}

std::vector<double> taus_for(const Scenario& scenario, std::size_t n_samples) {
  RngStream rng = RngStream(scenario.rng_seed).derive(0x746175);  // channel stream family
  return expected_upload_times(scenario, n_samples, rng);
}

void write_trace_csv(const BargainingOutcome& outcome, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw validation_error("cannot write CSV: " + path.string());
  out << "iteration,beta,feasible,witness_alpha\n";
  for (const TraceEntry& t : outcome.trace) {
    out << t.iteration << "," << format_g(t.beta) << "," << (t.feasible ? 1 : 0) << ",";
    if (t.witness_alpha) out << format_g(*t.witness_alpha);
    out << "\n";
  }
}

void print_outcome(const BargainingOutcome& outcome, std::size_t cut,
                   std::span<const std::size_t> counts) {
  std::size_t device_params = 0;
  std::size_t total = 0;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    total += counts[c];
    if (c <= cut) device_params += counts[c];
  }
  std::cout << "beta_star = " << format_g(outcome.beta_star) << "\n";
  std::cout << "alpha_star = " << format_g(outcome.alpha_star) << "\n";
  std::cout << "cut_layer = C" << cut << " (device-side parameters " << device_params << " of "
            << total << ")\n";
  std::cout << "iterations = " << outcome.iterations << "\n";
  for (std::size_t k = 0; k < outcome.utilities_at_alpha.device_utilities.size(); ++k)
    std::cout << "utility_device_" << k << " = "
              << format_g(outcome.utilities_at_alpha.device_utilities[k]) << "\n";
  std::cout << "utility_server = " << format_g(outcome.utilities_at_alpha.server_utility) << "\n";
}

// ---- gen-data manifest ------------------------------------------------------

struct ManifestData {
  Dataset train;
  Dataset val;
  Partition train_partition;
  Partition val_partition;
  std::size_t input_width = 0;
  std::size_t n_classes = 0;
};

// Rebuilds the datasets and partitions a manifest describes. Everything is
// regenerated from seeds, so the manifest stays small; checksums guard against
// recipe drift.
ManifestData materialize(const json& m, bool verify) {
  ManifestData out;
  const std::uint64_t seed = m.at("seed").get<std::uint64_t>();
  const std::size_t n_devices = m.at("n_devices").get<std::size_t>();
  const auto& part = m.at("partition");

  if (m.at("type") == "synthetic") {
    const auto& syn = m.at("synthetic");
    const std::size_t train_total = syn.at("train_samples").get<std::size_t>();
    const std::size_t val_total = syn.at("val_samples").get<std::size_t>();
    const std::size_t classes = syn.at("n_classes").get<std::size_t>();
    const std::size_t width = syn.at("input_width").get<std::size_t>();
    const double margin = syn.at("margin").get<double>();
    const Dataset pool = synth_dataset(train_total + val_total, classes, width,
                                       RngStream::splitmix64(seed), margin);
    TrainValTest split = split_train_val_test(pool, {train_total, val_total, 0},
                                              RngStream::splitmix64(seed + 1));
    out.train = std::move(split.train);
    out.val = std::move(split.val);
    out.input_width = width;
    out.n_classes = classes;
  } else if (m.at("type") == "idx") {
    const auto& idx = m.at("idx");
    const Dataset full = read_idx(idx.at("train_images").get<std::string>(),
                                  idx.at("train_labels").get<std::string>());
    const std::size_t train_take = idx.at("train_take").get<std::size_t>();
    const std::size_t val_take = idx.at("val_take").get<std::size_t>();
    TrainValTest split =
        split_train_val_test(full, {train_take, val_take, 0}, RngStream::splitmix64(seed + 1));
    out.train = std::move(split.train);
    out.val = std::move(split.val);
    out.input_width = out.train.width;
    out.n_classes = static_cast<std::size_t>(out.train.n_classes());
  } else {
    throw parse_error("manifest: unknown type '" + m.at("type").get<std::string>() + "'");
  }

  const std::size_t major_per_device = part.at("major_per_device").get<std::size_t>();
  const double major_frac = part.at("major_frac").get<double>();
  const double minor_frac = part.at("minor_frac").get<double>();
  out.train_partition = partition_noniid(out.train, n_devices, major_per_device, major_frac,
                                         minor_frac, RngStream::splitmix64(seed + 2));
  out.val_partition = partition_with_majors(out.val, out.train_partition.device_major_labels,
                                            out.train_partition.n_labels, major_frac, minor_frac,
                                            RngStream::splitmix64(seed + 3));

  if (verify && m.contains("checksums")) {
    const auto& sums = m.at("checksums");
    auto check = [&](const char* key, std::uint64_t actual) {
      const auto expected = std::stoull(sums.at(key).get<std::string>(), nullptr, 16);
      if (expected != actual)
        throw validation_error(std::string("manifest checksum mismatch for ") + key +
                               "; the data recipe no longer reproduces the recorded bytes");
    };
    check("train_dataset", dataset_checksum(out.train));
    check("val_dataset", dataset_checksum(out.val));
    check("train_partition", partition_checksum(out.train_partition));
    check("val_partition", partition_checksum(out.val_partition));
  }
  return out;
}

std::string hex64(std::uint64_t v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// ---- subcommands ------------------------------------------------------------

int run_gen_scenario(const ScenarioSpec& spec, const CommonOpts& opts, const std::string& out) {
  generate_scenario(spec);  // validate before writing
  const auto path = opts.resolve(out);
  save_scenario_spec(spec, path);
  if (opts.verbose()) std::cerr << "wrote scenario config to " << path << "\n";
  return 0;
}

struct GenDataOpts {
  bool synthetic = false;
  std::size_t samples_per_device = 2000;
  std::size_t val_per_device = 400;
  std::size_t input_width = 32;
  std::size_t n_classes = 10;
  double margin = 1.0;
  std::string idx_train_images, idx_train_labels;
  std::size_t train_take = 55000;
  std::size_t val_take = 5000;
  std::size_t major_per_device = 2;
  double major_frac = 0.40;
  double minor_frac = 0.05;
  std::uint64_t seed = 1;
  std::string scenario_path;
  std::string out = "data_manifest.json";
};

int run_gen_data(const GenDataOpts& g, const CommonOpts& opts) {
  const Scenario scenario = load_scenario(g.scenario_path);
  const std::size_t n_devices = scenario.n_devices();

  json m;
  m["seed"] = g.seed;
  m["n_devices"] = n_devices;
  m["partition"] = {{"major_per_device", g.major_per_device},
                    {"major_frac", g.major_frac},
                    {"minor_frac", g.minor_frac}};
  if (g.synthetic) {
    m["type"] = "synthetic";
    m["synthetic"] = {{"train_samples", g.samples_per_device * n_devices},
                      {"val_samples", g.val_per_device * n_devices},
                      {"n_classes", g.n_classes},
                      {"input_width", g.input_width},
                      {"margin", g.margin}};
  } else {
    if (g.idx_train_images.empty() || g.idx_train_labels.empty())
      throw validation_error("gen-data needs --synthetic or both --idx-images and --idx-labels");
    m["type"] = "idx";
    m["idx"] = {{"train_images", g.idx_train_images},
                {"train_labels", g.idx_train_labels},
                {"train_take", g.train_take},
                {"val_take", g.val_take}};
  }

  const ManifestData data = materialize(m, /*verify=*/false);
  m["checksums"] = {{"train_dataset", hex64(dataset_checksum(data.train))},
                    {"val_dataset", hex64(dataset_checksum(data.val))},
                    {"train_partition", hex64(partition_checksum(data.train_partition))},
                    {"val_partition", hex64(partition_checksum(data.val_partition))}};
  m["device_train_counts"] = data.train_partition.device_sample_counts();
  m["device_val_counts"] = data.val_partition.device_sample_counts();

  const auto path = opts.resolve(g.out);
  std::ofstream out(path);
  if (!out) throw validation_error("cannot write manifest: " + path.string());
  out << m.dump(2) << "\n";
  if (opts.verbose()) std::cerr << "wrote data manifest to " << path << "\n";
  return 0;
}

struct KsbsOpts {
  std::string scenario_path;
  double epsilon = 1e-6;
  std::string trace_out;
  std::size_t tau_samples = 100000;
  std::string delay_mode = "max";
};

CommDelayMode parse_delay_mode(const std::string& s) {
  if (s == "max") return CommDelayMode::kSlowestDevice;
  if (s == "mean") return CommDelayMode::kMeanOverDevices;
  throw validation_error("delay mode: expected 'max' or 'mean', got '" + s + "'");
}

Scenario load_with_seed(const std::string& path, const CommonOpts& opts) {
  ScenarioSpec spec = load_scenario_spec(path);
  if (opts.seed_set) spec.seed = opts.seed;
  return generate_scenario(spec);
}

int run_ksbs(const KsbsOpts& k, const ArchOpts& arch, const CommonOpts& opts) {
  const Scenario scenario = load_with_seed(k.scenario_path, opts);
  const std::vector<double> taus = taus_for(scenario, k.tau_samples);
  const BargainingProblem problem =
      make_problem(scenario, taus, k.epsilon, parse_delay_mode(k.delay_mode));
  const BargainingOutcome outcome = solve_ksbs(problem);

  const ModelConfig model_cfg = arch.model_config();
  const ModelParams model =
      build_model(model_cfg.input_width, model_cfg.hidden_widths, model_cfg.n_classes, 0);
  const std::vector<std::size_t> counts = model.layer_param_counts();
  const std::size_t cut = cut_layer_from_alpha(outcome.alpha_star, counts);
  print_outcome(outcome, cut, counts);

  if (!k.trace_out.empty()) {
    const auto path = opts.resolve(k.trace_out);
    write_trace_csv(outcome, path);
    if (opts.verbose()) std::cerr << "wrote bisection trace to " << path << "\n";
  }
  return 0;
}

int run_sweep(const KsbsOpts& k, const ArchOpts& arch, const CommonOpts& opts,
              const std::string& out) {
  const Scenario scenario = load_with_seed(k.scenario_path, opts);
  const std::vector<double> taus = taus_for(scenario, k.tau_samples);
  const ModelConfig model_cfg = arch.model_config();
  const ModelParams model =
      build_model(model_cfg.input_width, model_cfg.hidden_widths, model_cfg.n_classes, 0);
  const SweepResult sweep =
      sweep_utilities(scenario, model.layer_param_counts(), taus, parse_delay_mode(k.delay_mode));

  const auto path = opts.resolve(out);
  std::ofstream file(path);
  if (!file) throw validation_error("cannot write CSV: " + path.string());
  file << "cut_index,alpha,sum_utility,server_utility\n";
  for (const SweepEntry& e : sweep.entries)
    file << e.cut_index << "," << format_g(e.alpha) << "," << format_g(e.sum_utility) << ","
         << format_g(e.utilities.server_utility) << "\n";
  if (opts.verbose()) std::cerr << "wrote utility sweep to " << path << "\n";
  return 0;
}

struct TrainOpts {
  std::string algo = "personalized";
  std::string scenario_path;
  std::string data_manifest;
  std::string cut = "auto";
  std::size_t rounds = 30;
  std::size_t batch_size = 256;
  double learning_rate = 0.01;
  std::uint64_t seed = 1;
  std::size_t tau_samples = 100000;
  std::string out = "training.csv";
};

int run_train(const TrainOpts& t, const ArchOpts& arch, const CommonOpts& opts) {
  Scenario scenario = load_with_seed(t.scenario_path, opts);

  std::ifstream mf(t.data_manifest);
  if (!mf) throw parse_error("cannot open data manifest: " + t.data_manifest);
  json manifest = json::parse(mf);
  const ManifestData data = materialize(manifest, /*verify=*/true);
  if (data.train_partition.n_devices() != scenario.n_devices())
    throw validation_error("manifest device count does not match scenario n_devices");

  // The bargaining and time models see the partition's actual per-device counts.
  const std::vector<std::size_t> counts = data.train_partition.device_sample_counts();
  for (std::size_t k = 0; k < scenario.n_devices(); ++k)
    scenario.devices[k].num_samples = counts[k];

  ModelConfig model_cfg = arch.model_config();
  if (model_cfg.input_width != data.input_width)
    throw validation_error("architecture input width " + std::to_string(model_cfg.input_width) +
                           " does not match dataset width " + std::to_string(data.input_width));
  const ModelParams model =
      build_model(model_cfg.input_width, model_cfg.hidden_widths, model_cfg.n_classes, t.seed);

  const std::vector<double> taus = taus_for(scenario, t.tau_samples);
  std::size_t cut_index;
  if (t.cut == "auto") {
    const BargainingProblem problem = make_problem(scenario, taus);
    const BargainingOutcome outcome = solve_ksbs(problem);
    const std::vector<std::size_t> layer_counts = model.layer_param_counts();
    cut_index = cut_layer_from_alpha(outcome.alpha_star, layer_counts);
    print_outcome(outcome, cut_index, layer_counts);
    const auto out_path = opts.resolve(t.out);
    auto trace_path = out_path;
    trace_path.replace_extension();
    trace_path += "_ksbs.csv";
    write_trace_csv(outcome, trace_path);
    if (opts.verbose()) std::cerr << "wrote bisection trace to " << trace_path << "\n";
  } else {
    cut_index = static_cast<std::size_t>(std::stoul(t.cut));
  }

  const std::vector<DeviceData> device_data =
      bind_partitions(data.train, data.train_partition, data.val, data.val_partition);
  TrainConfig cfg;
  cfg.rounds = t.rounds;
  cfg.batch_size = t.batch_size;
  cfg.adam.learning_rate = t.learning_rate;
  cfg.seed = t.seed;

  TrainingRecord record;
  if (t.algo == "personalized")
    record = train_personalized(scenario, device_data, model_cfg, cut_index, cfg, taus);
  else if (t.algo == "splitfed")
    record = train_splitfed(scenario, device_data, model_cfg, cut_index, cfg, taus);
  else
    throw validation_error("algo: expected 'personalized' or 'splitfed', got '" + t.algo + "'");

  const auto path = opts.resolve(t.out);
  record.write_csv(path);
  if (opts.verbose()) {
    const RoundMetrics& last = record.rounds.back();
    std::cerr << "wrote " << record.rounds.size() << " rounds to " << path
              << " (final mean_val_acc " << last.mean_val_acc << ")\n";
  }
  return 0;
}

int run_report(const std::vector<std::string>& files) {
  for (const std::string& file : files) {
    std::ifstream in(file);
    if (!in) throw parse_error("cannot open CSV: " + file);
    std::string header;
    if (!std::getline(in, header)) throw parse_error(file + ": empty CSV");

    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::vector<double> row;
      std::size_t pos = 0;
      while (pos <= line.size()) {
        std::size_t comma = line.find(',', pos);
        if (comma == std::string::npos) comma = line.size();
        row.push_back(std::stod(line.substr(pos, comma - pos)));
        pos = comma + 1;
      }
      rows.push_back(std::move(row));
    }
    if (rows.empty()) throw parse_error(file + ": no data rows");

    // Layout written by train: round, global_loss, mean_val_acc, ..., sim_time_s.
    double best_acc = 0.0;
    double total_time = 0.0;
    for (const auto& row : rows) {
      best_acc = std::max(best_acc, row[2]);
      total_time += row.back();
    }
    const auto& last = rows.back();
    std::cout << file << ": rounds=" << rows.size() << " final_loss=" << format_g(last[1])
              << " final_acc=" << format_g(last[2]) << " best_acc=" << format_g(best_acc)
              << " total_sim_time_s=" << format_g(total_time) << "\n";
  }
  return 0;
}

}  // namespace

SweepResult sweep_utilities(const Scenario& scenario,
                            std::span<const std::size_t> layer_param_counts,
                            std::span<const double> expected_taus, CommDelayMode mode) {
  if (layer_param_counts.empty()) throw validation_error("layer_param_counts: must not be empty");
  double total = 0.0;
  for (std::size_t c : layer_param_counts) total += static_cast<double>(c);

  SweepResult result;
  double cumulative = 0.0;
  for (std::size_t c = 0; c < layer_param_counts.size(); ++c) {
    cumulative += static_cast<double>(layer_param_counts[c]);
    SweepEntry entry;
    entry.cut_index = c;
    entry.alpha = cumulative / total;
    entry.utilities = utilities_at(SplitFraction{entry.alpha}, scenario, expected_taus, mode);
    entry.sum_utility = entry.utilities.server_utility;
    for (double u : entry.utilities.device_utilities) entry.sum_utility += u;
    result.entries.push_back(std::move(entry));
  }
  return result;
}

int dispatch(int argc, const char* const* argv) {
  CLI::App app{"Bargained split-learning simulator"};
  app.require_subcommand(1);

  CommonOpts common;
  auto* seed_opt =
      app.add_option("--seed", common.seed, "Seed override applied to every subcommand");
  app.add_option("--out-dir", common.out_dir, "Directory prefixed to relative output paths");
  app.add_option("--log-level", common.log_level, "quiet|info")->default_val("info");

  // gen-scenario
  auto* gen_scenario = app.add_subcommand("gen-scenario", "Write a scenario config file");
  ScenarioSpec spec;
  std::string gen_out = "scenario.cfg";
  double freq_lo_ghz = 1.5, freq_hi_ghz = 2.4;
  double tx_mw = 100.0, bw_mhz = 10.0, noise_dbm = -174.0;
  gen_scenario->fallthrough();
  gen_scenario->add_option("--n-devices", spec.n_devices, "Number of devices");
  gen_scenario->add_option("--area-side-m", spec.area_side_m, "Square side length, meters");
  gen_scenario->add_option("--pathloss-exponent", spec.pathloss_exponent, "Path loss exponent");
  gen_scenario->add_option("--cpu-freq-ghz-lo", freq_lo_ghz, "Device CPU frequency range low, GHz");
  gen_scenario->add_option("--cpu-freq-ghz-hi", freq_hi_ghz, "Device CPU frequency range high, GHz");
  gen_scenario->add_option("--privacy-lo", spec.privacy_weight.lo, "Privacy weight range low");
  gen_scenario->add_option("--privacy-hi", spec.privacy_weight.hi, "Privacy weight range high");
  gen_scenario->add_option("--payoff-lo", spec.payoff_rate.lo, "Payoff rate range low");
  gen_scenario->add_option("--payoff-hi", spec.payoff_rate.hi, "Payoff rate range high");
  gen_scenario->add_option("--tx-power-mw", tx_mw, "Transmit power, mW");
  gen_scenario->add_option("--bandwidth-mhz", bw_mhz, "Per-device bandwidth, MHz");
  gen_scenario->add_option("--noise-dbm-per-hz", noise_dbm, "Noise PSD, dBm/Hz");
  gen_scenario->add_option("--kappa", spec.kappa, "CPU capacitance coefficient");
  gen_scenario->add_option("--cycles-device", spec.cycles_per_sample_device,
                           "Device CPU cycles per sample");
  gen_scenario->add_option("--cycles-server", spec.cycles_per_sample_server,
                           "Server CPU cycles per sample");
  gen_scenario->add_option("--server-freq-ghz", spec.server_cpu_freq_hz,
                           "Server CPU frequency, GHz (converted)");
  gen_scenario->add_option("--budget", spec.budget, "Server budget B");
  gen_scenario->add_option("--gamma", spec.gamma, "Energy/time balance in [0,1]");
  gen_scenario->add_option("--local-steps", spec.local_steps, "Local steps per global round");
  gen_scenario->add_option("--out", gen_out, "Output config path");

  // gen-data
  auto* gen_data = app.add_subcommand("gen-data", "Build datasets/partitions and write a manifest");
  GenDataOpts gd;
  gen_data->add_flag("--synthetic", gd.synthetic, "Generate the synthetic clustered dataset");
  gen_data->add_option("--samples-per-device", gd.samples_per_device, "Train samples per device");
  gen_data->add_option("--val-per-device", gd.val_per_device, "Validation samples per device");
  gen_data->add_option("--input-width", gd.input_width, "Synthetic feature width");
  gen_data->add_option("--classes", gd.n_classes, "Synthetic class count");
  gen_data->add_option("--margin", gd.margin, "Synthetic cluster separation margin");
  gen_data->add_option("--idx-images", gd.idx_train_images, "IDX training images path");
  gen_data->add_option("--idx-labels", gd.idx_train_labels, "IDX training labels path");
  gen_data->add_option("--train-take", gd.train_take, "IDX samples used for training");
  gen_data->add_option("--val-take", gd.val_take, "IDX samples used for validation");
  gen_data->add_option("--major-per-device", gd.major_per_device, "Major labels per device");
  gen_data->add_option("--major-frac", gd.major_frac, "Nominal share of each major label");
  gen_data->add_option("--minor-frac", gd.minor_frac, "Nominal share of each minor label");
  gen_data->fallthrough();
  gen_data->add_option("--scenario", gd.scenario_path, "Scenario config path")->required();
  gen_data->add_option("--out", gd.out, "Output manifest path");

  // ksbs
  auto* ksbs = app.add_subcommand("ksbs", "Solve the bargaining game for the cut layer");
  KsbsOpts ko;
  ArchOpts ksbs_arch;
  ksbs->add_option("--scenario", ko.scenario_path, "Scenario config path")->required();
  ksbs->add_option("--epsilon", ko.epsilon, "Bisection tolerance");
  ksbs->add_option("--trace", ko.trace_out, "Write the bisection trace CSV here");
  ksbs->add_option("--tau-samples", ko.tau_samples, "Monte Carlo draws per device for E[tau]");
  ksbs->add_option("--delay-mode", ko.delay_mode, "Uplink delay aggregation: max|mean");
  add_arch(ksbs, ksbs_arch);
  ksbs->fallthrough();

  // sweep
  auto* sweep = app.add_subcommand("sweep", "Sum of utilities at every cut layer");
  KsbsOpts so;
  ArchOpts sweep_arch;
  std::string sweep_out = "sweep.csv";
  sweep->add_option("--scenario", so.scenario_path, "Scenario config path")->required();
  sweep->add_option("--tau-samples", so.tau_samples, "Monte Carlo draws per device for E[tau]");
  sweep->add_option("--delay-mode", so.delay_mode, "Uplink delay aggregation: max|mean");
  sweep->add_option("--out", sweep_out, "Output CSV path");
  add_arch(sweep, sweep_arch);
  sweep->fallthrough();

  // train
  auto* train = app.add_subcommand("train", "Run split training and record metrics");
  TrainOpts to;
  ArchOpts train_arch;
  train->add_option("--algo", to.algo, "personalized|splitfed");
  train->add_option("--scenario", to.scenario_path, "Scenario config path")->required();
  train->add_option("--data", to.data_manifest, "Data manifest path")->required();
  train->add_option("--cut", to.cut, "Cut layer index or 'auto' (bargained)");
  train->add_option("--rounds", to.rounds, "Global rounds");
  train->add_option("--batch-size", to.batch_size, "Mini-batch size");
  train->add_option("--lr", to.learning_rate, "Adam learning rate");
  train->add_option("--tau-samples", to.tau_samples, "Monte Carlo draws per device for E[tau]");
  train->add_option("--out", to.out, "Output training CSV path");
  add_arch(train, train_arch);
  train->fallthrough();

  // report
  auto* report = app.add_subcommand("report", "Summarize training CSVs");
  report->fallthrough();
  std::vector<std::string> report_files;
  report->add_option("--in", report_files, "Training CSV paths")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help() << "\n";
    return 2;
  }

  common.seed_set = seed_opt->count() > 0;
  if (common.seed_set) {
    spec.seed = common.seed;
    gd.seed = common.seed;
    to.seed = common.seed;
  }

  try {
    if (gen_scenario->parsed()) {
      spec.cpu_freq_hz = {freq_lo_ghz * 1e9, freq_hi_ghz * 1e9};
      spec.tx_power_watt = tx_mw * 1e-3;
      spec.bandwidth_hz = bw_mhz * 1e6;
      spec.noise_psd_watt_per_hz = dbm_per_hz_to_watt(noise_dbm);
      if (gen_scenario->count("--server-freq-ghz")) spec.server_cpu_freq_hz *= 1e9;
      return run_gen_scenario(spec, common, gen_out);
    }
    if (gen_data->parsed()) return run_gen_data(gd, common);
    if (ksbs->parsed()) return run_ksbs(ko, ksbs_arch, common);
    if (sweep->parsed()) return run_sweep(so, sweep_arch, common, sweep_out);
    if (train->parsed()) return run_train(to, train_arch, common);
    if (report->parsed()) return run_report(report_files);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace splitbargain::cli
