// Command-line front end: anneal -> estimate-cov -> sample-noise / spectrum
// -> train -> generate -> invert-check, plus pair-demo. Every run records its
// fully resolved configuration in a manifest next to the artifacts.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cndiff/analysis.hpp"
#include "cndiff/covariance.hpp"
#include "cndiff/datasets.hpp"
#include "cndiff/diffusion.hpp"
#include "cndiff/errors.hpp"
#include "cndiff/mask.hpp"
#include "cndiff/noise_model.hpp"
#include "cndiff/pgm.hpp"
#include "cndiff/rng.hpp"
#include "cndiff/schedule.hpp"
#include "cndiff/tensorio.hpp"
#include "cndiff/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace cndiff;

namespace {

// -----------------------------------------------------------------------
// Config plumbing: flag > config-file value > built-in default.

json load_config_file(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config parse error: " + std::string(e.what()));
  }
}

// Dotted keys resolve either flat ("gamma.tau") or nested {"gamma":{"tau":..}}.
const json* find_key(const json& cfg, const std::string& key) {
  if (cfg.contains(key)) return &cfg.at(key);
  const json* node = &cfg;
  std::stringstream ss(key);
  std::string part;
  while (std::getline(ss, part, '.')) {
    if (!node->is_object() || !node->contains(part)) return nullptr;
    node = &node->at(part);
  }
  return node;
}

template <typename T>
void apply_config(const CLI::Option* opt, const json& cfg,
                  const std::string& key, T& value) {
  if (opt != nullptr && opt->count() > 0) return;  // flag wins
  if (const json* v = find_key(cfg, key)) {
    try {
      value = v->get<T>();
    } catch (const json::exception&) {
      throw ConfigError("config key '" + key + "' has the wrong type");
    }
  }
}

fs::path ensure_out_dir(const std::string& out) {
  if (out.empty()) throw ConfigError("--out directory is required");
  fs::path dir(out);
  fs::create_directories(dir);
  return dir;
}

Eigen::MatrixXd mask_grid(const Mask& m) {
  return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                        Eigen::RowMajor>>(
      m.values.data(), m.resolution, m.resolution);
}

// (count, H, W) stack of row-major grids.
void write_grid_stack(const fs::path& path,
                      const std::vector<Eigen::MatrixXd>& grids) {
  const auto count = static_cast<std::uint64_t>(grids.size());
  const auto rows = static_cast<std::uint64_t>(grids.front().rows());
  const auto cols = static_cast<std::uint64_t>(grids.front().cols());
  std::vector<double> payload;
  payload.reserve(count * rows * cols);
  for (const Eigen::MatrixXd& g : grids) {
    for (Eigen::Index i = 0; i < g.rows(); ++i)
      for (Eigen::Index j = 0; j < g.cols(); ++j) payload.push_back(g(i, j));
  }
  const std::uint64_t dims[3] = {count, rows, cols};
  write_tensor(path, dims, std::span<const double>(payload));
}

std::vector<Eigen::MatrixXd> read_grid_stack(const fs::path& path) {
  const Tensor t = read_tensor(path);
  if (t.dims.size() != 3) {
    throw ConfigError("expected a (count, H, W) tensor in " + path.string());
  }
  const std::vector<double> data = t.as_f64();
  const auto count = t.dims[0];
  const auto rows = static_cast<Eigen::Index>(t.dims[1]);
  const auto cols = static_cast<Eigen::Index>(t.dims[2]);
  std::vector<Eigen::MatrixXd> grids;
  grids.reserve(count);
  const double* p = data.data();
  for (std::uint64_t k = 0; k < count; ++k) {
    grids.emplace_back(
        Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                       Eigen::RowMajor>>(p, rows, cols));
    p += rows * cols;
  }
  return grids;
}

std::vector<int> parse_hidden(const std::string& spec) {
  std::vector<int> widths;
  std::stringstream ss(spec);
  std::string part;
  while (std::getline(ss, part, ',')) {
    if (part.empty()) continue;
    widths.push_back(std::stoi(part));
  }
  if (widths.empty()) throw ConfigError("hidden spec '" + spec + "' is empty");
  return widths;
}

GammaParams gamma_from(double start, double end, double tau) {
  GammaParams p;
  p.start = start;
  p.end = end;
  p.tau = tau;
  p.validate();
  return p;
}

// -----------------------------------------------------------------------
// Subcommand argument blocks.

struct AnnealArgs {
  std::string config, out;
  int resolution = 16;
  int count = 8;
  std::string mode = "blue";
  std::uint64_t sweeps = 0;  // 0 = 50 R^2
  double sigma_s = 2.1;
  double sigma_v = 1.0;
  double temp0 = 1.0;
  double temp_decay = 0.0;  // 0 = derive from the sweep count
  std::uint64_t seed = 0;
  int threads = 2;
};

struct EstimateCovArgs {
  std::string config, out, masks;
  bool no_shifts = false;
  bool save_sigma = false;
};

struct SampleNoiseArgs {
  std::string config, out, factor;
  double gamma = 0.0;
  int rows = 0, cols = 0;  // 0 = base resolution
  std::string mode = "independent";
  int count = 1;
  std::uint64_t seed = 0;
};

struct SpectrumArgs {
  std::string config, out, input;
  double cutoff = 0.125;
};

struct TrainArgs {
  std::string config, out, factor;
  std::string dataset = "signals1d";
  std::uint64_t data_seed = 0;
  std::string noise_mix = "white_blue";
  std::string pairing = "random";
  std::string pairing_distance = "correlated";
  std::string weight_placement = "outside";
  std::string activation = "silu";
  std::string hidden = "256,256,256";
  int batch = 64;
  int steps = 20000;
  double lr = 1e-4;
  std::string lr_schedule = "constant";
  double weight_decay = 1e-4;
  std::uint64_t seed = 0;
  int total = 1000;
  double gamma_start = 0.0;
  double gamma_end = 3.0;
  double gamma_tau = 0.2;
  std::string gamma_override = "none";
};

struct GenerateArgs {
  std::string config, out, denoiser;
  int count = 16;
  std::uint64_t seed = 0;
  int total = 250;
  int early_stop = 0;
  double gamma_start = 0.0;
  double gamma_end = 3.0;
  double gamma_tau = 0.2;
  std::string gamma_override = "none";
};

struct InvertCheckArgs {
  std::string config;
  int total = 250;
  int trials = 100;
  int resolution = 8;
  std::uint64_t seed = 1;
  std::string variant = "both";
};

struct PairDemoArgs {
  std::string config;
  int batch = 64;
  int dim = 8;
  int trials = 100;
  std::uint64_t seed = 0;
};

// -----------------------------------------------------------------------
// Runners.

int run_anneal(const AnnealArgs& a) {
  const fs::path out = ensure_out_dir(a.out);
  if (a.count < 1) throw ConfigError("count must be >= 1");
  const MaskMode mode = [&] {
    if (a.mode == "blue") return MaskMode::Blue;
    if (a.mode == "red") return MaskMode::Red;
    throw ConfigError("mode must be 'blue' or 'red'");
  }();

  AnnealConfig cfg = default_anneal_config(a.resolution, a.seed, a.sweeps);
  cfg.sigma_s = a.sigma_s;
  cfg.sigma_v = a.sigma_v;
  cfg.temp0 = a.temp0;
  if (a.temp_decay > 0.0) cfg.temp_decay = a.temp_decay;
  cfg.validate();

  const auto masks =
      anneal_ensemble(a.resolution, mode, cfg,
                      static_cast<std::size_t>(a.count), a.threads);
  std::vector<Eigen::MatrixXd> grids;
  grids.reserve(masks.size());
  for (const Mask& m : masks) grids.push_back(mask_grid(m));
  write_grid_stack(out / "masks.cnt", grids);
  write_pgm(out / "mask_000.pgm", grids.front());

  json manifest;
  manifest["command"] = "anneal";
  manifest["seed"] = a.seed;
  manifest["resolution"] = a.resolution;
  manifest["count"] = a.count;
  manifest["mode"] = a.mode;
  manifest["threads"] = a.threads;
  manifest["anneal"] = {{"sigma_s", cfg.sigma_s},
                        {"sigma_v", cfg.sigma_v},
                        {"sweeps", cfg.sweeps},
                        {"temp0", cfg.temp0},
                        {"temp_decay", cfg.temp_decay}};
  write_manifest(out / "masks.cnt", manifest);
  std::printf("wrote %zu %s masks to %s\n", masks.size(), a.mode.c_str(),
              (out / "masks.cnt").string().c_str());
  return 0;
}

int run_estimate_cov(const EstimateCovArgs& a) {
  const fs::path out = ensure_out_dir(a.out);
  if (a.masks.empty()) throw ConfigError("--masks tensor path is required");
  const auto grids = read_grid_stack(a.masks);
  std::vector<Mask> masks;
  masks.reserve(grids.size());
  for (const Eigen::MatrixXd& g : grids) {
    if (g.rows() != g.cols()) throw ConfigError("masks must be square");
    Mask m;
    m.resolution = static_cast<int>(g.rows());
    m.values.resize(static_cast<std::size_t>(g.size()));
    for (Eigen::Index i = 0; i < g.rows(); ++i)
      for (Eigen::Index j = 0; j < g.cols(); ++j)
        m.values[static_cast<std::size_t>(i * g.cols() + j)] = g(i, j);
    masks.push_back(std::move(m));
  }

  const CovarianceModel model = build_covariance_model(masks, !a.no_shifts);
  const FactorReport report = validate_factor(model);

  json manifest;
  manifest["command"] = "estimate-cov";
  manifest["masks"] = a.masks;
  manifest["toroidal_shifts"] = !a.no_shifts;
  manifest["validation"] = {
      {"reconstruction_rel_error", report.reconstruction_rel_error},
      {"min_factor_diag", report.min_factor_diag},
      {"diag_unit_error", report.diag_unit_error}};
  save_covariance_model(out, model, a.save_sigma, manifest);
  std::printf("factor %dx%d from %zu masks, jitter %.1e, recon err %.2e\n",
              static_cast<int>(model.factor.rows()),
              static_cast<int>(model.factor.cols()), model.source_count,
              model.regularization, report.reconstruction_rel_error);
  return 0;
}

int run_sample_noise(const SampleNoiseArgs& a) {
  const fs::path out = ensure_out_dir(a.out);
  if (a.factor.empty()) throw ConfigError("--factor model directory is required");
  const NoiseModel model =
      NoiseModel::from_covariance(load_covariance_model(a.factor));
  const int rows = a.rows > 0 ? a.rows : model.base_resolution;
  const int cols = a.cols > 0 ? a.cols : model.base_resolution;
  const TileMode mode = [&] {
    if (a.mode == "independent") return TileMode::Independent;
    if (a.mode == "repeat") return TileMode::Repeat;
    throw ConfigError("mode must be 'independent' or 'repeat'");
  }();
  if (a.count < 1) throw ConfigError("count must be >= 1");

  std::vector<Eigen::MatrixXd> grids;
  for (int k = 0; k < a.count; ++k) {
    grids.push_back(
        tile_noise(model, a.gamma, rows, cols, mode,
                   substream_seed(a.seed, static_cast<std::uint64_t>(k)))
            .values);
  }
  write_grid_stack(out / "noise.cnt", grids);
  write_pgm(out / "noise_000.pgm", grids.front());

  json manifest;
  manifest["command"] = "sample-noise";
  manifest["seed"] = a.seed;
  manifest["factor"] = a.factor;
  manifest["gamma"] = a.gamma;
  manifest["rows"] = rows;
  manifest["cols"] = cols;
  manifest["mode"] = a.mode;
  manifest["count"] = a.count;
  write_manifest(out / "noise.cnt", manifest);
  std::printf("wrote %d noise samples (%dx%d, gamma=%.3f) to %s\n", a.count,
              rows, cols, a.gamma, (out / "noise.cnt").string().c_str());
  return 0;
}

int run_spectrum(const SpectrumArgs& a) {
  const fs::path out = ensure_out_dir(a.out);
  if (a.input.empty()) throw ConfigError("--input tensor path is required");
  const auto grids = read_grid_stack(a.input);

  Eigen::MatrixXd mean_spectrum =
      Eigen::MatrixXd::Zero(grids.front().rows(), grids.front().cols());
  for (const Eigen::MatrixXd& g : grids) mean_spectrum += power_spectrum(g);
  mean_spectrum /= static_cast<double>(grids.size());

  const std::vector<double> profile = radial_average(mean_spectrum);
  const double ratio = low_freq_ratio(profile, a.cutoff,
                                      static_cast<int>(grids.front().rows()));

  write_grid_stack(out / "spectrum.cnt", {mean_spectrum});
  write_pgm(out / "spectrum.pgm", mean_spectrum);
  std::ofstream csv(out / "radial.csv");
  csv << "radius,mean_energy\n";
  for (std::size_t r = 0; r < profile.size(); ++r) {
    csv << r << ',' << profile[r] << '\n';
  }

  json manifest;
  manifest["command"] = "spectrum";
  manifest["input"] = a.input;
  manifest["cutoff"] = a.cutoff;
  manifest["samples"] = grids.size();
  manifest["low_freq_ratio"] = ratio;
  write_manifest(out / "spectrum.cnt", manifest);
  std::printf("low_freq_ratio %.4f (cutoff %.3f, %zu samples)\n", ratio,
              a.cutoff, grids.size());
  return 0;
}

int run_train(const TrainArgs& a) {
  const fs::path out = ensure_out_dir(a.out);
  TrainConfig cfg;
  cfg.batch = a.batch;
  cfg.steps = a.steps;
  cfg.lr = a.lr;
  cfg.weight_decay = a.weight_decay;
  cfg.seed = a.seed;
  cfg.pairing = parse_pairing(a.pairing);
  cfg.noise_mix = parse_noise_mix(a.noise_mix);
  if (a.pairing_distance == "correlated") {
    cfg.pairing_distance = PairingDistance::Correlated;
  } else if (a.pairing_distance == "raw_epsilon") {
    cfg.pairing_distance = PairingDistance::RawEpsilon;
  } else {
    throw ConfigError("pairing_distance must be 'correlated' or 'raw_epsilon'");
  }
  if (a.weight_placement == "outside") {
    cfg.weight_placement = WeightPlacement::Outside;
  } else if (a.weight_placement == "inside") {
    cfg.weight_placement = WeightPlacement::Inside;
  } else {
    throw ConfigError("weight_placement must be 'outside' or 'inside'");
  }
  if (a.lr_schedule == "constant") {
    cfg.lr_schedule = LrSchedule::Constant;
  } else if (a.lr_schedule == "cosine") {
    cfg.lr_schedule = LrSchedule::Cosine;
  } else {
    throw ConfigError("lr_schedule must be 'constant' or 'cosine'");
  }
  cfg.hidden = parse_hidden(a.hidden);
  try {
    cfg.activation = parse_activation(a.activation);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }

  const ToyDataset dataset{parse_dataset_kind(a.dataset), a.data_seed};
  const Schedule schedule = build_schedule(
      a.total, gamma_from(a.gamma_start, a.gamma_end, a.gamma_tau),
      ScheduleVariant::Blend, parse_gamma_override(a.gamma_override));

  NoiseModel model = NoiseModel::identity(dataset.dim());
  if (cfg.noise_mix != NoiseMix::WhiteOnly) {
    if (a.factor.empty()) {
      throw ConfigError("--factor is required for noise_mix " + a.noise_mix);
    }
    model = NoiseModel::from_covariance(load_covariance_model(a.factor));
  }

  const TrainResult result = train(dataset, cfg, schedule, model);

  json manifest;
  manifest["command"] = "train";
  manifest["dataset"] = a.dataset;
  manifest["data_seed"] = a.data_seed;
  manifest["seed"] = a.seed;
  manifest["factor"] = a.factor;
  manifest["noise_mix"] = a.noise_mix;
  manifest["pairing"] = a.pairing;
  manifest["pairing_distance"] = a.pairing_distance;
  manifest["weight_placement"] = a.weight_placement;
  manifest["batch"] = cfg.batch;
  manifest["steps"] = cfg.steps;
  manifest["lr"] = cfg.lr;
  manifest["lr_schedule"] = a.lr_schedule;
  manifest["weight_decay"] = cfg.weight_decay;
  manifest["hidden"] = cfg.hidden;
  manifest["activation"] = a.activation;
  manifest["T"] = a.total;
  manifest["gamma"] = {{"start", a.gamma_start},
                       {"end", a.gamma_end},
                       {"tau", a.gamma_tau},
                       {"override", a.gamma_override}};
  manifest["initial_running_loss"] = result.initial_running_loss;
  manifest["final_running_loss"] = result.final_running_loss;
  save_denoiser(out, result.net, manifest);

  std::ofstream csv(out / "metrics.csv");
  csv << "step,loss,weight_mean\n";
  for (const StepLog& row : result.log) {
    csv << row.step << ',' << row.loss << ',' << row.weight_mean << '\n';
  }

  std::printf("trained %s/%s: loss %.4f -> %.4f over %d steps\n",
              a.dataset.c_str(), a.noise_mix.c_str(),
              result.initial_running_loss, result.final_running_loss,
              cfg.steps);
  return 0;
}

int run_generate(const GenerateArgs& a) {
  const fs::path out = ensure_out_dir(a.out);
  if (a.denoiser.empty()) throw ConfigError("--denoiser directory is required");
  if (a.count < 1) throw ConfigError("count must be >= 1");
  const Mlp<float> net = load_denoiser(a.denoiser);
  const int dim = net.output_dim() / 2;

  const Schedule schedule = build_schedule(
      a.total, gamma_from(a.gamma_start, a.gamma_end, a.gamma_tau),
      ScheduleVariant::Blend, parse_gamma_override(a.gamma_override));
  if (a.early_stop < 0 || a.early_stop > a.total) {
    throw ConfigError("--early-stop must be in [0, T]");
  }
  const Denoiser denoiser = make_denoiser(net, schedule.total);

  std::vector<double> payload;
  payload.reserve(static_cast<std::size_t>(a.count) *
                  static_cast<std::size_t>(dim));
  const int side =
      static_cast<int>(std::lround(std::sqrt(static_cast<double>(dim))));
  const bool square = side * side == dim;
  for (int k = 0; k < a.count; ++k) {
    const Eigen::VectorXd sample =
        generate(denoiser, schedule, dim,
                 substream_seed(a.seed, static_cast<std::uint64_t>(k)),
                 a.early_stop);
    payload.insert(payload.end(), sample.data(), sample.data() + sample.size());
    if (square && k == 0) {
      Eigen::MatrixXd grid(side, side);
      for (int i = 0; i < side; ++i)
        for (int j = 0; j < side; ++j) grid(i, j) = sample(i * side + j);
      write_pgm(out / "sample_000.pgm", grid);
    }
  }
  const std::uint64_t dims[2] = {static_cast<std::uint64_t>(a.count),
                                 static_cast<std::uint64_t>(dim)};
  write_tensor(out / "samples.cnt", dims, std::span<const double>(payload));

  json manifest;
  manifest["command"] = "generate";
  manifest["denoiser"] = a.denoiser;
  manifest["count"] = a.count;
  manifest["seed"] = a.seed;
  manifest["T"] = a.total;
  manifest["early_stop"] = a.early_stop;
  manifest["gamma"] = {{"start", a.gamma_start},
                       {"end", a.gamma_end},
                       {"tau", a.gamma_tau},
                       {"override", a.gamma_override}};
  write_manifest(out / "samples.cnt", manifest);
  std::printf("wrote %d samples of dim %d to %s\n", a.count, dim,
              (out / "samples.cnt").string().c_str());
  return 0;
}

int run_invert_check(const InvertCheckArgs& a) {
  if (a.trials < 1) throw ConfigError("--trials must be >= 1");
  if (a.variant != "blend" && a.variant != "ddim" && a.variant != "both") {
    throw ConfigError("--variant must be blend, ddim or both");
  }
  // A small annealed factor keeps the check self-contained.
  const auto masks =
      anneal_ensemble(a.resolution, MaskMode::Blue,
                      default_anneal_config(a.resolution, 0xfac70a), 64, 2);
  const NoiseModel model =
      NoiseModel::from_covariance(build_covariance_model(masks));

  Rng rng(a.seed);
  const auto random_params = [&rng] {
    GammaParams p;
    p.start = -3.0 * rng.uniform();
    p.end = 0.5 + 2.5 * rng.uniform();
    p.tau = std::exp(std::log(0.01) +
                     (std::log(1000.0) - std::log(0.01)) * rng.uniform());
    return p;
  };
  const auto random_vec = [&rng](Eigen::Index n) {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = rng.normal();
    return v;
  };

  bool ok = true;
  if (a.variant == "blend" || a.variant == "both") {
    double max_err = 0.0;
    for (int trial = 0; trial < a.trials; ++trial) {
      const Schedule s = build_schedule(a.total, random_params());
      const Eigen::VectorXd x0 = random_vec(model.dim());
      const Eigen::VectorXd eps = random_vec(model.dim());
      const Eigen::VectorXd x_top =
          forward_sample(x0, eps, 1.0, s.gamma.back(), model);
      const Eigen::VectorXd rebuilt =
          generate_from(x_top, make_oracle(x0, eps, s, model), s);
      max_err = std::max(max_err, (rebuilt - x0).cwiseAbs().maxCoeff());
    }
    std::printf("invert-check variant=blend trials=%d T=%d max_error=%.3e\n",
                a.trials, a.total, max_err);
    ok = ok && max_err < 1e-9;
  }
  if (a.variant == "ddim" || a.variant == "both") {
    double max_err = 0.0;
    for (int trial = 0; trial < a.trials; ++trial) {
      const Schedule s =
          build_schedule(a.total, random_params(), ScheduleVariant::Ddim);
      const Eigen::VectorXd x0 = random_vec(model.dim());
      const Eigen::VectorXd eps = random_vec(model.dim());
      const Eigen::VectorXd x_top =
          ddim_forward_sample(x0, eps, a.total, s, model);
      const Eigen::VectorXd rebuilt =
          generate_ddim_from(x_top, make_ddim_oracle(eps, s, model), s);
      max_err = std::max(max_err, (rebuilt - x0).cwiseAbs().maxCoeff());
    }
    std::printf("invert-check variant=ddim trials=%d T=%d max_error=%.3e\n",
                a.trials, a.total, max_err);
    ok = ok && max_err < 1e-9;
  }
  if (!ok) throw std::runtime_error("inversion identity exceeded 1e-9");
  return 0;
}

int run_pair_demo(const PairDemoArgs& a) {
  if (a.batch < 1 || a.dim < 1 || a.trials < 1) {
    throw ConfigError("batch, dim and trials must be >= 1");
  }
  int wins = 0;
  double greedy_total = 0.0, random_total = 0.0;
  for (int trial = 0; trial < a.trials; ++trial) {
    Rng rng(substream_seed(a.seed, static_cast<std::uint64_t>(trial)));
    std::vector<Eigen::VectorXd> noises, targets;
    for (int i = 0; i < a.batch; ++i) {
      Eigen::VectorXd x(a.dim), y(a.dim);
      for (int d = 0; d < a.dim; ++d) {
        x(d) = rng.normal();
        y(d) = rng.normal();
      }
      noises.push_back(x);
      targets.push_back(y);
    }
    const auto perm = pair_batch(noises, targets);
    double greedy_cost = 0.0, random_cost = 0.0;
    for (std::size_t i = 0; i < noises.size(); ++i) {
      greedy_cost += (noises[i] - targets[perm[i]]).squaredNorm();
      random_cost += (noises[i] - targets[i]).squaredNorm();
    }
    greedy_total += greedy_cost;
    random_total += random_cost;
    if (greedy_cost <= random_cost) ++wins;
  }
  std::printf(
      "pair-demo batch=%d dim=%d trials=%d greedy_mean=%.3f random_mean=%.3f "
      "greedy_wins=%d\n",
      a.batch, a.dim, a.trials, greedy_total / a.trials,
      random_total / a.trials, wins);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"correlated-noise deterministic diffusion lab"};
  app.require_subcommand(1);

  AnnealArgs anneal;
  EstimateCovArgs estcov;
  SampleNoiseArgs noise;
  SpectrumArgs spectrum;
  TrainArgs train_args;
  GenerateArgs gen;
  InvertCheckArgs invert;
  PairDemoArgs pair;

  auto* cmd_anneal = app.add_subcommand("anneal", "anneal a mask ensemble");
  cmd_anneal->add_option("--config", anneal.config);
  cmd_anneal->add_option("--out", anneal.out);
  auto* o_res = cmd_anneal->add_option("--resolution", anneal.resolution);
  auto* o_count = cmd_anneal->add_option("--count", anneal.count);
  auto* o_mode = cmd_anneal->add_option("--mode", anneal.mode);
  auto* o_sweeps = cmd_anneal->add_option("--sweeps", anneal.sweeps);
  auto* o_ss = cmd_anneal->add_option("--sigma-s", anneal.sigma_s);
  auto* o_sv = cmd_anneal->add_option("--sigma-v", anneal.sigma_v);
  auto* o_t0 = cmd_anneal->add_option("--temp0", anneal.temp0);
  auto* o_td = cmd_anneal->add_option("--temp-decay", anneal.temp_decay);
  auto* o_seed = cmd_anneal->add_option("--seed", anneal.seed);
  auto* o_thr = cmd_anneal->add_option("--threads", anneal.threads);

  auto* cmd_estcov =
      app.add_subcommand("estimate-cov", "estimate covariance and factor it");
  cmd_estcov->add_option("--config", estcov.config);
  cmd_estcov->add_option("--out", estcov.out);
  auto* e_masks = cmd_estcov->add_option("--masks", estcov.masks);
  auto* e_noshift = cmd_estcov->add_flag("--no-shifts", estcov.no_shifts);
  auto* e_sigma = cmd_estcov->add_flag("--save-sigma", estcov.save_sigma);

  auto* cmd_noise = app.add_subcommand("sample-noise", "draw correlated noise");
  cmd_noise->add_option("--config", noise.config);
  cmd_noise->add_option("--out", noise.out);
  auto* n_factor = cmd_noise->add_option("--factor", noise.factor);
  auto* n_gamma = cmd_noise->add_option("--gamma", noise.gamma);
  auto* n_rows = cmd_noise->add_option("--rows", noise.rows);
  auto* n_cols = cmd_noise->add_option("--cols", noise.cols);
  auto* n_mode = cmd_noise->add_option("--mode", noise.mode);
  auto* n_count = cmd_noise->add_option("--count", noise.count);
  auto* n_seed = cmd_noise->add_option("--seed", noise.seed);

  auto* cmd_spec = app.add_subcommand("spectrum", "average power spectra");
  cmd_spec->add_option("--config", spectrum.config);
  cmd_spec->add_option("--out", spectrum.out);
  auto* s_input = cmd_spec->add_option("--input", spectrum.input);
  auto* s_cutoff = cmd_spec->add_option("--cutoff", spectrum.cutoff);

  auto* cmd_train = app.add_subcommand("train", "train the two-head denoiser");
  cmd_train->add_option("--config", train_args.config);
  cmd_train->add_option("--out", train_args.out);
  auto* t_factor = cmd_train->add_option("--factor", train_args.factor);
  auto* t_dataset = cmd_train->add_option("--dataset", train_args.dataset);
  auto* t_dseed = cmd_train->add_option("--data-seed", train_args.data_seed);
  auto* t_mix = cmd_train->add_option("--noise-mix", train_args.noise_mix);
  auto* t_pairing = cmd_train->add_option("--pairing", train_args.pairing);
  auto* t_pdist =
      cmd_train->add_option("--pairing-distance", train_args.pairing_distance);
  auto* t_wp =
      cmd_train->add_option("--weight-placement", train_args.weight_placement);
  auto* t_act = cmd_train->add_option("--activation", train_args.activation);
  auto* t_hidden = cmd_train->add_option("--hidden", train_args.hidden);
  auto* t_batch = cmd_train->add_option("--batch", train_args.batch);
  auto* t_steps = cmd_train->add_option("--steps", train_args.steps);
  auto* t_lr = cmd_train->add_option("--lr", train_args.lr);
  auto* t_lrs = cmd_train->add_option("--lr-schedule", train_args.lr_schedule);
  auto* t_wd = cmd_train->add_option("--weight-decay", train_args.weight_decay);
  auto* t_seed = cmd_train->add_option("--seed", train_args.seed);
  auto* t_T = cmd_train->add_option("--T", train_args.total);
  auto* t_gs = cmd_train->add_option("--gamma-start", train_args.gamma_start);
  auto* t_ge = cmd_train->add_option("--gamma-end", train_args.gamma_end);
  auto* t_gt = cmd_train->add_option("--gamma-tau", train_args.gamma_tau);
  auto* t_go =
      cmd_train->add_option("--gamma-override", train_args.gamma_override);

  auto* cmd_gen =
      app.add_subcommand("generate", "sample from a trained denoiser");
  cmd_gen->add_option("--config", gen.config);
  cmd_gen->add_option("--out", gen.out);
  auto* g_den = cmd_gen->add_option("--denoiser", gen.denoiser);
  auto* g_count = cmd_gen->add_option("--count", gen.count);
  auto* g_seed = cmd_gen->add_option("--seed", gen.seed);
  auto* g_T = cmd_gen->add_option("--T", gen.total);
  auto* g_es = cmd_gen->add_option("--early-stop", gen.early_stop);
  auto* g_gs = cmd_gen->add_option("--gamma-start", gen.gamma_start);
  auto* g_ge = cmd_gen->add_option("--gamma-end", gen.gamma_end);
  auto* g_gt = cmd_gen->add_option("--gamma-tau", gen.gamma_tau);
  auto* g_go = cmd_gen->add_option("--gamma-override", gen.gamma_override);

  auto* cmd_invert =
      app.add_subcommand("invert-check", "oracle inversion identity");
  cmd_invert->add_option("--config", invert.config);
  auto* i_T = cmd_invert->add_option("--T", invert.total);
  auto* i_trials = cmd_invert->add_option("--trials", invert.trials);
  auto* i_res = cmd_invert->add_option("--resolution", invert.resolution);
  auto* i_seed = cmd_invert->add_option("--seed", invert.seed);
  auto* i_variant = cmd_invert->add_option("--variant", invert.variant);

  auto* cmd_pair = app.add_subcommand("pair-demo", "greedy vs random pairing");
  cmd_pair->add_option("--config", pair.config);
  auto* p_batch = cmd_pair->add_option("--batch", pair.batch);
  auto* p_dim = cmd_pair->add_option("--dim", pair.dim);
  auto* p_trials = cmd_pair->add_option("--trials", pair.trials);
  auto* p_seed = cmd_pair->add_option("--seed", pair.seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "error: {\"kind\":\"config\",\"message\":\"%s\"}\n",
                 e.what());
    return 2;
  }

  try {
    if (cmd_anneal->parsed()) {
      const json cfg = load_config_file(anneal.config);
      apply_config(o_res, cfg, "resolution", anneal.resolution);
      apply_config(o_count, cfg, "count", anneal.count);
      apply_config(o_mode, cfg, "mode", anneal.mode);
      apply_config(o_sweeps, cfg, "anneal.sweeps", anneal.sweeps);
      apply_config(o_ss, cfg, "anneal.sigma_s", anneal.sigma_s);
      apply_config(o_sv, cfg, "anneal.sigma_v", anneal.sigma_v);
      apply_config(o_t0, cfg, "anneal.temp0", anneal.temp0);
      apply_config(o_td, cfg, "anneal.temp_decay", anneal.temp_decay);
      apply_config(o_seed, cfg, "seed", anneal.seed);
      apply_config(o_thr, cfg, "threads", anneal.threads);
      return run_anneal(anneal);
    }
    if (cmd_estcov->parsed()) {
      const json cfg = load_config_file(estcov.config);
      apply_config(e_masks, cfg, "masks", estcov.masks);
      apply_config(e_noshift, cfg, "no_shifts", estcov.no_shifts);
      apply_config(e_sigma, cfg, "save_sigma", estcov.save_sigma);
      return run_estimate_cov(estcov);
    }
    if (cmd_noise->parsed()) {
      const json cfg = load_config_file(noise.config);
      apply_config(n_factor, cfg, "factor", noise.factor);
      apply_config(n_gamma, cfg, "gamma", noise.gamma);
      apply_config(n_rows, cfg, "rows", noise.rows);
      apply_config(n_cols, cfg, "cols", noise.cols);
      apply_config(n_mode, cfg, "mode", noise.mode);
      apply_config(n_count, cfg, "count", noise.count);
      apply_config(n_seed, cfg, "seed", noise.seed);
      return run_sample_noise(noise);
    }
    if (cmd_spec->parsed()) {
      const json cfg = load_config_file(spectrum.config);
      apply_config(s_input, cfg, "input", spectrum.input);
      apply_config(s_cutoff, cfg, "cutoff", spectrum.cutoff);
      return run_spectrum(spectrum);
    }
    if (cmd_train->parsed()) {
      const json cfg = load_config_file(train_args.config);
      apply_config(t_factor, cfg, "factor", train_args.factor);
      apply_config(t_dataset, cfg, "dataset", train_args.dataset);
      apply_config(t_dseed, cfg, "data_seed", train_args.data_seed);
      apply_config(t_mix, cfg, "noise_mix", train_args.noise_mix);
      apply_config(t_pairing, cfg, "pairing", train_args.pairing);
      apply_config(t_pdist, cfg, "pairing_distance", train_args.pairing_distance);
      apply_config(t_wp, cfg, "weight_placement", train_args.weight_placement);
      apply_config(t_act, cfg, "activation", train_args.activation);
      apply_config(t_hidden, cfg, "hidden", train_args.hidden);
      apply_config(t_batch, cfg, "batch", train_args.batch);
      apply_config(t_steps, cfg, "steps", train_args.steps);
      apply_config(t_lr, cfg, "lr", train_args.lr);
      apply_config(t_lrs, cfg, "lr_schedule", train_args.lr_schedule);
      apply_config(t_wd, cfg, "weight_decay", train_args.weight_decay);
      apply_config(t_seed, cfg, "seed", train_args.seed);
      apply_config(t_T, cfg, "T", train_args.total);
      apply_config(t_gs, cfg, "gamma.start", train_args.gamma_start);
      apply_config(t_ge, cfg, "gamma.end", train_args.gamma_end);
      apply_config(t_gt, cfg, "gamma.tau", train_args.gamma_tau);
      apply_config(t_go, cfg, "gamma.override", train_args.gamma_override);
      return run_train(train_args);
    }
    if (cmd_gen->parsed()) {
      const json cfg = load_config_file(gen.config);
      apply_config(g_den, cfg, "denoiser", gen.denoiser);
      apply_config(g_count, cfg, "count", gen.count);
      apply_config(g_seed, cfg, "seed", gen.seed);
      apply_config(g_T, cfg, "T", gen.total);
      apply_config(g_es, cfg, "early_stop", gen.early_stop);
      apply_config(g_gs, cfg, "gamma.start", gen.gamma_start);
      apply_config(g_ge, cfg, "gamma.end", gen.gamma_end);
      apply_config(g_gt, cfg, "gamma.tau", gen.gamma_tau);
      apply_config(g_go, cfg, "gamma.override", gen.gamma_override);
      return run_generate(gen);
    }
    if (cmd_invert->parsed()) {
      const json cfg = load_config_file(invert.config);
      apply_config(i_T, cfg, "T", invert.total);
      apply_config(i_trials, cfg, "trials", invert.trials);
      apply_config(i_res, cfg, "resolution", invert.resolution);
      apply_config(i_seed, cfg, "seed", invert.seed);
      apply_config(i_variant, cfg, "variant", invert.variant);
      return run_invert_check(invert);
    }
    if (cmd_pair->parsed()) {
      const json cfg = load_config_file(pair.config);
      apply_config(p_batch, cfg, "batch", pair.batch);
      apply_config(p_dim, cfg, "dim", pair.dim);
      apply_config(p_trials, cfg, "trials", pair.trials);
      apply_config(p_seed, cfg, "seed", pair.seed);
      return run_pair_demo(pair);
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: {\"kind\":\"config\",\"message\":\"%s\"}\n",
                 e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: {\"kind\":\"runtime\",\"message\":\"%s\"}\n",
                 e.what());
    return 1;
  }
  return 2;
}
