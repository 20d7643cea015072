#include "cndiff/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "cndiff/analysis.hpp"
#include "cndiff/errors.hpp"
#include "cndiff/rng.hpp"
#include "cndiff/tensorio.hpp"

namespace cndiff {

namespace {

// Held-out samples come from an index block no training run ever reaches.
constexpr std::uint64_t kHeldOutBase = 1ull << 48;

double running_mean(std::span<const StepLog> log, std::size_t first,
                    std::size_t count) {
  double acc = 0.0;
  for (std::size_t i = first; i < first + count; ++i) acc += log[i].loss;
  return acc / static_cast<double>(count);
}

}  // namespace

NoiseMix parse_noise_mix(const std::string& name) {
  if (name == "white_only") return NoiseMix::WhiteOnly;
  if (name == "blue_only") return NoiseMix::BlueOnly;
  if (name == "white_blue") return NoiseMix::WhiteBlue;
  if (name == "white_red") return NoiseMix::WhiteRed;
  throw ConfigError("unknown noise_mix '" + name + "'");
}

std::string noise_mix_name(NoiseMix mix) {
  switch (mix) {
    case NoiseMix::WhiteOnly: return "white_only";
    case NoiseMix::BlueOnly: return "blue_only";
    case NoiseMix::WhiteBlue: return "white_blue";
    case NoiseMix::WhiteRed: return "white_red";
  }
  throw std::logic_error("bad noise mix");
}

Pairing parse_pairing(const std::string& name) {
  if (name == "random") return Pairing::Random;
  if (name == "rectified") return Pairing::Rectified;
  throw ConfigError("unknown pairing '" + name + "'");
}

void TrainConfig::validate() const {
  if (batch < 1) throw ConfigError("batch must be >= 1");
  if (steps < 1) throw ConfigError("steps must be >= 1");
  if (!(lr >= 0.0)) throw ConfigError("lr must be >= 0");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
  if (hidden.empty()) throw ConfigError("need at least one hidden layer");
}

std::vector<std::size_t> pair_batch(std::span<const Eigen::VectorXd> noises,
                                    std::span<const Eigen::VectorXd> targets) {
  const std::size_t n = noises.size();
  if (n != targets.size()) {
    throw std::invalid_argument("pair_batch: list length mismatch");
  }
  if (n == 0) {
    throw std::invalid_argument("pair_batch: empty batch");
  }
  std::vector<std::size_t> perm(n);
  std::vector<bool> used(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t pick = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (used[j]) continue;
      const double d = (noises[i] - targets[j]).squaredNorm();
      if (d < best) {
        best = d;
        pick = j;
      }
    }
    used[pick] = true;
    perm[i] = pick;
  }
  return perm;
}

double loss(const DenoiserOutput& out, const DenoiserOutput& target, int t,
            const Schedule& schedule, WeightPlacement placement) {
  if (out.d1.size() != target.d1.size() || out.d2.size() != target.d2.size()) {
    throw std::invalid_argument("loss: shape mismatch");
  }
  const double w = schedule.loss_weight(t);
  const double w_eff = placement == WeightPlacement::Outside ? w : w * w;
  const double n1 = static_cast<double>(out.d1.size());
  const double n2 = static_cast<double>(out.d2.size());
  return (out.d1 - target.d1).squaredNorm() / n1 +
         w_eff * (out.d2 - target.d2).squaredNorm() / n2;
}

TrainResult train(const ToyDataset& dataset, const TrainConfig& cfg,
                  const Schedule& schedule, const NoiseModel& correlated) {
  cfg.validate();
  const Eigen::Index dim = dataset.dim();

  NoiseModel model = cfg.noise_mix == NoiseMix::WhiteOnly
                         ? NoiseModel::identity(dim)
                         : correlated;
  if (model.dim() != dim) {
    throw std::invalid_argument("noise factor does not match dataset dim");
  }
  Schedule effective = schedule;
  if (cfg.noise_mix == NoiseMix::WhiteOnly) {
    effective = with_constant_gamma(schedule, 1.0);
  } else if (cfg.noise_mix == NoiseMix::BlueOnly) {
    effective = with_constant_gamma(schedule, 0.0);
  }

  using Mat = Mlp<float>::Mat;
  const int input_dim = static_cast<int>(dim) + kTimeFeatureCount;
  TrainResult result;
  result.net = Mlp<float>(input_dim, cfg.hidden, 2 * static_cast<int>(dim),
                          substream_seed(cfg.seed, 0), cfg.activation);
  result.effective_schedule = effective;

  const Eigen::MatrixXf factor = model.factor.cast<float>();
  const int batch = cfg.batch;

  struct BatchData {
    Mat input, d1_target, d2_target;
    std::vector<int> ts;
  };
  BatchData bd{Mat(input_dim, batch), Mat(dim, batch), Mat(dim, batch),
               std::vector<int>(static_cast<std::size_t>(batch))};
  Mat eps(dim, batch), x0(dim, batch), blended(dim, batch);
  std::vector<Eigen::VectorXd> pair_noises, pair_targets;

  const auto build_batch = [&](Rng& rng, std::uint64_t& sample_index) {
    for (int c = 0; c < batch; ++c) {
      bd.ts[static_cast<std::size_t>(c)] =
          1 + static_cast<int>(
                  rng.below(static_cast<std::uint64_t>(effective.total)));
      x0.col(c) = dataset.sample(sample_index++).cast<float>();
      for (Eigen::Index i = 0; i < dim; ++i) {
        eps(i, c) = static_cast<float>(rng.normal());
      }
    }
    // Correlated part for all draws at once; gamma blend per sample.
    const Mat correlated_part = factor.triangularView<Eigen::Lower>() * eps;
    for (int c = 0; c < batch; ++c) {
      const auto g = static_cast<float>(effective.gamma[static_cast<std::size_t>(
          bd.ts[static_cast<std::size_t>(c)])]);
      blended.col(c) = g * eps.col(c) + (1.0f - g) * correlated_part.col(c);
    }

    if (cfg.pairing == Pairing::Rectified) {
      pair_noises.clear();
      pair_targets.clear();
      for (int c = 0; c < batch; ++c) {
        pair_noises.push_back(
            (cfg.pairing_distance == PairingDistance::Correlated
                 ? blended.col(c)
                 : eps.col(c))
                .cast<double>());
        pair_targets.push_back(x0.col(c).cast<double>());
      }
      const std::vector<std::size_t> perm =
          pair_batch(pair_noises, pair_targets);
      Mat x0_paired(dim, batch);
      for (int c = 0; c < batch; ++c) {
        x0_paired.col(c) = x0.col(
            static_cast<Eigen::Index>(perm[static_cast<std::size_t>(c)]));
      }
      x0 = std::move(x0_paired);
    }

    for (int c = 0; c < batch; ++c) {
      const int t = bd.ts[static_cast<std::size_t>(c)];
      const auto a =
          static_cast<float>(effective.alpha[static_cast<std::size_t>(t)]);
      const auto a_prev =
          static_cast<float>(effective.alpha[static_cast<std::size_t>(t) - 1]);
      bd.input.col(c).head(dim) = a * blended.col(c) + (1.0f - a) * x0.col(c);
      fill_time_features<float>(bd.input.col(c).tail(kTimeFeatureCount), t,
                                effective.total);
      bd.d1_target.col(c) = x0.col(c) - blended.col(c);
      bd.d2_target.col(c) = a_prev * (correlated_part.col(c) - eps.col(c));
    }
  };

  // Loss of the untrained network, so convergence can be judged against a
  // baseline that no optimizer step has touched. Held-out sample indices and
  // a separate stream keep the training draws unaffected.
  {
    Rng eval_rng(substream_seed(cfg.seed, 2));
    std::uint64_t eval_index = 1ull << 46;
    double acc = 0.0;
    const int eval_batches = 50;
    for (int k = 0; k < eval_batches; ++k) {
      build_batch(eval_rng, eval_index);
      acc += batch_loss_and_gradients(result.net, bd.input, bd.d1_target,
                                      bd.d2_target, bd.ts, effective,
                                      cfg.weight_placement)
                 .value;
    }
    result.initial_running_loss = acc / eval_batches;
  }

  auto adam = result.net.make_adamw_state();
  Rng rng(substream_seed(cfg.seed, 1));
  result.log.reserve(static_cast<std::size_t>(cfg.steps));
  std::uint64_t sample_index = 0;

  for (int step = 0; step < cfg.steps; ++step) {
    build_batch(rng, sample_index);
    BatchLoss<float> bl =
        batch_loss_and_gradients(result.net, bd.input, bd.d1_target,
                                 bd.d2_target, bd.ts, effective,
                                 cfg.weight_placement);
    if (!std::isfinite(bl.value)) {
      throw std::runtime_error("training diverged at step " +
                               std::to_string(step) + " (loss is not finite)");
    }
    double lr = cfg.lr;
    if (cfg.lr_schedule == LrSchedule::Cosine) {
      lr *= 0.5 * (1.0 + std::cos(M_PI * static_cast<double>(step) /
                                  static_cast<double>(cfg.steps)));
    }
    result.net.adamw_step(bl.grads, adam, lr, cfg.weight_decay);
    result.log.push_back({step, bl.value, bl.weight_mean});
  }

  const std::size_t window = std::min<std::size_t>(50, result.log.size());
  result.final_running_loss =
      running_mean(result.log, result.log.size() - window, window);
  return result;
}

Denoiser make_denoiser(const Mlp<float>& net, int total_steps) {
  const int dim = net.output_dim() / 2;
  return [&net, dim, total_steps](const Eigen::VectorXd& x, int t) {
    Mlp<float>::Mat input(net.input_dim(), 1);
    input.col(0).head(dim) = x.cast<float>();
    fill_time_features<float>(input.col(0).tail(kTimeFeatureCount), t,
                              total_steps);
    const Mlp<float>::Mat out = net.forward(input);
    DenoiserOutput o;
    o.d1 = out.col(0).head(dim).cast<double>();
    o.d2 = out.col(0).tail(dim).cast<double>();
    return o;
  };
}

GenerationMetrics evaluate_generation(const Mlp<float>& net,
                                      const ToyDataset& dataset,
                                      const Schedule& schedule, int n,
                                      std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("need at least one sample");
  const Eigen::Index dim = dataset.dim();

  // Whole batch marches through the backward chain together.
  Eigen::MatrixXd state(dim, n);
  Rng rng(substream_seed(seed, 1));
  for (Eigen::Index c = 0; c < n; ++c) {
    for (Eigen::Index i = 0; i < dim; ++i) state(i, c) = rng.normal();
  }
  Mlp<float>::Mat input(net.input_dim(), n);
  for (int t = schedule.total; t >= 1; --t) {
    input.topRows(dim) = state.cast<float>();
    for (Eigen::Index c = 0; c < n; ++c) {
      fill_time_features<float>(input.col(c).tail(kTimeFeatureCount), t,
                                schedule.total);
    }
    const Mlp<float>::Mat out = net.forward(input);
    const auto i = static_cast<std::size_t>(t);
    const double da = schedule.alpha[i] - schedule.alpha[i - 1];
    const double dg = schedule.gamma[i] - schedule.gamma[i - 1];
    state += da * out.topRows(dim).cast<double>() +
             dg * out.bottomRows(dim).cast<double>();
  }

  Eigen::MatrixXd generated = state.transpose();  // rows = samples
  Eigen::MatrixXd held(n, dim);
  for (int c = 0; c < n; ++c) {
    held.row(c) = dataset.sample(kHeldOutBase + static_cast<std::uint64_t>(c));
  }
  GenerationMetrics metrics;
  metrics.sliced_wasserstein =
      sliced_wasserstein(generated, held, 64, substream_seed(seed, 2));
  metrics.energy_distance = energy_distance(generated, held);
  return metrics;
}

void save_denoiser(const std::filesystem::path& dir, const Mlp<float>& net,
                   const nlohmann::json& extra_manifest) {
  std::filesystem::create_directories(dir);
  nlohmann::json topo = extra_manifest;
  topo["input_dim"] = net.input_dim();
  topo["output_dim"] = net.output_dim();
  topo["time_features"] = kTimeFeatureCount;
  topo["activation"] = activation_name(net.activation());
  topo["dtype"] = "f32";
  std::vector<int> hidden;
  for (std::size_t l = 0; l + 1 < net.layer_count(); ++l) {
    hidden.push_back(static_cast<int>(net.weights()[l].rows()));
  }
  topo["hidden"] = hidden;
  topo["layers"] = net.layer_count();

  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    const auto& w = net.weights()[l];
    // Row-major on disk.
    const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>
        w_rm = w;
    const std::uint64_t wdims[2] = {static_cast<std::uint64_t>(w.rows()),
                                    static_cast<std::uint64_t>(w.cols())};
    write_tensor(dir / ("W" + std::to_string(l) + ".cnt"), wdims,
                 std::span<const float>(w_rm.data(),
                                        static_cast<std::size_t>(w_rm.size())));
    const auto& b = net.biases()[l];
    const std::uint64_t bdims[1] = {static_cast<std::uint64_t>(b.size())};
    write_tensor(dir / ("b" + std::to_string(l) + ".cnt"), bdims,
                 std::span<const float>(b.data(),
                                        static_cast<std::size_t>(b.size())));
  }
  std::ofstream out(dir / "topology.json");
  if (!out) {
    throw TensorIoError(TensorIoError::Code::Io,
                        "cannot write topology manifest");
  }
  out << topo.dump(2) << '\n';
}

Mlp<float> load_denoiser(const std::filesystem::path& dir) {
  std::ifstream in(dir / "topology.json");
  if (!in) {
    throw TensorIoError(TensorIoError::Code::Io, "cannot read topology manifest");
  }
  const nlohmann::json topo = nlohmann::json::parse(in);
  const int input_dim = topo.at("input_dim").get<int>();
  const int output_dim = topo.at("output_dim").get<int>();
  const std::vector<int> hidden = topo.at("hidden").get<std::vector<int>>();

  const Activation activation =
      parse_activation(topo.value("activation", std::string("silu")));
  Mlp<float> net(input_dim, hidden, output_dim, 0, activation);
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    const Tensor tw = read_tensor(dir / ("W" + std::to_string(l) + ".cnt"));
    const auto& wf = std::get<std::vector<float>>(tw.data);
    auto& w = net.mutable_weights()[l];
    if (tw.dims.size() != 2 ||
        tw.dims[0] != static_cast<std::uint64_t>(w.rows()) ||
        tw.dims[1] != static_cast<std::uint64_t>(w.cols())) {
      throw TensorIoError(TensorIoError::Code::BadDims,
                          "weight tensor shape mismatch");
    }
    w = Eigen::Map<const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic,
                                       Eigen::RowMajor>>(
        wf.data(), w.rows(), w.cols());
    const Tensor tb = read_tensor(dir / ("b" + std::to_string(l) + ".cnt"));
    const auto& bf = std::get<std::vector<float>>(tb.data);
    auto& b = net.mutable_biases()[l];
    if (tb.dims.size() != 1 ||
        tb.dims[0] != static_cast<std::uint64_t>(b.size())) {
      throw TensorIoError(TensorIoError::Code::BadDims,
                          "bias tensor shape mismatch");
    }
    b = Eigen::Map<const Eigen::VectorXf>(bf.data(), b.size());
  }
  return net;
}

}  // namespace cndiff
