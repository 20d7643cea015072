#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

#include "cndiff/datasets.hpp"
#include "cndiff/diffusion.hpp"
#include "cndiff/mlp.hpp"
#include "cndiff/noise_model.hpp"
#include "cndiff/schedule.hpp"

namespace cndiff {

enum class NoiseMix { WhiteOnly, BlueOnly, WhiteBlue, WhiteRed };
enum class Pairing { Random, Rectified };
enum class PairingDistance { Correlated, RawEpsilon };
enum class WeightPlacement { Outside, Inside };
enum class LrSchedule { Constant, Cosine };

NoiseMix parse_noise_mix(const std::string& name);
std::string noise_mix_name(NoiseMix mix);
Pairing parse_pairing(const std::string& name);

struct TrainConfig {
  int batch = 64;
  int steps = 20000;
  double lr = 1e-4;
  double weight_decay = 1e-4;
  std::uint64_t seed = 0;
  Pairing pairing = Pairing::Random;
  NoiseMix noise_mix = NoiseMix::WhiteBlue;
  // Which vectors enter the rectified-mapping distances: the correlated
  // noise actually fed to the forward process, or the raw epsilon draw.
  PairingDistance pairing_distance = PairingDistance::Correlated;
  // Whether the (dgamma/dalpha) loss weight multiplies the squared residual
  // or the residual before squaring.
  WeightPlacement weight_placement = WeightPlacement::Outside;
  std::vector<int> hidden = {256, 256, 256};
  Activation activation = Activation::Silu;
  LrSchedule lr_schedule = LrSchedule::Constant;

  void validate() const;
};

/// Greedy minibatch re-pairing: walks the noises in list order and gives
/// each one the unused target with the smallest squared L2 distance.
/// Returns perm with perm[i] = index of the target assigned to noise i.
std::vector<std::size_t> pair_batch(std::span<const Eigen::VectorXd> noises,
                                    std::span<const Eigen::VectorXd> targets);

/// Per-sample two-head loss: mean squared error of d1 plus the scheduler
/// weight (gamma_t - gamma_{t-1}) / (alpha_t - alpha_{t-1}) times the mean
/// squared error of d2.
double loss(const DenoiserOutput& out, const DenoiserOutput& target, int t,
            const Schedule& schedule,
            WeightPlacement placement = WeightPlacement::Outside);

/// Batched loss and parameter gradients, shared between the training loop
/// (float) and the finite-difference checks (double). `input` holds one
/// column per sample (data followed by time features); targets hold the
/// matching d1/d2 columns.
template <typename Scalar>
struct BatchLoss {
  double value = 0.0;
  double weight_mean = 0.0;
  typename Mlp<Scalar>::Gradients grads;
};

template <typename Scalar>
BatchLoss<Scalar> batch_loss_and_gradients(
    const Mlp<Scalar>& net,
    const typename Mlp<Scalar>::Mat& input,
    const typename Mlp<Scalar>::Mat& d1_target,
    const typename Mlp<Scalar>::Mat& d2_target, std::span<const int> ts,
    const Schedule& schedule, WeightPlacement placement) {
  using Mat = typename Mlp<Scalar>::Mat;
  const Eigen::Index dim = d1_target.rows();
  const Eigen::Index batch = input.cols();

  typename Mlp<Scalar>::Cache cache;
  const Mat out = net.forward(input, &cache);

  Mat dout(2 * dim, batch);
  double total = 0.0;
  double weight_sum = 0.0;
  const double denom = static_cast<double>(dim) * static_cast<double>(batch);
  for (Eigen::Index c = 0; c < batch; ++c) {
    const double w = schedule.loss_weight(ts[static_cast<std::size_t>(c)]);
    weight_sum += w;
    const auto r1 = (out.col(c).head(dim) - d1_target.col(c)).eval();
    const auto r2 = (out.col(c).tail(dim) - d2_target.col(c)).eval();
    const double sq1 = static_cast<double>(r1.squaredNorm());
    const double sq2 = static_cast<double>(r2.squaredNorm());
    const double w2 = placement == WeightPlacement::Outside ? w : w * w;
    total += (sq1 + w2 * sq2) / static_cast<double>(dim);
    dout.col(c).head(dim) = r1 * Scalar(2.0 / denom);
    dout.col(c).tail(dim) = r2 * Scalar(2.0 * w2 / denom);
  }

  BatchLoss<Scalar> result;
  result.value = total / static_cast<double>(batch);
  result.weight_mean = weight_sum / static_cast<double>(batch);
  result.grads = net.backward(cache, dout);
  return result;
}

struct StepLog {
  int step = 0;
  double loss = 0.0;
  double weight_mean = 0.0;
};

struct TrainResult {
  Mlp<float> net;
  std::vector<StepLog> log;
  // Mean loss of the untrained network over 50 held-out batches, evaluated
  // before any update.
  double initial_running_loss = 0.0;
  double final_running_loss = 0.0;  // mean over the last 50 training steps
  Schedule effective_schedule;      // gamma pinned for single-noise mixes
};

/// Trains the two-head denoiser on a procedural dataset. `correlated` is the
/// non-white factor (blue for blue_only / white_blue, red for white_red);
/// white_only substitutes the identity and never touches it. Deterministic
/// in cfg.seed. Throws on divergence (non-finite loss).
TrainResult train(const ToyDataset& dataset, const TrainConfig& cfg,
                  const Schedule& schedule, const NoiseModel& correlated);

/// Adapts a trained network to the sampler's callable interface.
Denoiser make_denoiser(const Mlp<float>& net, int total_steps);

struct GenerationMetrics {
  double sliced_wasserstein = 0.0;
  double energy_distance = 0.0;
};

/// Generates `n` samples with the trained net and compares them against `n`
/// held-out dataset samples (64 random projections for the sliced
/// Wasserstein distance).
GenerationMetrics evaluate_generation(const Mlp<float>& net,
                                      const ToyDataset& dataset,
                                      const Schedule& schedule, int n,
                                      std::uint64_t seed);

/// Parameters as one CNT1 tensor per layer plus a topology manifest.
void save_denoiser(const std::filesystem::path& dir, const Mlp<float>& net,
                   const nlohmann::json& extra_manifest);
Mlp<float> load_denoiser(const std::filesystem::path& dir);

}  // namespace cndiff
