#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace hgs {

enum class ScheduleKind { kLinear, kCosine };

// Discrete DDPM noise schedule; alpha_bars[t-1] stores the cumulative
// product for step t in [1, T].
struct NoiseSchedule {
  int total_steps = 0;
  std::vector<double> betas;
  std::vector<double> alpha_bars;

  double alpha_bar(int t) const;  // throws std::out_of_range outside [1, T]
};

NoiseSchedule make_schedule(int total_steps, ScheduleKind kind = ScheduleKind::kLinear);

// Channel-plane latent grid, default shape 64 x 64 x 16.
struct LatentTensor {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<float> values;  // channel-major planes

  LatentTensor() = default;
  LatentTensor(int h, int w, int c, float fill = 0.f)
      : height(h), width(w), channels(c),
        values(static_cast<size_t>(h) * w * c, fill) {}

  static LatentTensor standard() { return LatentTensor(64, 64, 16); }
  size_t size() const { return values.size(); }
  bool same_shape(const LatentTensor& o) const {
    return height == o.height && width == o.width && channels == o.channels;
  }
};

LatentTensor gaussian_latent(int height, int width, int channels, uint64_t seed);

// Forward diffusion: sqrt(abar_t) x0 + sqrt(1 - abar_t) eps.
LatentTensor q_sample(const LatentTensor& x0, int t, const LatentTensor& eps,
                      const NoiseSchedule& sched);

// v parameterization: v = sqrt(abar) eps - sqrt(1 - abar) x0, and its exact
// inversion given x_t.
LatentTensor v_target(const LatentTensor& x0, const LatentTensor& eps, int t,
                      const NoiseSchedule& sched);
std::pair<LatentTensor, LatentTensor> from_v(const LatentTensor& x_t,
                                             const LatentTensor& v, int t,
                                             const NoiseSchedule& sched);

using Condition = std::optional<Eigen::VectorXf>;
using Denoiser =
    std::function<LatentTensor(const LatentTensor& x_t, int t, const Condition&)>;

double v_loss(const Denoiser& denoiser, const LatentTensor& x0, int t,
              const LatentTensor& eps, const Condition& condition,
              const NoiseSchedule& sched);

// uncond + scale * (cond - uncond)
LatentTensor cfg_combine(const LatentTensor& uncond, const LatentTensor& cond,
                         double scale);

struct SampleAudit {
  std::function<void(int step, int t, double latent_norm)> on_step;
};

// Deterministic (eta = 0) sampler over an evenly spaced descending
// t-subsequence. When cfg_scale != 1 the denoiser is queried twice per step,
// with and without the condition.
LatentTensor sample(const Denoiser& denoiser, const Condition& condition, int steps,
                    double cfg_scale, const NoiseSchedule& sched, uint64_t seed,
                    int height = 64, int width = 64, int channels = 16,
                    const SampleAudit* audit = nullptr);

// Exact v-predictions for fixture targets; used by tests and the sampler CLI.
Denoiser point_mass_denoiser(LatentTensor target, const NoiseSchedule& sched);
Denoiser gaussian_denoiser(double mean, double stddev, const NoiseSchedule& sched);

// x / sqrt(mean(x^2) + eps) * gain
std::vector<float> rmsnorm(const std::vector<float>& x, const std::vector<float>& gain,
                           double eps = 1e-6);

// 2D rotary embedding: first half of each feature vector rotates by the row
// coordinate, second half by the column coordinate, pairwise with frequencies
// 10000^(-2i/d_half). Feature dimension must be divisible by 4.
Eigen::MatrixXf rope_2d(const Eigen::MatrixXf& tokens,
                        const std::vector<std::pair<double, double>>& positions);

}  // namespace hgs
