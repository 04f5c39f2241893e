#include "hgs/diffusion.hpp"

#include "hgs/random.hpp"

#include <cmath>
#include <stdexcept>

namespace hgs {

double NoiseSchedule::alpha_bar(int t) const {
  if (t < 1 || t > total_steps)
    throw std::out_of_range("noise schedule: step outside [1, T]");
  return alpha_bars[t - 1];
}

NoiseSchedule make_schedule(int total_steps, ScheduleKind kind) {
  if (total_steps < 1) throw std::invalid_argument("make_schedule: need T >= 1");
  NoiseSchedule s;
  s.total_steps = total_steps;
  s.betas.resize(total_steps);
  s.alpha_bars.resize(total_steps);

  if (kind == ScheduleKind::kLinear) {
    const double b0 = 1e-4, b1 = 0.02;
    for (int i = 0; i < total_steps; ++i)
      s.betas[i] = total_steps == 1
                       ? b0
                       : b0 + (b1 - b0) * static_cast<double>(i) / (total_steps - 1);
  } else {
    const double offset = 0.008;
    auto f = [&](double t) {
      const double v = std::cos((t / total_steps + offset) / (1.0 + offset) * M_PI / 2.0);
      return v * v;
    };
    double prev = 1.0;
    for (int i = 0; i < total_steps; ++i) {
      const double abar = f(i + 1.0) / f(0.0);
      s.betas[i] = std::min(0.999, 1.0 - abar / prev);
      prev = abar;
    }
  }

  double prod = 1.0;
  for (int i = 0; i < total_steps; ++i) {
    if (!(s.betas[i] > 0.0 && s.betas[i] < 1.0))
      throw std::logic_error("make_schedule: beta outside (0, 1)");
    prod *= 1.0 - s.betas[i];
    s.alpha_bars[i] = prod;
  }
  for (int i = 1; i < total_steps; ++i)
    if (!(s.alpha_bars[i] < s.alpha_bars[i - 1]))
      throw std::logic_error("make_schedule: alpha_bar not strictly decreasing");
  return s;
}

LatentTensor gaussian_latent(int height, int width, int channels, uint64_t seed) {
  LatentTensor out(height, width, channels);
  Rng rng(seed);
  for (auto& v : out.values) v = static_cast<float>(rng.normal());
  return out;
}

namespace {

void require_same(const LatentTensor& a, const LatentTensor& b, const char* what) {
  if (!a.same_shape(b))
    throw std::invalid_argument(std::string(what) + ": latent shapes differ");
}

}  // namespace

LatentTensor q_sample(const LatentTensor& x0, int t, const LatentTensor& eps,
                      const NoiseSchedule& sched) {
  require_same(x0, eps, "q_sample");
  const double abar = sched.alpha_bar(t);
  const double ca = std::sqrt(abar), ce = std::sqrt(1.0 - abar);
  LatentTensor out = x0;
  for (size_t i = 0; i < out.values.size(); ++i)
    out.values[i] = static_cast<float>(ca * x0.values[i] + ce * eps.values[i]);
  return out;
}

LatentTensor v_target(const LatentTensor& x0, const LatentTensor& eps, int t,
                      const NoiseSchedule& sched) {
  require_same(x0, eps, "v_target");
  const double abar = sched.alpha_bar(t);
  const double ca = std::sqrt(abar), ce = std::sqrt(1.0 - abar);
  LatentTensor out = x0;
  for (size_t i = 0; i < out.values.size(); ++i)
    out.values[i] = static_cast<float>(ca * eps.values[i] - ce * x0.values[i]);
  return out;
}

std::pair<LatentTensor, LatentTensor> from_v(const LatentTensor& x_t,
                                             const LatentTensor& v, int t,
                                             const NoiseSchedule& sched) {
  require_same(x_t, v, "from_v");
  const double abar = sched.alpha_bar(t);
  const double ca = std::sqrt(abar), ce = std::sqrt(1.0 - abar);
  LatentTensor x0 = x_t, eps = x_t;
  for (size_t i = 0; i < x_t.values.size(); ++i) {
    x0.values[i] = static_cast<float>(ca * x_t.values[i] - ce * v.values[i]);
    eps.values[i] = static_cast<float>(ce * x_t.values[i] + ca * v.values[i]);
  }
  return {std::move(x0), std::move(eps)};
}

double v_loss(const Denoiser& denoiser, const LatentTensor& x0, int t,
              const LatentTensor& eps, const Condition& condition,
              const NoiseSchedule& sched) {
  const LatentTensor x_t = q_sample(x0, t, eps, sched);
  const LatentTensor target = v_target(x0, eps, t, sched);
  const LatentTensor pred = denoiser(x_t, t, condition);
  require_same(pred, target, "v_loss");
  double sum = 0;
  for (size_t i = 0; i < target.values.size(); ++i) {
    const double d = double(pred.values[i]) - double(target.values[i]);
    sum += d * d;
  }
  return sum / static_cast<double>(target.values.size());
}

LatentTensor cfg_combine(const LatentTensor& uncond, const LatentTensor& cond,
                         double scale) {
  require_same(uncond, cond, "cfg_combine");
  LatentTensor out = uncond;
  for (size_t i = 0; i < out.values.size(); ++i)
    out.values[i] = static_cast<float>(
        double(uncond.values[i]) +
        scale * (double(cond.values[i]) - double(uncond.values[i])));
  return out;
}

LatentTensor sample(const Denoiser& denoiser, const Condition& condition, int steps,
                    double cfg_scale, const NoiseSchedule& sched, uint64_t seed,
                    int height, int width, int channels, const SampleAudit* audit) {
  if (steps < 1 || steps > sched.total_steps)
    throw std::invalid_argument("sample: need 1 <= steps <= T");

  // Evenly spaced descending t-subsequence from T down to 1.
  std::vector<int> taus(steps);
  for (int i = 0; i < steps; ++i) {
    double t = steps == 1 ? sched.total_steps
                          : sched.total_steps -
                                static_cast<double>(i) * (sched.total_steps - 1) / (steps - 1);
    taus[i] = static_cast<int>(std::lround(t));
    if (i > 0 && taus[i] >= taus[i - 1]) taus[i] = taus[i - 1] - 1;
  }

  LatentTensor x = gaussian_latent(height, width, channels, seed);
  for (int i = 0; i < steps; ++i) {
    const int t = taus[i];
    LatentTensor v = denoiser(x, t, condition);
    if (!v.same_shape(x)) throw std::runtime_error("sample: denoiser shape violation");
    if (cfg_scale != 1.0) {
      LatentTensor v_uncond = denoiser(x, t, std::nullopt);
      if (!v_uncond.same_shape(x))
        throw std::runtime_error("sample: denoiser shape violation");
      v = cfg_combine(v_uncond, v, cfg_scale);
    }
    auto [x0_hat, eps_hat] = from_v(x, v, t, sched);
    if (i + 1 < steps) {
      const double abar_next = sched.alpha_bar(taus[i + 1]);
      const double ca = std::sqrt(abar_next), ce = std::sqrt(1.0 - abar_next);
      for (size_t k = 0; k < x.values.size(); ++k)
        x.values[k] =
            static_cast<float>(ca * x0_hat.values[k] + ce * eps_hat.values[k]);
    } else {
      x = std::move(x0_hat);
    }
    if (audit && audit->on_step) {
      double norm = 0;
      for (float val : x.values) norm += double(val) * val;
      audit->on_step(i, t, std::sqrt(norm));
    }
  }
  return x;
}

Denoiser point_mass_denoiser(LatentTensor target, const NoiseSchedule& sched) {
  return [target = std::move(target), sched](const LatentTensor& x_t, int t,
                                             const Condition&) {
    if (!x_t.same_shape(target))
      throw std::invalid_argument("point_mass_denoiser: latent shape mismatch");
    const double abar = sched.alpha_bar(t);
    const double ca = std::sqrt(abar), ce = std::sqrt(1.0 - abar);
    LatentTensor v = x_t;
    for (size_t i = 0; i < v.values.size(); ++i) {
      const double eps_hat = (double(x_t.values[i]) - ca * target.values[i]) / ce;
      v.values[i] = static_cast<float>(ca * eps_hat - ce * target.values[i]);
    }
    return v;
  };
}

Denoiser gaussian_denoiser(double mean, double stddev, const NoiseSchedule& sched) {
  return [mean, stddev, sched](const LatentTensor& x_t, int t, const Condition&) {
    const double abar = sched.alpha_bar(t);
    const double ca = std::sqrt(abar), ce = std::sqrt(1.0 - abar);
    const double var_t = abar * stddev * stddev + (1.0 - abar);
    LatentTensor v = x_t;
    for (size_t i = 0; i < v.values.size(); ++i) {
      const double centered = double(x_t.values[i]) - ca * mean;
      const double x0_hat = mean + ca * stddev * stddev / var_t * centered;
      const double eps_hat = ce / var_t * centered;
      v.values[i] = static_cast<float>(ca * eps_hat - ce * x0_hat);
    }
    return v;
  };
}

std::vector<float> rmsnorm(const std::vector<float>& x, const std::vector<float>& gain,
                           double eps) {
  if (x.empty()) throw std::invalid_argument("rmsnorm: empty vector");
  if (x.size() != gain.size())
    throw std::invalid_argument("rmsnorm: gain length mismatch");
  double mean_sq = 0;
  for (float v : x) mean_sq += double(v) * v;
  mean_sq /= static_cast<double>(x.size());
  const double inv = 1.0 / std::sqrt(mean_sq + eps);
  std::vector<float> out(x.size());
  for (size_t i = 0; i < x.size(); ++i)
    out[i] = static_cast<float>(double(x[i]) * inv * gain[i]);
  return out;
}

Eigen::MatrixXf rope_2d(const Eigen::MatrixXf& tokens,
                        const std::vector<std::pair<double, double>>& positions) {
  const int dim = static_cast<int>(tokens.cols());
  if (dim % 4 != 0)
    throw std::invalid_argument("rope_2d: feature dimension must be divisible by 4");
  if (positions.size() != static_cast<size_t>(tokens.rows()))
    throw std::invalid_argument("rope_2d: one position per token required");

  const int d_half = dim / 2;
  Eigen::MatrixXf out = tokens;
  for (int n = 0; n < tokens.rows(); ++n) {
    for (int axis = 0; axis < 2; ++axis) {
      const double coord = axis == 0 ? positions[n].first : positions[n].second;
      const int base = axis * d_half;
      for (int i = 0; i < d_half / 2; ++i) {
        const double freq = std::pow(10000.0, -2.0 * i / d_half);
        const double angle = coord * freq;
        const double c = std::cos(angle), s = std::sin(angle);
        const float a = tokens(n, base + 2 * i);
        const float b = tokens(n, base + 2 * i + 1);
        out(n, base + 2 * i) = static_cast<float>(c * a - s * b);
        out(n, base + 2 * i + 1) = static_cast<float>(s * a + c * b);
      }
    }
  }
  return out;
}

}  // namespace hgs
