#include "hgs/fit.hpp"

#include "hgs/losses.hpp"
#include "hgs/random.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

namespace hgs {

void FitConfig::validate() const {
  if (iterations < 0) throw std::invalid_argument("fit: iterations must be >= 0");
  if (!(learning_rate > 0)) throw std::invalid_argument("fit: learning rate must be > 0");
  if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1))
    throw std::invalid_argument("fit: betas must lie in [0, 1)");
  if (lambda_ssim < 0 || lambda_kl < 0 || weight_decay < 0)
    throw std::invalid_argument("fit: loss weights must be >= 0");
  if (views_per_iter < 1) throw std::invalid_argument("fit: views_per_iter must be >= 1");
  if (uv_width < 1 || uv_height < 1) throw std::invalid_argument("fit: empty uv grid");
}

namespace {

ImageBuffer pad_to_rgba(const ImageBuffer& img) {
  if (img.channels == 4) return img;
  ImageBuffer out(img.width, img.height, 4);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < std::min(3, img.channels); ++c)
        out.at(x, y, c) = img.at(x, y, c);
  return out;
}

}  // namespace

std::pair<UvAttributeMap, FitReport> fit_subject(
    const SkinnedTemplate& tmpl,
    const std::vector<std::pair<Camera, ImageBuffer>>& targets, const FitConfig& config,
    const UvAttributeMap* initial, const FitProgress& progress) {
  config.validate();
  if (targets.empty()) throw std::invalid_argument("fit_subject: need at least one view");
  const auto t_start = std::chrono::steady_clock::now();

  UvAttributeMap map;
  if (initial) {
    map = *initial;
    map.validate(tmpl);
  } else {
    map = build_uv_map(tmpl, config.uv_width, config.uv_height);
  }
  const int n = map.gaussian_count();

  std::vector<int> input_views = config.input_views;
  if (input_views.empty())
    for (size_t i = 0; i < targets.size(); ++i) input_views.push_back(static_cast<int>(i));
  for (int v : input_views)
    if (v < 0 || v >= static_cast<int>(targets.size()))
      throw std::out_of_range("fit_subject: input view index out of range");
  for (int v : config.eval_views)
    if (v < 0 || v >= static_cast<int>(targets.size()))
      throw std::out_of_range("fit_subject: eval view index out of range");

  std::vector<ImageBuffer> padded_targets;
  padded_targets.reserve(targets.size());
  for (const auto& [cam, img] : targets) {
    if (img.width != cam.width || img.height != cam.height)
      throw std::invalid_argument("fit_subject: target image does not match its camera");
    padded_targets.push_back(pad_to_rgba(img));
  }

  const RenderChain<float> chain = make_render_chain<float>(map, tmpl);

  // Packed raw parameters, gaussian-major.
  std::vector<float> params(static_cast<size_t>(n) * kUvChannelCount, 0.f);
  for (int g = 0; g < n; ++g)
    for (int c = 0; c < kUvChannelCount; ++c)
      params[g * kUvChannelCount + c] = map.channel(c, map.texel_index[g]);

  FitReport report;
  report.eval_views = config.eval_views;
  AdamWConfig opt_cfg{config.learning_rate, config.beta1, config.beta2,
                      config.weight_decay, 1e-8};
  AdamWState<float> opt_state;
  Rng rng(config.seed);
  const Vec3f background = Vec3f::Ones();
  const int subset_size =
      std::min<int>(config.views_per_iter, static_cast<int>(input_views.size()));

  std::vector<float> grads(params.size());
  std::vector<int> pool = input_views;

  for (int iter = 0; iter < config.iterations; ++iter) {
    // Seeded partial Fisher-Yates draw of this iteration's views.
    for (int i = 0; i < subset_size; ++i) {
      const int j = i + static_cast<int>(rng.below(static_cast<uint32_t>(pool.size() - i)));
      std::swap(pool[i], pool[j]);
    }

    std::fill(grads.begin(), grads.end(), 0.f);
    const RenderChain<float>::Forward fwd = chain.forward(params);

    double loss = 0;
    double first_view_psnr = 0;
    for (int s = 0; s < subset_size; ++s) {
      const int view = pool[s];
      const Camera& cam = targets[view].first;
      const ImageBuffer& target = padded_targets[view];

      const SplatFrame<float> frame = project_gaussians(fwd.scene, cam);
      const ImageBuffer render = rasterize(frame, background, nullptr, config.threads);

      ImageBuffer d_l1, d_ssim;
      const double l1 = l1_loss(render, target, &d_l1);
      const double ssim_l = config.lambda_ssim > 0
                                ? double(ssim_loss(render, target, &d_ssim))
                                : 0.0;
      loss += (l1 + config.lambda_ssim * ssim_l) / subset_size;
      if (s == 0) first_view_psnr = psnr(render, target);

      ImageBuffer upstream(render.width, render.height, 4);
      const float w = 1.f / subset_size;
      for (size_t i = 0; i < upstream.data.size(); ++i) {
        float v = d_l1.data[i];
        if (config.lambda_ssim > 0)
          v += static_cast<float>(config.lambda_ssim) * d_ssim.data[i];
        upstream.data[i] = w * v;
      }

      const auto splat_grads =
          rasterize_backward(frame, background, upstream, config.threads);
      const SceneGrad<float> scene_grads =
          project_backward(fwd.scene, cam, frame, splat_grads);
      chain.backward(params, fwd, scene_grads, grads);
    }

    report.loss_curve.push_back(loss);
    report.iterations_run = iter + 1;
    if (!std::isfinite(loss)) {
      report.diverged = true;
      break;
    }

    if (config.max_grad_norm > 0) {
      double norm_sq = 0;
      for (float g : grads) norm_sq += double(g) * g;
      const double norm = std::sqrt(norm_sq);
      if (norm > config.max_grad_norm) {
        const float scale = static_cast<float>(config.max_grad_norm / norm);
        for (float& g : grads) g *= scale;
      }
    }

    if (!adamw_step<float>(params, grads, opt_state, opt_cfg)) ++report.rejected_steps;
    if (progress) progress(iter, loss, first_view_psnr);
  }

  for (int g = 0; g < n; ++g)
    for (int c = 0; c < kUvChannelCount; ++c)
      map.channel(c, map.texel_index[g]) = params[g * kUvChannelCount + c];

  if (!report.diverged) {
    const RenderChain<float>::Forward fwd = chain.forward(params);
    for (int view : config.eval_views) {
      const SplatFrame<float> frame = project_gaussians(fwd.scene, targets[view].first);
      const ImageBuffer render = rasterize(frame, background, nullptr, config.threads);
      report.eval_psnr.push_back(psnr(render, padded_targets[view]));
      report.eval_ssim.push_back(ssim(render, padded_targets[view]));
    }
  }

  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return {std::move(map), std::move(report)};
}

}  // namespace hgs
