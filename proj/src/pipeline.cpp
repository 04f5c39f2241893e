#include "hgs/pipeline.hpp"

#include "hgs/io.hpp"
#include "hgs/render.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <deque>
#include <fstream>
#include <limits>

namespace hgs {

CameraRigSpec CameraRigSpec::standard(double radius, const Eigen::Vector3d& target) {
  CameraRigSpec spec;
  spec.rings.push_back({0.0, 30, radius, target});
  for (double e : {20.0, 40.0, 60.0}) spec.rings.push_back({e, 10, radius, target});
  for (double e : {-20.0, -40.0, -60.0}) spec.rings.push_back({e, 10, radius, target});
  return spec;
}

std::vector<Camera> generate_rig(const CameraRigSpec& spec) {
  std::vector<Camera> cams;
  for (const CameraRing& ring : spec.rings) {
    if (ring.count <= 0) throw std::invalid_argument("generate_rig: ring count must be > 0");
    if (ring.radius <= 0) throw std::invalid_argument("generate_rig: radius must be > 0");
    const double elev = ring.elevation_deg * M_PI / 180.0;
    for (int k = 0; k < ring.count; ++k) {
      const double azim = 2.0 * M_PI * k / ring.count;
      const Eigen::Vector3d offset(ring.radius * std::cos(elev) * std::cos(azim),
                                   ring.radius * std::sin(elev),
                                   ring.radius * std::cos(elev) * std::sin(azim));
      cams.push_back(Camera::look_at(ring.target + offset, ring.target,
                                     Eigen::Vector3d::UnitY(), spec.focal, spec.focal,
                                     spec.image_width, spec.image_height, spec.near,
                                     spec.far));
    }
  }
  return cams;
}

namespace {

template <class G>
G canonicalize_impl(const G& g, const Eigen::Vector3d& root_rotation,
                    const Eigen::Vector3d& root_translation) {
  const Mat3d r_inv = axis_angle_to_matrix<double>(root_rotation).transpose();
  const Quat<double> q_inv(r_inv);

  G out = g;
  for (int i = 0; i < g.count(); ++i) {
    out.positions[i] = r_inv * (g.positions[i] - root_translation);
    out.rotations[i] = q_inv * g.rotations[i];
  }
  if constexpr (requires { out.rot_linear; }) {
    for (int i = 0; i < g.count(); ++i) out.rot_linear[i] = r_inv * g.rot_linear[i];
  }
  return out;
}

}  // namespace

CanonicalGaussians canonicalize(const CanonicalGaussians& g,
                                const Eigen::Vector3d& root_rotation,
                                const Eigen::Vector3d& root_translation) {
  return canonicalize_impl(g, root_rotation, root_translation);
}

PosedGaussians canonicalize(const PosedGaussians& g,
                            const Eigen::Vector3d& root_rotation,
                            const Eigen::Vector3d& root_translation) {
  return canonicalize_impl(g, root_rotation, root_translation);
}

Image<float> render_template_depth(const SkinnedTemplate& tmpl, const Camera& cam) {
  Image<float> depth(cam.width, cam.height, 1,
                     std::numeric_limits<float>::infinity());
  const Mat3d r = cam.rotation;
  const Eigen::Vector3d t = cam.translation;

  for (int f = 0; f < tmpl.face_count(); ++f) {
    Eigen::Vector3d p[3];
    double z[3];
    Eigen::Vector2d px[3];
    bool in_front = true;
    for (int k = 0; k < 3; ++k) {
      p[k] = r * tmpl.vertices[tmpl.faces[f][k]].cast<double>() + t;
      z[k] = p[k].z();
      if (z[k] <= cam.near || z[k] >= cam.far) in_front = false;
    }
    if (!in_front) continue;
    for (int k = 0; k < 3; ++k)
      px[k] = Eigen::Vector2d(cam.fx * p[k].x() / z[k] + cam.cx,
                              cam.fy * p[k].y() / z[k] + cam.cy);

    const double det = (px[1] - px[0]).x() * (px[2] - px[0]).y() -
                       (px[2] - px[0]).x() * (px[1] - px[0]).y();
    if (std::abs(det) < 1e-12) continue;
    const int x0 = std::max(0, static_cast<int>(std::floor(std::min({px[0].x(), px[1].x(), px[2].x()}) - 0.5)));
    const int x1 = std::min(cam.width - 1, static_cast<int>(std::ceil(std::max({px[0].x(), px[1].x(), px[2].x()}))));
    const int y0 = std::max(0, static_cast<int>(std::floor(std::min({px[0].y(), px[1].y(), px[2].y()}) - 0.5)));
    const int y1 = std::min(cam.height - 1, static_cast<int>(std::ceil(std::max({px[0].y(), px[1].y(), px[2].y()}))));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const Eigen::Vector2d q(x + 0.5, y + 0.5);
        const double w1 = ((q - px[0]).x() * (px[2] - px[0]).y() -
                           (px[2] - px[0]).x() * (q - px[0]).y()) / det;
        const double w2 = ((px[1] - px[0]).x() * (q - px[0]).y() -
                           (q - px[0]).x() * (px[1] - px[0]).y()) / det;
        const double w0 = 1.0 - w1 - w2;
        if (w0 < 0 || w1 < 0 || w2 < 0) continue;
        // Perspective-correct depth via interpolated 1/z.
        const double inv_z = w0 / z[0] + w1 / z[1] + w2 / z[2];
        const float zq = static_cast<float>(1.0 / inv_z);
        float& cell = depth.at(x, y, 0);
        if (zq < cell) cell = zq;
      }
    }
  }
  return depth;
}

UvAttributeMap init_uv_map(const SkinnedTemplate& tmpl,
                           const std::vector<std::pair<Camera, ImageBuffer>>& views,
                           int select, int width, int height, InitUvStats* stats) {
  if (views.empty()) throw std::invalid_argument("init_uv_map: need at least one view");
  select = std::clamp<int>(select, 1, static_cast<int>(views.size()));

  // Evenly spread selection over the provided views.
  std::vector<int> chosen;
  for (int i = 0; i < select; ++i) {
    const int idx = static_cast<int>(
        static_cast<int64_t>(i) * static_cast<int64_t>(views.size()) / select);
    if (chosen.empty() || chosen.back() != idx) chosen.push_back(idx);
  }

  UvAttributeMap map = build_uv_map(tmpl, width, height);

  std::vector<Image<float>> depth_buffers;
  depth_buffers.reserve(chosen.size());
  for (int idx : chosen)
    depth_buffers.push_back(render_template_depth(tmpl, views[idx].first));

  // World-space face normals for the front-facing test.
  std::vector<Vec3d> face_normal(tmpl.face_count());
  for (int f = 0; f < tmpl.face_count(); ++f) {
    const Vec3d a = tmpl.vertices[tmpl.faces[f][0]].cast<double>();
    const Vec3d b = tmpl.vertices[tmpl.faces[f][1]].cast<double>();
    const Vec3d c = tmpl.vertices[tmpl.faces[f][2]].cast<double>();
    face_normal[f] = (b - a).cross(c - a).normalized();
  }

  const int n = map.gaussian_count();
  std::vector<uint8_t> sampled(n, 0);
  std::vector<Vec3d> mean_color(n, Vec3d::Zero());

  for (int k = 0; k < n; ++k) {
    const TexelBinding& binding = map.bindings[k];
    const Vec3d point = texel_basis(tmpl, binding, width).position;
    Vec3d accum = Vec3d::Zero();
    int hits = 0;
    for (size_t vi = 0; vi < chosen.size(); ++vi) {
      const Camera& cam = views[chosen[vi]].first;
      const ImageBuffer& img = views[chosen[vi]].second;
      const Vec3d tcam = cam.rotation * point + cam.translation;
      if (!(tcam.z() > cam.near && tcam.z() < cam.far)) continue;
      const double px = cam.fx * tcam.x() / tcam.z() + cam.cx;
      const double py = cam.fy * tcam.y() / tcam.z() + cam.cy;
      const int ix = static_cast<int>(std::floor(px));
      const int iy = static_cast<int>(std::floor(py));
      if (ix < 0 || ix >= cam.width || iy < 0 || iy >= cam.height) continue;
      if (face_normal[binding.face].dot(point - cam.position()) >= 0) continue;
      const float zbuf = depth_buffers[vi].at(ix, iy, 0);
      if (std::abs(zbuf - static_cast<float>(tcam.z())) > 1e-3f) continue;
      accum += Vec3d(img.at(ix, iy, 0), img.at(ix, iy, 1), img.at(ix, iy, 2));
      ++hits;
    }
    if (hits > 0) {
      sampled[k] = 1;
      mean_color[k] = accum / hits;
    }
  }

  int visible = 0;
  for (uint8_t s : sampled) visible += s;
  if (stats) stats->visible_texels = visible;

  if (visible == 0) {
    std::fprintf(stderr,
                 "init_uv_map: no texel visible in any view, returning zero map\n");
    return map;
  }

  // Flood-fill colors into never-seen texels from their nearest seen
  // neighbor on the texel grid.
  if (visible < n) {
    std::vector<int> owner(static_cast<size_t>(width) * height, -1);
    std::deque<int32_t> queue;
    std::vector<int> gaussian_of(static_cast<size_t>(width) * height, -1);
    for (int k = 0; k < n; ++k) gaussian_of[map.texel_index[k]] = k;
    for (int k = 0; k < n; ++k)
      if (sampled[k]) {
        owner[map.texel_index[k]] = k;
        queue.push_back(map.texel_index[k]);
      }
    while (!queue.empty()) {
      const int32_t t = queue.front();
      queue.pop_front();
      const int x = t % width, y = t / width;
      const int nx[4] = {x - 1, x + 1, x, x};
      const int ny[4] = {y, y, y - 1, y + 1};
      for (int d = 0; d < 4; ++d) {
        if (nx[d] < 0 || nx[d] >= width || ny[d] < 0 || ny[d] >= height) continue;
        const int32_t nt = ny[d] * width + nx[d];
        if (owner[nt] >= 0) continue;
        owner[nt] = owner[t];
        queue.push_back(nt);
      }
    }
    for (int k = 0; k < n; ++k) {
      if (sampled[k]) continue;
      const int src = owner[map.texel_index[k]];
      if (src >= 0) {
        mean_color[k] = mean_color[src];
        if (stats) ++stats->filled_from_neighbors;
      }
    }
  }

  for (int k = 0; k < n; ++k) {
    for (int c = 0; c < 3; ++c) {
      const double v = std::clamp(mean_color[k](c), 1e-4, 1.0 - 1e-4);
      map.channel(kUvColorR + c, map.texel_index[k]) = static_cast<float>(logit(v));
    }
  }
  return map;
}

void save_manifest(const AssetManifest& manifest, const std::filesystem::path& path) {
  nlohmann::json j;
  j["asset_id"] = manifest.asset_id;
  j["source_tag"] = manifest.source_tag;
  j["root_rotation"] = {manifest.root_rotation.x(), manifest.root_rotation.y(),
                        manifest.root_rotation.z()};
  j["root_translation"] = {manifest.root_translation.x(), manifest.root_translation.y(),
                           manifest.root_translation.z()};
  auto entries = [](const std::vector<ManifestEntry>& v) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& e : v) arr.push_back({{"path", e.path}, {"crc32", e.crc32}});
    return arr;
  };
  j["cameras"] = entries(manifest.cameras);
  j["renders"] = entries(manifest.renders);
  j["errors"] = manifest.errors;

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << j.dump(2) << "\n";
}

AssetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for reading: " + path.string());
  nlohmann::json j;
  in >> j;
  AssetManifest m;
  m.asset_id = j.at("asset_id").get<std::string>();
  m.source_tag = j.at("source_tag").get<std::string>();
  for (int k = 0; k < 3; ++k) {
    m.root_rotation(k) = j.at("root_rotation")[k].get<double>();
    m.root_translation(k) = j.at("root_translation")[k].get<double>();
  }
  auto entries = [](const nlohmann::json& arr) {
    std::vector<ManifestEntry> v;
    for (const auto& e : arr)
      v.push_back({e.at("path").get<std::string>(), e.at("crc32").get<uint32_t>()});
    return v;
  };
  m.cameras = entries(j.at("cameras"));
  m.renders = entries(j.at("renders"));
  for (const auto& e : j.at("errors")) m.errors.push_back(e.get<std::string>());
  return m;
}

AssetManifest batch_render(const PosedGaussians& asset, const std::vector<Camera>& rig,
                           const std::filesystem::path& out_dir, const Vec3f& background,
                           int threads, const std::string& asset_id,
                           const std::string& source_tag) {
  AssetManifest manifest;
  manifest.asset_id = asset_id;
  manifest.source_tag = source_tag;

  std::filesystem::create_directories(out_dir / "cameras");
  std::filesystem::create_directories(out_dir / "renders");

  const GaussianScene<float> scene = to_scene<float>(asset);
  char name[64];
  for (size_t i = 0; i < rig.size(); ++i) {
    std::snprintf(name, sizeof(name), "view_%03zu", i);
    const std::string cam_rel = std::string("cameras/") + name + ".json";
    const std::string img_rel = std::string("renders/") + name + ".png";
    try {
      save_camera(rig[i], out_dir / cam_rel);
      const SplatFrame<float> frame = project_gaussians(scene, rig[i]);
      const ImageBuffer image = rasterize(frame, background, nullptr, threads);
      save_png(image, out_dir / img_rel);
      manifest.cameras.push_back({cam_rel, file_crc32(out_dir / cam_rel)});
      manifest.renders.push_back({img_rel, file_crc32(out_dir / img_rel)});
    } catch (const std::exception& e) {
      manifest.errors.push_back(std::string(name) + ": " + e.what());
    }
  }
  save_manifest(manifest, out_dir / "manifest.json");
  return manifest;
}

}  // namespace hgs
