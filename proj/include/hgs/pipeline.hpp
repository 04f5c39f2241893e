#pragma once

#include "hgs/camera.hpp"
#include "hgs/gaussians.hpp"
#include "hgs/image.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace hgs {

struct CameraRing {
  double elevation_deg = 0;
  int count = 0;
  double radius = 2.5;
  Eigen::Vector3d target = Eigen::Vector3d(0, 0.9, 0);
};

// Default layout: a horizontal ring of 30 cameras at 12 degree azimuth
// spacing plus three upward and three downward rings of 10 cameras each,
// 90 views total.
struct CameraRigSpec {
  std::vector<CameraRing> rings;
  int image_width = 512;
  int image_height = 512;
  double focal = 560.0;  // fx = fy, pixels
  double near = 0.1;
  double far = 100.0;

  static CameraRigSpec standard(double radius = 2.5,
                                const Eigen::Vector3d& target = {0, 0.9, 0});
};

std::vector<Camera> generate_rig(const CameraRigSpec& spec);

// mu <- R^T (mu - t), per-gaussian rotation left-multiplied by R^T. The
// inverse of placing a canonical asset at root pose (R, t).
CanonicalGaussians canonicalize(const CanonicalGaussians& g,
                                const Eigen::Vector3d& root_rotation,
                                const Eigen::Vector3d& root_translation);
PosedGaussians canonicalize(const PosedGaussians& g,
                            const Eigen::Vector3d& root_rotation,
                            const Eigen::Vector3d& root_translation);

struct InitUvStats {
  int visible_texels = 0;
  int filled_from_neighbors = 0;
};

// Back-projects target views onto the template surface: each valid texel
// averages the colors of the views that see its surface point (z-buffer
// visibility, 1e-3 m tolerance, front-facing check) and stores the
// inverse-sigmoid in the raw color channels. Texels never seen copy the
// nearest visible texel's color (grid flood fill).
UvAttributeMap init_uv_map(const SkinnedTemplate& tmpl,
                           const std::vector<std::pair<Camera, ImageBuffer>>& views,
                           int select, int width, int height,
                           InitUvStats* stats = nullptr);

// Camera-space z-buffer of the template mesh at the camera's resolution;
// infinity where no triangle covers the pixel.
Image<float> render_template_depth(const SkinnedTemplate& tmpl, const Camera& cam);

struct ManifestEntry {
  std::string path;  // relative to the manifest
  uint32_t crc32 = 0;
};

struct AssetManifest {
  std::string asset_id;
  std::string source_tag;
  Eigen::Vector3d root_rotation = Eigen::Vector3d::Zero();
  Eigen::Vector3d root_translation = Eigen::Vector3d::Zero();
  std::vector<ManifestEntry> cameras;
  std::vector<ManifestEntry> renders;
  std::vector<std::string> errors;
};

void save_manifest(const AssetManifest& manifest, const std::filesystem::path& path);
AssetManifest load_manifest(const std::filesystem::path& path);

// Renders one PNG per camera into <out>/renders, writes the camera JSONs to
// <out>/cameras and a manifest.json with CRC32 checksums. I/O failures are
// recorded as manifest error entries instead of aborting the batch.
AssetManifest batch_render(const PosedGaussians& asset, const std::vector<Camera>& rig,
                           const std::filesystem::path& out_dir,
                           const Vec3f& background = Vec3f::Ones(), int threads = 1,
                           const std::string& asset_id = "asset",
                           const std::string& source_tag = "");

}  // namespace hgs
