#pragma once

#include "hgs/body.hpp"
#include "hgs/camera.hpp"
#include "hgs/diffusion.hpp"
#include "hgs/gaussians.hpp"
#include "hgs/image.hpp"

#include <filesystem>
#include <string>

namespace hgs {

// All binary containers are little-endian with a 4-byte magic and a u32
// version, written so that write -> read -> write is byte-identical.

// "HGST": json header (counts, joint hierarchy) + f32/u32 blob.
void save_template(const SkinnedTemplate& tmpl, const std::filesystem::path& path);
SkinnedTemplate load_template(const std::filesystem::path& path);

// "HGSA": count + [positions][scales][quaternions wxyz][opacities][colors].
void save_gaussians(const PosedGaussians& g, const std::filesystem::path& path);
PosedGaussians load_gaussians(const std::filesystem::path& path);

// "HGSU": dimensions + validity mask + raw channel planes. Bindings are not
// stored; load_uv_map rebuilds them against the template and requires the
// stored mask to match.
void save_uv_map(const UvAttributeMap& map, const std::filesystem::path& path);
UvAttributeMap load_uv_map(const std::filesystem::path& path, const SkinnedTemplate& tmpl);

// Pinhole camera as JSON with row-major R.
void save_camera(const Camera& cam, const std::filesystem::path& path);
Camera load_camera(const std::filesystem::path& path);

// "HGSL": latent dimensions + f32 planes.
void save_latent(const LatentTensor& latent, const std::filesystem::path& path);
LatentTensor load_latent(const std::filesystem::path& path);

// "HGSI": raw f32 image planes, for loss computation without quantization.
void save_image_f32(const ImageBuffer& img, const std::filesystem::path& path);
ImageBuffer load_image_f32(const std::filesystem::path& path);

// 8-bit PNG; float channels are clamped to [0,1] on write. Supports 1, 3 and
// 4 channels.
void save_png(const ImageBuffer& img, const std::filesystem::path& path);
ImageBuffer load_png(const std::filesystem::path& path);

// Image loader dispatching on extension (.png / .hgsi).
ImageBuffer load_image(const std::filesystem::path& path);

// Pose sequence JSON: [{"root_translation": [3], "root_rotation": [3],
// "joint_rotations": [[3] x J]}, ...].
void save_poses(const std::vector<Pose>& poses, const std::filesystem::path& path);
std::vector<Pose> load_poses(const std::filesystem::path& path);

uint32_t file_crc32(const std::filesystem::path& path);

}  // namespace hgs
