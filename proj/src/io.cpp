#include "hgs/io.hpp"

#include <nlohmann/json.hpp>
#include <zlib.h>

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace hgs {

namespace {

using nlohmann::json;

void write_exact(std::ofstream& out, const void* data, size_t bytes) {
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(bytes));
}

void read_exact(std::ifstream& in, void* data, size_t bytes) {
  in.read(static_cast<char*>(data), static_cast<std::streamsize>(bytes));
  if (static_cast<size_t>(in.gcount()) != bytes)
    throw std::runtime_error("file truncated");
}

std::ofstream open_write(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  return out;
}

std::ifstream open_read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for reading: " + path.string());
  return in;
}

void write_magic(std::ofstream& out, const char magic[4], uint32_t version) {
  write_exact(out, magic, 4);
  write_exact(out, &version, 4);
}

uint32_t read_magic(std::ifstream& in, const char magic[4],
                    const std::filesystem::path& path) {
  char got[4];
  uint32_t version = 0;
  read_exact(in, got, 4);
  if (std::memcmp(got, magic, 4) != 0)
    throw std::runtime_error("bad magic in " + path.string());
  read_exact(in, &version, 4);
  return version;
}

template <class T>
void write_vec(std::ofstream& out, const std::vector<T>& v) {
  write_exact(out, v.data(), v.size() * sizeof(T));
}

template <class T>
void read_vec(std::ifstream& in, std::vector<T>& v, size_t count) {
  v.resize(count);
  read_exact(in, v.data(), count * sizeof(T));
}

}  // namespace

// --------------------------------------------------------------------------
// Template

void save_template(const SkinnedTemplate& tmpl, const std::filesystem::path& path) {
  json header;
  header["name"] = tmpl.name;
  header["vertex_count"] = tmpl.vertex_count();
  header["face_count"] = tmpl.face_count();
  header["weights_per_vertex"] = 4;
  json joints = json::array();
  for (const Joint& j : tmpl.joints) {
    joints.push_back({{"parent", j.parent},
                      {"rest_position", {j.rest_position.x(), j.rest_position.y(),
                                         j.rest_position.z()}}});
  }
  header["joints"] = joints;
  const std::string header_str = header.dump();

  auto out = open_write(path);
  write_magic(out, "HGST", 1);
  const uint32_t json_len = static_cast<uint32_t>(header_str.size());
  write_exact(out, &json_len, 4);
  write_exact(out, header_str.data(), header_str.size());

  std::vector<float> verts(tmpl.vertex_count() * 3);
  for (int i = 0; i < tmpl.vertex_count(); ++i)
    for (int k = 0; k < 3; ++k) verts[i * 3 + k] = tmpl.vertices[i](k);
  write_vec(out, verts);

  std::vector<uint32_t> faces(tmpl.face_count() * 3);
  for (int i = 0; i < tmpl.face_count(); ++i)
    for (int k = 0; k < 3; ++k) faces[i * 3 + k] = static_cast<uint32_t>(tmpl.faces[i][k]);
  write_vec(out, faces);

  std::vector<float> uvs(tmpl.face_count() * 6);
  for (int i = 0; i < tmpl.face_count(); ++i)
    for (int k = 0; k < 3; ++k) {
      uvs[i * 6 + k * 2] = tmpl.uv_coords[i][k].x();
      uvs[i * 6 + k * 2 + 1] = tmpl.uv_coords[i][k].y();
    }
  write_vec(out, uvs);

  std::vector<uint32_t> wj(tmpl.vertex_count() * 4, 0);
  std::vector<float> wv(tmpl.vertex_count() * 4, 0.f);
  for (int i = 0; i < tmpl.vertex_count(); ++i)
    for (int k = 0; k < tmpl.skin_weights[i].count; ++k) {
      wj[i * 4 + k] = static_cast<uint32_t>(tmpl.skin_weights[i].joints[k]);
      wv[i * 4 + k] = tmpl.skin_weights[i].weights[k];
    }
  write_vec(out, wj);
  write_vec(out, wv);
}

SkinnedTemplate load_template(const std::filesystem::path& path) {
  auto in = open_read(path);
  read_magic(in, "HGST", path);
  uint32_t json_len = 0;
  read_exact(in, &json_len, 4);
  std::string header_str(json_len, '\0');
  read_exact(in, header_str.data(), json_len);
  const json header = json::parse(header_str);

  SkinnedTemplate tmpl;
  tmpl.name = header.at("name").get<std::string>();
  const int nv = header.at("vertex_count").get<int>();
  const int nf = header.at("face_count").get<int>();
  for (const auto& j : header.at("joints")) {
    Joint joint;
    joint.parent = j.at("parent").get<int>();
    const auto& p = j.at("rest_position");
    joint.rest_position = Eigen::Vector3d(p[0].get<double>(), p[1].get<double>(),
                                          p[2].get<double>());
    tmpl.joints.push_back(joint);
  }

  std::vector<float> verts;
  read_vec(in, verts, static_cast<size_t>(nv) * 3);
  tmpl.vertices.resize(nv);
  for (int i = 0; i < nv; ++i)
    tmpl.vertices[i] = Vec3f(verts[i * 3], verts[i * 3 + 1], verts[i * 3 + 2]);

  std::vector<uint32_t> faces;
  read_vec(in, faces, static_cast<size_t>(nf) * 3);
  tmpl.faces.resize(nf);
  for (int i = 0; i < nf; ++i)
    tmpl.faces[i] = Eigen::Vector3i(faces[i * 3], faces[i * 3 + 1], faces[i * 3 + 2]);

  std::vector<float> uvs;
  read_vec(in, uvs, static_cast<size_t>(nf) * 6);
  tmpl.uv_coords.resize(nf);
  for (int i = 0; i < nf; ++i)
    for (int k = 0; k < 3; ++k)
      tmpl.uv_coords[i][k] = Vec2f(uvs[i * 6 + k * 2], uvs[i * 6 + k * 2 + 1]);

  std::vector<uint32_t> wj;
  std::vector<float> wv;
  read_vec(in, wj, static_cast<size_t>(nv) * 4);
  read_vec(in, wv, static_cast<size_t>(nv) * 4);
  tmpl.skin_weights.resize(nv);
  for (int i = 0; i < nv; ++i)
    for (int k = 0; k < 4; ++k)
      if (wv[i * 4 + k] != 0.f)
        tmpl.skin_weights[i].add(static_cast<int32_t>(wj[i * 4 + k]), wv[i * 4 + k]);

  tmpl.validate();
  return tmpl;
}

// --------------------------------------------------------------------------
// Gaussian asset

void save_gaussians(const PosedGaussians& g, const std::filesystem::path& path) {
  auto out = open_write(path);
  write_magic(out, "HGSA", 1);
  const uint32_t n = static_cast<uint32_t>(g.count());
  write_exact(out, &n, 4);

  std::vector<float> buf;
  buf.reserve(static_cast<size_t>(n) * 4);
  auto push3 = [&buf](const Vec3d& v) {
    buf.push_back(static_cast<float>(v.x()));
    buf.push_back(static_cast<float>(v.y()));
    buf.push_back(static_cast<float>(v.z()));
  };
  for (const auto& p : g.positions) push3(p);
  write_vec(out, buf);
  buf.clear();
  for (const auto& s : g.scales) push3(s);
  write_vec(out, buf);
  buf.clear();
  for (const auto& q : g.rotations) {
    buf.push_back(static_cast<float>(q.w()));
    buf.push_back(static_cast<float>(q.x()));
    buf.push_back(static_cast<float>(q.y()));
    buf.push_back(static_cast<float>(q.z()));
  }
  write_vec(out, buf);
  buf.clear();
  for (const double o : g.opacities) buf.push_back(static_cast<float>(o));
  write_vec(out, buf);
  buf.clear();
  for (const auto& c : g.colors) push3(c);
  write_vec(out, buf);
}

PosedGaussians load_gaussians(const std::filesystem::path& path) {
  auto in = open_read(path);
  read_magic(in, "HGSA", path);
  uint32_t n = 0;
  read_exact(in, &n, 4);

  PosedGaussians g;
  std::vector<float> buf;
  read_vec(in, buf, static_cast<size_t>(n) * 3);
  g.positions.resize(n);
  for (uint32_t i = 0; i < n; ++i)
    g.positions[i] = Vec3d(buf[i * 3], buf[i * 3 + 1], buf[i * 3 + 2]);
  read_vec(in, buf, static_cast<size_t>(n) * 3);
  g.scales.resize(n);
  for (uint32_t i = 0; i < n; ++i)
    g.scales[i] = Vec3d(buf[i * 3], buf[i * 3 + 1], buf[i * 3 + 2]);
  read_vec(in, buf, static_cast<size_t>(n) * 4);
  g.rotations.resize(n);
  g.rot_linear.resize(n);
  for (uint32_t i = 0; i < n; ++i) {
    Quat<double> q(buf[i * 4], buf[i * 4 + 1], buf[i * 4 + 2], buf[i * 4 + 3]);
    if (std::abs(q.norm() - 1.0) > 1e-3)
      throw std::runtime_error("asset: quaternion is not unit-norm");
    q.normalize();
    g.rotations[i] = q;
    g.rot_linear[i] = quat_to_matrix(q);
  }
  std::vector<float> opacities;
  read_vec(in, opacities, n);
  g.opacities.assign(opacities.begin(), opacities.end());
  read_vec(in, buf, static_cast<size_t>(n) * 3);
  g.colors.resize(n);
  for (uint32_t i = 0; i < n; ++i)
    g.colors[i] = Vec3d(buf[i * 3], buf[i * 3 + 1], buf[i * 3 + 2]);
  return g;
}

// --------------------------------------------------------------------------
// UV attribute map

void save_uv_map(const UvAttributeMap& map, const std::filesystem::path& path) {
  auto out = open_write(path);
  write_magic(out, "HGSU", 1);
  const uint32_t w = static_cast<uint32_t>(map.width);
  const uint32_t h = static_cast<uint32_t>(map.height);
  write_exact(out, &w, 4);
  write_exact(out, &h, 4);
  write_vec(out, map.valid);
  write_vec(out, map.planes);
}

UvAttributeMap load_uv_map(const std::filesystem::path& path,
                           const SkinnedTemplate& tmpl) {
  auto in = open_read(path);
  read_magic(in, "HGSU", path);
  uint32_t w = 0, h = 0;
  read_exact(in, &w, 4);
  read_exact(in, &h, 4);

  UvAttributeMap map = build_uv_map(tmpl, static_cast<int>(w), static_cast<int>(h));
  std::vector<uint8_t> mask;
  read_vec(in, mask, static_cast<size_t>(w) * h);
  if (mask != map.valid)
    throw std::runtime_error("uv map: stored mask does not match this template");
  read_vec(in, map.planes, static_cast<size_t>(kUvChannelCount) * w * h);
  return map;
}

// --------------------------------------------------------------------------
// Camera

void save_camera(const Camera& cam, const std::filesystem::path& path) {
  json j;
  j["fx"] = cam.fx;
  j["fy"] = cam.fy;
  j["cx"] = cam.cx;
  j["cy"] = cam.cy;
  j["width"] = cam.width;
  j["height"] = cam.height;
  j["near"] = cam.near;
  j["far"] = cam.far;
  std::vector<double> r(9);
  for (int row = 0; row < 3; ++row)
    for (int col = 0; col < 3; ++col) r[row * 3 + col] = cam.rotation(row, col);
  j["R"] = r;
  j["t"] = {cam.translation.x(), cam.translation.y(), cam.translation.z()};

  auto out = open_write(path);
  const std::string text = j.dump(2) + "\n";
  write_exact(out, text.data(), text.size());
}

Camera load_camera(const std::filesystem::path& path) {
  auto in = open_read(path);
  json j;
  in >> j;
  Camera cam;
  cam.fx = j.at("fx").get<double>();
  cam.fy = j.at("fy").get<double>();
  cam.cx = j.at("cx").get<double>();
  cam.cy = j.at("cy").get<double>();
  cam.width = j.at("width").get<int>();
  cam.height = j.at("height").get<int>();
  cam.near = j.at("near").get<double>();
  cam.far = j.at("far").get<double>();
  const auto& r = j.at("R");
  for (int row = 0; row < 3; ++row)
    for (int col = 0; col < 3; ++col)
      cam.rotation(row, col) = r[row * 3 + col].get<double>();
  const auto& t = j.at("t");
  cam.translation = Eigen::Vector3d(t[0].get<double>(), t[1].get<double>(),
                                    t[2].get<double>());
  cam.validate();
  return cam;
}

// --------------------------------------------------------------------------
// Latent and raw image

void save_latent(const LatentTensor& latent, const std::filesystem::path& path) {
  auto out = open_write(path);
  write_magic(out, "HGSL", 1);
  const uint32_t h = latent.height, w = latent.width, c = latent.channels;
  write_exact(out, &h, 4);
  write_exact(out, &w, 4);
  write_exact(out, &c, 4);
  write_vec(out, latent.values);
}

LatentTensor load_latent(const std::filesystem::path& path) {
  auto in = open_read(path);
  read_magic(in, "HGSL", path);
  uint32_t h = 0, w = 0, c = 0;
  read_exact(in, &h, 4);
  read_exact(in, &w, 4);
  read_exact(in, &c, 4);
  LatentTensor latent(static_cast<int>(h), static_cast<int>(w), static_cast<int>(c));
  read_vec(in, latent.values, static_cast<size_t>(h) * w * c);
  return latent;
}

void save_image_f32(const ImageBuffer& img, const std::filesystem::path& path) {
  auto out = open_write(path);
  write_magic(out, "HGSI", 1);
  const uint32_t w = img.width, h = img.height, c = img.channels;
  write_exact(out, &w, 4);
  write_exact(out, &h, 4);
  write_exact(out, &c, 4);
  // plane-major on disk
  std::vector<float> plane(static_cast<size_t>(img.width) * img.height);
  for (int ch = 0; ch < img.channels; ++ch) {
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x)
        plane[static_cast<size_t>(y) * img.width + x] = img.at(x, y, ch);
    write_vec(out, plane);
  }
}

ImageBuffer load_image_f32(const std::filesystem::path& path) {
  auto in = open_read(path);
  read_magic(in, "HGSI", path);
  uint32_t w = 0, h = 0, c = 0;
  read_exact(in, &w, 4);
  read_exact(in, &h, 4);
  read_exact(in, &c, 4);
  ImageBuffer img(static_cast<int>(w), static_cast<int>(h), static_cast<int>(c));
  std::vector<float> plane;
  for (uint32_t ch = 0; ch < c; ++ch) {
    read_vec(in, plane, static_cast<size_t>(w) * h);
    for (uint32_t y = 0; y < h; ++y)
      for (uint32_t x = 0; x < w; ++x)
        img.at(static_cast<int>(x), static_cast<int>(y), static_cast<int>(ch)) =
            plane[static_cast<size_t>(y) * w + x];
  }
  return img;
}

ImageBuffer load_image(const std::filesystem::path& path) {
  if (path.extension() == ".hgsi") return load_image_f32(path);
  return load_png(path);
}

// --------------------------------------------------------------------------
// Pose sequences

void save_poses(const std::vector<Pose>& poses, const std::filesystem::path& path) {
  json arr = json::array();
  for (const Pose& p : poses) {
    json jp;
    jp["root_translation"] = {p.root_translation.x(), p.root_translation.y(),
                              p.root_translation.z()};
    jp["root_rotation"] = {p.root_rotation.x(), p.root_rotation.y(),
                           p.root_rotation.z()};
    json rots = json::array();
    for (const auto& r : p.joint_rotations) rots.push_back({r.x(), r.y(), r.z()});
    jp["joint_rotations"] = rots;
    arr.push_back(jp);
  }
  auto out = open_write(path);
  const std::string text = arr.dump(2) + "\n";
  write_exact(out, text.data(), text.size());
}

std::vector<Pose> load_poses(const std::filesystem::path& path) {
  auto in = open_read(path);
  json arr;
  in >> arr;
  std::vector<Pose> poses;
  for (const auto& jp : arr) {
    Pose p;
    const auto& t = jp.at("root_translation");
    p.root_translation = Eigen::Vector3d(t[0].get<double>(), t[1].get<double>(),
                                         t[2].get<double>());
    const auto& r = jp.at("root_rotation");
    p.root_rotation = Eigen::Vector3d(r[0].get<double>(), r[1].get<double>(),
                                      r[2].get<double>());
    for (const auto& jr : jp.at("joint_rotations"))
      p.joint_rotations.emplace_back(jr[0].get<double>(), jr[1].get<double>(),
                                     jr[2].get<double>());
    poses.push_back(std::move(p));
  }
  return poses;
}

uint32_t file_crc32(const std::filesystem::path& path) {
  auto in = open_read(path);
  uLong crc = crc32(0L, Z_NULL, 0);
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof(buf));
    if (in.gcount() > 0)
      crc = crc32(crc, reinterpret_cast<const Bytef*>(buf),
                  static_cast<uInt>(in.gcount()));
  }
  return static_cast<uint32_t>(crc);
}

}  // namespace hgs
