#include "nex/scene_io.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace nex {

using nlohmann::json;

Eigen::Matrix3d Camera::K() const {
  Eigen::Matrix3d k;
  k << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
  return k;
}

Eigen::Matrix3d Camera::K_inverse() const {
  Eigen::Matrix3d k;
  k << 1.0 / fx, 0.0, -cx / fx, 0.0, 1.0 / fy, -cy / fy, 0.0, 0.0, 1.0;
  return k;
}

void validate_camera(const Camera& cam, const std::string& name, double rotation_tol) {
  auto fail = [&](const std::string& why) {
    throw std::invalid_argument("camera '" + name + "': " + why);
  };
  if (!(cam.fx > 0.0) || !(cam.fy > 0.0)) fail("focal lengths must be positive");
  if (cam.width <= 0 || cam.height <= 0) fail("image size must be positive");
  if (!(cam.cx >= 0.0 && cam.cx < cam.width) || !(cam.cy >= 0.0 && cam.cy < cam.height))
    fail("principal point outside the image");
  const Eigen::Matrix3d gram = cam.rotation.transpose() * cam.rotation - Eigen::Matrix3d::Identity();
  if (gram.cwiseAbs().maxCoeff() >= rotation_tol) fail("rotation is not orthonormal");
  if (cam.rotation.determinant() <= 0.0) fail("rotation has negative determinant");
  if (!(cam.near > 0.0) || !(cam.near < cam.far)) fail("require 0 < near < far");
}

std::vector<int> SceneDataset::train_indices() const {
  std::vector<int> out;
  for (std::size_t i = 0; i < is_test.size(); ++i)
    if (!is_test[i]) out.push_back(static_cast<int>(i));
  return out;
}

std::vector<int> SceneDataset::test_indices() const {
  std::vector<int> out;
  for (std::size_t i = 0; i < is_test.size(); ++i)
    if (is_test[i]) out.push_back(static_cast<int>(i));
  return out;
}

int default_reference(const std::vector<Camera>& cameras, const std::vector<bool>& is_test) {
  if (cameras.empty()) throw std::invalid_argument("no cameras");
  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  for (const auto& c : cameras) centroid += c.center;
  centroid /= static_cast<double>(cameras.size());
  int best = -1;
  double best_dist = kInfinity;
  for (std::size_t i = 0; i < cameras.size(); ++i) {
    if (!is_test.empty() && is_test[i]) continue;
    const double d = (cameras[i].center - centroid).squaredNorm();
    if (d < best_dist) {
      best_dist = d;
      best = static_cast<int>(i);
    }
  }
  if (best < 0) throw std::invalid_argument("no training camera to use as reference");
  return best;
}

namespace {

double read_far(const json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf" || s == "infinite") return kInfinity;
    throw std::invalid_argument("far must be a number or \"inf\"");
  }
  return j.get<double>();
}

Camera read_camera(const json& e, const std::string& name) {
  Camera cam;
  cam.fx = e.at("fx").get<double>();
  cam.fy = e.at("fy").get<double>();
  cam.cx = e.at("cx").get<double>();
  cam.cy = e.at("cy").get<double>();
  cam.width = e.at("width").get<int>();
  cam.height = e.at("height").get<int>();
  const auto rot = e.at("rotation").get<std::vector<double>>();
  const auto ctr = e.at("center").get<std::vector<double>>();
  if (rot.size() != 9) throw std::invalid_argument("'" + name + "': rotation needs 9 numbers");
  if (ctr.size() != 3) throw std::invalid_argument("'" + name + "': center needs 3 numbers");
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) cam.rotation(r, c) = rot[r * 3 + c];
  cam.center = Eigen::Vector3d(ctr[0], ctr[1], ctr[2]);
  return cam;
}

}  // namespace

Camera load_camera(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open pose file " + path.string());
  try {
    const json j = json::parse(in);
    Camera cam = read_camera(j, path.filename().string());
    validate_camera(cam, path.filename().string());
    return cam;
  } catch (const json::exception& e) {
    throw std::invalid_argument("pose file " + path.string() + ": " + e.what());
  }
}

SceneDataset load_scene(const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw std::runtime_error("cannot open manifest " + manifest_path.string());
  json m;
  try {
    in >> m;
  } catch (const json::exception& e) {
    throw std::invalid_argument("manifest is not valid JSON: " + std::string(e.what()));
  }
  const auto base = manifest_path.parent_path();

  SceneDataset ds;
  try {
    ds.near = m.at("near").get<double>();
    ds.far = read_far(m.at("far"));
    SplitPolicy policy = SplitPolicy::nerf;
    if (m.contains("split_policy")) {
      const auto p = m["split_policy"].get<std::string>();
      if (p == "none") policy = SplitPolicy::none;
      else if (p != "nerf") throw std::invalid_argument("unknown split_policy '" + p + "'");
    }
    const auto& images = m.at("images");
    if (!images.is_array() || images.empty()) throw std::invalid_argument("manifest has no images");
    for (std::size_t i = 0; i < images.size(); ++i) {
      const auto& e = images[i];
      const auto file = e.at("file").get<std::string>();
      Camera cam = read_camera(e, file);
      cam.near = ds.near;
      cam.far = ds.far;
      validate_camera(cam, file);

      const auto path = base / file;
      if (!std::filesystem::exists(path))
        throw std::runtime_error("image '" + file + "' not found at " + path.string());
      Image img = read_png(path);
      if (img.width != cam.width || img.height != cam.height) {
        std::ostringstream os;
        os << "image '" << file << "' is " << img.width << "x" << img.height << " but camera declares "
           << cam.width << "x" << cam.height;
        throw std::invalid_argument(os.str());
      }
      bool test = policy == SplitPolicy::nerf && i % 8 == 0;
      if (e.contains("split") && !e["split"].is_null()) {
        const auto s = e["split"].get<std::string>();
        if (s == "test") test = true;
        else if (s == "train") test = false;
        else throw std::invalid_argument("image '" + file + "': split must be train, test or null");
      }
      ds.cameras.push_back(cam);
      ds.images.push_back(std::move(img));
      ds.names.push_back(file);
      ds.is_test.push_back(test);
    }
    if (m.contains("reference") && !m["reference"].is_null()) {
      ds.reference_index = m["reference"].get<int>();
      if (ds.reference_index < 0 || ds.reference_index >= static_cast<int>(ds.size()))
        throw std::invalid_argument("reference index out of range");
    } else {
      ds.reference_index = default_reference(ds.cameras, ds.is_test);
    }
  } catch (const json::exception& e) {
    throw std::invalid_argument("manifest schema error: " + std::string(e.what()));
  }
  return ds;
}

void save_scene(const std::filesystem::path& dir, const SceneDataset& scene) {
  std::filesystem::create_directories(dir);
  json m;
  m["near"] = scene.near;
  if (std::isinf(scene.far)) m["far"] = "inf";
  else m["far"] = scene.far;
  m["reference"] = scene.reference_index;
  m["split_policy"] = "none";
  json images = json::array();
  for (std::size_t i = 0; i < scene.size(); ++i) {
    const auto& cam = scene.cameras[i];
    const std::string file = scene.names.size() > i && !scene.names[i].empty()
                                 ? scene.names[i]
                                 : "image_" + std::to_string(i) + ".png";
    write_png(dir / file, scene.images[i], 16);
    std::vector<double> rot(9);
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) rot[r * 3 + c] = cam.rotation(r, c);
    images.push_back({{"file", file},
                      {"fx", cam.fx},
                      {"fy", cam.fy},
                      {"cx", cam.cx},
                      {"cy", cam.cy},
                      {"width", cam.width},
                      {"height", cam.height},
                      {"rotation", rot},
                      {"center", {cam.center.x(), cam.center.y(), cam.center.z()}},
                      {"split", scene.is_test[i] ? "test" : "train"}});
  }
  m["images"] = images;
  std::ofstream out(dir / "manifest.json");
  out << m.dump(2) << "\n";
  if (!out) throw std::runtime_error("failed writing manifest in " + dir.string());
}

PlaneStack plane_depths(double near, double far, int count, PlaneSpacing mode) {
  if (count < 1) throw std::invalid_argument("plane count must be >= 1");
  if (!(near > 0.0) || !(near < far)) throw std::invalid_argument("require 0 < near < far");
  if (mode == PlaneSpacing::depth && std::isinf(far))
    throw std::invalid_argument("depth spacing needs a finite far plane");
  PlaneStack s;
  s.spacing = mode;
  s.near = near;
  s.far = far;
  s.depths.resize(count);
  for (int i = 0; i < count; ++i) s.depths[i] = s.depth_at(i);
  return s;
}

double PlaneStack::depth_at(double index) const {
  const int count = size() > 0 ? size() : 1;
  const double t = count == 1 ? 0.0 : index / (count - 1);
  if (spacing == PlaneSpacing::depth) return far + t * (near - far);
  const double inv_far = std::isinf(far) ? 0.0 : 1.0 / far;
  const double inv = inv_far + t * (1.0 / near - inv_far);
  // Exact endpoints keep d_1 = far and d_D = near bit-for-bit.
  if (index == 0.0) return far;
  if (count > 1 && index == count - 1) return near;
  return 1.0 / inv;
}

}  // namespace nex
