#include "nex/checkpoint.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace nex {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'N', 'E', 'X', 'C', 'K', 'P', 'T', '\0'};

json camera_json(const Camera& c) {
  std::vector<double> rot(9);
  for (int r = 0; r < 3; ++r)
    for (int k = 0; k < 3; ++k) rot[r * 3 + k] = c.rotation(r, k);
  return {{"fx", c.fx}, {"fy", c.fy}, {"cx", c.cx}, {"cy", c.cy}, {"width", c.width}, {"height", c.height},
          {"rotation", rot}, {"center", {c.center.x(), c.center.y(), c.center.z()}}, {"near", c.near},
          {"far", std::isinf(c.far) ? json("inf") : json(c.far)}};
}

double far_from(const json& j) { return j.is_string() ? kInfinity : j.get<double>(); }

Camera camera_from(const json& j) {
  Camera c;
  c.fx = j.at("fx");
  c.fy = j.at("fy");
  c.cx = j.at("cx");
  c.cy = j.at("cy");
  c.width = j.at("width");
  c.height = j.at("height");
  const auto rot = j.at("rotation").get<std::vector<double>>();
  for (int r = 0; r < 3; ++r)
    for (int k = 0; k < 3; ++k) c.rotation(r, k) = rot.at(r * 3 + k);
  const auto ctr = j.at("center").get<std::vector<double>>();
  c.center = {ctr.at(0), ctr.at(1), ctr.at(2)};
  c.near = j.at("near");
  c.far = far_from(j.at("far"));
  return c;
}

json net_json(const Mlp& net) {
  json layers = json::array();
  for (const auto& l : net.layers())
    layers.push_back({{"in", l.weight.cols()}, {"out", l.weight.rows()}, {"activation", to_string(l.activation)}});
  json head = json::array();
  for (auto a : net.head_overrides()) head.push_back(to_string(a));
  return {{"layers", layers}, {"head", head}};
}

Mlp net_from(const json& j) {
  Mlp net;
  for (const auto& l : j.at("layers")) {
    DenseLayer d;
    d.weight = Eigen::MatrixXd::Zero(l.at("out").get<int>(), l.at("in").get<int>());
    d.bias = Eigen::VectorXd::Zero(l.at("out").get<int>());
    d.activation = parse_activation(l.at("activation"));
    net.layers().push_back(std::move(d));
  }
  std::vector<Activation> head;
  for (const auto& h : j.at("head")) head.push_back(parse_activation(h));
  net.set_head_overrides(std::move(head));
  return net;
}

json grids_json(const std::vector<Image>& grids) {
  json a = json::array();
  for (const auto& g : grids) a.push_back({g.width, g.height, g.channels});
  return a;
}

std::vector<Image> grids_from(const json& j) {
  std::vector<Image> out;
  for (const auto& g : j) out.emplace_back(g.at(0).get<int>(), g.at(1).get<int>(), g.at(2).get<int>(), 0.0);
  return out;
}

template <typename T>
void write_pod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw std::runtime_error("truncated checkpoint");
  return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, MpiModel& model, const AdamState* adam) {
  json h;
  h["format"] = "nex-checkpoint";
  h["version"] = kCheckpointVersion;
  h["reference"] = camera_json(model.reference);
  h["planes"] = {{"depths", json::array()}, {"spacing", model.planes.spacing == PlaneSpacing::depth ? "depth" : "inverse_depth"},
                 {"near", model.planes.near}, {"far", std::isinf(model.planes.far) ? json("inf") : json(model.planes.far)}};
  for (double d : model.planes.depths) h["planes"]["depths"].push_back(std::isinf(d) ? json("inf") : json(d));
  h["sharing"] = model.sharing;
  h["basis"] = {{"family", std::string(to_string(model.basis.family))}, {"count", model.basis.count},
                {"a", model.basis.a}, {"b", model.basis.b}};
  h["modes"] = model.modes.label();
  h["shape"] = {{"color_width", model.shape.color_width}, {"color_layers", model.shape.color_layers},
                {"basis_width", model.shape.basis_width}, {"basis_layers", model.shape.basis_layers}};
  h["norms"] = {model.norms.x.lo, model.norms.x.hi, model.norms.y.lo, model.norms.y.hi, model.norms.d.lo, model.norms.d.hi};
  h["alpha_bias_init"] = model.alpha_bias_init;
  h["color_net"] = net_json(model.color_net);
  h["basis_net"] = net_json(model.basis_net);
  h["k0"] = grids_json(model.k0);
  h["alpha_grid"] = grids_json(model.alpha_grid);
  h["coeff_grid"] = grids_json(model.coeff_grid);

  const auto params = model.parameters();
  json tensors = json::array();
  std::uint64_t offset = 0;
  for (const auto& p : params) {
    tensors.push_back({{"name", p.name}, {"group", p.group}, {"shape", p.shape}, {"offset", offset},
                       {"count", p.values.size()}});
    offset += p.values.size();
  }
  h["tensors"] = tensors;
  const bool with_adam = adam && adam->m.size() == params.size();
  if (with_adam)
    h["adam"] = {{"step", adam->step}, {"beta1", adam->beta1}, {"beta2", adam->beta2}, {"eps", adam->eps}};

  const std::string header = h.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out.write(kMagic, sizeof(kMagic));
  write_pod<std::uint32_t>(out, kCheckpointVersion);
  write_pod<std::uint64_t>(out, header.size());
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  for (const auto& p : params)
    out.write(reinterpret_cast<const char*>(p.values.data()), static_cast<std::streamsize>(p.values.size_bytes()));
  if (with_adam) {
    for (const auto& m : adam->m)
      out.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
    for (const auto& v : adam->v)
      out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
  }
  if (!out) throw std::runtime_error("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0) throw std::runtime_error("not a checkpoint: " + path.string());
  const auto version = read_pod<std::uint32_t>(in);
  if (version != kCheckpointVersion)
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  const auto header_size = read_pod<std::uint64_t>(in);
  std::string header(header_size, '\0');
  in.read(header.data(), static_cast<std::streamsize>(header_size));
  if (!in) throw std::runtime_error("truncated checkpoint header");
  const json h = json::parse(header);

  Checkpoint ck;
  MpiModel& m = ck.model;
  m.reference = camera_from(h.at("reference"));
  const auto& pl = h.at("planes");
  m.planes.spacing = pl.at("spacing") == "depth" ? PlaneSpacing::depth : PlaneSpacing::inverse_depth;
  m.planes.near = pl.at("near");
  m.planes.far = far_from(pl.at("far"));
  for (const auto& d : pl.at("depths")) m.planes.depths.push_back(far_from(d));
  m.sharing = h.at("sharing");
  const auto& b = h.at("basis");
  m.basis.family = parse_basis_family(b.at("family").get<std::string>());
  m.basis.count = b.at("count");
  m.basis.a = b.at("a");
  m.basis.b = b.at("b");
  m.modes = ModelModes::parse(h.at("modes"));
  const auto& s = h.at("shape");
  m.shape = {s.at("color_width"), s.at("color_layers"), s.at("basis_width"), s.at("basis_layers")};
  const auto n = h.at("norms").get<std::vector<double>>();
  m.norms = {{n.at(0), n.at(1)}, {n.at(2), n.at(3)}, {n.at(4), n.at(5)}};
  m.alpha_bias_init = h.at("alpha_bias_init");
  m.color_net = net_from(h.at("color_net"));
  m.basis_net = net_from(h.at("basis_net"));
  m.k0 = grids_from(h.at("k0"));
  m.alpha_grid = grids_from(h.at("alpha_grid"));
  m.coeff_grid = grids_from(h.at("coeff_grid"));

  auto params = m.parameters();
  const auto& tensors = h.at("tensors");
  if (tensors.size() != params.size()) throw std::runtime_error("checkpoint tensor table does not match the model");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (tensors[i].at("name") != params[i].name || tensors[i].at("count").get<std::size_t>() != params[i].values.size())
      throw std::runtime_error("checkpoint tensor '" + tensors[i].at("name").get<std::string>() + "' mismatch");
    in.read(reinterpret_cast<char*>(params[i].values.data()), static_cast<std::streamsize>(params[i].values.size_bytes()));
  }
  if (!in) throw std::runtime_error("truncated checkpoint payload");
  if (h.contains("adam")) {
    AdamState a;
    a.step = h["adam"].at("step");
    a.beta1 = h["adam"].at("beta1");
    a.beta2 = h["adam"].at("beta2");
    a.eps = h["adam"].at("eps");
    a.m.resize(params.size());
    a.v.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      a.m[i].resize(params[i].values.size());
      in.read(reinterpret_cast<char*>(a.m[i].data()), static_cast<std::streamsize>(a.m[i].size() * sizeof(double)));
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
      a.v[i].resize(params[i].values.size());
      in.read(reinterpret_cast<char*>(a.v[i].data()), static_cast<std::streamsize>(a.v[i].size() * sizeof(double)));
    }
    if (!in) throw std::runtime_error("truncated optimizer state");
    ck.adam = std::move(a);
  }
  m.validate();
  return ck;
}

}  // namespace nex
