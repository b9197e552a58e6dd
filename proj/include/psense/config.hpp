#pragma once

// Run configuration: a schema-versioned JSON document naming the two
// particles, the spectral sweep, the probe placements, and the solver sizes.
// Parsing is strict: unknown keys, wrong types, and out-of-range values are
// all rejected with the offending path in the message. A parsed config
// serializes back with every default filled in.

#include <optional>
#include <string>
#include <vector>

#include "psense/geometry.hpp"
#include "psense/io.hpp"

namespace psense {

namespace detail {

inline void check_keys(const json& obj, const std::string& path,
                       std::initializer_list<const char*> allowed) {
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    bool found = false;
    for (const char* name : allowed) found = found || key == name;
    if (!found) throw std::invalid_argument("config: unknown key '" + key + "' in " + path);
  }
}

inline const json& member(const json& obj, const std::string& path, const char* key) {
  if (!obj.is_object())
    throw std::invalid_argument("config: " + path + " must be a JSON object");
  auto it = obj.find(key);
  if (it == obj.end())
    throw std::invalid_argument("config: " + path + "." + key + " is required");
  return *it;
}

inline double number_at(const json& obj, const std::string& path, const char* key,
                        std::optional<double> fallback = {}) {
  if (!obj.contains(key) && fallback) return *fallback;
  const json& v = member(obj, path, key);
  if (!v.is_number())
    throw std::invalid_argument("config: " + path + "." + key + " must be a number");
  return v.get<double>();
}

inline int int_at(const json& obj, const std::string& path, const char* key,
                  std::optional<int> fallback = {}) {
  if (!obj.contains(key) && fallback) return *fallback;
  const json& v = member(obj, path, key);
  if (!v.is_number_integer())
    throw std::invalid_argument("config: " + path + "." + key + " must be an integer");
  return v.get<int>();
}

inline std::string string_at(const json& obj, const std::string& path, const char* key,
                             std::optional<std::string> fallback = {}) {
  if (!obj.contains(key) && fallback) return *fallback;
  const json& v = member(obj, path, key);
  if (!v.is_string())
    throw std::invalid_argument("config: " + path + "." + key + " must be a string");
  return v.get<std::string>();
}

// a contrast is written as a plain number or as [re, im]
inline Complex complex_at(const json& obj, const std::string& path, const char* key,
                          std::optional<Complex> fallback = {}) {
  if (!obj.contains(key) && fallback) return *fallback;
  const json& v = member(obj, path, key);
  if (v.is_number()) return Complex(v.get<double>(), 0.0);
  if (v.is_array() && v.size() == 2 && v.at(0).is_number() && v.at(1).is_number())
    return Complex(v.at(0).get<double>(), v.at(1).get<double>());
  throw std::invalid_argument("config: " + path + "." + key +
                              " must be a number or a [re, im] pair");
}

inline Eigen::VectorXd vector_at(const json& v, const std::string& path) {
  if (!v.is_array())
    throw std::invalid_argument("config: " + path + " must be a list of numbers");
  Eigen::VectorXd out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v.at(i).is_number())
      throw std::invalid_argument("config: " + path + " must be a list of numbers");
    out[i] = v.at(i).get<double>();
  }
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// shapes

struct ShapeSpec {
  std::string kind;  // ellipse | fourier | polygon | triangle | square | rectangle
  double a = 1.0, b = 1.0;                 // ellipse semi-axes
  FourierRadius profile;                   // fourier
  std::vector<Eigen::Vector2d> vertices;   // polygon
  double side = 1.0;                       // triangle, square
  double width = 1.0, height = 1.0;        // rectangle
  double rounding = 0.0;                   // 0: default 0.1 x shortest edge
  double rotation = 0.0;

  BoundaryCurve build(int nodes) const {
    BoundaryCurve curve;
    if (kind == "ellipse") {
      curve = make_ellipse(a, b, {0.0, 0.0}, nodes);
    } else if (kind == "fourier") {
      curve = make_fourier_shape(profile, {0.0, 0.0}, nodes);
    } else {
      std::vector<Eigen::Vector2d> v;
      double shortest = 0.0;
      if (kind == "polygon") {
        v = vertices;
        shortest = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < v.size(); ++i)
          shortest = std::min(shortest, (v[(i + 1) % v.size()] - v[i]).norm());
      } else if (kind == "triangle") {
        const double r = side / std::sqrt(3.0);
        for (int i = 0; i < 3; ++i) {
          const double t = M_PI / 2.0 + i * two_pi / 3.0;
          v.push_back({r * std::cos(t), r * std::sin(t)});
        }
        shortest = side;
      } else if (kind == "square") {
        v = {{side / 2, side / 2}, {-side / 2, side / 2}, {-side / 2, -side / 2},
             {side / 2, -side / 2}};
        shortest = side;
      } else if (kind == "rectangle") {
        v = {{width / 2, height / 2}, {-width / 2, height / 2}, {-width / 2, -height / 2},
             {width / 2, -height / 2}};
        shortest = std::min(width, height);
      } else {
        throw std::invalid_argument("config: unknown shape kind '" + kind + "'");
      }
      const double rho = rounding > 0.0 ? rounding : 0.1 * shortest;
      curve = make_rounded_polygon(v, rho, nodes);
      // expansions are taken about the origin, so put the centroid there
      if (curve.center.norm() > 0.0) curve = scale_translate(curve, 1.0, -curve.center);
    }
    if (rotation != 0.0) curve = rotate(curve, rotation);
    return curve;
  }

  static ShapeSpec parse(const json& j, const std::string& path) {
    ShapeSpec spec;
    spec.kind = detail::string_at(j, path, "kind");
    if (spec.kind == "ellipse") {
      detail::check_keys(j, path, {"kind", "a", "b", "rotation"});
      spec.a = detail::number_at(j, path, "a", 1.0);
      spec.b = detail::number_at(j, path, "b", 1.0);
      if (!(spec.a > 0.0) || !(spec.b > 0.0))
        throw std::invalid_argument("config: " + path + " semi-axes must be positive");
    } else if (spec.kind == "fourier") {
      detail::check_keys(j, path, {"kind", "r0", "cos", "sin", "rotation"});
      spec.profile.r0 = detail::number_at(j, path, "r0", 1.0);
      if (j.contains("cos")) spec.profile.cos_coeffs = detail::vector_at(j.at("cos"), path + ".cos");
      if (j.contains("sin")) spec.profile.sin_coeffs = detail::vector_at(j.at("sin"), path + ".sin");
    } else if (spec.kind == "polygon") {
      detail::check_keys(j, path, {"kind", "vertices", "rounding", "rotation"});
      const json& verts = detail::member(j, path, "vertices");
      if (!verts.is_array() || verts.size() < 3)
        throw std::invalid_argument("config: " + path + ".vertices needs at least 3 points");
      for (std::size_t i = 0; i < verts.size(); ++i) {
        const Eigen::VectorXd p =
            detail::vector_at(verts.at(i), path + ".vertices[" + std::to_string(i) + "]");
        if (p.size() != 2)
          throw std::invalid_argument("config: " + path + ".vertices entries must be [x, y]");
        spec.vertices.push_back({p[0], p[1]});
      }
      spec.rounding = detail::number_at(j, path, "rounding", 0.0);
    } else if (spec.kind == "triangle" || spec.kind == "square") {
      detail::check_keys(j, path, {"kind", "side", "rounding", "rotation"});
      spec.side = detail::number_at(j, path, "side", 1.0);
      if (!(spec.side > 0.0))
        throw std::invalid_argument("config: " + path + ".side must be positive");
      spec.rounding = detail::number_at(j, path, "rounding", 0.0);
    } else if (spec.kind == "rectangle") {
      detail::check_keys(j, path, {"kind", "width", "height", "rounding", "rotation"});
      spec.width = detail::number_at(j, path, "width", 1.0);
      spec.height = detail::number_at(j, path, "height", 1.0);
      if (!(spec.width > 0.0) || !(spec.height > 0.0))
        throw std::invalid_argument("config: " + path + " sides must be positive");
      spec.rounding = detail::number_at(j, path, "rounding", 0.0);
    } else {
      throw std::invalid_argument("config: " + path + ".kind '" + spec.kind +
                                  "' is not a known shape");
    }
    if (spec.rounding < 0.0)
      throw std::invalid_argument("config: " + path + ".rounding must be nonnegative");
    spec.rotation = detail::number_at(j, path, "rotation", 0.0);
    return spec;
  }

  json to_json() const {
    json j{{"kind", kind}};
    if (kind == "ellipse") {
      j["a"] = a;
      j["b"] = b;
    } else if (kind == "fourier") {
      j["r0"] = profile.r0;
      json c = json::array(), s = json::array();
      for (int i = 0; i < profile.cos_coeffs.size(); ++i) c.push_back(profile.cos_coeffs[i]);
      for (int i = 0; i < profile.sin_coeffs.size(); ++i) s.push_back(profile.sin_coeffs[i]);
      j["cos"] = std::move(c);
      j["sin"] = std::move(s);
    } else if (kind == "polygon") {
      json verts = json::array();
      for (const auto& v : vertices) verts.push_back(json::array({v[0], v[1]}));
      j["vertices"] = std::move(verts);
      j["rounding"] = rounding;
    } else if (kind == "rectangle") {
      j["width"] = width;
      j["height"] = height;
      j["rounding"] = rounding;
    } else {
      j["side"] = side;
      j["rounding"] = rounding;
    }
    j["rotation"] = rotation;
    return j;
  }
};

// ---------------------------------------------------------------------------
// particles, sweep, placements

struct SmallParticleSpec {
  std::optional<ShapeSpec> shape;  // absent: no hidden particle (null forward model)
  double delta = 0.1;
  Complex contrast{1.0, 0.0};
  int nodes = 128;

  BoundaryCurve build_scaled() const {
    if (!shape) throw std::invalid_argument("config: d1.shape is required for this command");
    return scale_translate(shape->build(nodes), delta, {0.0, 0.0});
  }

  static SmallParticleSpec parse(const json& j, const std::string& path) {
    detail::check_keys(j, path, {"shape", "delta", "contrast", "nodes"});
    SmallParticleSpec spec;
    if (j.contains("shape")) spec.shape = ShapeSpec::parse(j.at("shape"), path + ".shape");
    spec.delta = detail::number_at(j, path, "delta", 0.1);
    if (!(spec.delta > 0.0))
      throw std::invalid_argument("config: " + path + ".delta must be positive");
    spec.contrast = detail::complex_at(j, path, "contrast", Complex(1.0, 0.0));
    spec.nodes = detail::int_at(j, path, "nodes", 128);
    check_node_count(spec.nodes);
    return spec;
  }

  json to_json() const {
    json j = json::object();
    if (shape) j["shape"] = shape->to_json();
    j["delta"] = delta;
    j["contrast"] = json::array({contrast.real(), contrast.imag()});
    j["nodes"] = nodes;
    return j;
  }
};

struct ResonantParticleSpec {
  ShapeSpec shape;
  int nodes = 256;
  int modes = 8;  // retained eigenpairs

  ResonantParticleSpec() {
    shape.kind = "ellipse";
    shape.a = 1.0;
    shape.b = 2.0;
  }

  static ResonantParticleSpec parse(const json& j, const std::string& path) {
    detail::check_keys(j, path, {"shape", "nodes", "modes"});
    ResonantParticleSpec spec;
    if (j.contains("shape")) spec.shape = ShapeSpec::parse(j.at("shape"), path + ".shape");
    spec.nodes = detail::int_at(j, path, "nodes", 256);
    check_node_count(spec.nodes);
    spec.modes = detail::int_at(j, path, "modes", 8);
    if (spec.modes < 1)
      throw std::invalid_argument("config: " + path + ".modes must be at least 1");
    return spec;
  }

  json to_json() const {
    return json{{"shape", shape.to_json()}, {"nodes", nodes}, {"modes", modes}};
  }
};

struct SweepSpec {
  double re_min = -0.35;
  double re_max = -0.05;
  double im = 1e-4;
  int count = 2001;

  static SweepSpec parse(const json& j, const std::string& path) {
    detail::check_keys(j, path, {"re_min", "re_max", "im", "count"});
    SweepSpec spec;
    spec.re_min = detail::number_at(j, path, "re_min", spec.re_min);
    spec.re_max = detail::number_at(j, path, "re_max", spec.re_max);
    if (!(spec.re_max > spec.re_min))
      throw std::invalid_argument("config: " + path + " window is empty");
    spec.im = detail::number_at(j, path, "im", spec.im);
    if (!(spec.im > 0.0))
      throw std::invalid_argument("config: " + path + ".im must be positive");
    spec.count = detail::int_at(j, path, "count", spec.count);
    if (spec.count < 5)
      throw std::invalid_argument("config: " + path + ".count must be at least 5");
    return spec;
  }

  json to_json() const {
    return json{{"re_min", re_min}, {"re_max", re_max}, {"im", im}, {"count", count}};
  }
};

struct Placement {
  Eigen::Vector2d z{0.0, 0.0};
  double orientation = 0.0;
};

// A single probe ring with the orientation locked to the position angle is
// rotation-equivariant: every design-matrix entry is then a trigonometric
// polynomial of degree <= k in the ring angle, so stage-k recovery sees at
// most 2k+1 independent directions and goes rank deficient from stage 4 on.
// The default design breaks the equivariance with a fixed orientation and
// interleaves two radii for depth in the radial direction.
struct PositionsSpec {
  std::string kind = "ring";  // ring | list
  std::vector<double> radii = {4.3, 5.3};
  int count = 22;
  double phase = 0.0;
  bool radial = false;         // probe turned to face along its position angle
  double orientation = 0.0;    // fixed angle when not radial
  std::vector<Placement> items;

  std::vector<Placement> generate() const {
    if (kind == "list") return items;
    std::vector<Placement> out(count);
    for (int i = 0; i < count; ++i) {
      const double t = phase + two_pi * i / count;
      const double r = radii[i % radii.size()];
      out[i].z = {r * std::cos(t), r * std::sin(t)};
      out[i].orientation = radial ? t : orientation;
    }
    return out;
  }

  static PositionsSpec parse(const json& j, const std::string& path) {
    PositionsSpec spec;
    spec.kind = detail::string_at(j, path, "kind", std::string("ring"));
    if (spec.kind == "ring") {
      detail::check_keys(j, path, {"kind", "radius", "count", "phase", "orientation"});
      if (j.contains("radius")) {
        const json& r = j.at("radius");
        if (r.is_number()) {
          spec.radii = {r.get<double>()};
        } else {
          const Eigen::VectorXd values = detail::vector_at(r, path + ".radius");
          spec.radii.assign(values.begin(), values.end());
        }
        if (spec.radii.empty())
          throw std::invalid_argument("config: " + path + ".radius must not be empty");
        for (double radius : spec.radii)
          if (!(radius > 0.0))
            throw std::invalid_argument("config: " + path + ".radius must be positive");
      }
      spec.count = detail::int_at(j, path, "count", spec.count);
      if (spec.count < 1)
        throw std::invalid_argument("config: " + path + ".count must be at least 1");
      spec.phase = detail::number_at(j, path, "phase", 0.0);
      if (j.contains("orientation")) {
        const json& o = j.at("orientation");
        if (o.is_string() && o.get<std::string>() == "radial") {
          spec.radial = true;
        } else if (o.is_number()) {
          spec.radial = false;
          spec.orientation = o.get<double>();
        } else {
          throw std::invalid_argument("config: " + path +
                                      ".orientation must be \"radial\" or an angle");
        }
      }
    } else if (spec.kind == "list") {
      detail::check_keys(j, path, {"kind", "items"});
      const json& items = detail::member(j, path, "items");
      if (!items.is_array() || items.empty())
        throw std::invalid_argument("config: " + path + ".items must be a nonempty list");
      for (std::size_t i = 0; i < items.size(); ++i) {
        const std::string ipath = path + ".items[" + std::to_string(i) + "]";
        const json& item = items.at(i);
        detail::check_keys(item, ipath, {"z", "orientation"});
        const Eigen::VectorXd z = detail::vector_at(detail::member(item, ipath, "z"), ipath + ".z");
        if (z.size() != 2)
          throw std::invalid_argument("config: " + ipath + ".z must be [x, y]");
        Placement p;
        p.z = {z[0], z[1]};
        p.orientation = detail::number_at(item, ipath, "orientation", 0.0);
        spec.items.push_back(p);
      }
    } else {
      throw std::invalid_argument("config: " + path + ".kind must be \"ring\" or \"list\"");
    }
    return spec;
  }

  json to_json() const {
    json j{{"kind", kind}};
    if (kind == "ring") {
      if (radii.size() == 1)
        j["radius"] = radii.front();
      else
        j["radius"] = radii;
      j["count"] = count;
      j["phase"] = phase;
      if (radial)
        j["orientation"] = "radial";
      else
        j["orientation"] = orientation;
    } else {
      json items_j = json::array();
      for (const auto& p : items)
        items_j.push_back(
            json{{"z", json::array({p.z[0], p.z[1]})}, {"orientation", p.orientation}});
      j["items"] = std::move(items_j);
    }
    return j;
  }
};

struct DescentSpec {
  int max_iters = 30;
  double step0 = 0.1;
  int nodes = 128;
  int extra_modes = 2;
  std::vector<int> checkpoints = {0, 8, 30};

  static DescentSpec parse(const json& j, const std::string& path) {
    detail::check_keys(j, path, {"max_iters", "step0", "nodes", "extra_modes", "checkpoints"});
    DescentSpec spec;
    spec.max_iters = detail::int_at(j, path, "max_iters", spec.max_iters);
    if (spec.max_iters < 0)
      throw std::invalid_argument("config: " + path + ".max_iters must be nonnegative");
    spec.step0 = detail::number_at(j, path, "step0", spec.step0);
    if (!(spec.step0 > 0.0))
      throw std::invalid_argument("config: " + path + ".step0 must be positive");
    spec.nodes = detail::int_at(j, path, "nodes", spec.nodes);
    check_node_count(spec.nodes);
    spec.extra_modes = detail::int_at(j, path, "extra_modes", spec.extra_modes);
    if (spec.extra_modes < 0)
      throw std::invalid_argument("config: " + path + ".extra_modes must be nonnegative");
    if (j.contains("checkpoints")) {
      spec.checkpoints.clear();
      const json& list = j.at("checkpoints");
      if (!list.is_array())
        throw std::invalid_argument("config: " + path + ".checkpoints must be a list");
      for (const auto& entry : list) {
        if (!entry.is_number_integer() || entry.get<int>() < 0)
          throw std::invalid_argument("config: " + path +
                                      ".checkpoints entries must be nonnegative integers");
        spec.checkpoints.push_back(entry.get<int>());
      }
    }
    return spec;
  }

  json to_json() const {
    return json{{"max_iters", max_iters},
                {"step0", step0},
                {"nodes", nodes},
                {"extra_modes", extra_modes},
                {"checkpoints", checkpoints}};
  }
};

// ---------------------------------------------------------------------------
// the full run configuration

struct RunConfig {
  int schema_version = 1;
  std::uint64_t seed = 0;
  std::string output_dir = "out";
  SmallParticleSpec d1;
  ResonantParticleSpec d2;
  SweepSpec sweep;
  PositionsSpec positions;
  int tracked_j = 1;  // 1-based index into the |lambda|-sorted spectrum
  std::string measurement_mode = "sweep";  // "sweep" refines shifts on the grid, "series" reports them directly
  struct Orders {
    int recovery = 5;  // deepest recovery stage K
    int tensor = 6;    // tensor blocks m+n <= tensor
    int series = 3;    // factors of R kept in the shift series
  } orders;
  double regime_floor_factor = 0.5;  // separation floor C1 = factor * diam(D2)
  double noise_level = 0.0;          // relative noise on measured shifts

  DescentSpec descent;

  int tracked_index() const { return tracked_j - 1; }

  static RunConfig parse(const json& j) {
    if (!j.is_object()) throw std::invalid_argument("config: document must be a JSON object");
    detail::check_keys(j, "config",
                       {"schema_version", "seed", "output_dir", "d1", "d2", "sweep", "positions",
                        "tracked_j", "measurement_mode", "orders", "regime", "noise", "descent"});
    RunConfig cfg;
    cfg.schema_version = detail::int_at(j, "config", "schema_version", 1);
    if (cfg.schema_version != 1)
      throw std::invalid_argument("config: schema_version " +
                                  std::to_string(cfg.schema_version) + " is not supported");
    if (j.contains("seed")) {
      const json& s = j.at("seed");
      if (!s.is_number_integer() || s.get<double>() < 0)
        throw std::invalid_argument("config: seed must be a nonnegative integer");
      cfg.seed = s.get<std::uint64_t>();
    }
    cfg.output_dir = detail::string_at(j, "config", "output_dir", std::string("out"));
    if (j.contains("d1")) cfg.d1 = SmallParticleSpec::parse(j.at("d1"), "d1");
    if (j.contains("d2")) cfg.d2 = ResonantParticleSpec::parse(j.at("d2"), "d2");
    if (j.contains("sweep")) cfg.sweep = SweepSpec::parse(j.at("sweep"), "sweep");
    if (j.contains("positions")) cfg.positions = PositionsSpec::parse(j.at("positions"), "positions");
    cfg.tracked_j = detail::int_at(j, "config", "tracked_j", 1);
    if (cfg.tracked_j < 1 || cfg.tracked_j > cfg.d2.modes)
      throw std::invalid_argument("config: tracked_j must lie in [1, d2.modes]");
    cfg.measurement_mode =
        detail::string_at(j, "config", "measurement_mode", cfg.measurement_mode);
    if (cfg.measurement_mode != "sweep" && cfg.measurement_mode != "series")
      throw std::invalid_argument("config: measurement_mode must be \"sweep\" or \"series\"");
    if (j.contains("orders")) {
      const json& o = j.at("orders");
      detail::check_keys(o, "orders", {"recovery", "tensor", "series"});
      cfg.orders.recovery = detail::int_at(o, "orders", "recovery", cfg.orders.recovery);
      if (cfg.orders.recovery < 2 || cfg.orders.recovery > 9)
        throw std::invalid_argument("config: orders.recovery must lie in [2, 9]");
      cfg.orders.tensor = detail::int_at(o, "orders", "tensor", cfg.orders.tensor);
      if (cfg.orders.tensor < 2 || cfg.orders.tensor > 9)
        throw std::invalid_argument("config: orders.tensor must lie in [2, 9]");
      cfg.orders.series = detail::int_at(o, "orders", "series", cfg.orders.series);
      if (cfg.orders.series < 1)
        throw std::invalid_argument("config: orders.series must be at least 1");
    }
    if (j.contains("regime")) {
      const json& r = j.at("regime");
      detail::check_keys(r, "regime", {"floor_factor"});
      cfg.regime_floor_factor = detail::number_at(r, "regime", "floor_factor", 0.5);
      if (cfg.regime_floor_factor < 0.0)
        throw std::invalid_argument("config: regime.floor_factor must be nonnegative");
    }
    if (j.contains("noise")) {
      const json& n = j.at("noise");
      detail::check_keys(n, "noise", {"level"});
      cfg.noise_level = detail::number_at(n, "noise", "level", 0.0);
      if (cfg.noise_level < 0.0)
        throw std::invalid_argument("config: noise.level must be nonnegative");
    }
    if (j.contains("descent")) cfg.descent = DescentSpec::parse(j.at("descent"), "descent");
    return cfg;
  }

  json to_json() const {
    return json{{"schema_version", schema_version},
                {"seed", seed},
                {"output_dir", output_dir},
                {"d1", d1.to_json()},
                {"d2", d2.to_json()},
                {"sweep", sweep.to_json()},
                {"positions", positions.to_json()},
                {"tracked_j", tracked_j},
                {"measurement_mode", measurement_mode},
                {"orders",
                 json{{"recovery", orders.recovery},
                      {"tensor", orders.tensor},
                      {"series", orders.series}}},
                {"regime", json{{"floor_factor", regime_floor_factor}}},
                {"noise", json{{"level", noise_level}}},
                {"descent", descent.to_json()}};
  }
};

}  // namespace psense
