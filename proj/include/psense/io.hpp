#pragma once

// Serialization: CSV tables at full round-trip precision and JSON documents
// for spectra, tensor sets, shapes, and measurement records.

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "psense/forward.hpp"
#include "psense/inverse.hpp"

namespace psense {

using nlohmann::json;

// 17 significant digits round-trip a double exactly
inline std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::invalid_argument("cannot write " + path);
  out << content;
}

// parse a JSON file, reporting failures with line and column
inline json parse_json_text(const std::string& text, const std::string& origin) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1, col = 1;
    const std::size_t stop = std::min(text.size(), e.byte > 0 ? e.byte - 1 : 0);
    for (std::size_t i = 0; i < stop; ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw std::invalid_argument(origin + ":" + std::to_string(line) + ":" + std::to_string(col) +
                                ": " + e.what());
  }
}

inline json read_json_file(const std::string& path) {
  return parse_json_text(read_text_file(path), path);
}

inline void write_json_file(const std::string& path, const json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// CSV tables

inline void write_curve_csv(std::ostream& out, const BoundaryCurve& curve) {
  out << "t,x,y,nx,ny,curvature\n";
  const Eigen::VectorXd t = curve.params();
  for (int i = 0; i < curve.n(); ++i)
    out << g17(t[i]) << ',' << g17(curve.nodes(0, i)) << ',' << g17(curve.nodes(1, i)) << ','
        << g17(curve.normals(0, i)) << ',' << g17(curve.normals(1, i)) << ','
        << g17(curve.curvature[i]) << '\n';
}

inline void write_sweep_csv(std::ostream& out, const Eigen::VectorXd& re, double im,
                            const Eigen::VectorXd& m11, const Eigen::VectorXd& m22) {
  out << "re_lambda,im_lambda,abs_m11,abs_m22\n";
  for (int i = 0; i < re.size(); ++i)
    out << g17(re[i]) << ',' << g17(im) << ',' << g17(m11[i]) << ',' << g17(m22[i]) << '\n';
}

inline void write_stage_report_csv(std::ostream& out, const std::vector<StageReport>& reports,
                                   const std::vector<double>* truth_errors = nullptr) {
  out << "stage,rows,rank,residual,truth_rel_error\n";
  for (std::size_t i = 0; i < reports.size(); ++i) {
    out << reports[i].order << ',' << reports[i].rows << ',' << reports[i].rank << ','
        << g17(reports[i].residual) << ',';
    if (truth_errors) out << g17((*truth_errors)[i]);
    out << '\n';
  }
}

inline void write_descent_log_csv(std::ostream& out, const std::vector<double>& jc_history,
                                  const std::vector<double>& step_history) {
  out << "iter,objective,step\n";
  for (std::size_t i = 0; i < jc_history.size(); ++i) {
    out << i << ',' << g17(jc_history[i]) << ',';
    if (i > 0) out << g17(step_history[i - 1]);
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// JSON documents

inline json spectrum_to_json(const NPSpectrum& spectrum) {
  json eigs = json::array();
  for (int j = 0; j < spectrum.count(); ++j) eigs.push_back(spectrum.eigenvalues[j]);
  json densities = json::array();
  for (int j = 0; j < spectrum.count(); ++j) {
    json column = json::array();
    for (int i = 0; i < spectrum.densities.rows(); ++i)
      column.push_back(spectrum.densities(i, j));
    densities.push_back(std::move(column));
  }
  return json{{"schema_version", 1},
              {"nodes", spectrum.densities.rows()},
              {"count", spectrum.count()},
              {"eigenvalues", std::move(eigs)},
              {"eigendensities", std::move(densities)}};
}

inline std::string block_key(int m, int n) {
  return std::to_string(m) + "," + std::to_string(n);
}

// blocks are keyed "m,n"; single-digit orders keep the lexicographic key
// order of the JSON object identical to (m ascending, then n)
inline json cgpt_to_json(const CgptSet& set) {
  if (set.order > 9) throw std::invalid_argument("tensor orders above 9 are not serializable");
  json blocks = json::object();
  for (const auto& [key, block] : set.blocks) {
    bool complex = false;
    for (int r = 0; r < 2; ++r)
      for (int c = 0; c < 2; ++c) complex = complex || block(r, c).imag() != 0.0;
    json entries = json::array();
    for (int r = 0; r < 2; ++r)
      for (int c = 0; c < 2; ++c) {
        if (complex)
          entries.push_back(json::array({block(r, c).real(), block(r, c).imag()}));
        else
          entries.push_back(block(r, c).real());
      }
    blocks[block_key(key.first, key.second)] = std::move(entries);
  }
  return json{{"schema_version", 1},
              {"order", set.order},
              {"contrast", json::array({set.contrast.real(), set.contrast.imag()})},
              {"center", json::array({set.center[0], set.center[1]})},
              {"blocks", std::move(blocks)}};
}

inline CgptSet cgpt_from_json(const json& j) {
  if (!j.is_object()) throw std::invalid_argument("tensor document must be a JSON object");
  for (const char* key : {"order", "contrast", "blocks"})
    if (!j.contains(key))
      throw std::invalid_argument(std::string("tensor document lacks '") + key + "'");
  CgptSet set;
  set.order = j.at("order").get<int>();
  if (set.order < 2 || set.order > 9)
    throw std::invalid_argument("tensor order out of range in document");
  const json& contrast = j.at("contrast");
  set.contrast = Complex(contrast.at(0).get<double>(), contrast.at(1).get<double>());
  if (j.contains("center"))
    set.center << j.at("center").at(0).get<double>(), j.at("center").at(1).get<double>();
  for (const auto& [key, entries] : j.at("blocks").items()) {
    const auto comma = key.find(',');
    if (comma == std::string::npos)
      throw std::invalid_argument("tensor block key '" + key + "' is not of the form m,n");
    const int m = std::stoi(key.substr(0, comma));
    const int n = std::stoi(key.substr(comma + 1));
    if (m < 1 || n < 1 || m + n > set.order)
      throw std::invalid_argument("tensor block key '" + key + "' outside the declared order");
    if (!entries.is_array() || entries.size() != 4)
      throw std::invalid_argument("tensor block '" + key + "' needs 4 entries");
    Eigen::Matrix2cd block;
    for (int r = 0; r < 2; ++r)
      for (int c = 0; c < 2; ++c) {
        const json& e = entries.at(2 * r + c);
        block(r, c) = e.is_array() ? Complex(e.at(0).get<double>(), e.at(1).get<double>())
                                   : Complex(e.get<double>(), 0.0);
      }
    set.blocks[{m, n}] = block;
  }
  return set;
}

inline json measurements_to_json(const std::vector<Measurement>& records) {
  json out = json::array();
  for (const auto& rec : records)
    out.push_back(json{{"z", json::array({rec.z[0], rec.z[1]})},
                       {"orientation", rec.orientation},
                       {"j", rec.tracked + 1},
                       {"p_j", rec.shift},
                       {"lambda_r", rec.lambda_r}});
  return out;
}

// accepts either a bare list or {"measurements": [...]}
inline std::vector<MeasurementRecord> measurements_from_json(const json& doc) {
  const json& list = doc.is_object() && doc.contains("measurements") ? doc.at("measurements") : doc;
  if (!list.is_array()) throw std::invalid_argument("measurement document must be a JSON list");
  std::vector<MeasurementRecord> records;
  records.reserve(list.size());
  for (const auto& item : list) {
    for (const char* key : {"z", "j", "p_j"})
      if (!item.contains(key))
        throw std::invalid_argument(std::string("measurement record lacks '") + key + "'");
    MeasurementRecord rec;
    rec.z << item.at("z").at(0).get<double>(), item.at("z").at(1).get<double>();
    rec.orientation = item.value("orientation", 0.0);
    rec.tracked = item.at("j").get<int>() - 1;
    if (rec.tracked < 0) throw std::invalid_argument("measurement mode index must be >= 1");
    rec.shift = item.at("p_j").get<double>();
    records.push_back(rec);
  }
  return records;
}

inline json shape_to_json(const FourierRadius& profile, const Eigen::Vector2d& center) {
  json cosines = json::array(), sines = json::array();
  for (int i = 0; i < profile.cos_coeffs.size(); ++i) cosines.push_back(profile.cos_coeffs[i]);
  for (int i = 0; i < profile.sin_coeffs.size(); ++i) sines.push_back(profile.sin_coeffs[i]);
  return json{{"kind", "fourier"},
              {"r0", profile.r0},
              {"cos", std::move(cosines)},
              {"sin", std::move(sines)},
              {"center", json::array({center[0], center[1]})}};
}

}  // namespace psense
