#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <cstdint>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include <json.hpp>

namespace footcal {

/// Per-sample boolean stationarity flags.
using ZvMask = std::vector<std::uint8_t>;

/// One inertial sample: timestamp, specific force [m/s^2], angular rate [rad/s].
struct ImuRecord {
  double t = 0.0;
  Eigen::Vector3d f = Eigen::Vector3d::Zero();
  Eigen::Vector3d w = Eigen::Vector3d::Zero();

  bool finite() const {
    return std::isfinite(t) && f.allFinite() && w.allFinite();
  }
};

/// Ordered sample sequence with a nominal sampling rate. The constructor-style
/// factory enforces the hard invariants (length, finiteness, monotone time);
/// sampling regularity is checked at the file boundary and reported by
/// validate_sequence for in-memory data.
struct ImuSequence {
  std::vector<ImuRecord> records;
  double fs = 0.0;  // Hz, inferred from the median sample interval

  std::size_t size() const { return records.size(); }
  double duration() const { return records.back().t - records.front().t; }

  static ImuSequence from_records(std::vector<ImuRecord> recs);
};

inline double median_dt(const std::vector<ImuRecord>& recs) {
  std::vector<double> dts;
  dts.reserve(recs.size() - 1);
  for (std::size_t k = 1; k < recs.size(); ++k) {
    dts.push_back(recs[k].t - recs[k - 1].t);
  }
  auto mid = dts.begin() + static_cast<std::ptrdiff_t>(dts.size() / 2);
  std::nth_element(dts.begin(), mid, dts.end());
  return *mid;
}

inline ImuSequence ImuSequence::from_records(std::vector<ImuRecord> recs) {
  if (recs.size() < 2) {
    throw std::invalid_argument("ImuSequence needs at least 2 records");
  }
  for (std::size_t k = 0; k < recs.size(); ++k) {
    if (!recs[k].finite()) {
      throw std::invalid_argument("ImuSequence: non-finite values in record " +
                                  std::to_string(k));
    }
    if (k > 0 && !(recs[k].t > recs[k - 1].t)) {
      throw std::invalid_argument(
          "ImuSequence: timestamps not strictly increasing at record " +
          std::to_string(k));
    }
  }
  ImuSequence seq;
  seq.fs = 1.0 / median_dt(recs);
  seq.records = std::move(recs);
  return seq;
}

// ---------------------------------------------------------------------------
// CSV format: header "t,fx,fy,fz,wx,wy,wz", SI units, one record per row.
// Values are serialized with 17 significant digits so a write/parse round
// trip is bit exact.
// ---------------------------------------------------------------------------

inline constexpr std::string_view kImuCsvHeader = "t,fx,fy,fz,wx,wy,wz";

namespace detail {

inline double parse_double_field(std::string_view field, std::size_t line_no) {
  double value = 0.0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last) {
    throw std::runtime_error("IMU CSV: malformed value '" + std::string(field) +
                             "' on line " + std::to_string(line_no));
  }
  if (!std::isfinite(value)) {
    throw std::runtime_error("IMU CSV: non-finite value on line " +
                             std::to_string(line_no));
  }
  return value;
}

inline void append_double(std::string& out, double v) {
  char buf[32];
  const int n = std::snprintf(buf, sizeof(buf), "%.17g", v);
  out.append(buf, static_cast<std::size_t>(n));
}

}  // namespace detail

inline ImuSequence parse_imu_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("IMU CSV: cannot open " + path);
  }
  std::string line;
  if (!std::getline(in, line) || line != kImuCsvHeader) {
    throw std::runtime_error("IMU CSV: bad header in " + path + " (expected '" +
                             std::string(kImuCsvHeader) + "')");
  }
  std::vector<ImuRecord> recs;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    ImuRecord rec;
    double* slots[7] = {&rec.t,    &rec.f.x(), &rec.f.y(), &rec.f.z(),
                        &rec.w.x(), &rec.w.y(), &rec.w.z()};
    std::string_view rest(line);
    for (int i = 0; i < 7; ++i) {
      const std::size_t comma = rest.find(',');
      const bool last_field = (i == 6);
      if (last_field != (comma == std::string_view::npos)) {
        throw std::runtime_error("IMU CSV: expected 7 fields on line " +
                                 std::to_string(line_no));
      }
      const std::string_view field =
          last_field ? rest : rest.substr(0, comma);
      *slots[i] = detail::parse_double_field(field, line_no);
      if (!last_field) rest.remove_prefix(comma + 1);
    }
    if (!recs.empty() && !(rec.t > recs.back().t)) {
      throw std::runtime_error("IMU CSV: non-monotone timestamp on line " +
                               std::to_string(line_no));
    }
    recs.push_back(rec);
  }
  if (recs.size() < 2) {
    throw std::runtime_error("IMU CSV: fewer than 2 rows in " + path);
  }
  ImuSequence seq = ImuSequence::from_records(std::move(recs));
  // Reject dropped-sample gaps: every interval must stay within half a
  // nominal period of 1/fs.
  const double period = 1.0 / seq.fs;
  for (std::size_t k = 1; k < seq.records.size(); ++k) {
    const double dt = seq.records[k].t - seq.records[k - 1].t;
    if (std::abs(dt - period) >= 0.5 * period) {
      throw std::runtime_error(
          "IMU CSV: sampling gap before line " + std::to_string(k + 2) +
          " (dt=" + std::to_string(dt) + " s, nominal " +
          std::to_string(period) + " s)");
    }
  }
  return seq;
}

inline void write_imu_csv(const ImuSequence& seq, const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("IMU CSV: cannot open " + path + " for writing");
  }
  std::string buf;
  buf.reserve(seq.records.size() * 64);
  buf.append(kImuCsvHeader);
  buf.push_back('\n');
  for (const ImuRecord& rec : seq.records) {
    const double vals[7] = {rec.t,    rec.f.x(), rec.f.y(), rec.f.z(),
                            rec.w.x(), rec.w.y(), rec.w.z()};
    for (int i = 0; i < 7; ++i) {
      if (i) buf.push_back(',');
      detail::append_double(buf, vals[i]);
    }
    buf.push_back('\n');
  }
  out << buf;
  if (!out) {
    throw std::runtime_error("IMU CSV: write failed for " + path);
  }
}

// ---------------------------------------------------------------------------
// Diagnostics
// ---------------------------------------------------------------------------

/// Non-fatal data-quality checks: sampling gaps, saturated readings
/// (|f| > 16 g or |w| > 2000 deg/s), and exactly constant channels.
inline std::vector<std::string> validate_sequence(const ImuSequence& seq) {
  std::vector<std::string> warnings;
  const double period = 1.0 / seq.fs;
  for (std::size_t k = 1; k < seq.records.size(); ++k) {
    const double dt = seq.records[k].t - seq.records[k - 1].t;
    if (std::abs(dt - period) >= 0.5 * period) {
      std::ostringstream os;
      os << "sampling gap between t=" << seq.records[k - 1].t
         << " and t=" << seq.records[k].t << " (dt=" << dt << " s)";
      warnings.push_back(os.str());
    }
  }
  const double f_sat = 16.0 * 9.81;          // m/s^2
  const double w_sat = 2000.0 * std::numbers::pi / 180.0;  // rad/s
  std::size_t n_f_sat = 0, n_w_sat = 0;
  for (const ImuRecord& rec : seq.records) {
    if (rec.f.norm() > f_sat) ++n_f_sat;
    if (rec.w.norm() > w_sat) ++n_w_sat;
  }
  if (n_f_sat > 0) {
    warnings.push_back("saturated specific force in " +
                       std::to_string(n_f_sat) + " samples (>16 g)");
  }
  if (n_w_sat > 0) {
    warnings.push_back("saturated angular rate in " + std::to_string(n_w_sat) +
                       " samples (>2000 deg/s)");
  }
  const char* names[6] = {"fx", "fy", "fz", "wx", "wy", "wz"};
  for (int c = 0; c < 6; ++c) {
    auto channel = [&](const ImuRecord& r) {
      return c < 3 ? r.f[c] : r.w[c - 3];
    };
    const double first = channel(seq.records.front());
    const bool constant =
        std::all_of(seq.records.begin(), seq.records.end(),
                    [&](const ImuRecord& r) { return channel(r) == first; });
    if (constant) {
      warnings.push_back(std::string("constant channel ") + names[c]);
    }
  }
  return warnings;
}

// ---------------------------------------------------------------------------
// Dataset manifest: JSON array of {path, label, role}.
// ---------------------------------------------------------------------------

enum class RecordingRole { calibration, evaluation };

struct ManifestEntry {
  std::string path;
  std::string label;
  RecordingRole role = RecordingRole::evaluation;
};

using DatasetManifest = std::vector<ManifestEntry>;

inline RecordingRole role_from_string(const std::string& s) {
  if (s == "calibration") return RecordingRole::calibration;
  if (s == "evaluation") return RecordingRole::evaluation;
  throw std::runtime_error("manifest: unknown role '" + s + "'");
}

inline std::string to_string(RecordingRole role) {
  return role == RecordingRole::calibration ? "calibration" : "evaluation";
}

inline DatasetManifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("manifest: cannot open " + path);
  }
  nlohmann::json j;
  in >> j;
  if (!j.is_array()) {
    throw std::runtime_error("manifest: expected a JSON array");
  }
  DatasetManifest manifest;
  for (const auto& item : j) {
    ManifestEntry e;
    e.path = item.at("path").get<std::string>();
    e.label = item.at("label").get<std::string>();
    e.role = role_from_string(item.at("role").get<std::string>());
    manifest.push_back(std::move(e));
  }
  for (std::size_t i = 0; i < manifest.size(); ++i) {
    for (std::size_t k = i + 1; k < manifest.size(); ++k) {
      if (manifest[i].path == manifest[k].path) {
        throw std::runtime_error("manifest: duplicate path " + manifest[i].path);
      }
    }
  }
  return manifest;
}

inline void save_manifest(const DatasetManifest& manifest,
                          const std::string& path) {
  nlohmann::json j = nlohmann::json::array();
  for (const ManifestEntry& e : manifest) {
    j.push_back({{"path", e.path}, {"label", e.label}, {"role", to_string(e.role)}});
  }
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("manifest: cannot open " + path + " for writing");
  }
  out << j.dump(2) << '\n';
}

}  // namespace footcal
