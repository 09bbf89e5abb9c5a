// SPDX-License-Identifier: Apache-2.0
#include <cstdio>
#include <sstream>

#include <nlohmann/json.hpp>

#include "gestura/encoder.hpp"
#include "gestura/error.hpp"

namespace gestura {
namespace {

using nlohmann::json;

constexpr std::array<std::string_view, 3> kMovementLabels = {"horizontal", "vertical", "depth"};
constexpr std::string_view kMagic = "gesture_state_matrix v";

std::string fixed3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

std::string padded(std::string_view s, std::size_t width) {
  std::string out(s);
  if (out.size() < width) out.append(width - out.size(), ' ');
  return out;
}

double movement_value(const Vec3& c, std::size_t row) {
  return row == 0 ? c.x : row == 1 ? c.y : c.z;
}

void write_pose_rows(std::ostringstream& os, const GestureStateMatrix& m) {
  os << "channel1 pose 19x" << m.columns() << "\n";
  for (std::size_t r = 0; r < kPoseRows; ++r) {
    char idx[8];
    std::snprintf(idx, sizeof(idx), "%02zu", r + 1);
    os << idx << ' ' << padded(pose_row_label(r), 24) << ':';
    for (const auto& col : m.channel1) {
      char buf[8];
      std::snprintf(buf, sizeof(buf), " %2d", static_cast<int>(col[r]));
      os << buf;
    }
    os << "\n";
  }
}

void write_movement_rows(std::ostringstream& os, const GestureStateMatrix& m, std::size_t first,
                         std::size_t last) {
  os << "channel2 movement " << m.movement_rows() << "x" << (last - first + 1) << "\n";
  for (std::size_t r = 0; r < m.movement_rows(); ++r) {
    os << r + 1 << ' ' << padded(kMovementLabels[r], 11) << ':';
    for (std::size_t c = first; c <= last; ++c) os << ' ' << fixed3(movement_value(m.channel2[c], r));
    os << "\n";
  }
}

[[noreturn]] void bad_text(const std::string& what) {
  throw Error(ErrorCode::ParseError, "matrix text: " + what);
}

std::string header_value(std::istringstream& in, std::string_view key) {
  std::string line;
  if (!std::getline(in, line)) bad_text("missing " + std::string(key));
  const std::string prefix = std::string(key) + ": ";
  if (line.rfind(prefix, 0) != 0) bad_text("expected " + std::string(key));
  return line.substr(prefix.size());
}

std::vector<double> row_values(const std::string& line) {
  const auto colon = line.find(':');
  if (colon == std::string::npos) bad_text("row without ':'");
  std::istringstream vs(line.substr(colon + 1));
  std::vector<double> values;
  double v = 0.0;
  while (vs >> v) values.push_back(v);
  if (!vs.eof()) bad_text("non-numeric row value");
  return values;
}

}  // namespace

std::string serialize_matrix(const GestureStateMatrix& m) {
  m.validate();
  std::ostringstream os;
  os << kMagic << kMatrixFormatVersion << "\n";
  os << "T: " << m.columns() << "\n";
  os << "sample_interval: " << fixed3(m.sample_interval) << "\n";
  os << "hand_width: " << fixed3(m.hand_width) << "\n";
  write_pose_rows(os, m);
  write_movement_rows(os, m, 0, m.columns() - 1);
  return os.str();
}

std::string serialize_pose_channel(const GestureStateMatrix& m) {
  m.validate();
  std::ostringstream os;
  os << "T: " << m.columns() << "\n";
  os << "sample_interval: " << fixed3(m.sample_interval) << "\n";
  write_pose_rows(os, m);
  return os.str();
}

std::string serialize_movement_channel(const GestureStateMatrix& m, std::size_t first,
                                       std::size_t last) {
  m.validate();
  if (first > last || last >= m.columns()) {
    throw Error(ErrorCode::InvalidArgument, "movement span out of range");
  }
  std::ostringstream os;
  os << "columns: " << first << ".." << last << "\n";
  os << "sample_interval: " << fixed3(m.sample_interval) << "\n";
  os << "hand_width: " << fixed3(m.hand_width) << "\n";
  write_movement_rows(os, m, first, last);
  return os.str();
}

GestureStateMatrix parse_matrix_text(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line) || line.rfind(kMagic, 0) != 0) bad_text("missing header");
  if (line.substr(kMagic.size()) != std::to_string(kMatrixFormatVersion)) {
    bad_text("unsupported version");
  }
  GestureStateMatrix m;
  std::size_t columns = 0;
  try {
    columns = std::stoul(header_value(in, "T"));
    m.sample_interval = std::stod(header_value(in, "sample_interval"));
    m.hand_width = std::stod(header_value(in, "hand_width"));
  } catch (const std::logic_error&) {
    bad_text("bad header number");
  }
  if (columns == 0) bad_text("T must be >= 1");

  if (!std::getline(in, line) || line.rfind("channel1", 0) != 0) bad_text("missing channel1");
  m.channel1.assign(columns, FramePoseVector{});
  for (std::size_t r = 0; r < kPoseRows; ++r) {
    if (!std::getline(in, line)) bad_text("truncated channel1");
    const auto values = row_values(line);
    if (values.size() != columns) bad_text("channel1 row width");
    for (std::size_t c = 0; c < columns; ++c) m.channel1[c][r] = static_cast<std::int8_t>(values[c]);
  }

  if (!std::getline(in, line) || line.rfind("channel2 movement ", 0) != 0) {
    bad_text("missing channel2");
  }
  const std::size_t rows = line.substr(18, 1) == "3" ? 3 : 2;
  m.has_depth = rows == 3;
  m.channel2.assign(columns, Vec3{});
  for (std::size_t r = 0; r < rows; ++r) {
    if (!std::getline(in, line)) bad_text("truncated channel2");
    const auto values = row_values(line);
    if (values.size() != columns) bad_text("channel2 row width");
    for (std::size_t c = 0; c < columns; ++c) {
      auto& cell = m.channel2[c];
      (r == 0 ? cell.x : r == 1 ? cell.y : cell.z) = values[c];
    }
  }
  m.validate();
  return m;
}

json matrix_to_json(const GestureStateMatrix& m) {
  m.validate();
  json ch1 = json::array();
  for (std::size_t r = 0; r < kPoseRows; ++r) {
    json row = json::array();
    for (const auto& col : m.channel1) row.push_back(static_cast<int>(col[r]));
    ch1.push_back(std::move(row));
  }
  json ch2 = json::array();
  for (std::size_t r = 0; r < m.movement_rows(); ++r) {
    json row = json::array();
    for (const auto& c : m.channel2) row.push_back(movement_value(c, r));
    ch2.push_back(std::move(row));
  }
  return {{"version", kMatrixFormatVersion},
          {"T", m.columns()},
          {"interval", m.sample_interval},
          {"hand_width", m.hand_width},
          {"channel1", std::move(ch1)},
          {"channel2", std::move(ch2)}};
}

GestureStateMatrix matrix_from_json(const json& j) {
  GestureStateMatrix m;
  try {
    if (j.value("version", kMatrixFormatVersion) != kMatrixFormatVersion) {
      throw Error(ErrorCode::MalformedInput, "unsupported matrix version");
    }
    const auto columns = j.at("T").get<std::size_t>();
    m.sample_interval = j.value("interval", kSampleInterval);
    m.hand_width = j.at("hand_width").get<double>();
    const auto& ch1 = j.at("channel1");
    const auto& ch2 = j.at("channel2");
    if (ch1.size() != kPoseRows) throw Error(ErrorCode::MalformedInput, "channel1 needs 19 rows");
    if (ch2.size() != 2 && ch2.size() != 3) {
      throw Error(ErrorCode::MalformedInput, "channel2 needs 2 or 3 rows");
    }
    m.has_depth = ch2.size() == 3;
    m.channel1.assign(columns, FramePoseVector{});
    m.channel2.assign(columns, Vec3{});
    for (std::size_t r = 0; r < kPoseRows; ++r) {
      if (ch1[r].size() != columns) throw Error(ErrorCode::MalformedInput, "channel1 row width");
      for (std::size_t c = 0; c < columns; ++c) {
        m.channel1[c][r] = static_cast<std::int8_t>(ch1[r][c].get<int>());
      }
    }
    for (std::size_t r = 0; r < ch2.size(); ++r) {
      if (ch2[r].size() != columns) throw Error(ErrorCode::MalformedInput, "channel2 row width");
      for (std::size_t c = 0; c < columns; ++c) {
        auto& cell = m.channel2[c];
        (r == 0 ? cell.x : r == 1 ? cell.y : cell.z) = ch2[r][c].get<double>();
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedInput, e.what());
  }
  try {
    m.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::MalformedInput, e.what());
  }
  return m;
}

}  // namespace gestura
