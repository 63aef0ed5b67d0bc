// Copyright 2026 The dcv-rood Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef DCVROOD_IO_HPP_
#define DCVROOD_IO_HPP_

// Manifest (JSON), payload matrix (binary DCVR or CSV) readers and writers.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dcvrood/error.hpp"
#include "dcvrood/taxonomy.hpp"

namespace dcvrood {

namespace fs = std::filesystem;

static_assert(std::endian::native == std::endian::little,
              "payload I/O assumes a little-endian host");

inline std::string read_text_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::Io, "cannot write " + p.string());
  out << text;
  if (!out) throw Error(Errc::Io, "write failed for " + p.string());
}

/// Manifest contents before payloads are attached. `records` keeps file order,
/// which is the row order of binary payload files.
struct Manifest {
  std::shared_ptr<const ClassTaxonomy> taxonomy;
  std::vector<SampleRecord> records;
};

inline Manifest parse_manifest(const std::string& text, const std::string& origin = "manifest") {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ManifestParse, origin + ": " + e.what());
  }
  try {
    std::vector<std::string> levels = j.at("levels").get<std::vector<std::string>>();
    std::vector<ClassNode> nodes;
    for (const auto& c : j.at("classes")) {
      ClassNode n;
      n.level = c.at("level").get<LevelIndex>();
      n.id = c.at("id").get<std::string>();
      if (c.contains("parent") && !c.at("parent").is_null()) n.parent = c.at("parent").get<std::string>();
      nodes.push_back(std::move(n));
    }
    const auto cls = j.at("classification_level").get<LevelIndex>();
    auto taxonomy = std::make_shared<const ClassTaxonomy>(std::move(levels), nodes, cls);
    std::vector<SampleRecord> records;
    for (const auto& s : j.at("samples")) {
      SampleRecord r{s.at("id").get<std::string>(), s.at("path").get<std::vector<std::string>>()};
      taxonomy->validate_path(r.path, r.id);
      records.push_back(std::move(r));
    }
    return {std::move(taxonomy), std::move(records)};
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ManifestParse, origin + ": " + e.what());
  }
}

/// Canonical manifest text: keys sorted, classes by (level, id), samples by
/// id, two-space indentation, trailing newline.
inline std::string manifest_to_string(const ClassTaxonomy& t, const std::vector<SampleRecord>& records) {
  nlohmann::json j;
  j["levels"] = t.levels();
  j["classification_level"] = t.classification_level();
  auto classes = nlohmann::json::array();
  for (const ClassNode& n : t.nodes()) {
    nlohmann::json c;
    c["level"] = n.level;
    c["id"] = n.id;
    c["parent"] = n.level == 0 ? nlohmann::json(nullptr) : nlohmann::json(n.parent);
    classes.push_back(std::move(c));
  }
  j["classes"] = std::move(classes);
  std::vector<const SampleRecord*> sorted;
  for (const auto& r : records) sorted.push_back(&r);
  std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->id < b->id; });
  auto samples = nlohmann::json::array();
  for (const SampleRecord* r : sorted) samples.push_back({{"id", r->id}, {"path", r->path}});
  j["samples"] = std::move(samples);
  return j.dump(2) + "\n";
}

inline std::string write_manifest(const SampleSet& s) {
  return manifest_to_string(s.taxonomy(), s.records());
}

// ---------------------------------------------------------------------------
// Binary payload: "DCVR" | u32 version=1 | u64 n_rows | u32 n_cols | f32[rows*cols]

inline constexpr std::array<char, 4> kPayloadMagic{'D', 'C', 'V', 'R'};
inline constexpr std::uint32_t kPayloadVersion = 1;

inline void write_matrix_binary(const fs::path& p, const Matrix& m) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::Io, "cannot write " + p.string());
  const std::uint64_t rows = static_cast<std::uint64_t>(m.rows());
  const std::uint32_t cols = static_cast<std::uint32_t>(m.cols());
  out.write(kPayloadMagic.data(), 4);
  out.write(reinterpret_cast<const char*>(&kPayloadVersion), 4);
  out.write(reinterpret_cast<const char*>(&rows), 8);
  out.write(reinterpret_cast<const char*>(&cols), 4);
  std::vector<float> buf(static_cast<std::size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      buf[static_cast<std::size_t>(i * m.cols() + c)] = static_cast<float>(m(i, c));
  out.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(float)));
  if (!out) throw Error(Errc::Io, "write failed for " + p.string());
}

inline Matrix read_matrix_binary(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open " + p.string());
  std::array<char, 4> magic{};
  std::uint32_t version = 0, cols = 0;
  std::uint64_t rows = 0;
  in.read(magic.data(), 4);
  in.read(reinterpret_cast<char*>(&version), 4);
  in.read(reinterpret_cast<char*>(&rows), 8);
  in.read(reinterpret_cast<char*>(&cols), 4);
  if (!in || magic != kPayloadMagic)
    throw Error(Errc::ManifestParse, p.string() + ": not a DCVR payload file");
  if (version != kPayloadVersion)
    throw Error(Errc::ManifestParse, p.string() + ": unsupported version " + std::to_string(version));
  std::vector<float> buf(rows * cols);
  in.read(reinterpret_cast<char*>(buf.data()),
          static_cast<std::streamsize>(buf.size() * sizeof(float)));
  if (static_cast<std::uint64_t>(in.gcount()) != buf.size() * sizeof(float))
    throw Error(Errc::DimensionMismatch, p.string() + ": payload shorter than header declares");
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < buf.size(); ++i) m.data()[i] = static_cast<double>(buf[i]);
  return m;
}

/// Splits one CSV line on commas. No quoting support; ids must not contain commas.
inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    if (!cell.empty() && cell.back() == '\r') cell.pop_back();
    out.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline double parse_double(const std::string& s, const std::string& where) {
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw Error(Errc::ManifestParse, where + ": cannot parse number '" + s + "'");
  }
  if (used != s.size()) throw Error(Errc::ManifestParse, where + ": trailing junk in '" + s + "'");
  return v;
}

/// CSV payload `sample_id,f0,...,f{d-1}`, rows returned in the order of `ids`.
inline Matrix read_matrix_csv(const fs::path& p, const std::vector<SampleId>& ids) {
  std::ifstream in(p);
  if (!in) throw Error(Errc::Io, "cannot open " + p.string());
  std::string line;
  if (!std::getline(in, line)) throw Error(Errc::ManifestParse, p.string() + ": empty CSV");
  const auto header = split_csv_line(line);
  if (header.empty() || header[0] != "sample_id")
    throw Error(Errc::ManifestParse, p.string() + ": header must start with sample_id");
  const std::size_t d = header.size() - 1;
  std::unordered_map<SampleId, std::vector<double>> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto cells = split_csv_line(line);
    if (cells.size() != d + 1)
      throw Error(Errc::DimensionMismatch, p.string() + ":" + std::to_string(lineno) + ": expected " +
                                               std::to_string(d + 1) + " cells");
    std::vector<double> v(d);
    for (std::size_t c = 0; c < d; ++c)
      v[c] = parse_double(cells[c + 1], p.string() + ":" + std::to_string(lineno));
    if (!rows.emplace(cells[0], std::move(v)).second)
      throw Error(Errc::ManifestParse, p.string() + ": duplicate sample '" + cells[0] + "'");
  }
  if (rows.size() != ids.size())
    throw Error(Errc::DimensionMismatch, p.string() + ": " + std::to_string(rows.size()) +
                                             " rows for " + std::to_string(ids.size()) + " samples");
  Matrix m(static_cast<Eigen::Index>(ids.size()), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto it = rows.find(ids[i]);
    if (it == rows.end()) throw Error(Errc::DimensionMismatch, p.string() + ": no row for '" + ids[i] + "'");
    for (std::size_t c = 0; c < d; ++c) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = it->second[c];
  }
  return m;
}

/// Reads a payload for the manifest's samples in manifest order.
inline Matrix read_payload(const fs::path& p, const std::vector<SampleRecord>& records,
                           std::optional<std::size_t> expected_cols) {
  Matrix m;
  if (p.extension() == ".csv") {
    std::vector<SampleId> ids;
    ids.reserve(records.size());
    for (const auto& r : records) ids.push_back(r.id);
    m = read_matrix_csv(p, ids);
  } else {
    m = read_matrix_binary(p);
  }
  if (static_cast<std::size_t>(m.rows()) != records.size())
    throw Error(Errc::DimensionMismatch, p.string() + ": " + std::to_string(m.rows()) +
                                             " rows, manifest has " + std::to_string(records.size()) +
                                             " samples");
  if (expected_cols && static_cast<std::size_t>(m.cols()) != *expected_cols)
    throw Error(Errc::DimensionMismatch, p.string() + ": width " + std::to_string(m.cols()) +
                                             ", expected " + std::to_string(*expected_cols));
  if (!m.allFinite()) throw Error(Errc::NonFiniteValue, p.string() + " contains NaN/Inf");
  return m;
}

struct PayloadShape {
  std::optional<std::size_t> feature_dim;
  std::optional<std::size_t> logit_dim;
};

/// Loads and validates a manifest with optional payloads; records come back
/// in canonical order.
inline SampleSet load_sample_set(const fs::path& manifest_path,
                                 const std::optional<fs::path>& feature_path = std::nullopt,
                                 const std::optional<fs::path>& logit_path = std::nullopt,
                                 PayloadShape shape = {}) {
  Manifest m = parse_manifest(read_text_file(manifest_path), manifest_path.string());
  std::optional<Matrix> features, logits;
  if (feature_path) features = read_payload(*feature_path, m.records, shape.feature_dim);
  if (logit_path) logits = read_payload(*logit_path, m.records, shape.logit_dim);
  return SampleSet(std::move(m.taxonomy), std::move(m.records), std::move(features), std::move(logits));
}

}  // namespace dcvrood

#endif  // DCVROOD_IO_HPP_
