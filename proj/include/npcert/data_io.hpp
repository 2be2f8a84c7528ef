#pragma once

#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "npcert/model_io.hpp"
#include "npcert/sphere.hpp"
#include "npcert/train.hpp"
#include "npcert/types.hpp"

namespace npcert {

// ---------------------------------------------------------------------------
// Dataset CSV: header "label,f1,...,fd", one sample per row.
// ---------------------------------------------------------------------------

namespace detail {

inline double parse_double(std::string_view cell, std::size_t row, std::size_t col) {
  double v = 0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last)
    throw IoError("row " + std::to_string(row) + ", column " + std::to_string(col) +
                  ": '" + std::string(cell) + "' is not a number");
  return v;
}

inline std::vector<std::string_view> split_csv_line(std::string_view line,
                                                    std::vector<std::string_view>& out) {
  out.clear();
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return out;
}

}  // namespace detail

inline Dataset load_dataset_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(is, line)) throw IoError("'" + path + "' is empty");
  if (line.rfind("label", 0) != 0)
    throw IoError("'" + path + "': first line must be a header starting with 'label'");

  Dataset data;
  std::vector<std::string_view> cells;
  std::size_t row = 1;
  std::uint32_t max_label = 0;
  while (std::getline(is, line)) {
    ++row;
    if (line.empty()) continue;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    detail::split_csv_line(line, cells);
    if (data.dim == 0) {
      if (cells.size() < 2) throw IoError("row " + std::to_string(row) + ": too few columns");
      data.dim = cells.size() - 1;
    } else if (cells.size() != data.dim + 1) {
      throw IoError("row " + std::to_string(row) + ": expected " +
                    std::to_string(data.dim + 1) + " columns, found " +
                    std::to_string(cells.size()));
    }
    const double label_v = detail::parse_double(cells[0], row, 1);
    if (label_v < 0 || label_v != std::floor(label_v))
      throw IoError("row " + std::to_string(row) + ": label must be a non-negative integer");
    const auto label = std::uint32_t(label_v);
    max_label = std::max(max_label, label);
    data.labels.push_back(label);
    for (std::size_t c = 1; c < cells.size(); ++c)
      data.points.push_back(detail::parse_double(cells[c], row, c + 1));
  }
  if (data.labels.empty()) throw IoError("'" + path + "' has no data rows");
  data.num_classes = max_label + 1;
  data.validate();
  return data;
}

inline void save_dataset_csv(const Dataset& data, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  os << "label";
  for (std::size_t c = 1; c <= data.dim; ++c) os << ",f" << c;
  os << "\n";
  os.precision(17);
  for (std::size_t i = 0; i < data.size(); ++i) {
    os << data.labels[i];
    const auto p = data.point(i);
    for (double v : p) os << ',' << v;
    os << "\n";
  }
  if (!os) throw IoError("failed writing '" + path + "'");
}

// ---------------------------------------------------------------------------
// IDX image/label pairs (big-endian), pixels scaled into [0,1].
// ---------------------------------------------------------------------------

namespace detail {

inline std::uint32_t read_be32(std::istream& is, const std::string& what) {
  unsigned char buf[4];
  is.read(reinterpret_cast<char*>(buf), 4);
  if (!is) throw IoError("truncated IDX file while reading " + what);
  return (std::uint32_t(buf[0]) << 24) | (std::uint32_t(buf[1]) << 16) |
         (std::uint32_t(buf[2]) << 8) | std::uint32_t(buf[3]);
}

}  // namespace detail

inline Dataset load_dataset_idx(const std::string& images_path, const std::string& labels_path) {
  std::ifstream imgs(images_path, std::ios::binary);
  if (!imgs) throw IoError("cannot open '" + images_path + "'");
  std::ifstream labs(labels_path, std::ios::binary);
  if (!labs) throw IoError("cannot open '" + labels_path + "'");

  if (detail::read_be32(imgs, "image magic") != 0x00000803u)
    throw IoError("'" + images_path + "': bad IDX image magic (expected 0x00000803)");
  if (detail::read_be32(labs, "label magic") != 0x00000801u)
    throw IoError("'" + labels_path + "': bad IDX label magic (expected 0x00000801)");

  const std::uint32_t n_img = detail::read_be32(imgs, "image count");
  const std::uint32_t rows = detail::read_be32(imgs, "rows");
  const std::uint32_t cols = detail::read_be32(imgs, "columns");
  const std::uint32_t n_lab = detail::read_be32(labs, "label count");
  if (n_img != n_lab)
    throw IoError("image count " + std::to_string(n_img) + " does not match label count " +
                  std::to_string(n_lab));

  Dataset data;
  data.dim = std::size_t(rows) * cols;
  data.points.resize(std::size_t(n_img) * data.dim);
  data.labels.resize(n_img);

  std::vector<unsigned char> buf(data.dim);
  for (std::uint32_t i = 0; i < n_img; ++i) {
    imgs.read(reinterpret_cast<char*>(buf.data()), std::streamsize(buf.size()));
    if (!imgs) throw IoError("truncated image data in '" + images_path + "'");
    for (std::size_t l = 0; l < data.dim; ++l)
      data.points[std::size_t(i) * data.dim + l] = double(buf[l]) / 255.0;
  }
  std::vector<unsigned char> lab(n_lab);
  labs.read(reinterpret_cast<char*>(lab.data()), std::streamsize(lab.size()));
  if (!labs) throw IoError("truncated label data in '" + labels_path + "'");
  std::uint32_t max_label = 0;
  for (std::uint32_t i = 0; i < n_lab; ++i) {
    data.labels[i] = lab[i];
    max_label = std::max(max_label, std::uint32_t(lab[i]));
  }
  data.num_classes = max_label + 1;
  data.validate();
  return data;
}

// ---------------------------------------------------------------------------
// Embedded datasets: "EMB1" binary, or CSV plus a JSON block descriptor.
// ---------------------------------------------------------------------------

struct EmbeddedDataset {
  SphereEmbedding embedding;
  Dataset data;  // dim equals embedding.total_dim()
};

inline void save_embedded_binary(const EmbeddedDataset& ds, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  os.write("EMB1", 4);
  detail::write_le<std::uint32_t>(os, std::uint32_t(ds.embedding.blocks.size()));
  for (const auto& b : ds.embedding.blocks) {
    detail::write_le<double>(os, b.radius);
    detail::write_le<std::uint32_t>(os, b.channels);
    detail::write_le<std::uint32_t>(os, b.positions);
  }
  detail::write_le<std::uint64_t>(os, ds.data.size());
  for (std::size_t i = 0; i < ds.data.size(); ++i) {
    detail::write_le<std::uint32_t>(os, ds.data.labels[i]);
    const auto p = ds.data.point(i);
    for (double v : p) detail::write_le<double>(os, v);
  }
  if (!os) throw IoError("failed writing '" + path + "'");
}

inline EmbeddedDataset load_embedded_binary(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path + "'");
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "EMB1", 4) != 0)
    throw SchemaVersionMismatch("bad magic in embedded dataset file");
  EmbeddedDataset ds;
  const std::uint32_t blocks = detail::read_le<std::uint32_t>(is);
  for (std::uint32_t b = 0; b < blocks; ++b) {
    const double r = detail::read_le<double>(is);
    const std::uint32_t ch = detail::read_le<std::uint32_t>(is);
    const std::uint32_t pos = detail::read_le<std::uint32_t>(is);
    ds.embedding.blocks.push_back({r, ch, pos});
  }
  ds.data.dim = ds.embedding.total_dim();
  const std::uint64_t n = detail::read_le<std::uint64_t>(is);
  ds.data.labels.resize(n);
  ds.data.points.resize(n * ds.data.dim);
  std::uint32_t max_label = 0;
  for (std::uint64_t i = 0; i < n; ++i) {
    ds.data.labels[i] = detail::read_le<std::uint32_t>(is);
    max_label = std::max(max_label, ds.data.labels[i]);
    for (std::size_t l = 0; l < ds.data.dim; ++l)
      ds.data.points[i * ds.data.dim + l] = detail::read_le<double>(is);
  }
  ds.data.num_classes = max_label + 1;
  ds.data.validate();
  return ds;
}

// CSV fallback: the data file is a plain dataset CSV; the sidecar JSON holds
// {"blocks": [{"r":..., "channels":..., "positions":...}, ...]}.
inline EmbeddedDataset load_embedded_csv(const std::string& csv_path,
                                         const std::string& sidecar_path) {
  EmbeddedDataset ds;
  ds.data = load_dataset_csv(csv_path);
  std::ifstream is(sidecar_path);
  if (!is) throw IoError("cannot open '" + sidecar_path + "'");
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaVersionMismatch(std::string("block descriptor is not valid JSON: ") + e.what());
  }
  for (const auto& b : j.at("blocks")) {
    ds.embedding.blocks.push_back({b.at("r").get<double>(), b.at("channels").get<std::uint32_t>(),
                                   b.at("positions").get<std::uint32_t>()});
  }
  if (ds.embedding.total_dim() != ds.data.dim)
    throw SchemaVersionMismatch("block descriptor dimension " +
                                std::to_string(ds.embedding.total_dim()) +
                                " does not match CSV dimension " + std::to_string(ds.data.dim));
  return ds;
}

}  // namespace npcert
