#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "npcert/model.hpp"
#include "npcert/types.hpp"

namespace npcert {

namespace detail {

inline Norm metric_from_string(const std::string& s) {
  if (s == "l1") return Norm::L1;
  if (s == "l2") return Norm::L2;
  if (s == "linf") return Norm::Linf;
  if (s == "embedded_l2") return Norm::EmbeddedL2;
  throw SchemaVersionMismatch("unknown metric '" + s + "'");
}

inline DomainKind domain_from_string(const std::string& s) {
  if (s == "unbounded") return DomainKind::Unbounded;
  if (s == "unit_box") return DomainKind::UnitBox;
  if (s == "sphere_product") return DomainKind::SphereProduct;
  throw SchemaVersionMismatch("unknown domain '" + s + "'");
}

}  // namespace detail

inline nlohmann::json model_to_json(const PrototypeModel& model) {
  nlohmann::json j;
  j["version"] = 1;
  j["metric"] = to_string(model.metric);
  j["domain"] = to_string(model.domain.kind);
  j["dim"] = model.dim;
  j["num_classes"] = model.num_classes;
  j["labels"] = model.labels;
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < model.num_prototypes(); ++i) {
    const auto p = model.prototype(i);
    rows.push_back(std::vector<double>(p.begin(), p.end()));
  }
  j["prototypes"] = std::move(rows);
  if (model.embedding) {
    nlohmann::json blocks = nlohmann::json::array();
    for (const auto& b : model.embedding->blocks) {
      blocks.push_back({{"r", b.radius}, {"channels", b.channels}, {"positions", b.positions}});
    }
    j["embedding"] = {{"blocks", std::move(blocks)}};
  }
  return j;
}

inline PrototypeModel model_from_json(const nlohmann::json& j) {
  if (!j.contains("version") || j.at("version").get<int>() != 1)
    throw SchemaVersionMismatch("model file version is not 1");
  PrototypeModel model;
  model.metric = detail::metric_from_string(j.at("metric").get<std::string>());
  model.domain.kind = detail::domain_from_string(j.at("domain").get<std::string>());
  model.dim = j.at("dim").get<std::size_t>();
  model.num_classes = j.at("num_classes").get<std::size_t>();
  model.labels = j.at("labels").get<std::vector<std::uint32_t>>();
  const auto& rows = j.at("prototypes");
  model.prototypes.reserve(rows.size() * model.dim);
  for (const auto& row : rows) {
    if (row.size() != model.dim)
      throw SchemaVersionMismatch("prototype row length " + std::to_string(row.size()) +
                                  " does not match dim " + std::to_string(model.dim));
    for (const auto& v : row) model.prototypes.push_back(v.get<double>());
  }
  if (j.contains("embedding")) {
    SphereEmbedding emb;
    for (const auto& b : j.at("embedding").at("blocks")) {
      emb.blocks.push_back({b.at("r").get<double>(), b.at("channels").get<std::uint32_t>(),
                            b.at("positions").get<std::uint32_t>()});
    }
    model.embedding = std::move(emb);
  }
  model.validate();
  return model;
}

// ---------------------------------------------------------------------------
// Files: JSON by default, "NPC1" little-endian binary behind the .npc suffix.
// ---------------------------------------------------------------------------

namespace detail {

template <class T>
void write_le(std::ostream& os, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  os.write(buf, sizeof(T));
}

template <class T>
T read_le(std::istream& is) {
  char buf[sizeof(T)];
  is.read(buf, sizeof(T));
  if (!is) throw IoError("unexpected end of binary model file");
  T v;
  std::memcpy(&v, buf, sizeof(T));
  return v;
}

}  // namespace detail

inline void save_model_binary(const PrototypeModel& model, const std::string& path) {
  model.validate();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  os.write("NPC1", 4);
  detail::write_le<std::uint32_t>(os, 1);  // version
  detail::write_le<std::uint32_t>(os, std::uint32_t(model.metric));
  detail::write_le<std::uint32_t>(os, std::uint32_t(model.domain.kind));
  detail::write_le<std::uint32_t>(os, std::uint32_t(model.dim));
  detail::write_le<std::uint32_t>(os, std::uint32_t(model.num_classes));
  detail::write_le<std::uint32_t>(os, std::uint32_t(model.num_prototypes()));
  detail::write_le<std::uint32_t>(os,
                                  std::uint32_t(model.embedding ? model.embedding->blocks.size() : 0));
  if (model.embedding) {
    for (const auto& b : model.embedding->blocks) {
      detail::write_le<double>(os, b.radius);
      detail::write_le<std::uint32_t>(os, b.channels);
      detail::write_le<std::uint32_t>(os, b.positions);
    }
  }
  for (std::uint32_t l : model.labels) detail::write_le<std::uint32_t>(os, l);
  for (double v : model.prototypes) detail::write_le<double>(os, v);
  if (!os) throw IoError("failed writing '" + path + "'");
}

inline PrototypeModel load_model_binary(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path + "'");
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "NPC1", 4) != 0)
    throw SchemaVersionMismatch("bad magic in binary model file");
  if (detail::read_le<std::uint32_t>(is) != 1)
    throw SchemaVersionMismatch("binary model version is not 1");
  PrototypeModel model;
  model.metric = Norm(detail::read_le<std::uint32_t>(is));
  model.domain.kind = DomainKind(detail::read_le<std::uint32_t>(is));
  model.dim = detail::read_le<std::uint32_t>(is);
  model.num_classes = detail::read_le<std::uint32_t>(is);
  const std::uint32_t n = detail::read_le<std::uint32_t>(is);
  const std::uint32_t blocks = detail::read_le<std::uint32_t>(is);
  if (blocks > 0) {
    SphereEmbedding emb;
    for (std::uint32_t b = 0; b < blocks; ++b) {
      const double r = detail::read_le<double>(is);
      const std::uint32_t ch = detail::read_le<std::uint32_t>(is);
      const std::uint32_t pos = detail::read_le<std::uint32_t>(is);
      emb.blocks.push_back({r, ch, pos});
    }
    model.embedding = std::move(emb);
  }
  model.labels.resize(n);
  for (auto& l : model.labels) l = detail::read_le<std::uint32_t>(is);
  model.prototypes.resize(std::size_t(n) * model.dim);
  for (auto& v : model.prototypes) v = detail::read_le<double>(is);
  model.validate();
  return model;
}

inline bool has_suffix(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

inline void save_model(const PrototypeModel& model, const std::string& path) {
  if (has_suffix(path, ".npc")) {
    save_model_binary(model, path);
    return;
  }
  model.validate();
  std::ofstream os(path);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  os << model_to_json(model).dump(2) << "\n";
  if (!os) throw IoError("failed writing '" + path + "'");
}

inline PrototypeModel load_model(const std::string& path) {
  if (has_suffix(path, ".npc")) return load_model_binary(path);
  std::ifstream is(path);
  if (!is) throw IoError("cannot open '" + path + "'");
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaVersionMismatch(std::string("model file is not valid JSON: ") + e.what());
  }
  try {
    return model_from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaVersionMismatch(std::string("model file schema error: ") + e.what());
  }
}

}  // namespace npcert
