#pragma once

// Self-describing text checkpoints: a JSON document holding the format
// version, the model config, and every named parameter tensor as nested
// arrays printed with 17 significant digits (lossless for doubles).

#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "tsadv/net.hpp"
#include "tsadv/text.hpp"

namespace tsadv {

constexpr int kCheckpointFormatVersion = 1;

namespace detail {

inline void write_nested(std::ostream& out, const double* data, const std::vector<int>& shape, std::size_t dim,
                         std::size_t stride) {
  out << '[';
  const int n = shape[dim];
  if (dim + 1 == shape.size()) {
    for (int i = 0; i < n; ++i) {
      if (i) out << ',';
      out << format_g17(data[i]);
    }
  } else {
    const std::size_t inner = stride / static_cast<std::size_t>(n);
    for (int i = 0; i < n; ++i) {
      if (i) out << ',';
      write_nested(out, data + static_cast<std::size_t>(i) * inner, shape, dim + 1, inner);
    }
  }
  out << ']';
}

inline void flatten_nested(const nlohmann::json& node, const std::vector<int>& shape, std::size_t dim,
                           std::vector<double>& out, const std::string& tensor_name) {
  if (!node.is_array() || static_cast<int>(node.size()) != shape[dim])
    throw std::runtime_error("checkpoint shape mismatch for tensor '" + tensor_name + "'");
  if (dim + 1 == shape.size()) {
    for (const auto& v : node) {
      if (!v.is_number()) throw std::runtime_error("checkpoint: non-numeric entry in tensor '" + tensor_name + "'");
      out.push_back(v.get<double>());
    }
  } else {
    for (const auto& child : node) flatten_nested(child, shape, dim + 1, out, tensor_name);
  }
}

}  // namespace detail

inline void save_checkpoint(const Classifier& clf, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path.string());
  const auto& cfg = clf.config();
  out << "{\n";
  out << "  \"format_version\": " << kCheckpointFormatVersion << ",\n";
  out << "  \"config\": {\n";
  out << "    \"num_blocks\": " << cfg.num_blocks << ",\n";
  out << "    \"channels_per_block\": [";
  for (std::size_t i = 0; i < cfg.channels_per_block.size(); ++i)
    out << (i ? "," : "") << cfg.channels_per_block[i];
  out << "],\n";
  out << "    \"kernel_sizes\": [" << cfg.kernel_sizes[0] << "," << cfg.kernel_sizes[1] << ","
      << cfg.kernel_sizes[2] << "],\n";
  out << "    \"residual\": " << (cfg.residual ? "true" : "false") << ",\n";
  out << "    \"num_classes\": " << cfg.num_classes << ",\n";
  out << "    \"series_length\": " << cfg.series_length << ",\n";
  out << "    \"init_seed\": " << cfg.init_seed << "\n";
  out << "  },\n";
  out << "  \"tensors\": {\n";
  const double* p = clf.parameters().data();
  const auto& tensors = clf.tensors();
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    const auto& t = tensors[i];
    out << "    \"" << t.name << "\": ";
    detail::write_nested(out, p + t.offset, t.shape, 0, t.size);
    out << (i + 1 < tensors.size() ? ",\n" : "\n");
  }
  out << "  }\n}\n";
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

inline Classifier load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("corrupt checkpoint file " + path.string() + ": " + e.what());
  }

  if (!doc.contains("format_version") || !doc["format_version"].is_number_integer())
    throw std::runtime_error("corrupt checkpoint file " + path.string() + ": missing format_version");
  if (doc["format_version"].get<int>() != kCheckpointFormatVersion)
    throw std::runtime_error("unsupported checkpoint format_version " + doc["format_version"].dump() + " in " +
                             path.string());
  if (!doc.contains("config") || !doc.contains("tensors"))
    throw std::runtime_error("corrupt checkpoint file " + path.string() + ": missing config or tensors");

  ClassifierConfig cfg;
  try {
    const auto& c = doc["config"];
    cfg.num_blocks = c.at("num_blocks").get<int>();
    cfg.channels_per_block = c.at("channels_per_block").get<std::vector<int>>();
    const auto ks = c.at("kernel_sizes").get<std::vector<int>>();
    if (ks.size() != 3) throw std::runtime_error("kernel_sizes must have 3 entries");
    cfg.kernel_sizes = {ks[0], ks[1], ks[2]};
    cfg.residual = c.at("residual").get<bool>();
    cfg.num_classes = c.at("num_classes").get<int>();
    cfg.series_length = c.at("series_length").get<int>();
    cfg.init_seed = c.at("init_seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("corrupt checkpoint file " + path.string() + ": bad config: " + e.what());
  }

  Classifier clf(cfg);
  auto& params = clf.mutable_parameters();
  const auto& tensors_node = doc["tensors"];

  for (const auto& t : clf.tensors()) {
    if (!tensors_node.contains(t.name))
      throw std::runtime_error("checkpoint " + path.string() + ": missing tensor '" + t.name + "'");
    std::vector<double> flat;
    flat.reserve(t.size);
    detail::flatten_nested(tensors_node.at(t.name), t.shape, 0, flat, t.name);
    for (std::size_t i = 0; i < t.size; ++i) params[t.offset + i] = flat[i];
  }
  for (auto it = tensors_node.begin(); it != tensors_node.end(); ++it) {
    bool known = false;
    for (const auto& t : clf.tensors())
      if (t.name == it.key()) {
        known = true;
        break;
      }
    if (!known)
      throw std::runtime_error("checkpoint " + path.string() + ": unexpected tensor '" + it.key() + "'");
  }
  return clf;
}

}  // namespace tsadv
