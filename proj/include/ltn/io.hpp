#pragma once

#include <string>

#include <json.hpp>

#include "ltn/autodiff.hpp"

namespace ltn {

using Json = nlohmann::json;

// Sorted keys, no insignificant whitespace (or `indent` spaces per level),
// floats printed with 17 significant digits. Non-finite numbers throw.
std::string canonical_json(const Json& j, int indent = -1);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);
Json read_json_file(const std::string& path);

// Versioned parameter checkpoint:
//   {"format": "ltn-checkpoint", "version": 1, "meta": {...},
//    "params": {"<key>": {"shape": [...], "data": [...]}}}
struct Checkpoint {
  Json meta = Json::object();
  ad::ParamStore params;
};

std::string serialize_checkpoint(const Checkpoint& ck);
Checkpoint parse_checkpoint(const std::string& text);
void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace ltn
