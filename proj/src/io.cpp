#include "ltn/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "ltn/error.hpp"

namespace ltn {

namespace {

std::string format_double(double v) {
  if (!std::isfinite(v)) throw FormatError("cannot serialize a non-finite number");
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void emit(const Json& j, int indent, int level, std::string& out) {
  auto newline = [&](int lvl) {
    if (indent < 0) return;
    out += '\n';
    out.append(static_cast<std::size_t>(indent * lvl), ' ');
  };
  switch (j.type()) {
    case Json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += '{';
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {  // std::map order: sorted
        if (!first) out += ',';
        first = false;
        newline(level + 1);
        out += Json(it.key()).dump();
        out += indent < 0 ? ":" : ": ";
        emit(it.value(), indent, level + 1, out);
      }
      newline(level);
      out += '}';
      return;
    }
    case Json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      bool scalars = std::all_of(j.begin(), j.end(), [](const Json& e) { return e.is_primitive(); });
      out += '[';
      bool first = true;
      for (const auto& e : j) {
        if (!first) out += indent >= 0 && scalars ? ", " : ",";
        first = false;
        if (!scalars) newline(level + 1);
        emit(e, indent, level + 1, out);
      }
      if (!scalars) newline(level);
      out += ']';
      return;
    }
    case Json::value_t::number_float:
      out += format_double(j.get<double>());
      return;
    default:
      out += j.dump();
      return;
  }
}

}  // namespace

std::string canonical_json(const Json& j, int indent) {
  std::string out;
  emit(j, indent, 0, out);
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write '" + path + "'");
  out << content;
  if (!out) throw FormatError("write to '" + path + "' failed");
}

Json read_json_file(const std::string& path) {
  std::string text = read_file(path);
  try {
    return Json::parse(text);
  } catch (const Json::exception& e) {
    throw FormatError("'" + path + "': " + e.what());
  }
}

std::string serialize_checkpoint(const Checkpoint& ck) {
  Json params = Json::object();
  for (const auto& [key, t] : ck.params)
    params[key] = {{"shape", t.shape()}, {"data", t.storage()}};
  Json j = {{"format", "ltn-checkpoint"}, {"version", 1}, {"meta", ck.meta}, {"params", params}};
  return canonical_json(j) + "\n";
}

Checkpoint parse_checkpoint(const std::string& text) {
  Checkpoint ck;
  try {
    Json j = Json::parse(text);
    if (j.value("format", "") != "ltn-checkpoint")
      throw FormatError("not an ltn checkpoint");
    if (j.value("version", 0) != 1)
      throw FormatError("unsupported checkpoint version " + j.value("version", Json()).dump());
    ck.meta = j.value("meta", Json::object());
    for (const auto& [key, entry] : j.at("params").items()) {
      auto shape = entry.at("shape").get<ad::Shape>();
      auto data = entry.at("data").get<std::vector<double>>();
      ck.params[key] = ad::Tensor(std::move(shape), std::move(data));
    }
  } catch (const Json::exception& e) {
    throw FormatError(std::string("malformed checkpoint: ") + e.what());
  } catch (const ShapeMismatch& e) {
    throw FormatError(std::string("malformed checkpoint: ") + e.what());
  }
  return ck;
}

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  write_file(path, serialize_checkpoint(ck));
}

Checkpoint load_checkpoint(const std::string& path) { return parse_checkpoint(read_file(path)); }

}  // namespace ltn
