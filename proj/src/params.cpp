#include "bottomup/params.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <sstream>

#include "json.hpp"

namespace bottomup {

void ParamSet::add(std::string name, Tensor value) {
  if (contains(name)) throw ContractError("duplicate parameter name: " + name);
  entries_.push_back({std::move(name), std::move(value)});
}

bool ParamSet::contains(std::string_view name) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const auto& e) { return e.name == name; });
}

const Tensor& ParamSet::get(std::string_view name) const {
  for (const auto& e : entries_)
    if (e.name == name) return e.value;
  throw ContractError("unknown parameter: " + std::string(name));
}

Tensor& ParamSet::get(std::string_view name) {
  return const_cast<Tensor&>(static_cast<const ParamSet&>(*this).get(name));
}

std::size_t ParamSet::total_values() const noexcept {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.value.size();
  return n;
}

BoundParams::BoundParams(Graph& g, const ParamSet& params, bool trainable) {
  for (const auto& e : params.entries()) {
    names_.push_back(e.name);
    vars_.push_back(trainable ? g.leaf(e.value) : g.constant(e.value));
  }
}

BoundParams::BoundParams(std::vector<std::string> names, std::vector<Var> vars)
    : names_(std::move(names)), vars_(std::move(vars)) {
  if (names_.size() != vars_.size()) throw ContractError("BoundParams: names and vars differ in count");
}

const Var& BoundParams::operator[](std::string_view name) const {
  for (std::size_t i = 0; i < names_.size(); ++i)
    if (names_[i] == name) return vars_[i];
  throw ContractError("unknown parameter: " + std::string(name));
}

std::string params_sidecar_json(const ParamSet& params) {
  auto arr = nlohmann::json::array();
  for (const auto& e : params.entries()) arr.push_back({{"name", e.name}, {"shape", e.value.shape()}});
  return arr.dump(2) + "\n";
}

std::string params_payload(const ParamSet& params) {
  std::string out;
  out.reserve(params.total_values() * 8);
  for (const auto& e : params.entries()) {
    for (double v : e.value.data()) {
      auto bits = std::bit_cast<std::uint64_t>(v);
      for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xffu));
    }
  }
  return out;
}

ParamSet parse_params(std::string_view sidecar_json, std::string_view payload) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(sidecar_json);
  } catch (const nlohmann::json::exception& ex) {
    throw ParamIoError(std::string("parameter sidecar is not valid JSON: ") + ex.what());
  }
  if (!doc.is_array()) throw ParamIoError("parameter sidecar must be a JSON array");

  ParamSet params;
  std::size_t offset = 0;
  for (const auto& entry : doc) {
    if (!entry.contains("name") || !entry.contains("shape")) {
      throw ParamIoError("parameter sidecar entry lacks name or shape");
    }
    auto shape = entry.at("shape").get<Shape>();
    const auto n = shape_numel(shape);
    if (offset + n * 8 > payload.size()) throw ParamIoError("parameter payload is truncated");
    std::vector<double> values(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::uint64_t bits = 0;
      for (int b = 0; b < 8; ++b)
        bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(payload[offset + i * 8 + b])) << (8 * b);
      values[i] = std::bit_cast<double>(bits);
    }
    offset += n * 8;
    params.add(entry.at("name").get<std::string>(), Tensor(std::move(shape), std::move(values)));
  }
  if (offset != payload.size()) throw ParamIoError("parameter payload has trailing bytes");
  return params;
}

void save_params(const ParamSet& params, const std::filesystem::path& payload_path,
                 const std::filesystem::path& sidecar_path) {
  std::ofstream bin(payload_path, std::ios::binary);
  std::ofstream side(sidecar_path);
  if (!bin || !side) throw ParamIoError("cannot open parameter files for writing");
  const auto payload = params_payload(params);
  bin.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  side << params_sidecar_json(params);
}

ParamSet load_params(const std::filesystem::path& payload_path, const std::filesystem::path& sidecar_path) {
  std::ifstream bin(payload_path, std::ios::binary);
  std::ifstream side(sidecar_path);
  if (!bin || !side) throw ParamIoError("cannot open parameter files for reading");
  std::string payload((std::istreambuf_iterator<char>(bin)), std::istreambuf_iterator<char>());
  std::stringstream js;
  js << side.rdbuf();
  return parse_params(js.str(), payload);
}

}  // namespace bottomup
