#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "bottomup/graph.hpp"
#include "bottomup/tensor.hpp"

namespace bottomup {

struct NamedTensor {
  std::string name;
  Tensor value;

  friend bool operator==(const NamedTensor&, const NamedTensor&) = default;
};

/// Insertion-ordered collection of named parameter tensors. The order is
/// the serialization order and the order of bound graph leaves.
class ParamSet {
 public:
  void add(std::string name, Tensor value);
  bool contains(std::string_view name) const;
  const Tensor& get(std::string_view name) const;
  Tensor& get(std::string_view name);

  std::size_t size() const noexcept { return entries_.size(); }
  std::size_t total_values() const noexcept;
  const std::vector<NamedTensor>& entries() const noexcept { return entries_; }
  std::vector<NamedTensor>& entries() noexcept { return entries_; }

  friend bool operator==(const ParamSet&, const ParamSet&) = default;

 private:
  std::vector<NamedTensor> entries_;
};

/// Graph leaves for every parameter, in ParamSet order.
class BoundParams {
 public:
  BoundParams(Graph& g, const ParamSet& params, bool trainable);
  /// Wraps existing graph nodes; names and vars pair up by position.
  BoundParams(std::vector<std::string> names, std::vector<Var> vars);
  const Var& operator[](std::string_view name) const;
  const std::vector<Var>& vars() const noexcept { return vars_; }

 private:
  std::vector<std::string> names_;
  std::vector<Var> vars_;
};

/// Raised on malformed parameter files.
class ParamIoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Sidecar: JSON array of {"name", "shape"} objects in ParamSet order.
std::string params_sidecar_json(const ParamSet& params);
/// Payload: every value of every tensor, in order, as little-endian float64.
std::string params_payload(const ParamSet& params);

void save_params(const ParamSet& params, const std::filesystem::path& payload_path,
                 const std::filesystem::path& sidecar_path);
ParamSet load_params(const std::filesystem::path& payload_path, const std::filesystem::path& sidecar_path);
ParamSet parse_params(std::string_view sidecar_json, std::string_view payload);

}  // namespace bottomup
