#pragma once

#include <functional>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "birl/diff.hpp"

namespace birl {

// Ordered collection of named parameter nodes. The optional snapshot is a
// frozen deep copy of all values; displacement() is the flat concatenation
// of (current - snapshot) in insertion order.
class ParamStore {
 public:
  Var add(const std::string& name, Array init);

  size_t size() const { return nodes_.size(); }
  size_t total_values() const;
  const std::string& name(size_t i) const { return names_[i]; }
  const Var& node(size_t i) const { return nodes_[i]; }
  const Var& get(const std::string& name) const;
  bool has(const std::string& name) const { return index_.count(name) > 0; }

  void take_snapshot();
  bool has_snapshot() const { return snapshot_.has_value(); }
  void drop_snapshot() { snapshot_.reset(); }
  const std::vector<Array>& snapshot_values() const;
  std::vector<double> displacement() const;

  // theta <- theta -/+ lr * grad, then gradients are cleared.
  void sgd_update(double learning_rate, bool ascent);
  void zero_grads();

  std::vector<double> flat_values() const;
  void set_flat_values(const std::vector<double>& flat);

  void save(const std::string& path) const;
  // Assigns values from a checkpoint; names, order and shapes must match.
  void load(const std::string& path);

 private:
  std::vector<std::string> names_;
  std::vector<Var> nodes_;
  std::unordered_map<std::string, size_t> index_;
  std::optional<std::vector<Array>> snapshot_;
};

// Flat (name, shape, raw little-endian doubles) container with a version tag.
// Round-trips bitwise.
void write_checkpoint(const std::string& path,
                      const std::vector<std::pair<std::string, Array>>& records);
std::vector<std::pair<std::string, Array>> read_checkpoint(const std::string& path);

// Max over parameter entries of |analytic - numeric| / max(|a|, |n|, 1e-8),
// with numeric = central differences of the rebuilt graph. The builder must
// be deterministic (any sampling noise frozen outside).
double check_gradients(const std::function<Var()>& build, ParamStore& params, double step);
double check_gradients(const std::function<Var()>& build, const std::vector<Var>& params,
                       double step);

}  // namespace birl
