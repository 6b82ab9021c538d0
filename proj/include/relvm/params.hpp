#pragma once

#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "relvm/array.hpp"
#include "relvm/rng.hpp"

namespace relvm {

// Ordered name -> Array store. Insertion order is preserved so checkpoint
// manifests and optimiser sweeps are deterministic.
struct ParamMap {
  std::vector<std::pair<std::string, Array>> items;
  std::unordered_map<std::string, std::size_t> index;

  bool contains(const std::string& name) const { return index.count(name) > 0; }

  Array& add(const std::string& name, Array a) {
    require_input(!contains(name), "ParamMap: duplicate name " + name);
    index.emplace(name, items.size());
    items.emplace_back(name, std::move(a));
    return items.back().second;
  }

  Array& at(const std::string& name) {
    auto it = index.find(name);
    require_input(it != index.end(), "ParamMap: unknown name " + name);
    return items[it->second].second;
  }
  const Array& at(const std::string& name) const {
    auto it = index.find(name);
    require_input(it != index.end(), "ParamMap: unknown name " + name);
    return items[it->second].second;
  }

  std::size_t total_count() const {
    std::size_t n = 0;
    for (const auto& [_, a] : items) n += a.size();
    return n;
  }

  // Zero arrays with the same names/shapes; gradient accumulators.
  ParamMap zeros_like() const {
    ParamMap g;
    for (const auto& [name, a] : items) g.add(name, Array(a.shape));
    return g;
  }

  void fill(double x) {
    for (auto& [_, a] : items) a.fill(x);
  }

  void scale(double s) {
    for (auto& [_, a] : items)
      for (double& x : a.v) x *= s;
  }

  void add_scaled(const ParamMap& other, double s) {
    for (std::size_t i = 0; i < items.size(); ++i)
      axpy(s, other.items[i].second.data(), items[i].second.data(),
           items[i].second.size());
  }

  double l2_norm() const {
    double s = 0.0;
    for (const auto& [_, a] : items) s += dot(a, a);
    return std::sqrt(s);
  }

  bool operator==(const ParamMap& other) const {
    if (items.size() != other.items.size()) return false;
    for (std::size_t i = 0; i < items.size(); ++i) {
      if (items[i].first != other.items[i].first) return false;
      if (items[i].second.shape != other.items[i].second.shape) return false;
      if (items[i].second.v != other.items[i].second.v) return false;
    }
    return true;
  }
};

// Uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)].
inline Array init_matrix(std::size_t rows, std::size_t cols, RngStream& rng) {
  Array w({rows, cols});
  const double b = 1.0 / std::sqrt(static_cast<double>(cols));
  for (double& x : w.v) x = (2.0 * rng.uniform() - 1.0) * b;
  return w;
}

inline Array init_embedding(std::size_t rows, std::size_t cols, RngStream& rng) {
  return init_matrix(rows, cols, rng);
}

}  // namespace relvm
