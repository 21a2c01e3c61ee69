#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "modist/error.hpp"
#include "modist/tensor.hpp"

namespace modist::nn {

struct ParamSlice {
  std::string name;
  std::size_t offset = 0;
  std::size_t size = 0;
  Shape shape;
  bool operator==(const ParamSlice&) const = default;
};

// Structural index of a flat parameter vector: names mapped to slices.
class ParamIndex {
 public:
  std::size_t add(std::string name, Shape shape) {
    const std::size_t n = shape_numel(shape);
    slices_.push_back({std::move(name), total_, n, std::move(shape)});
    total_ += n;
    return slices_.back().offset;
  }

  std::size_t total() const { return total_; }
  const std::vector<ParamSlice>& slices() const { return slices_; }

  const ParamSlice& find(const std::string& name) const {
    for (const auto& s : slices_) {
      if (s.name == name) return s;
    }
    throw ConfigError("no parameter named " + name);
  }

  bool operator==(const ParamIndex&) const = default;

 private:
  std::vector<ParamSlice> slices_;
  std::size_t total_ = 0;
};

}  // namespace modist::nn
