#pragma once

#include <cstddef>
#include <span>

#include "loralab/numkit.hpp"

namespace loralab {

// One labelled example (x, y); views into a Dataset.
struct LabeledSample {
  std::span<const double> x;
  std::span<const double> y;
};

// Row-per-sample storage: inputs is n x d, targets is n x D.
struct Dataset {
  num::Matrix inputs;
  num::Matrix targets;

  std::size_t size() const { return inputs.rows(); }
  bool empty() const { return inputs.empty(); }
  LabeledSample operator[](std::size_t i) const { return {inputs.row(i), targets.row(i)}; }

  // Rows [begin, begin + count).
  Dataset slice(std::size_t begin, std::size_t count) const;
  // Throws InvalidInput when shapes disagree or some input leaves [0, 1]^d.
  void validate_unit_cube() const;
};

}  // namespace loralab
