#include "loralab/dataset.hpp"

#include <algorithm>

#include "loralab/errors.hpp"

namespace loralab {

Dataset Dataset::slice(std::size_t begin, std::size_t count) const {
  if (begin + count > size() || count == 0) throw InvalidInput("dataset slice out of range");
  std::vector<double> xs(inputs.entries().begin() + begin * inputs.cols(),
                         inputs.entries().begin() + (begin + count) * inputs.cols());
  std::vector<double> ys(targets.entries().begin() + begin * targets.cols(),
                         targets.entries().begin() + (begin + count) * targets.cols());
  return {num::Matrix(count, inputs.cols(), std::move(xs)),
          num::Matrix(count, targets.cols(), std::move(ys))};
}

void Dataset::validate_unit_cube() const {
  if (inputs.rows() != targets.rows()) throw InvalidInput("inputs and targets differ in length");
  for (double x : inputs.entries()) {
    if (!(x >= 0.0 && x <= 1.0)) throw InvalidInput("sample input outside [0,1]^d");
  }
}

}  // namespace loralab
