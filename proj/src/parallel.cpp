#include "loralab/parallel.hpp"

#include <omp.h>

#include "loralab/errors.hpp"

namespace loralab {

int max_threads() { return omp_get_max_threads(); }

void set_threads(int n) {
  if (n < 1) throw InvalidParameter("thread count must be at least 1");
  omp_set_num_threads(n);
}

}  // namespace loralab
