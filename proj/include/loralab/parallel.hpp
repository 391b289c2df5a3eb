#pragma once

namespace loralab {

// Selects between the serial reference kernels and their OpenMP versions.
// Both produce bit-identical results; the serial path exists for testing
// and benchmarking.
enum class Exec { Serial, Parallel };

int max_threads();
void set_threads(int n);

}  // namespace loralab
