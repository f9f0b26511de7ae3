#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

namespace pillardet {

// Invalid user input: malformed config files, mismatched shapes, out-of-range
// flags. The CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A broken internal precondition, e.g. non-finite values where finite ones
// were promised. The CLI maps this to exit code 1.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Wraps an angle into [-pi, pi).
double wrap_angle(double a);

uint64_t splitmix64(uint64_t x);
uint64_t hash_combine(uint64_t seed, uint64_t v);

// Deterministic random stream. All algorithms are written out explicitly so
// that outputs are independent of the standard library's distribution
// implementations.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next();
  double uniform();                      // [0, 1)
  double uniform(double lo, double hi);  // [lo, hi)
  int uniform_int(int lo, int hi);       // inclusive bounds
  double gaussian();                     // N(0, 1), Box-Muller

 private:
  uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// Thread pool width: PILLARDET_THREADS if set, else hardware concurrency.
int thread_count();

// Runs fn(i) for each i in [0, n). Items must write only to their own output
// slots; results are then invariant to the thread count and schedule.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace pillardet
