#include "fnh/parallel.hpp"

#include <omp.h>

#include <charconv>
#include <cstdlib>
#include <string>

#include "fnh/error.hpp"

namespace fnh {

namespace {
const int kDefaultThreads = omp_get_max_threads();
}

void set_thread_count(int threads) {
  if (threads < 0) throw InvalidArgument("thread count must be >= 0");
  omp_set_num_threads(threads == 0 ? kDefaultThreads : threads);
}

int configure_threads_from_env() {
  const char* raw = std::getenv("FNH_THREADS");
  if (raw == nullptr || *raw == '\0') return 0;
  const std::string text(raw);
  int value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size() || value < 0) {
    throw InvalidArgument("FNH_THREADS must be a non-negative integer, got '" + text + "'");
  }
  set_thread_count(value);
  return value;
}

int max_threads() { return omp_get_max_threads(); }

}  // namespace fnh
