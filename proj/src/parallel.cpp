#include "seqpoison/parallel.hpp"

#include <charconv>
#include <cstdlib>
#include <cstring>

namespace seqpoison {

std::size_t env_thread_cap() {
  const char* raw = std::getenv("SEQPOISON_THREADS");
  if (raw == nullptr) return 0;
  std::size_t value = 0;
  const char* end = raw + std::strlen(raw);
  auto [ptr, ec] = std::from_chars(raw, end, value);
  if (ec != std::errc{} || ptr != end) return 0;
  return value;
}

ThreadLimit::ThreadLimit(std::size_t threads) {
  if (threads > 0) {
    control_ = std::make_unique<tbb::global_control>(tbb::global_control::max_allowed_parallelism, threads);
  }
}

}  // namespace seqpoison
