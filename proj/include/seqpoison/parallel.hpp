#pragma once

#include <cstddef>
#include <memory>
#include <vector>

#include <tbb/blocked_range.h>
#include <tbb/global_control.h>
#include <tbb/parallel_for.h>

namespace seqpoison {

// Worker cap from SEQPOISON_THREADS, or 0 when unset/invalid.
std::size_t env_thread_cap();

// Holds a process-wide TBB parallelism limit for its lifetime.
class ThreadLimit {
 public:
  // threads == 0 means "leave the scheduler default".
  explicit ThreadLimit(std::size_t threads);

 private:
  std::unique_ptr<tbb::global_control> control_;
};

// Runs fn(i) for i in [0, n). Each index must write only its own output slot;
// callers reduce the slots afterwards in index order, which keeps results
// bit-identical regardless of the worker count.
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  if (n == 0) return;
  tbb::parallel_for(tbb::blocked_range<std::size_t>(0, n), [&](const tbb::blocked_range<std::size_t>& r) {
    for (std::size_t i = r.begin(); i != r.end(); ++i) fn(i);
  });
}

template <class T, class Fn>
std::vector<T> parallel_map(std::size_t n, Fn&& fn) {
  std::vector<T> out(n);
  parallel_for(n, [&](std::size_t i) { out[i] = fn(i); });
  return out;
}

}  // namespace seqpoison
