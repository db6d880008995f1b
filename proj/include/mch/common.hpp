#pragma once

#include <cstdint>
#include <functional>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace mch {

/// Error type carrying stage context for pipeline diagnostics.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw Error(msg);
}

/// Runs fn(i) for i in [0, count). Work items must be independent; each
/// writes only its own output slot, so results do not depend on scheduling.
inline void parallel_for(int count, const std::function<void(int)>& fn) {
  unsigned hw = std::thread::hardware_concurrency();
  int n_threads = static_cast<int>(hw == 0 ? 1 : hw);
  if (n_threads <= 1 || count <= 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  if (n_threads > count) n_threads = count;
  std::vector<std::thread> pool;
  std::exception_ptr first_error;
  std::mutex err_mutex;
  for (int t = 0; t < n_threads; ++t) {
    pool.emplace_back([&, t]() {
      try {
        for (int i = t; i < count; i += n_threads) fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace mch
