#include "pasdf/parallel.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

namespace pasdf {

namespace {
std::atomic<std::size_t> g_override{0};

std::size_t env_thread_count() {
  if (const char* env = std::getenv("PASDF_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v > 0) return static_cast<std::size_t>(v);
    } catch (...) {
    }
  }
  return std::max(1u, std::thread::hardware_concurrency());
}
}  // namespace

std::size_t thread_count() {
  const std::size_t o = g_override.load();
  return o > 0 ? o : env_thread_count();
}

void set_thread_count(std::size_t n) { g_override.store(n); }

}  // namespace pasdf
