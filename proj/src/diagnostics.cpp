#include "nqs/diagnostics.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace nqs {

namespace {
std::atomic<bool> g_enabled{true};
std::atomic<long> g_count{0};
std::mutex g_mutex;
}  // namespace

void warn(const std::string& message) {
  ++g_count;
  if (!g_enabled.load()) return;
  std::lock_guard<std::mutex> lock(g_mutex);
  std::cerr << "warning: " << message << '\n';
}

void set_warnings_enabled(bool enabled) { g_enabled = enabled; }

long warning_count() { return g_count.load(); }

}  // namespace nqs
