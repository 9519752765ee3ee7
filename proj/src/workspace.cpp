#include "cmbert/workspace.hpp"

namespace cmbert {

std::atomic<std::size_t> WorkspaceMeter::current_{0};
std::atomic<std::size_t> WorkspaceMeter::peak_{0};

void WorkspaceMeter::reset() {
  current_.store(0, std::memory_order_relaxed);
  peak_.store(0, std::memory_order_relaxed);
}

std::size_t WorkspaceMeter::current_bytes() { return current_.load(std::memory_order_relaxed); }
std::size_t WorkspaceMeter::peak_bytes() { return peak_.load(std::memory_order_relaxed); }

void WorkspaceMeter::add(std::size_t bytes) {
  const std::size_t now = current_.fetch_add(bytes, std::memory_order_relaxed) + bytes;
  std::size_t prev = peak_.load(std::memory_order_relaxed);
  while (now > prev && !peak_.compare_exchange_weak(prev, now, std::memory_order_relaxed)) {
  }
}

void WorkspaceMeter::release(std::size_t bytes) {
  current_.fetch_sub(bytes, std::memory_order_relaxed);
}

}  // namespace cmbert
