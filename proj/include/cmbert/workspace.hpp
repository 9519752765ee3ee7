#pragma once

#include <atomic>
#include <cstddef>
#include <vector>

namespace cmbert {

// Instrumented accounting of auxiliary (scratch) buffer bytes. Attention
// implementations route their temporaries through ScratchVec so the memory
// contract of the blockwise path is measurable rather than asserted.
// Inputs and caller-visible outputs are never counted.
class WorkspaceMeter {
 public:
  static void reset();
  static std::size_t current_bytes();
  static std::size_t peak_bytes();

  static void add(std::size_t bytes);
  static void release(std::size_t bytes);

 private:
  static std::atomic<std::size_t> current_;
  static std::atomic<std::size_t> peak_;
};

template <typename T>
class ScratchVec {
 public:
  explicit ScratchVec(std::size_t n) : data_(n, T(0)), bytes_(n * sizeof(T)) {
    WorkspaceMeter::add(bytes_);
  }
  ~ScratchVec() { WorkspaceMeter::release(bytes_); }
  ScratchVec(const ScratchVec&) = delete;
  ScratchVec& operator=(const ScratchVec&) = delete;

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }
  std::size_t size() const { return data_.size(); }
  void fill(T v) { data_.assign(data_.size(), v); }

 private:
  std::vector<T> data_;
  std::size_t bytes_;
};

}  // namespace cmbert
