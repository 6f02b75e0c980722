#ifndef OCM_STORE_HPP
#define OCM_STORE_HPP

#include <atomic>
#include <cstdint>
#include <deque>
#include <map>
#include <mutex>
#include <thread>
#include <vector>

#include "ocm/errors.hpp"
#include "ocm/types.hpp"

namespace ocm {

/// The set of shared variables. Each cell carries the committed value, a
/// per-variable version counter, and the lock state used by the backends:
/// a mutex for the lock-based schemes and a TL2-style versioned lock word
/// (version << 1 | locked) for the transactional one.
class SharedStore {
 public:
  struct Cell {
    std::atomic<Value> value{0};
    std::atomic<std::uint64_t> verlock{0};
    std::mutex mtx;  // per-variable lock table
  };

  VarId create(Value initial) {
    Cell& c = cells_.emplace_back();
    c.value.store(initial, std::memory_order_relaxed);
    return static_cast<VarId>(cells_.size() - 1);
  }

  std::size_t size() const { return cells_.size(); }

  Cell& cell(VarId v) { return cells_[v]; }

  /// Committed value, for use while the caller holds whatever lock the
  /// backend requires (or during single-threaded phases).
  Value load(VarId v) const {
    return cells_[v].value.load(std::memory_order_acquire);
  }

  void store_value(VarId v, Value val) {
    cells_[v].value.store(val, std::memory_order_release);
  }

  std::uint64_t version(VarId v) const {
    return cells_[v].verlock.load(std::memory_order_acquire) >> 1;
  }

  void bump_version(VarId v) {
    Cell& c = cells_[v];
    std::uint64_t w = c.verlock.load(std::memory_order_relaxed);
    c.verlock.store(((w >> 1) + 1) << 1, std::memory_order_release);
  }

  /// Consistent (value, version) snapshot of one cell without any backend
  /// lock held; spins while a transactional commit holds the cell.
  std::pair<Value, std::uint64_t> read_consistent(VarId v) const {
    const Cell& c = cells_[v];
    for (;;) {
      std::uint64_t w1 = c.verlock.load(std::memory_order_acquire);
      if (w1 & 1) {
        std::this_thread::yield();
        continue;
      }
      Value val = c.value.load(std::memory_order_acquire);
      std::uint64_t w2 = c.verlock.load(std::memory_order_acquire);
      if (w1 == w2) return {val, w1 >> 1};
    }
  }

  /// Blocking acquisition of a cell's transactional commit lock. Callers
  /// acquire in ascending VarId order, which rules out deadlock. Returns the
  /// version observed under the lock.
  std::uint64_t lock_verlock(VarId v) {
    Cell& c = cells_[v];
    for (;;) {
      std::uint64_t w = c.verlock.load(std::memory_order_relaxed);
      if (!(w & 1) &&
          c.verlock.compare_exchange_weak(w, w | 1,
                                          std::memory_order_acq_rel)) {
        return w >> 1;
      }
      std::this_thread::yield();
    }
  }

  /// Releases a commit lock, optionally publishing a new version.
  void unlock_verlock(VarId v, std::uint64_t newVersion) {
    cells_[v].verlock.store(newVersion << 1, std::memory_order_release);
  }

  bool verlock_held(VarId v) const {
    return cells_[v].verlock.load(std::memory_order_acquire) & 1;
  }

  std::vector<Value> snapshot() const {
    std::vector<Value> out;
    out.reserve(cells_.size());
    for (const Cell& c : cells_) {
      out.push_back(c.value.load(std::memory_order_acquire));
    }
    return out;
  }

  std::map<VarId, Value> snapshot_map() const {
    std::map<VarId, Value> out;
    for (VarId v = 0; v < cells_.size(); ++v) {
      out[v] = cells_[v].value.load(std::memory_order_acquire);
    }
    return out;
  }

  /// Overwrites all values (replay bootstrapping). Sizes must match.
  void load_values(const std::vector<Value>& values) {
    if (values.size() != cells_.size()) {
      throw ConfigError("initial shared values do not match store size");
    }
    for (VarId v = 0; v < values.size(); ++v) {
      cells_[v].value.store(values[v], std::memory_order_relaxed);
    }
  }

 private:
  std::deque<Cell> cells_;  // deque: stable addresses as vars are created
};

}  // namespace ocm

#endif  // OCM_STORE_HPP
