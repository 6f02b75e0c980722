#ifndef OCM_BACKEND_HPP
#define OCM_BACKEND_HPP

#include <atomic>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "ocm/errors.hpp"
#include "ocm/store.hpp"
#include "ocm/trace.hpp"
#include "ocm/types.hpp"

namespace ocm {

enum class BackendKind { Cm, Global, GlobalLazy, TwoPhase, Stm };

inline const char* backend_name(BackendKind k) {
  switch (k) {
    case BackendKind::Cm: return "cm";
    case BackendKind::Global: return "global";
    case BackendKind::GlobalLazy: return "global-lazy";
    case BackendKind::TwoPhase: return "2pl";
    case BackendKind::Stm: return "stm";
  }
  return "?";
}

inline std::optional<BackendKind> parse_backend(const std::string& s) {
  if (s == "cm") return BackendKind::Cm;
  if (s == "global") return BackendKind::Global;
  if (s == "global-lazy") return BackendKind::GlobalLazy;
  if (s == "2pl") return BackendKind::TwoPhase;
  if (s == "stm") return BackendKind::Stm;
  return std::nullopt;
}

inline std::vector<BackendKind> all_backends() {
  return {BackendKind::Cm, BackendKind::Global, BackendKind::GlobalLazy,
          BackendKind::TwoPhase, BackendKind::Stm};
}

inline std::vector<BackendKind> parallel_backends() {
  return {BackendKind::Global, BackendKind::GlobalLazy, BackendKind::TwoPhase,
          BackendKind::Stm};
}

/// Global commit order: hands out dense ordinals, collects trace records and
/// the per-commit observable output groups. A slot is reserved at the
/// serialization point (which, with eager lock release, can precede the end
/// of the segment) and filled in when the segment finishes.
class CommitBoard {
 public:
  std::uint64_t acquire(ThreadId tid) {
    std::lock_guard<std::mutex> g(mu_);
    std::uint64_t ordinal = slots_.size();
    Slot& s = slots_.emplace_back();
    s.rec.ordinal = ordinal;
    s.rec.tid = tid;
    count_.store(ordinal + 1, std::memory_order_release);
    return ordinal;
  }

  void finalize(std::uint64_t ordinal, std::uint64_t segOrdinal,
                std::string label, std::vector<std::string> lines) {
    std::lock_guard<std::mutex> g(mu_);
    Slot& s = slots_[ordinal];
    s.rec.segOrdinal = segOrdinal;
    s.rec.label = std::move(label);
    s.lines = std::move(lines);
    s.finalized = true;
  }

  /// Number of ordinals handed out so far; readable without the lock.
  std::uint64_t count() const { return count_.load(std::memory_order_acquire); }

  std::vector<TraceRecord> records() const {
    std::lock_guard<std::mutex> g(mu_);
    std::vector<TraceRecord> out;
    out.reserve(slots_.size());
    for (const Slot& s : slots_) out.push_back(s.rec);
    return out;
  }

  std::vector<std::string> observable_log() const {
    std::lock_guard<std::mutex> g(mu_);
    std::vector<std::string> out;
    for (const Slot& s : slots_) {
      for (const std::string& l : s.lines) out.push_back(l);
    }
    return out;
  }

 private:
  struct Slot {
    TraceRecord rec;
    std::vector<std::string> lines;
    bool finalized = false;
  };
  mutable std::mutex mu_;
  std::deque<Slot> slots_;
  std::atomic<std::uint64_t> count_{0};
};

namespace detail {

/// Per-thread backend state, keyed by dense tid. deque keeps references
/// stable while new threads are spawned mid-run; the mutex only guards the
/// container structure, each slot is owned by the executor running that tid.
template <typename T>
class PerThreadSlots {
 public:
  T& get(ThreadId tid) {
    std::lock_guard<std::mutex> g(mu_);
    while (slots_.size() <= tid) slots_.emplace_back();
    return slots_[tid];
  }

 private:
  std::mutex mu_;
  std::deque<T> slots_;
};

}  // namespace detail

/// Pseudo-variable id used in lock events for the single global lock.
inline constexpr VarId kGlobalLockVar = 0xffffffffu;

/// One of the interchangeable concurrency-control schemes. The scheduler
/// drives exactly one open segment per thread at a time; operations for
/// distinct tids may be called concurrently from distinct executors.
class Backend {
 public:
  Backend(SharedStore& store, CommitBoard& board)
      : store_(store), board_(board) {}
  virtual ~Backend() = default;

  virtual BackendKind kind() const = 0;
  bool serial_only() const { return kind() == BackendKind::Cm; }

  virtual void begin_segment(ThreadId tid,
                             const std::optional<AccessSet>& declared) = 0;
  virtual Value read(ThreadId tid, VarId v) = 0;
  virtual void write(ThreadId tid, VarId v, Value value) = 0;
  virtual void done_with(ThreadId tid, VarId v) { (void)tid, (void)v; }
  virtual void no_more_shared(ThreadId tid) { (void)tid; }

  /// Discards an open segment without committing (failed wait-predicate
  /// poll or a deferred lazy acquisition). Releases anything held.
  virtual void cancel_segment(ThreadId tid) = 0;

  /// Finishes the segment: on commit returns the serialization ordinal; the
  /// caller then publishes output/outcome against it via the CommitBoard.
  virtual CommitResult end_segment(ThreadId tid) = 0;

  std::vector<LockEvent> lock_events() const {
    std::lock_guard<std::mutex> g(eventMu_);
    return events_;
  }

 protected:
  std::uint64_t next_segment_seq() {
    return segSeq_.fetch_add(1, std::memory_order_relaxed);
  }
  void log_event(ThreadId tid, std::uint64_t seq, LockEvent::Kind kind,
                 VarId v) {
    std::lock_guard<std::mutex> g(eventMu_);
    events_.push_back(LockEvent{tid, seq, kind, v});
  }

  SharedStore& store_;
  CommitBoard& board_;

 private:
  mutable std::mutex eventMu_;
  std::vector<LockEvent> events_;
  std::atomic<std::uint64_t> segSeq_{0};
};

/// Serial cooperative baseline: one executor, direct store access.
class CmBackend final : public Backend {
 public:
  using Backend::Backend;
  BackendKind kind() const override { return BackendKind::Cm; }

  void begin_segment(ThreadId tid, const std::optional<AccessSet>&) override {
    Seg& s = segs_.get(tid);
    s.writes.clear();
    s.open = true;
  }

  Value read(ThreadId tid, VarId v) override {
    (void)tid;
    return store_.load(v);
  }

  void write(ThreadId tid, VarId v, Value value) override {
    Seg& s = segs_.get(tid);
    store_.store_value(v, value);
    s.writes.push_back(v);
  }

  void cancel_segment(ThreadId tid) override { segs_.get(tid).open = false; }

  CommitResult end_segment(ThreadId tid) override {
    Seg& s = segs_.get(tid);
    for (VarId v : s.writes) store_.bump_version(v);
    s.open = false;
    return CommitResult::commit(board_.acquire(tid));
  }

 private:
  struct Seg {
    std::vector<VarId> writes;
    bool open = false;
  };
  detail::PerThreadSlots<Seg> segs_;
};

/// One lock for everything. A yield amounts to releasing and reacquiring the
/// global lock. The lazy variant defers acquisition to the first shared
/// access of the segment; if the lock is busy at that point the segment is
/// deferred (rolled back and retried later) instead of parking the executor.
/// Both variants honor no_more_shared() by committing and releasing early.
class GlobalBackend final : public Backend {
 public:
  GlobalBackend(SharedStore& store, CommitBoard& board, bool lazy)
      : Backend(store, board), lazy_(lazy) {}

  BackendKind kind() const override {
    return lazy_ ? BackendKind::GlobalLazy : BackendKind::Global;
  }

  void begin_segment(ThreadId tid, const std::optional<AccessSet>&) override {
    Seg& s = segs_.get(tid);
    s = Seg{};
    s.seq = next_segment_seq();
    s.open = true;
    if (!lazy_) {
      gmu_.lock();
      s.held = true;
      log_event(tid, s.seq, LockEvent::Kind::Acquire, kGlobalLockVar);
    }
  }

  Value read(ThreadId tid, VarId v) override {
    ensure_lock(tid, segs_.get(tid));
    return store_.load(v);
  }

  void write(ThreadId tid, VarId v, Value value) override {
    Seg& s = segs_.get(tid);
    ensure_lock(tid, s);
    store_.store_value(v, value);
    s.writes.push_back(v);
  }

  void no_more_shared(ThreadId tid) override {
    Seg& s = segs_.get(tid);
    if (s.released) return;  // idempotent
    s.released = true;
    if (s.held) {
      // Serialization point: all shared access is over, publish and stamp
      // before letting anyone else in.
      for (VarId v : s.writes) store_.bump_version(v);
      s.pendingOrdinal = board_.acquire(tid);
      log_event(tid, s.seq, LockEvent::Kind::Release, kGlobalLockVar);
      gmu_.unlock();
      s.held = false;
    }
  }

  void cancel_segment(ThreadId tid) override {
    Seg& s = segs_.get(tid);
    if (s.held) {
      log_event(tid, s.seq, LockEvent::Kind::Release, kGlobalLockVar);
      gmu_.unlock();
    }
    s = Seg{};
  }

  CommitResult end_segment(ThreadId tid) override {
    Seg& s = segs_.get(tid);
    std::uint64_t ordinal;
    if (s.pendingOrdinal) {
      ordinal = *s.pendingOrdinal;
    } else {
      for (VarId v : s.writes) store_.bump_version(v);
      ordinal = board_.acquire(tid);
      if (s.held) {
        log_event(tid, s.seq, LockEvent::Kind::Release, kGlobalLockVar);
        gmu_.unlock();
      }
    }
    s = Seg{};
    return CommitResult::commit(ordinal);
  }

 private:
  struct Seg {
    bool open = false;
    bool held = false;
    bool released = false;
    std::uint64_t seq = 0;
    std::vector<VarId> writes;
    std::optional<std::uint64_t> pendingOrdinal;
  };

  void ensure_lock(ThreadId tid, Seg& s) {
    if (s.released) {
      throw AccessAfterRelease(
          "shared access after no_more_shared in the same segment");
    }
    if (s.held) return;
    if (lazy_) {
      if (!gmu_.try_lock()) throw detail::DeferSegment{};
    } else {
      gmu_.lock();  // non-lazy always holds from begin; only reached if open
    }
    s.held = true;
    log_event(tid, s.seq, LockEvent::Kind::Acquire, kGlobalLockVar);
  }

  bool lazy_;
  std::mutex gmu_;
  detail::PerThreadSlots<Seg> segs_;
};

/// Per-variable locks with a declared access set per segment. All declared
/// locks are acquired up front in ascending VarId order (the global lock
/// order), which is deadlock-free and makes the two-phase rule hold by
/// construction. done_with(v) releases v early; the serialization timestamp
/// is taken at the first release. Actual accesses are checked against the
/// declaration at runtime.
class TwoPhaseBackend final : public Backend {
 public:
  using Backend::Backend;
  BackendKind kind() const override { return BackendKind::TwoPhase; }

  void begin_segment(ThreadId tid,
                     const std::optional<AccessSet>& declared) override {
    if (!declared) {
      throw MissingAccessSet(
          "2pl backend needs a declared access set for every segment");
    }
    Seg& s = segs_.get(tid);
    s = Seg{};
    s.seq = next_segment_seq();
    s.declared = *declared;
    s.open = true;
    for (VarId v : s.declared.vars()) {  // ascending
      store_.cell(v).mtx.lock();
      log_event(tid, s.seq, LockEvent::Kind::Acquire, v);
      s.held.push_back(v);
    }
  }

  Value read(ThreadId tid, VarId v) override {
    check_access(segs_.get(tid), v);
    return store_.load(v);
  }

  void write(ThreadId tid, VarId v, Value value) override {
    Seg& s = segs_.get(tid);
    check_access(s, v);
    store_.store_value(v, value);
    s.writes.push_back(v);
  }

  void done_with(ThreadId tid, VarId v) override {
    Seg& s = segs_.get(tid);
    if (!s.declared.contains(v)) {
      throw UndeclaredAccess("done_with on undeclared variable " +
                             std::to_string(v));
    }
    if (is_released(s, v)) return;  // idempotent
    if (!s.stamped) {
      // First release: every declared lock is already held, so this is the
      // serialization point.
      s.pendingOrdinal = board_.acquire(tid);
      s.stamped = true;
    }
    release_one(tid, s, v);
  }

  void cancel_segment(ThreadId tid) override {
    Seg& s = segs_.get(tid);
    for (VarId v : s.held) {
      log_event(tid, s.seq, LockEvent::Kind::Release, v);
      store_.cell(v).mtx.unlock();
    }
    s = Seg{};
  }

  CommitResult end_segment(ThreadId tid) override {
    Seg& s = segs_.get(tid);
    std::uint64_t ordinal =
        s.stamped ? *s.pendingOrdinal : board_.acquire(tid);
    std::vector<VarId> held = s.held;
    for (VarId v : held) release_one(tid, s, v);
    s = Seg{};
    return CommitResult::commit(ordinal);
  }

 private:
  struct Seg {
    bool open = false;
    bool stamped = false;
    std::uint64_t seq = 0;
    AccessSet declared;
    std::vector<VarId> held;      // still-held declared vars
    std::vector<VarId> released;  // released early via done_with
    std::vector<VarId> writes;
    std::optional<std::uint64_t> pendingOrdinal;
  };

  static bool is_released(const Seg& s, VarId v) {
    for (VarId r : s.released) {
      if (r == v) return true;
    }
    return false;
  }

  void check_access(Seg& s, VarId v) const {
    if (!s.declared.contains(v)) {
      throw UndeclaredAccess("access to variable " + std::to_string(v) +
                             " outside the declared set");
    }
    if (is_released(s, v)) {
      throw AccessAfterRelease("access to variable " + std::to_string(v) +
                               " after done_with");
    }
  }

  void release_one(ThreadId tid, Seg& s, VarId v) {
    bool written = false;
    for (VarId w : s.writes) written |= (w == v);
    if (written) store_.bump_version(v);
    log_event(tid, s.seq, LockEvent::Kind::Release, v);
    store_.cell(v).mtx.unlock();
    s.held.erase(std::find(s.held.begin(), s.held.end(), v));
    s.released.push_back(v);
  }

  detail::PerThreadSlots<Seg> segs_;
};

/// Write-back transactional backend: reads record (var, version observed),
/// writes are buffered and invisible until commit. Commit locks the write
/// set in ascending order, validates the read set against current versions,
/// publishes, stamps, and releases with bumped versions. Validation failure
/// aborts with the first conflicting variable.
class StmBackend final : public Backend {
 public:
  using Backend::Backend;
  BackendKind kind() const override { return BackendKind::Stm; }

  void begin_segment(ThreadId tid, const std::optional<AccessSet>&) override {
    Seg& s = segs_.get(tid);
    s = Seg{};
    s.seq = next_segment_seq();
    s.open = true;
  }

  Value read(ThreadId tid, VarId v) override {
    Seg& s = segs_.get(tid);
    auto it = s.writeSet.find(v);
    if (it != s.writeSet.end()) return it->second;  // read-your-writes
    auto [value, version] = store_.read_consistent(v);
    s.readSet.emplace_back(v, version);
    return value;
  }

  void write(ThreadId tid, VarId v, Value value) override {
    segs_.get(tid).writeSet[v] = value;
  }

  void cancel_segment(ThreadId tid) override { segs_.get(tid) = Seg{}; }

  CommitResult end_segment(ThreadId tid) override {
    Seg& s = segs_.get(tid);
    // Commit locks, ascending VarId order (std::map iterates sorted).
    std::map<VarId, std::uint64_t> lockedVersion;
    for (const auto& [v, value] : s.writeSet) {
      lockedVersion[v] = store_.lock_verlock(v);
      log_event(tid, s.seq, LockEvent::Kind::Acquire, v);
    }
    // Validate every read against the version it observed.
    std::optional<VarId> conflict;
    for (const auto& [v, versionObserved] : s.readSet) {
      auto locked = lockedVersion.find(v);
      if (locked != lockedVersion.end()) {
        if (locked->second != versionObserved) {
          conflict = v;
          break;
        }
        continue;
      }
      std::uint64_t w =
          store_.cell(v).verlock.load(std::memory_order_acquire);
      if ((w & 1) || (w >> 1) != versionObserved) {
        conflict = v;
        break;
      }
    }
    if (conflict) {
      for (const auto& [v, oldVersion] : lockedVersion) {
        log_event(tid, s.seq, LockEvent::Kind::Release, v);
        store_.unlock_verlock(v, oldVersion);
      }
      VarId c = *conflict;
      s = Seg{};
      return CommitResult::abort(c);
    }
    for (const auto& [v, value] : s.writeSet) store_.store_value(v, value);
    std::uint64_t ordinal = board_.acquire(tid);
    for (const auto& [v, oldVersion] : lockedVersion) {
      log_event(tid, s.seq, LockEvent::Kind::Release, v);
      store_.unlock_verlock(v, oldVersion + 1);
    }
    s = Seg{};
    return CommitResult::commit(ordinal);
  }

 private:
  struct Seg {
    bool open = false;
    std::uint64_t seq = 0;
    std::vector<std::pair<VarId, std::uint64_t>> readSet;
    std::map<VarId, Value> writeSet;
  };
  detail::PerThreadSlots<Seg> segs_;
};

inline std::unique_ptr<Backend> make_backend(BackendKind kind,
                                             SharedStore& store,
                                             CommitBoard& board) {
  switch (kind) {
    case BackendKind::Cm:
      return std::make_unique<CmBackend>(store, board);
    case BackendKind::Global:
      return std::make_unique<GlobalBackend>(store, board, false);
    case BackendKind::GlobalLazy:
      return std::make_unique<GlobalBackend>(store, board, true);
    case BackendKind::TwoPhase:
      return std::make_unique<TwoPhaseBackend>(store, board);
    case BackendKind::Stm:
      return std::make_unique<StmBackend>(store, board);
  }
  throw ConfigError("unknown backend");
}

}  // namespace ocm

#endif  // OCM_BACKEND_HPP
