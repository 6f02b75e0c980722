#ifndef OCM_TYPES_HPP
#define OCM_TYPES_HPP

#include <algorithm>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace ocm {

/// Shared variables are identified by dense creation-order ids; the id order
/// doubles as the global lock order used by the lock-based backends.
using VarId = std::uint32_t;

/// Threads are identified by dense spawn-order ids.
using ThreadId = std::uint32_t;

/// All shared state is integer-valued.
using Value = std::int64_t;

/// Per-thread local state: a flat, canonically-serializable blob. Programs
/// define their own layout. The runtime checkpoints and restores it wholesale.
using Locals = std::vector<Value>;

/// Program-local id of a registered wait predicate.
using PredicateId = int;

/// What a segment ended with.
struct SegmentOutcome {
  enum class Kind { Yield, YieldUntil, Done };

  Kind kind = Kind::Yield;
  PredicateId predicate = -1;  // YieldUntil only
  std::string label;           // names the yield point, lands in the trace

  static SegmentOutcome yield(std::string label = "yield") {
    return {Kind::Yield, -1, std::move(label)};
  }
  static SegmentOutcome yield_until(PredicateId pred, std::string label) {
    return {Kind::YieldUntil, pred, std::move(label)};
  }
  static SegmentOutcome done(std::string label = "done") {
    return {Kind::Done, -1, std::move(label)};
  }
};

/// Backend verdict on a finished segment.
struct CommitResult {
  bool committed = false;
  std::uint64_t ordinal = 0;  // dense global commit order, valid if committed
  VarId conflict = 0;         // first conflicting variable, valid if aborted

  static CommitResult commit(std::uint64_t ordinal) {
    return {true, ordinal, 0};
  }
  static CommitResult abort(VarId conflict) { return {false, 0, conflict}; }
};

/// Sorted duplicate-free set of variables a segment declares it may touch.
class AccessSet {
 public:
  AccessSet() = default;
  AccessSet(std::initializer_list<VarId> vars) : vars_(vars) { canon(); }
  explicit AccessSet(std::vector<VarId> vars) : vars_(std::move(vars)) {
    canon();
  }

  bool contains(VarId v) const {
    return std::binary_search(vars_.begin(), vars_.end(), v);
  }
  const std::vector<VarId>& vars() const { return vars_; }
  std::size_t size() const { return vars_.size(); }

 private:
  void canon() {
    std::sort(vars_.begin(), vars_.end());
    vars_.erase(std::unique(vars_.begin(), vars_.end()), vars_.end());
  }
  std::vector<VarId> vars_;
};

/// One entry of the backend's internal lock event log; used to check the
/// two-phase and ascending-order properties from the outside.
struct LockEvent {
  enum class Kind { Acquire, Release };
  ThreadId tid = 0;
  std::uint64_t segmentSeq = 0;  // per-run dense id of the segment attempt
  Kind kind = Kind::Acquire;
  VarId var = 0;
};

/// FNV-1a, used to digest observable logs into trace manifests.
inline std::uint64_t fnv1a(std::uint64_t h, const std::string& s) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  h ^= 0x0a;  // line separator
  h *= 0x100000001b3ULL;
  return h;
}

inline std::uint64_t log_digest(const std::vector<std::string>& lines) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& l : lines) h = fnv1a(h, l);
  return h;
}

}  // namespace ocm

#endif  // OCM_TYPES_HPP
