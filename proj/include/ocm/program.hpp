#ifndef OCM_PROGRAM_HPP
#define OCM_PROGRAM_HPP

#include <cstdint>
#include <memory>
#include <optional>
#include <string>

#include "ocm/errors.hpp"
#include "ocm/types.hpp"

namespace ocm {

class Program;

/// The one and only path from a running segment to shared state. All reads
/// and writes are mediated by the configured backend; output and spawns are
/// buffered and published only if the segment commits.
class SegmentContext {
 public:
  virtual ~SegmentContext() = default;

  virtual Value read(VarId v) = 0;
  virtual void write(VarId v, Value value) = 0;

  /// Buffered output line, published in commit order.
  virtual void print(std::string line) = 0;

  /// Buffered spawn, applied at commit. The returned id is provisional: it
  /// is only guaranteed to be the thread's final id under the serial
  /// backend, where commit order equals call order.
  virtual ThreadId spawn(std::shared_ptr<const Program> program, Locals locals,
                         std::string name = "") = 0;

  /// Asserts this segment will not touch v again; the ordered-locking
  /// backend releases v's lock immediately, everything else ignores it.
  virtual void done_with(VarId v) {}

  /// Asserts this segment will perform no further shared access; the
  /// global-lock backends release the global lock ahead of the yield.
  virtual void no_more_shared() {}

  /// Per-thread deterministic random stream. The generator state is
  /// checkpointed with the locals, so aborted segments replay identically.
  virtual std::uint64_t rand_u64() = 0;
  std::uint64_t rand_below(std::uint64_t bound) { return rand_u64() % bound; }

  /// Sleeps only when the run has delays enabled (benchmarking); correctness
  /// runs and replays treat it as zero-duration.
  virtual void sleep_micros(std::int64_t micros) {}
};

/// Read-only view handed to wait predicates. Any attempt to produce an
/// effect is a PredicateSideEffect error.
class PredicateView final : public SegmentContext {
 public:
  explicit PredicateView(SegmentContext& inner) : inner_(inner) {}

  Value read(VarId v) override { return inner_.read(v); }
  void write(VarId, Value) override {
    throw PredicateSideEffect("wait predicate attempted a write");
  }
  void print(std::string) override {
    throw PredicateSideEffect("wait predicate attempted output");
  }
  ThreadId spawn(std::shared_ptr<const Program>, Locals, std::string) override {
    throw PredicateSideEffect("wait predicate attempted a spawn");
  }
  std::uint64_t rand_u64() override {
    throw PredicateSideEffect("wait predicate consumed randomness");
  }

 private:
  SegmentContext& inner_;
};

/// A cooperative program is a step function over a locals blob: each call
/// runs exactly one inter-yield segment and reports how it ended. The call
/// must be a deterministic function of (locals at entry, values returned by
/// ctx.read in order) — that is what makes segments re-executable after a
/// rollback and replayable from a trace.
class Program {
 public:
  virtual ~Program() = default;

  virtual SegmentOutcome step(Locals& locals, SegmentContext& ctx) const = 0;

  /// Evaluates a wait predicate registered by this program. Must be pure:
  /// no locals mutation, no effects, deterministic given the shared view.
  virtual bool predicate(PredicateId id, const Locals& locals,
                         SegmentContext& shared) const {
    (void)id;
    (void)locals;
    (void)shared;
    throw Error("program registered no wait predicates");
  }

  /// Variables the next segment may touch (a superset is fine; the
  /// ordered-locking backend checks actual accesses against it at runtime).
  /// pendingPredicate is the wait predicate that will be re-evaluated at the
  /// start of that segment, or -1 if none. Returning nullopt means the
  /// program does not declare access sets.
  virtual std::optional<AccessSet> next_access(const Locals& locals,
                                               PredicateId pendingPredicate) const {
    (void)locals;
    (void)pendingPredicate;
    return std::nullopt;
  }
};

}  // namespace ocm

#endif  // OCM_PROGRAM_HPP
