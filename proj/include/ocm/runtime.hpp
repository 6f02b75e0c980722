#ifndef OCM_RUNTIME_HPP
#define OCM_RUNTIME_HPP

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "ocm/backend.hpp"
#include "ocm/errors.hpp"
#include "ocm/prng.hpp"
#include "ocm/program.hpp"
#include "ocm/store.hpp"
#include "ocm/trace.hpp"
#include "ocm/types.hpp"

namespace ocm {

enum class ThreadState { Ready, Running, Waiting, Done };

/// One cooperative thread: program handle, locals blob, the checkpoint taken
/// at every segment start (what makes rollback and re-execution possible),
/// and scheduling bookkeeping.
struct ThreadRecord {
  ThreadId tid = 0;
  std::shared_ptr<const Program> program;
  std::string name;
  Locals locals;
  Locals checkpoint;
  std::uint64_t rng = 0;
  std::uint64_t rngCheckpoint = 0;
  ThreadState state = ThreadState::Ready;
  PredicateId waitPred = -1;
  std::int64_t polledAt = -1;  // commit count at the last false poll
  std::uint64_t segOrdinal = 0;
};

struct ExecutionResult {
  std::map<VarId, Value> finalShared;
  std::vector<std::string> observableLog;
  Trace trace;
  bool stuck = false;
  std::uint64_t commits = 0;
  std::uint64_t aborts = 0;
  std::uint64_t deferrals = 0;
  double wallMillis = 0.0;
  std::vector<ThreadId> dispatchLog;

  /// Observable-equality: what CM serializability talks about.
  bool same_observable(const ExecutionResult& o) const {
    return finalShared == o.finalShared && observableLog == o.observableLog &&
           stuck == o.stuck;
  }
};

struct RunConfig {
  BackendKind backend = BackendKind::Cm;
  int workers = 1;
  std::uint64_t seed = 0;
  bool enableDelays = false;
  /// When set, the scheduler follows this exact commit sequence instead of
  /// round-robin (serial replay). Requires workers == 1.
  const std::vector<TraceRecord>* replayScript = nullptr;
  /// Called after every commit with a full store snapshot (workers == 1
  /// only); used by invariant monitors during replay.
  std::function<void(const std::vector<Value>&, const TraceRecord&)>
      commitObserver;
  /// Called after every abort with the restored thread record.
  std::function<void(const ThreadRecord&, VarId)> abortObserver;
};

/// Executes registered cooperative threads over a shared store under the
/// configured concurrency-control backend, dispatching ready threads to a
/// pool of workers in strict round-robin order. Every observable outcome is
/// reproducible by some serial cooperative schedule; the recorded trace
/// names one such schedule.
class Runtime {
 public:
  explicit Runtime(RunConfig cfg) : cfg_(std::move(cfg)) {
    backend_ = make_backend(cfg_.backend, store_, board_);
  }

  VarId create_shared(Value initial) {
    if (phase_ != Phase::Setup) {
      throw CalledDuringRun("create_shared after run() started");
    }
    return store_.create(initial);
  }

  ThreadId spawn(std::shared_ptr<const Program> program, Locals locals,
                 std::string name = "") {
    if (phase_ == Phase::Running) {
      throw Error("spawn from outside a segment during a run");
    }
    std::lock_guard<std::mutex> g(mu_);
    return add_thread_locked(std::move(program), std::move(locals),
                             std::move(name));
  }

  /// Identifies the registered program in the recorded trace manifest.
  void set_manifest(std::string programName, std::map<std::string, Value> params) {
    manifestProgram_ = std::move(programName);
    manifestParams_ = std::move(params);
  }

  SharedStore& store() { return store_; }
  Backend& backend() { return *backend_; }
  std::size_t thread_count() const { return threads_.size(); }
  const ThreadRecord& thread(ThreadId tid) const { return threads_[tid]; }

  ExecutionResult run() {
    if (phase_ != Phase::Setup) throw ConfigError("run() may be called once");
    if (threads_.empty()) throw ConfigError("run() with no threads spawned");
    if (cfg_.workers < 1) throw ConfigError("workers must be >= 1");
    if (backend_->serial_only() && cfg_.workers != 1) {
      throw ConfigError("the cm backend is serial: workers must be 1");
    }
    if (cfg_.replayScript && cfg_.workers != 1) {
      throw ConfigError("trace replay is serial: workers must be 1");
    }
    if (cfg_.commitObserver && cfg_.workers != 1) {
      throw ConfigError("commit observers require workers == 1");
    }

    initialShared_ = store_.snapshot();
    build_dispatch_order();
    phase_ = Phase::Running;

    auto t0 = std::chrono::steady_clock::now();
    if (cfg_.workers == 1) {
      worker_loop();
    } else {
      std::vector<std::thread> pool;
      pool.reserve(cfg_.workers);
      for (int i = 0; i < cfg_.workers; ++i) {
        pool.emplace_back([this] { worker_loop(); });
      }
      for (auto& th : pool) th.join();
    }
    auto t1 = std::chrono::steady_clock::now();
    phase_ = Phase::Finished;

    if (error_) std::rethrow_exception(error_);

    ExecutionResult res;
    res.finalShared = store_.snapshot_map();
    res.observableLog = board_.observable_log();
    res.stuck = stuck_;
    res.commits = board_.count();
    res.aborts = aborts_.load();
    res.deferrals = deferrals_.load();
    res.wallMillis =
        std::chrono::duration<double, std::milli>(t1 - t0).count();
    res.dispatchLog = dispatchLog_;
    res.trace.records = board_.records();
    res.trace.manifest = make_manifest(res);
    return res;
  }

 private:
  enum class Phase { Setup, Running, Finished };

  class Ctx;
  friend class Ctx;

  struct PendingSpawn {
    std::shared_ptr<const Program> program;
    Locals locals;
    std::string name;
  };

  /// Backend-mediated segment context; buffers output and spawns.
  class Ctx final : public SegmentContext {
   public:
    Ctx(Runtime& rt, ThreadRecord& t) : rt_(rt), t_(t) {}

    Value read(VarId v) override {
      rt_.check_var(v);
      return rt_.backend_->read(t_.tid, v);
    }
    void write(VarId v, Value value) override {
      rt_.check_var(v);
      rt_.backend_->write(t_.tid, v, value);
    }
    void print(std::string line) override { lines.push_back(std::move(line)); }
    ThreadId spawn(std::shared_ptr<const Program> program, Locals locals,
                   std::string name) override {
      spawns.push_back(
          PendingSpawn{std::move(program), std::move(locals), std::move(name)});
      // Provisional: exact under the serial backend where commit order is
      // call order; parallel commits may assign a different dense id.
      return static_cast<ThreadId>(rt_.threadCount_.load() + spawns.size() - 1);
    }
    void done_with(VarId v) override {
      rt_.check_var(v);
      rt_.backend_->done_with(t_.tid, v);
    }
    void no_more_shared() override { rt_.backend_->no_more_shared(t_.tid); }
    std::uint64_t rand_u64() override {
      SplitMix64 g(t_.rng);
      std::uint64_t v = g.next();
      t_.rng = g.state;
      return v;
    }
    void sleep_micros(std::int64_t micros) override {
      if (rt_.cfg_.enableDelays && micros > 0) {
        std::this_thread::sleep_for(std::chrono::microseconds(micros));
      }
    }

    std::vector<std::string> lines;
    std::vector<PendingSpawn> spawns;

   private:
    Runtime& rt_;
    ThreadRecord& t_;
  };

  void check_var(VarId v) const {
    if (v >= store_.size()) {
      throw Error("unknown shared variable " + std::to_string(v));
    }
  }

  ThreadId add_thread_locked(std::shared_ptr<const Program> program,
                             Locals locals, std::string name) {
    ThreadId tid = static_cast<ThreadId>(threads_.size());
    ThreadRecord& t = threads_.emplace_back();
    t.tid = tid;
    t.program = std::move(program);
    t.name = std::move(name);
    t.locals = std::move(locals);
    t.rng = thread_seed(cfg_.seed, tid);
    threadCount_.store(threads_.size());
    if (phase_ == Phase::Running) order_.push_back(tid);
    return tid;
  }

  void build_dispatch_order() {
    order_.clear();
    for (ThreadId tid = 0; tid < threads_.size(); ++tid) order_.push_back(tid);
    // Seeded rotation diversifies which serial schedule the round-robin
    // realizes across runs while keeping the per-pass fairness bound intact.
    if (order_.size() > 1) {
      SplitMix64 g(cfg_.seed * 0x9e3779b97f4a7c15ULL + 1);
      std::rotate(order_.begin(),
                  order_.begin() + g.next_below(order_.size()), order_.end());
    }
  }

  // ---- scheduler ----

  void worker_loop() {
    if (cfg_.replayScript) {
      replay_loop();
      return;
    }
    std::unique_lock<std::mutex> lk(mu_);
    while (!stop_) {
      ThreadRecord& cand = threads_[order_[cursor_]];
      std::int64_t commits = static_cast<std::int64_t>(board_.count());
      if (cand.state == ThreadState::Ready ||
          (cand.state == ThreadState::Waiting && cand.polledAt < commits)) {
        bool poll = cand.state == ThreadState::Waiting;
        cand.state = ThreadState::Running;
        ++runningCount_;
        dispatchLog_.push_back(cand.tid);
        advance_cursor();
        skips_ = 0;
        lk.unlock();
        execute(cand, poll);
        lk.lock();
        continue;
      }
      if (cand.state == ThreadState::Running) {
        // Strict dispatch order: the slot belongs to this thread until its
        // in-flight segment settles.
        cv_.wait(lk);
        skips_ = 0;
        continue;
      }
      // Done, or Waiting with no commit since its last false poll.
      advance_cursor();
      if (++skips_ >= order_.size()) {
        if (runningCount_ == 0) {
          decide_terminal_locked();
          return;
        }
        cv_.wait(lk);
        skips_ = 0;
      }
    }
  }

  void advance_cursor() { cursor_ = (cursor_ + 1) % order_.size(); }

  /// Reached when a full pass found nothing to dispatch and nothing is in
  /// flight: either everything finished, or the remaining threads all wait
  /// on predicates that evaluated false against the latest committed state.
  void decide_terminal_locked() {
    bool anyLive = false;
    for (const ThreadRecord& t : threads_) {
      if (t.state != ThreadState::Done) anyLive = true;
    }
    stuck_ = anyLive;
    stop_ = true;
    cv_.notify_all();
  }

  void replay_loop() {
    const std::vector<TraceRecord>& script = *cfg_.replayScript;
    for (const TraceRecord& rec : script) {
      if (rec.tid >= threads_.size()) {
        throw TraceDivergence("trace names unknown thread", rec.ordinal);
      }
      ThreadRecord& t = threads_[rec.tid];
      if (t.state == ThreadState::Done) {
        throw TraceDivergence("trace names a finished thread", rec.ordinal);
      }
      if (t.segOrdinal != rec.segOrdinal) {
        throw TraceDivergence("segment ordinal mismatch", rec.ordinal);
      }
      bool poll = t.state == ThreadState::Waiting;
      t.state = ThreadState::Running;
      ++runningCount_;
      dispatchLog_.push_back(t.tid);
      execute(t, poll, &rec);
      if (error_) std::rethrow_exception(error_);
      if (t.state == ThreadState::Waiting && t.polledAt >= 0) {
        // The poll came back false: the named thread was not eligible.
        throw TraceDivergence("named thread's wait predicate is false",
                              rec.ordinal);
      }
    }
    std::lock_guard<std::mutex> g(mu_);
    decide_terminal_locked();
  }

  void execute(ThreadRecord& t, bool poll, const TraceRecord* expect = nullptr) {
    std::int64_t snap = static_cast<std::int64_t>(board_.count());
    try {
      std::optional<AccessSet> declared;
      if (cfg_.backend == BackendKind::TwoPhase) {
        declared = t.program->next_access(t.locals, poll ? t.waitPred : -1);
      }
      backend_->begin_segment(t.tid, declared);
      Ctx ctx(*this, t);
      if (poll) {
        PredicateView view(ctx);
        bool holds = t.program->predicate(t.waitPred, t.locals, view);
        if (!holds) {
          backend_->cancel_segment(t.tid);
          settle(t, [&] {
            t.state = ThreadState::Waiting;
            t.polledAt = snap;
          });
          return;
        }
      }
      t.checkpoint = t.locals;
      t.rngCheckpoint = t.rng;
      SegmentOutcome outcome = t.program->step(t.locals, ctx);
      CommitResult res = backend_->end_segment(t.tid);
      if (res.committed) {
        if (expect && res.ordinal != expect->ordinal) {
          throw TraceDivergence("commit order diverged from trace",
                                expect->ordinal);
        }
        std::string label = outcome.label;
        if (expect && label != expect->label) {
          throw TraceDivergence("segment label diverged from trace",
                                expect->ordinal);
        }
        board_.finalize(res.ordinal, t.segOrdinal, label, std::move(ctx.lines));
        settle(t, [&] {
          ++t.segOrdinal;
          for (PendingSpawn& ps : ctx.spawns) {
            add_thread_locked(std::move(ps.program), std::move(ps.locals),
                              std::move(ps.name));
          }
          switch (outcome.kind) {
            case SegmentOutcome::Kind::Yield:
              t.state = ThreadState::Ready;
              t.waitPred = -1;
              break;
            case SegmentOutcome::Kind::YieldUntil:
              t.state = ThreadState::Waiting;
              t.waitPred = outcome.predicate;
              t.polledAt = -1;
              break;
            case SegmentOutcome::Kind::Done:
              t.state = ThreadState::Done;
              t.waitPred = -1;
              break;
          }
        });
        if (cfg_.commitObserver) {
          TraceRecord rec{res.ordinal, t.tid, t.segOrdinal - 1, label};
          cfg_.commitObserver(store_.snapshot(), rec);
        }
      } else {
        // Rollback: locals and random stream back to the segment start;
        // buffered output and spawns vanish with the context.
        t.locals = t.checkpoint;
        t.rng = t.rngCheckpoint;
        aborts_.fetch_add(1);
        if (cfg_.abortObserver) cfg_.abortObserver(t, res.conflict);
        settle(t, [&] {
          if (t.waitPred >= 0) {
            // The segment was entered through a wait: the wait must be
            // re-established so the retry re-checks the predicate.
            t.state = ThreadState::Waiting;
            t.polledAt = -1;
          } else {
            t.state = ThreadState::Ready;
          }
        });
      }
    } catch (const detail::DeferSegment&) {
      backend_->cancel_segment(t.tid);
      t.locals = t.checkpoint;
      t.rng = t.rngCheckpoint;
      deferrals_.fetch_add(1);
      settle(t, [&] {
        if (t.waitPred >= 0) {
          t.state = ThreadState::Waiting;  // polledAt untouched: poll again
        } else {
          t.state = ThreadState::Ready;
        }
      });
    } catch (...) {
      try {
        backend_->cancel_segment(t.tid);
      } catch (...) {
      }
      std::lock_guard<std::mutex> g(mu_);
      if (!error_) error_ = std::current_exception();
      --runningCount_;
      stop_ = true;
      cv_.notify_all();
    }
  }

  template <typename F>
  void settle(ThreadRecord& t, F&& update) {
    std::lock_guard<std::mutex> g(mu_);
    update();
    (void)t;
    --runningCount_;
    cv_.notify_all();
  }

  TraceManifest make_manifest(const ExecutionResult& res) const {
    TraceManifest m;
    m.programName = manifestProgram_;
    m.params = manifestParams_;
    m.seed = cfg_.seed;
    m.backend = backend_name(cfg_.backend);
    m.workers = cfg_.workers;
    m.initialShared = initialShared_;
    for (const ThreadRecord& t : threads_) {
      m.threadNames.push_back(t.name.empty() ? thread_letter(t.tid) : t.name);
    }
    m.stuck = res.stuck;
    m.finalShared = store_.snapshot();
    m.logLines = res.observableLog.size();
    m.logHash = log_digest(res.observableLog);
    m.commits = res.commits;
    return m;
  }

  RunConfig cfg_;
  SharedStore store_;
  CommitBoard board_;
  std::unique_ptr<Backend> backend_;

  std::deque<ThreadRecord> threads_;
  std::atomic<std::size_t> threadCount_{0};
  std::vector<ThreadId> order_;
  std::size_t cursor_ = 0;
  std::size_t skips_ = 0;
  int runningCount_ = 0;
  bool stop_ = false;
  bool stuck_ = false;
  std::vector<ThreadId> dispatchLog_;
  std::exception_ptr error_;
  std::mutex mu_;
  std::condition_variable cv_;

  Phase phase_ = Phase::Setup;
  std::vector<Value> initialShared_;
  std::string manifestProgram_;
  std::map<std::string, Value> manifestParams_;

  std::atomic<std::uint64_t> aborts_{0};
  std::atomic<std::uint64_t> deferrals_{0};
};

/// Evaluates predicates and pure reads against a plain value snapshot.
class SnapshotContext final : public SegmentContext {
 public:
  explicit SnapshotContext(const std::vector<Value>& values)
      : values_(values) {}

  Value read(VarId v) override {
    if (v >= values_.size()) {
      throw Error("unknown shared variable " + std::to_string(v));
    }
    return values_[v];
  }
  void write(VarId, Value) override {
    throw PredicateSideEffect("write through a snapshot view");
  }
  void print(std::string) override {
    throw PredicateSideEffect("print through a snapshot view");
  }
  ThreadId spawn(std::shared_ptr<const Program>, Locals, std::string) override {
    throw PredicateSideEffect("spawn through a snapshot view");
  }
  std::uint64_t rand_u64() override {
    throw PredicateSideEffect("randomness through a snapshot view");
  }

 private:
  const std::vector<Value>& values_;
};

}  // namespace ocm

#endif  // OCM_RUNTIME_HPP
