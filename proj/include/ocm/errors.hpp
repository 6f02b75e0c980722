#ifndef OCM_ERRORS_HPP
#define OCM_ERRORS_HPP

#include <cstdint>
#include <stdexcept>
#include <string>

namespace ocm {

/// Base class for all errors raised by the runtime, backends, trace IO and
/// the schedule checker.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Invalid run configuration (e.g. multiple workers on the serial backend).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// create_shared() after execution has started.
class CalledDuringRun : public Error {
 public:
  using Error::Error;
};

/// The two-phase-locking backend requires a declared access set per segment.
class MissingAccessSet : public Error {
 public:
  using Error::Error;
};

/// A segment touched a variable outside its declared access set.
class UndeclaredAccess : public Error {
 public:
  using Error::Error;
};

/// A segment touched a variable after asserting it was done with it (or after
/// asserting it needed no more shared data).
class AccessAfterRelease : public Error {
 public:
  using Error::Error;
};

/// A wait predicate attempted a write, print or spawn.
class PredicateSideEffect : public Error {
 public:
  using Error::Error;
};

/// A program-level safety check failed (e.g. a philosopher saw a taken fork
/// inside a segment whose wait predicate guaranteed it was free).
class InvariantViolation : public Error {
 public:
  using Error::Error;
};

/// Trace file could not be parsed; carries the 1-based offending line.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(what + " (line " + std::to_string(line) + ")"), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Replay could not follow the trace: the named thread was not eligible or
/// its segment ordinal did not match. Carries the ordinal of the bad record.
class TraceDivergence : public Error {
 public:
  TraceDivergence(const std::string& what, std::uint64_t ordinal)
      : Error(what + " (ordinal " + std::to_string(ordinal) + ")"),
        ordinal_(ordinal) {}
  std::uint64_t ordinal() const { return ordinal_; }

 private:
  std::uint64_t ordinal_;
};

/// The exhaustive checker hit its state or commit budget.
class LimitExceeded : public Error {
 public:
  using Error::Error;
};

namespace detail {

// Control-flow signal, not an error: the lazy-global backend failed to get
// the lock on the segment's first shared access. The scheduler rolls the
// thread back to its checkpoint and retries it on a later pass, which is
// indistinguishable from the thread not having been scheduled yet.
struct DeferSegment {};

}  // namespace detail

}  // namespace ocm

#endif  // OCM_ERRORS_HPP
