#ifndef OCM_TRACE_HPP
#define OCM_TRACE_HPP

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "ocm/errors.hpp"
#include "ocm/types.hpp"

namespace ocm {

/// One committed segment in the global serialization order.
struct TraceRecord {
  std::uint64_t ordinal = 0;
  ThreadId tid = 0;
  std::uint64_t segOrdinal = 0;
  std::string label;

  friend bool operator==(const TraceRecord& a, const TraceRecord& b) {
    return a.ordinal == b.ordinal && a.tid == b.tid &&
           a.segOrdinal == b.segOrdinal && a.label == b.label;
  }
};

/// Everything needed to rebuild the initial state of a run and verify a
/// replay of it: the registered program (by name + parameters + seed), the
/// initial shared values, and a digest of the recorded result.
struct TraceManifest {
  std::string programName;
  std::map<std::string, Value> params;
  std::uint64_t seed = 0;
  std::string backend;
  int workers = 1;
  std::vector<Value> initialShared;
  std::vector<std::string> threadNames;
  // Result digest of the recorded run.
  bool stuck = false;
  std::vector<Value> finalShared;
  std::uint64_t logLines = 0;
  std::uint64_t logHash = 0;
  std::uint64_t commits = 0;

  friend bool operator==(const TraceManifest& a, const TraceManifest& b) {
    return a.programName == b.programName && a.params == b.params &&
           a.seed == b.seed && a.initialShared == b.initialShared &&
           a.threadNames == b.threadNames && a.stuck == b.stuck &&
           a.finalShared == b.finalShared && a.logLines == b.logLines &&
           a.logHash == b.logHash && a.commits == b.commits;
  }
};

struct Trace {
  TraceManifest manifest;
  std::vector<TraceRecord> records;

  friend bool operator==(const Trace& a, const Trace& b) {
    return a.manifest == b.manifest && a.records == b.records;
  }
};

/// Default display name for a thread: A..Z, then T26, T27, ...
inline std::string thread_letter(ThreadId tid) {
  if (tid < 26) return std::string(1, static_cast<char>('A' + tid));
  return "T" + std::to_string(tid);
}

inline std::string thread_display_name(const Trace& t, ThreadId tid) {
  if (tid < t.manifest.threadNames.size() &&
      !t.manifest.threadNames[tid].empty()) {
    return t.manifest.threadNames[tid];
  }
  return thread_letter(tid);
}

/// Human-readable rendering: one line per record,
///   `A->B (at A's `yieldUntil (a == 0);')`
/// where the right-hand side is the thread the schedule moved to next (for
/// the final record: the thread the round-robin would try next). A stuck
/// run gets a trailing ` ... deadlock ...` marker.
inline std::string render(const Trace& t) {
  std::ostringstream out;
  std::size_t nThreads = t.manifest.threadNames.size();
  for (std::size_t i = 0; i < t.records.size(); ++i) {
    const TraceRecord& rec = t.records[i];
    ThreadId to;
    if (i + 1 < t.records.size()) {
      to = t.records[i + 1].tid;
    } else if (nThreads > 0) {
      to = static_cast<ThreadId>((rec.tid + 1) % nThreads);
    } else {
      to = rec.tid;
    }
    std::string from = thread_display_name(t, rec.tid);
    out << from << "->" << thread_display_name(t, to) << " (at " << from
        << "'s `" << rec.label << ";')\n";
  }
  if (t.manifest.stuck && !t.records.empty()) {
    out << " ... deadlock ...\n";
  }
  return out.str();
}

namespace detail {

inline std::string sanitize_label(const std::string& label) {
  std::string out = label;
  for (char& c : out) {
    if (c == '\t' || c == '\n' || c == '\r') c = ' ';
  }
  return out;
}

inline std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream in(line);
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

inline Value parse_int(const std::string& s, std::size_t lineNo) {
  try {
    std::size_t pos = 0;
    Value v = std::stoll(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParseError("expected integer, got '" + s + "'", lineNo);
  }
}

inline std::uint64_t parse_u64(const std::string& s, std::size_t lineNo) {
  try {
    std::size_t pos = 0;
    std::uint64_t v = std::stoull(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParseError("expected unsigned integer, got '" + s + "'", lineNo);
  }
}

}  // namespace detail

/// Line-oriented text format: a manifest header, a `---` separator, then one
/// record per line as `ordinal<TAB>tid<TAB>segOrdinal<TAB>label`.
inline void save(const Trace& t, std::ostream& out) {
  out << "ocm-trace 1\n";
  out << "program " << t.manifest.programName << "\n";
  for (const auto& [k, v] : t.manifest.params) {
    out << "param " << k << " " << v << "\n";
  }
  out << "seed " << t.manifest.seed << "\n";
  out << "backend " << t.manifest.backend << "\n";
  out << "workers " << t.manifest.workers << "\n";
  out << "shared " << t.manifest.initialShared.size();
  for (Value v : t.manifest.initialShared) out << " " << v;
  out << "\n";
  for (ThreadId tid = 0; tid < t.manifest.threadNames.size(); ++tid) {
    const std::string& n = t.manifest.threadNames[tid];
    out << "thread " << tid << " " << (n.empty() ? thread_letter(tid) : n)
        << "\n";
  }
  out << "stuck " << (t.manifest.stuck ? 1 : 0) << "\n";
  out << "final " << t.manifest.finalShared.size();
  for (Value v : t.manifest.finalShared) out << " " << v;
  out << "\n";
  out << "log " << t.manifest.logLines << " " << t.manifest.logHash << "\n";
  out << "commits " << t.manifest.commits << "\n";
  out << "records " << t.records.size() << "\n";
  out << "---\n";
  for (const TraceRecord& rec : t.records) {
    out << rec.ordinal << "\t" << rec.tid << "\t" << rec.segOrdinal << "\t"
        << detail::sanitize_label(rec.label) << "\n";
  }
}

inline void save(const Trace& t, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open trace file for writing: " + path);
  save(t, f);
}

inline Trace load(std::istream& in) {
  Trace t;
  std::string line;
  std::size_t lineNo = 0;
  bool sawMagic = false;
  std::size_t declaredRecords = 0;
  bool sawSeparator = false;

  while (std::getline(in, line)) {
    ++lineNo;
    if (!sawMagic) {
      if (line != "ocm-trace 1") {
        throw ParseError("not an ocm trace file", lineNo);
      }
      sawMagic = true;
      continue;
    }
    if (line == "---") {
      sawSeparator = true;
      break;
    }
    auto tok = detail::split_ws(line);
    if (tok.empty()) throw ParseError("empty header line", lineNo);
    const std::string& key = tok[0];
    if (key == "program" && tok.size() == 2) {
      t.manifest.programName = tok[1];
    } else if (key == "param" && tok.size() == 3) {
      t.manifest.params[tok[1]] = detail::parse_int(tok[2], lineNo);
    } else if (key == "seed" && tok.size() == 2) {
      t.manifest.seed = detail::parse_u64(tok[1], lineNo);
    } else if (key == "backend" && tok.size() == 2) {
      t.manifest.backend = tok[1];
    } else if (key == "workers" && tok.size() == 2) {
      t.manifest.workers = static_cast<int>(detail::parse_int(tok[1], lineNo));
    } else if (key == "shared" && tok.size() >= 2) {
      std::size_t n = detail::parse_u64(tok[1], lineNo);
      if (tok.size() != n + 2) {
        throw ParseError("shared count does not match values", lineNo);
      }
      for (std::size_t i = 0; i < n; ++i) {
        t.manifest.initialShared.push_back(detail::parse_int(tok[2 + i], lineNo));
      }
    } else if (key == "thread" && tok.size() == 3) {
      std::size_t tid = detail::parse_u64(tok[1], lineNo);
      if (tid != t.manifest.threadNames.size()) {
        throw ParseError("thread ids must be dense and in order", lineNo);
      }
      t.manifest.threadNames.push_back(tok[2]);
    } else if (key == "stuck" && tok.size() == 2) {
      t.manifest.stuck = detail::parse_int(tok[1], lineNo) != 0;
    } else if (key == "final" && tok.size() >= 2) {
      std::size_t n = detail::parse_u64(tok[1], lineNo);
      if (tok.size() != n + 2) {
        throw ParseError("final count does not match values", lineNo);
      }
      for (std::size_t i = 0; i < n; ++i) {
        t.manifest.finalShared.push_back(detail::parse_int(tok[2 + i], lineNo));
      }
    } else if (key == "log" && tok.size() == 3) {
      t.manifest.logLines = detail::parse_u64(tok[1], lineNo);
      t.manifest.logHash = detail::parse_u64(tok[2], lineNo);
    } else if (key == "commits" && tok.size() == 2) {
      t.manifest.commits = detail::parse_u64(tok[1], lineNo);
    } else if (key == "records" && tok.size() == 2) {
      declaredRecords = detail::parse_u64(tok[1], lineNo);
    } else {
      throw ParseError("unrecognized header line '" + line + "'", lineNo);
    }
  }
  if (!sawMagic) throw ParseError("empty trace file", 1);
  if (!sawSeparator) throw ParseError("missing --- separator", lineNo + 1);

  for (std::size_t i = 0; i < declaredRecords; ++i) {
    ++lineNo;
    if (!std::getline(in, line)) {
      throw ParseError("trace truncated: expected " +
                           std::to_string(declaredRecords) + " records, got " +
                           std::to_string(i),
                       lineNo);
    }
    TraceRecord rec;
    std::size_t p1 = line.find('\t');
    std::size_t p2 = p1 == std::string::npos ? p1 : line.find('\t', p1 + 1);
    std::size_t p3 = p2 == std::string::npos ? p2 : line.find('\t', p2 + 1);
    if (p3 == std::string::npos) {
      throw ParseError("record needs 4 tab-separated fields", lineNo);
    }
    rec.ordinal = detail::parse_u64(line.substr(0, p1), lineNo);
    rec.tid = static_cast<ThreadId>(
        detail::parse_u64(line.substr(p1 + 1, p2 - p1 - 1), lineNo));
    rec.segOrdinal = detail::parse_u64(line.substr(p2 + 1, p3 - p2 - 1), lineNo);
    rec.label = line.substr(p3 + 1);
    if (rec.ordinal != i) {
      throw ParseError("ordinals must be dense starting at 0", lineNo);
    }
    t.records.push_back(std::move(rec));
  }
  return t;
}

inline Trace load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open trace file: " + path);
  return load(f);
}

}  // namespace ocm

#endif  // OCM_TRACE_HPP
