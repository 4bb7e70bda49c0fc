#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace deform {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DegreeError : public Error { using Error::Error; };
class ShapeError : public Error { using Error::Error; };
class AdmissibilityError : public Error { using Error::Error; };
class EmbeddingError : public Error { using Error::Error; };
class HistoryError : public Error { using Error::Error; };
class GeometryError : public Error { using Error::Error; };
class CompositionError : public Error { using Error::Error; };

class SingularError : public Error {
 public:
  explicit SingularError(const std::string& what, long node = -1)
      : Error(node >= 0 ? what + " (node " + std::to_string(node) + ")" : what), node_(node) {}
  /// Flat node index where the failure happened, or -1 when not node-bound.
  long node() const { return node_; }

 private:
  long node_;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, int line = 0, std::string section = {})
      : Error(format(what, line, section)), line_(line), section_(std::move(section)) {}
  int line() const { return line_; }
  const std::string& section() const { return section_; }

 private:
  static std::string format(const std::string& what, int line, const std::string& section) {
    std::string s;
    if (line > 0) s += "line " + std::to_string(line) + ": ";
    if (!section.empty()) s += "[" + section + "] ";
    return s + what;
  }
  int line_;
  std::string section_;
};

struct TraceEntry {
  int iteration = 0;
  double action = 0.0;
  double grad_norm = 0.0;
  double step = 0.0;
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, std::vector<TraceEntry> trace)
      : Error(what), trace_(std::move(trace)) {}
  const std::vector<TraceEntry>& trace() const { return trace_; }

 private:
  std::vector<TraceEntry> trace_;
};

}  // namespace deform
