#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mbsim {

enum class Relation { kLessEqual, kEqual, kGreaterEqual };

struct LpTerm {
  double coeff = 0.0;
  std::string var;

  friend bool operator==(const LpTerm&, const LpTerm&) = default;
};

struct LpConstraint {
  std::string name;
  std::vector<LpTerm> terms;
  Relation relation = Relation::kLessEqual;
  double rhs = 0.0;

  friend bool operator==(const LpConstraint&, const LpConstraint&) = default;
};

// Explicit bound line. nullopt lower means -inf, nullopt upper means +inf.
// Variables without a bound entry default to [0, +inf).
struct LpBound {
  std::string var;
  std::optional<double> lower = 0.0;
  std::optional<double> upper;

  friend bool operator==(const LpBound&, const LpBound&) = default;
};

// A maximization MILP in the shape the LP file format describes.
struct LpProblem {
  std::string name;
  std::vector<LpTerm> objective;
  std::vector<LpConstraint> constraints;
  std::vector<LpBound> bounds;
  std::vector<std::string> binaries;

  // Binaries in listed order, then every other variable by first
  // appearance in objective, constraints, bounds.
  std::vector<std::string> variables() const;

  // Throws ParseError on bad names, duplicate constraint names, or
  // variables that only appear inside constraints.
  void validate() const;

  friend bool operator==(const LpProblem&, const LpProblem&) = default;
};

bool is_valid_lp_name(std::string_view name);

// Integers without a decimal point, everything else in the shortest form
// that reads back to the same double.
std::string format_number(double value);

std::string write_lp(const LpProblem& problem);

// Line numbers of each parsed item, for error reporting by callers that
// impose further structure on the problem.
struct LpSourceMap {
  std::size_t objective_line = 0;
  std::vector<std::size_t> constraint_lines;
  std::vector<std::size_t> bound_lines;
  std::vector<std::size_t> binary_lines;
};

// Reads the subset of the LP format that write_lp emits. Throws ParseError
// naming the offending line.
LpProblem read_lp(std::string_view text, LpSourceMap* where = nullptr);

}  // namespace mbsim
