#include "mbsim/lp.hpp"

#include <charconv>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>
#include <unordered_set>

#include "mbsim/error.hpp"

namespace mbsim {

bool is_valid_lp_name(std::string_view name) {
  if (name.empty()) return false;
  auto alpha = [](char c) {
    return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || c == '_';
  };
  if (!alpha(name.front())) return false;
  for (char c : name) {
    if (!alpha(c) && !(c >= '0' && c <= '9')) return false;
  }
  return true;
}

std::vector<std::string> LpProblem::variables() const {
  std::vector<std::string> order;
  std::unordered_set<std::string> seen;
  auto add = [&](const std::string& v) {
    if (seen.insert(v).second) order.push_back(v);
  };
  for (const auto& v : binaries) add(v);
  for (const auto& t : objective) add(t.var);
  for (const auto& c : constraints) {
    for (const auto& t : c.terms) add(t.var);
  }
  for (const auto& b : bounds) add(b.var);
  return order;
}

void LpProblem::validate() const {
  if (!name.empty() && !is_valid_lp_name(name)) {
    throw ParseError("invalid problem name '" + name + "'");
  }
  std::unordered_set<std::string> declared;
  auto check = [](const std::string& v) {
    if (!is_valid_lp_name(v)) throw ParseError("invalid variable name '" + v + "'");
  };
  for (const auto& v : binaries) {
    check(v);
    declared.insert(v);
  }
  for (const auto& t : objective) {
    check(t.var);
    declared.insert(t.var);
  }
  for (const auto& b : bounds) {
    check(b.var);
    declared.insert(b.var);
  }
  std::set<std::string> names;
  for (const auto& c : constraints) {
    if (!is_valid_lp_name(c.name)) {
      throw ParseError("invalid constraint name '" + c.name + "'");
    }
    if (!names.insert(c.name).second) {
      throw ParseError("duplicate constraint name '" + c.name + "'");
    }
    for (const auto& t : c.terms) {
      check(t.var);
      if (!declared.count(t.var)) {
        throw ParseError("variable '" + t.var + "' in constraint '" + c.name +
                         "' is not declared in objective, bounds or binaries");
      }
    }
  }
}

std::string format_number(double value) {
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  if (value == 0.0) return "0";
  constexpr double kExact = 9007199254740992.0;  // 2^53
  if (std::trunc(value) == value && std::fabs(value) < kExact) {
    return std::to_string(static_cast<long long>(value));
  }
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

namespace {

void write_terms(std::ostringstream& out, const std::vector<LpTerm>& terms) {
  for (const auto& t : terms) {
    out << (t.coeff < 0 ? " - " : " + ") << format_number(std::fabs(t.coeff))
        << ' ' << t.var;
  }
}

const char* relation_text(Relation r) {
  switch (r) {
    case Relation::kLessEqual:
      return "<=";
    case Relation::kEqual:
      return "=";
    case Relation::kGreaterEqual:
      return ">=";
  }
  return "?";
}

}  // namespace

std::string write_lp(const LpProblem& problem) {
  problem.validate();
  std::ostringstream out;
  if (!problem.name.empty()) out << "\\ " << problem.name << '\n';
  out << "Maximize\n obj:";
  write_terms(out, problem.objective);
  out << '\n';
  if (!problem.constraints.empty()) {
    out << "Subject To\n";
    for (const auto& c : problem.constraints) {
      out << ' ' << c.name << ':';
      write_terms(out, c.terms);
      out << ' ' << relation_text(c.relation) << ' ' << format_number(c.rhs)
          << '\n';
    }
  }
  if (!problem.bounds.empty()) {
    out << "Bounds\n";
    for (const auto& b : problem.bounds) {
      if (!b.lower && !b.upper) {
        out << ' ' << b.var << " free\n";
        continue;
      }
      out << ' ';
      out << (b.lower ? format_number(*b.lower) : std::string("-inf"))
          << " <= " << b.var;
      if (b.upper) out << " <= " << format_number(*b.upper);
      out << '\n';
    }
  }
  if (!problem.binaries.empty()) {
    out << "Binaries\n";
    for (const auto& v : problem.binaries) out << ' ' << v << '\n';
  }
  out << "End\n";
  return out.str();
}

namespace {

enum class Section { kNone, kObjective, kConstraints, kBounds, kBinaries, kEnd };

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> tokens;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    const auto start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
    if (i > start) tokens.push_back(line.substr(start, i - start));
  }
  return tokens;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t'))
    s.remove_suffix(1);
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  return s;
}

class LineParser {
 public:
  LineParser(std::vector<std::string_view> tokens, std::size_t line)
      : tokens_(std::move(tokens)), line_(line) {}

  bool done() const { return pos_ >= tokens_.size(); }
  std::string_view peek() const { return done() ? std::string_view{} : tokens_[pos_]; }
  std::string_view take(const char* what) {
    if (done()) fail(std::string("expected ") + what + " at end of line");
    return tokens_[pos_++];
  }

  // `name:` prefix.
  std::string label() {
    auto tok = take("label");
    if (tok.size() < 2 || tok.back() != ':') {
      fail("expected 'name:' label, got '" + std::string(tok) + "'");
    }
    tok.remove_suffix(1);
    if (!is_valid_lp_name(tok)) fail("invalid name '" + std::string(tok) + "'");
    return std::string(tok);
  }

  double number(std::string_view tok) const {
    if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
    double value = 0.0;
    const auto* end = tok.data() + tok.size();
    const auto [ptr, ec] = std::from_chars(tok.data(), end, value);
    if (tok.empty() || ec != std::errc{} || ptr != end) {
      fail("malformed number '" + std::string(tok) + "'");
    }
    return value;
  }

  std::string variable() {
    const auto tok = take("variable");
    if (!is_valid_lp_name(tok)) fail("invalid variable name '" + std::string(tok) + "'");
    return std::string(tok);
  }

  // Sign-separated terms up to (not including) a relation token.
  std::vector<LpTerm> terms() {
    std::vector<LpTerm> out;
    while (!done() && (peek() == "+" || peek() == "-")) {
      const bool negative = take("sign") == "-";
      const double magnitude = number(take("coefficient"));
      if (magnitude < 0) fail("coefficient must follow its sign separately");
      out.push_back({negative ? -magnitude : magnitude, variable()});
    }
    return out;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError(what, line_);
  }

 private:
  std::vector<std::string_view> tokens_;
  std::size_t line_;
  std::size_t pos_ = 0;
};

Relation parse_relation(const LineParser& p, std::string_view tok) {
  if (tok == "<=" || tok == "=<") return Relation::kLessEqual;
  if (tok == ">=" || tok == "=>") return Relation::kGreaterEqual;
  if (tok == "=") return Relation::kEqual;
  p.fail("expected relation, got '" + std::string(tok) + "'");
}

}  // namespace

LpProblem read_lp(std::string_view text, LpSourceMap* where) {
  LpProblem problem;
  LpSourceMap map;
  Section section = Section::kNone;
  bool saw_objective = false;
  std::size_t line_no = 0;

  std::size_t start = 0;
  while (start <= text.size()) {
    const auto nl = text.find('\n', start);
    const auto raw = text.substr(start, nl == std::string_view::npos
                                            ? std::string_view::npos
                                            : nl - start);
    start = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;

    const auto line = trim(raw);
    if (line.empty()) continue;
    if (line.front() == '\\') {
      if (line_no == 1) problem.name = std::string(trim(line.substr(1)));
      continue;
    }
    if (section == Section::kEnd) {
      throw ParseError("content after End", line_no);
    }

    const bool indented = raw.front() == ' ' || raw.front() == '\t';
    if (!indented) {
      if (line == "Maximize") {
        if (section != Section::kNone) throw ParseError("misplaced Maximize", line_no);
        section = Section::kObjective;
      } else if (line == "Subject To") {
        if (section != Section::kObjective) throw ParseError("misplaced Subject To", line_no);
        section = Section::kConstraints;
      } else if (line == "Bounds") {
        if (section == Section::kNone || section >= Section::kBounds)
          throw ParseError("misplaced Bounds", line_no);
        section = Section::kBounds;
      } else if (line == "Binaries") {
        if (section == Section::kNone || section >= Section::kBinaries)
          throw ParseError("misplaced Binaries", line_no);
        section = Section::kBinaries;
      } else if (line == "End") {
        section = Section::kEnd;
      } else {
        throw ParseError("unknown section '" + std::string(line) + "'", line_no);
      }
      continue;
    }

    LineParser p(split_ws(line), line_no);
    switch (section) {
      case Section::kNone:
        p.fail("content before Maximize");
      case Section::kObjective: {
        if (saw_objective) p.fail("objective spans more than one line");
        saw_objective = true;
        p.label();
        problem.objective = p.terms();
        if (!p.done()) p.fail("unexpected token '" + std::string(p.peek()) + "'");
        map.objective_line = line_no;
        break;
      }
      case Section::kConstraints: {
        LpConstraint c;
        c.name = p.label();
        c.terms = p.terms();
        if (c.terms.empty()) p.fail("constraint without terms");
        c.relation = parse_relation(p, p.take("relation"));
        c.rhs = p.number(p.take("right-hand side"));
        if (!p.done()) p.fail("unexpected token '" + std::string(p.peek()) + "'");
        problem.constraints.push_back(std::move(c));
        map.constraint_lines.push_back(line_no);
        break;
      }
      case Section::kBounds: {
        LpBound b;
        const auto first = p.take("bound");
        if (is_valid_lp_name(first) && first != "inf") {
          // `x free`
          if (p.take("'free'") != "free" || !p.done()) p.fail("malformed bound");
          b.var = std::string(first);
          b.lower.reset();
          b.upper.reset();
        } else {
          const double lo = p.number(first);
          if (p.take("'<='") != "<=") p.fail("bounds must use '<='");
          b.var = p.variable();
          b.lower = std::isinf(lo) && lo < 0 ? std::nullopt : std::optional(lo);
          if (!p.done()) {
            if (p.take("'<='") != "<=") p.fail("bounds must use '<='");
            const double hi = p.number(p.take("upper bound"));
            b.upper = std::isinf(hi) && hi > 0 ? std::nullopt : std::optional(hi);
          }
          if (!p.done()) p.fail("unexpected token '" + std::string(p.peek()) + "'");
        }
        problem.bounds.push_back(std::move(b));
        map.bound_lines.push_back(line_no);
        break;
      }
      case Section::kBinaries: {
        while (!p.done()) {
          problem.binaries.push_back(p.variable());
          map.binary_lines.push_back(line_no);
        }
        break;
      }
      case Section::kEnd:
        break;
    }
  }
  if (section != Section::kEnd) throw ParseError("missing End", line_no);
  if (!saw_objective) throw ParseError("missing objective line", line_no);
  try {
    problem.validate();
  } catch (const ParseError& e) {
    throw ParseError(std::string("invalid problem: ") + e.what(), 0);
  }
  if (where) *where = std::move(map);
  return problem;
}

}  // namespace mbsim
