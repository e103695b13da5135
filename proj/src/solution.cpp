#include "mbsim/solution.hpp"

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <charconv>
#include <sstream>

#include "mbsim/error.hpp"
#include "mbsim/lp.hpp"

namespace mbsim {

std::string_view to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::kOptimal:
      return "optimal";
    case SolveStatus::kInfeasible:
      return "infeasible";
    case SolveStatus::kLimitReached:
      return "limit-reached";
  }
  return "unknown";
}

std::optional<double> LpSolution::value_of(std::string_view var) const {
  for (const auto& [name, value] : values) {
    if (name == var) return value;
  }
  return std::nullopt;
}

namespace {

std::string escape_attr(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string_view status_text(SolveStatus status) {
  switch (status) {
    case SolveStatus::kOptimal:
      return "integer optimal solution";
    case SolveStatus::kInfeasible:
      return "infeasible";
    case SolveStatus::kLimitReached:
      return "limit reached";
  }
  return "unknown";
}

double parse_double(const std::string& text, const std::string& what) {
  std::string_view tok = text;
  if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
  double value = 0.0;
  const auto* end = tok.data() + tok.size();
  const auto [ptr, ec] = std::from_chars(tok.data(), end, value);
  if (tok.empty() || ec != std::errc{} || ptr != end) {
    throw ParseError("unparseable number '" + text + "' for " + what);
  }
  return value;
}

}  // namespace

std::string solution_to_xml(const LpSolution& solution,
                            std::string_view problem_name) {
  if (solution.status == SolveStatus::kOptimal &&
      (!solution.objective || solution.values.empty())) {
    throw ContractError("optimal solution needs an objective and values");
  }
  std::ostringstream out;
  out << "<?xml version = \"1.0\" encoding=\"UTF-8\" standalone=\"yes\"?>\n"
      << "<CPLEXSolution version=\"1.2\">\n"
      << " <header\n"
      << "   problemName=\"" << escape_attr(problem_name) << "\"\n";
  if (solution.objective) {
    out << "   objectiveValue=\"" << format_number(*solution.objective) << "\"\n";
  }
  out << "   solutionStatusString=\"" << status_text(solution.status) << "\"/>\n";
  if (solution.values.empty()) {
    out << " <variables/>\n";
  } else {
    out << " <variables>\n";
    std::size_t index = 0;
    for (const auto& [name, value] : solution.values) {
      out << "  <variable name=\"" << escape_attr(name) << "\" index=\""
          << index++ << "\" value=\"" << format_number(value) << "\"/>\n";
    }
    out << " </variables>\n";
  }
  out << "</CPLEXSolution>\n";
  return out.str();
}

LpSolution parse_solution_xml(std::string_view text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    std::istringstream in{std::string(text)};
    pt::read_xml(in, tree);
  } catch (const pt::xml_parser_error& e) {
    throw ParseError(std::string("malformed solution XML: ") + e.message(),
                     e.line());
  }

  const auto root = tree.get_child_optional("CPLEXSolution");
  if (!root) throw ParseError("missing <CPLEXSolution> root");
  const auto header = root->get_child_optional("header.<xmlattr>");
  if (!header) throw ParseError("missing <header> element");
  const auto variables = root->get_child_optional("variables");
  if (!variables) throw ParseError("missing <variables> element");

  LpSolution solution;
  const auto status = header->get<std::string>("solutionStatusString", "");
  if (status.find("optimal") != std::string::npos) {
    solution.status = SolveStatus::kOptimal;
  } else if (status.find("infeasible") != std::string::npos) {
    solution.status = SolveStatus::kInfeasible;
  } else {
    solution.status = SolveStatus::kLimitReached;
  }
  if (const auto obj = header->get_optional<std::string>("objectiveValue")) {
    solution.objective = parse_double(*obj, "objectiveValue");
  }

  for (const auto& [tag, node] : *variables) {
    if (tag != "variable") continue;
    const auto name = node.get_optional<std::string>("<xmlattr>.name");
    const auto value = node.get_optional<std::string>("<xmlattr>.value");
    if (!name) throw ParseError("<variable> without a name attribute");
    if (!value) throw ParseError("variable '" + *name + "' has no value");
    solution.values.emplace_back(*name, parse_double(*value, "variable '" + *name + "'"));
  }
  return solution;
}

}  // namespace mbsim
