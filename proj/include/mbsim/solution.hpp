#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace mbsim {

enum class SolveStatus { kOptimal, kInfeasible, kLimitReached };

std::string_view to_string(SolveStatus status);

// Solver output in the shape of a CPLEX solution file. `values` keeps the
// problem's variable order.
struct LpSolution {
  SolveStatus status = SolveStatus::kOptimal;
  std::optional<double> objective;
  std::vector<std::pair<std::string, double>> values;

  std::optional<double> value_of(std::string_view var) const;

  friend bool operator==(const LpSolution&, const LpSolution&) = default;
};

// Emits <CPLEXSolution version="1.2"> with a header and one <variable>
// element per value.
std::string solution_to_xml(const LpSolution& solution,
                            std::string_view problem_name);

// Reads the header status/objective and every variable name/value pair.
// Unknown elements and attributes are ignored. Status strings containing
// "optimal" map to kOptimal, containing "infeasible" to kInfeasible,
// anything else to kLimitReached.
LpSolution parse_solution_xml(std::string_view text);

}  // namespace mbsim
