#include <doctest.h>

#include <random>
#include <string>

#include "mbsim/bb.hpp"
#include "mbsim/error.hpp"
#include "mbsim/mbs.hpp"
#include "mbsim/solution.hpp"
#include "mbsim/solverbridge.hpp"
#include "support.hpp"

using namespace mbsim;
using mbsim::testing::random_instance;
using mbsim::testing::reference_instance;

namespace {

LpSolution reference_optimum() {
  LpSolution s;
  s.status = SolveStatus::kOptimal;
  s.objective = 17;
  s.values = {{"x_0_0", 0}, {"x_0_1", 1}, {"x_1_0", 1}, {"x_1_1", 0}, {"s_0", 9}, {"s_1", 8}};
  return s;
}

std::string with(std::string text, const std::string& from, const std::string& to) {
  text.replace(text.find(from), from.size(), to);
  return text;
}

}  // namespace

TEST_CASE("reference optimum serializes with one element per variable") {
  const auto xml = solution_to_xml(reference_optimum(), "mbs_t0");
  CHECK(xml.find("<CPLEXSolution version=\"1.2\">") != std::string::npos);
  CHECK(xml.find("objectiveValue=\"17\"") != std::string::npos);
  CHECK(xml.find("problemName=\"mbs_t0\"") != std::string::npos);
  std::size_t count = 0;
  for (auto at = xml.find("<variable "); at != std::string::npos; at = xml.find("<variable ", at + 1)) {
    ++count;
  }
  CHECK(count == 6);
  CHECK(xml.find("name=\"x_1_0\" index=\"2\" value=\"1\"") != std::string::npos);
}

TEST_CASE("reference optimum round-trips") {
  const auto s = reference_optimum();
  const auto back = parse_solution_xml(solution_to_xml(s, "mbs_t0"));
  CHECK(back == s);
  CHECK(back.value_of("s_0") == 9.0);
  CHECK_FALSE(back.value_of("nope").has_value());
}

TEST_CASE("solver output round-trips on random instances") {
  std::mt19937_64 rng(808);
  for (int i = 0; i < 500; ++i) {
    const auto inst = random_instance(rng);
    const auto sol = to_lp_solution(inst, solve_bb(inst));
    CAPTURE(i);
    REQUIRE(parse_solution_xml(solution_to_xml(sol, problem_name_for(inst))) == sol);
  }
}

TEST_CASE("fractional values survive the round trip") {
  LpSolution s;
  s.objective = 0.1;
  s.values = {{"a", 0.1}, {"b", -2.5e-7}, {"c", 123456789.125}};
  CHECK(parse_solution_xml(solution_to_xml(s, "p")) == s);
}

TEST_CASE("infeasible status has an empty variables element") {
  LpSolution s;
  s.status = SolveStatus::kInfeasible;
  const auto xml = solution_to_xml(s, "p");
  CHECK(xml.find("solutionStatusString=\"infeasible\"") != std::string::npos);
  CHECK(xml.find("<variables/>") != std::string::npos);
  const auto back = parse_solution_xml(xml);
  CHECK(back.status == SolveStatus::kInfeasible);
  CHECK(back.values.empty());
}

TEST_CASE("unknown elements and attributes are ignored") {
  const auto xml = solution_to_xml(reference_optimum(), "mbs_t0");
  auto noisy = with(xml, "<variables>", "<quality epInt=\"1e-05\" maxIntInfeas=\"0\"/>\n <variables>");
  noisy = with(noisy, "name=\"s_1\"", "reducedCost=\"0\" name=\"s_1\"");
  CHECK(parse_solution_xml(noisy) == reference_optimum());
}

TEST_CASE("status strings map by substring") {
  const auto xml = solution_to_xml(reference_optimum(), "mbs_t0");
  const auto status_of = [&](const std::string& text) {
    return parse_solution_xml(with(xml, "solutionStatusString=\"integer optimal solution\"",
                                   "solutionStatusString=\"" + text + "\""))
        .status;
  };
  CHECK(status_of("integer optimal solution") == SolveStatus::kOptimal);
  CHECK(status_of("integer infeasible") == SolveStatus::kInfeasible);
  CHECK(status_of("time limit exceeded") == SolveStatus::kLimitReached);
}

TEST_CASE("bad numbers name the variable") {
  const auto xml = solution_to_xml(reference_optimum(), "mbs_t0");
  try {
    parse_solution_xml(with(xml, "name=\"s_1\" index=\"5\" value=\"8\"", "name=\"s_1\" index=\"5\" value=\"eight\""));
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("s_1") != std::string::npos);
  }
}

TEST_CASE("structural damage is a parse error") {
  const auto xml = solution_to_xml(reference_optimum(), "mbs_t0");
  CHECK_THROWS_AS(parse_solution_xml("not xml at all <"), ParseError);
  CHECK_THROWS_AS(parse_solution_xml("<other/>"), ParseError);
  CHECK_THROWS_AS(parse_solution_xml(with(xml, "<header", "<heading")), ParseError);
  CHECK_THROWS_AS(parse_solution_xml(with(xml, "objectiveValue=\"17\"", "objectiveValue=\"x\"")), ParseError);
}

TEST_CASE("decode recovers the reference allocation") {
  const auto alloc = decode_solution(reference_instance(), reference_optimum());
  CHECK(alloc.assignment == std::vector<std::optional<int>>{1, 0});
  CHECK(alloc.served == std::vector<Bits>{9, 8});
}

TEST_CASE("decode rejects fractional binaries and objective mismatches") {
  auto s = reference_optimum();
  s.values[1].second = 0.5;
  CHECK_THROWS(decode_solution(reference_instance(), s));
  s = reference_optimum();
  s.objective = 18;
  CHECK_THROWS(decode_solution(reference_instance(), s));
}
