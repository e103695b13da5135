#include "mbsim/reports.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mbsim/error.hpp"

namespace mbsim {

using nlohmann::json;

std::string snapshot_to_json(const SnapshotInstance& inst) {
  json backlog = json::array();
  for (const auto& q : inst.backlog) {
    if (q.is_unbounded()) {
      backlog.push_back("inf");
    } else {
      backlog.push_back(q.bits());
    }
  }
  json doc;
  doc["tti"] = inst.tti;
  doc["rates"] = inst.rates;
  doc["backlog"] = std::move(backlog);
  return doc.dump() + "\n";
}

SnapshotInstance snapshot_from_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("snapshot JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("tti") || !doc.contains("rates") ||
      !doc.contains("backlog")) {
    throw ParseError("snapshot JSON needs tti, rates and backlog");
  }
  SnapshotInstance inst;
  try {
    inst.tti = doc.at("tti").get<std::int64_t>();
    inst.rates = doc.at("rates").get<std::vector<std::vector<Bits>>>();
    for (const auto& q : doc.at("backlog")) {
      if (q.is_string()) {
        if (q.get<std::string>() != "inf") throw ParseError("snapshot backlog string must be \"inf\"");
        inst.backlog.push_back(Backlog::unbounded());
      } else {
        inst.backlog.push_back(Backlog{q.get<Bits>()});
      }
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("snapshot JSON: ") + e.what());
  }
  try {
    inst.validate();
  } catch (const Error& e) {
    throw ParseError(std::string("snapshot JSON: ") + e.what());
  }
  return inst;
}

std::filesystem::path snapshot_file_name(std::int64_t tti) {
  return "snap_" + std::to_string(tti) + ".json";
}

std::string format_ratio(double value) {
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, end);
}

void write_metrics_csv(std::ostream& out, const RunMetrics& metrics) {
  const std::size_t K = metrics.initial_backlog.size();
  out << "tti,objective,cum_objective,creation_us,solving_us,reading_us,total_us";
  for (std::size_t u = 0; u < K; ++u) out << ",backlog_u" << u;
  for (std::size_t u = 0; u < K; ++u) out << ",served_u" << u;
  out << '\n';
  for (const auto& r : metrics.ttis) {
    out << r.tti << ',' << r.objective << ',' << r.cum_objective << ','
        << r.timings.creation.count() << ',' << r.timings.solving.count() << ','
        << r.timings.reading.count() << ',' << r.timings.total.count();
    for (const auto& q : r.backlog) out << ',' << to_string(q);
    for (const auto s : r.served) out << ',' << s;
    out << '\n';
  }
}

void write_twin_csv(std::ostream& out, const TwinReport& report) {
  out << "tti,heur_obj,opt_obj,ratio\n";
  for (std::size_t t = 0; t < report.ratio_series.size(); ++t) {
    out << report.heuristic.ttis[t].tti << ',' << report.heuristic.ttis[t].objective << ','
        << report.optimal.ttis[t].objective << ',' << format_ratio(report.ratio_series[t])
        << '\n';
  }
}

void write_snapshot_report_csv(std::ostream& out, const SnapshotReport& report) {
  out << "tti,heur_obj,opt_obj,ratio,status\n";
  for (const auto& row : report.rows) {
    out << row.tti << ',' << row.heur_obj << ',';
    if (row.opt_obj) {
      out << *row.opt_obj << ',' << format_ratio(*row.ratio) << ",solved\n";
    } else {
      out << ",,unsolved\n";
    }
  }
}

void write_timing_csv(std::ostream& out, const std::vector<TimingRow>& rows) {
  out << "method,phase,mean_us,total_us,count\n";
  for (const auto& row : rows) {
    out << row.method << ',' << row.phase << ',' << format_ratio(row.mean_us) << ','
        << row.total_us << ',' << row.count << '\n';
  }
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return text.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write " + path.string());
  out << content;
  if (!out.flush()) throw InputError("cannot write " + path.string());
}

}  // namespace mbsim
