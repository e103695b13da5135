#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "mbsim/simloop.hpp"
#include "mbsim/types.hpp"

namespace mbsim {

// Snapshot files: {"tti": t, "rates": [[...]], "backlog": [..., "inf"]}.
std::string snapshot_to_json(const SnapshotInstance& inst);
SnapshotInstance snapshot_from_json(std::string_view text);  // ParseError
std::filesystem::path snapshot_file_name(std::int64_t tti);  // snap_<tti>.json

// tti,objective,cum_objective,creation_us,solving_us,reading_us,total_us,
// backlog_u0..,served_u0..
void write_metrics_csv(std::ostream& out, const RunMetrics& metrics);
// tti,heur_obj,opt_obj,ratio
void write_twin_csv(std::ostream& out, const TwinReport& report);
// tti,heur_obj,opt_obj,ratio,status; unsolved rows leave opt_obj and ratio empty.
void write_snapshot_report_csv(std::ostream& out, const SnapshotReport& report);
// method,phase,mean_us,total_us,count
void write_timing_csv(std::ostream& out, const std::vector<TimingRow>& rows);

// Shortest text that reads back to the same double.
std::string format_ratio(double value);

// Reads a whole file; InputError when it cannot be opened.
std::string read_text_file(const std::filesystem::path& path);
// Replaces `path` with `content`; InputError when it cannot be written.
void write_text_file(const std::filesystem::path& path, std::string_view content);

}  // namespace mbsim
