#pragma once

#include "air/decomposition.hpp"
#include "air/runner.hpp"

#include <json.hpp>

#include <cstdint>
#include <iosfwd>
#include <string>

namespace air {

inline constexpr const char* artifact_name = "air-mcmc";
inline constexpr const char* artifact_version = "1.0.0";

using Json = nlohmann::ordered_json;

/// First record of every output file: artifact, version, config hash, seed
/// and the full serialised config.
Json manifest_record(const std::string& kind, const RunConfig& config, std::uint64_t seed);

Json to_json(const Parameter& p);
Json to_json(const RateDiagnostics& d);
Json to_json(const WindowLogEntry& w);
Json to_json(const ReplicationRecord& r);
Json to_json(const StudySummary& s);
Json to_json(const SweepRow& row);
Json to_json(const DecompositionReport& r);

/// Manifest, one record per replication, the summary record, and a failure
/// marker when the study aborted. One JSON object per line.
void write_study(std::ostream& out, const Study& study);

/// Summary record line exactly as written by write_study.
std::string summary_line(const Study& study);

/// Manifest, window log and diagnostics of a single run.
void write_run(std::ostream& out, const RunConfig& config, std::uint64_t seed, const RunResult& result);

/// Delimited text: a '#'-prefixed manifest line, then the header
/// step,x0..x{d-1},phi,window,param,f with ';'-joined parameter components.
void write_trajectory_csv(std::ostream& out, const RunConfig& config, std::uint64_t seed,
                          const RecordedTrajectory& trajectory);
RecordedTrajectory read_trajectory_csv(std::istream& in);

}  // namespace air
