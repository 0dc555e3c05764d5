#pragma once

#include <cstddef>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "hydroflex/plant/simulator.hpp"
#include "hydroflex/qualification/envelopes.hpp"

namespace hydroflex::io {

using json = nlohmann::json;

json to_json(const qualification::ComplianceReport& r);
/// Throws ConfigError on a malformed report.
qualification::ComplianceReport report_from_json(const json& j);

/// Writes through a temporary file and renames, creating parent directories.
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

/// Every `every`-th sample of the trace; the last sample is always kept.
void write_trace_csv(const std::filesystem::path& path, const plant::Trace& trace, std::size_t every = 1);

}  // namespace hydroflex::io
