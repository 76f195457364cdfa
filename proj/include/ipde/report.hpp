// Report emission: JSON documents (deterministic layout, timestamp isolated to
// one key) plus CSV series, and a minimal JSON-schema checker for the shipped
// report schema.
#pragma once

#include <string>
#include <vector>

#include "json.hpp"

namespace ipde {

using json = nlohmann::json;

/// Skeleton with task name, schema version, and the single timestamp field.
json report_skeleton(const std::string& task);

/// Writes dir/report.json (creating dir), returns the path.
std::string write_report(const json& doc, const std::string& dir);

/// Writes a CSV with header + rows of doubles (%.17g).
void write_series_csv(const std::string& path, const std::vector<std::string>& header,
                      const std::vector<std::vector<double>>& rows);

/// Minimal validator: supports type/properties/required/items.
bool validate_schema(const json& doc, const json& schema, std::string* error);

/// The schema shipped at schema/report.schema.json.
json builtin_report_schema();

}  // namespace ipde
