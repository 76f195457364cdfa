#include "ipde/report.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>

namespace ipde {

json report_skeleton(const std::string& task) {
    json doc;
    doc["schema"] = "ipde-report/1";
    doc["task"] = task;
    auto now = std::chrono::system_clock::now().time_since_epoch();
    doc["timestamp"] =
        double(std::chrono::duration_cast<std::chrono::milliseconds>(now).count()) / 1000.0;
    doc["pass"] = false;
    doc["params"] = json::object();
    doc["results"] = json::object();
    return doc;
}

std::string write_report(const json& doc, const std::string& dir) {
    std::filesystem::create_directories(dir);
    std::string path = (std::filesystem::path(dir) / "report.json").string();
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_report: cannot open " + path);
    out << doc.dump(2) << "\n";
    return path;
}

void write_series_csv(const std::string& path, const std::vector<std::string>& header,
                      const std::vector<std::vector<double>>& rows) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_series_csv: cannot open " + path);
    for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
    out << "\n";
    char buf[64];
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            std::snprintf(buf, sizeof buf, "%.17g", row[i]);
            out << (i ? "," : "") << buf;
        }
        out << "\n";
    }
}

namespace {

bool type_matches(const json& v, const std::string& t) {
    if (t == "object") return v.is_object();
    if (t == "array") return v.is_array();
    if (t == "string") return v.is_string();
    if (t == "number") return v.is_number();
    if (t == "boolean") return v.is_boolean();
    if (t == "null") return v.is_null();
    return false;
}

bool validate_rec(const json& doc, const json& schema, const std::string& where,
                  std::string* error) {
    if (schema.contains("type")) {
        std::string t = schema["type"].get<std::string>();
        if (!type_matches(doc, t)) {
            if (error) *error = where + ": expected " + t;
            return false;
        }
    }
    if (schema.contains("required")) {
        for (const auto& key : schema["required"]) {
            if (!doc.contains(key.get<std::string>())) {
                if (error) *error = where + ": missing required key '" + key.get<std::string>() + "'";
                return false;
            }
        }
    }
    if (schema.contains("properties") && doc.is_object()) {
        for (auto it = schema["properties"].begin(); it != schema["properties"].end(); ++it) {
            if (doc.contains(it.key())) {
                if (!validate_rec(doc[it.key()], it.value(), where + "." + it.key(), error))
                    return false;
            }
        }
    }
    if (schema.contains("items") && doc.is_array()) {
        for (std::size_t i = 0; i < doc.size(); ++i) {
            if (!validate_rec(doc[i], schema["items"], where + "[" + std::to_string(i) + "]",
                              error))
                return false;
        }
    }
    return true;
}

}  // namespace

bool validate_schema(const json& doc, const json& schema, std::string* error) {
    return validate_rec(doc, schema, "$", error);
}

json builtin_report_schema() {
    static const char* text = R"JSON({
  "type": "object",
  "required": ["schema", "task", "timestamp", "pass", "params", "results"],
  "properties": {
    "schema": {"type": "string"},
    "task": {"type": "string"},
    "timestamp": {"type": "number"},
    "pass": {"type": "boolean"},
    "params": {"type": "object"},
    "results": {"type": "object"},
    "notes": {"type": "array", "items": {"type": "string"}}
  }
})JSON";
    return json::parse(text);
}

}  // namespace ipde
