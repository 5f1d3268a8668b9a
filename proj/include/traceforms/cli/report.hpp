#pragma once

// Report bundle: named checks with their bounds, free-form data, optional CSV
// tables. report.json keys are sorted and carry no timestamps, so a rerun of
// the same config writes the same bytes.

#include <traceforms/error.hpp>
#include <traceforms/stats.hpp>

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

namespace traceforms::cli {

enum class Status { pass, fail, inconclusive };

[[nodiscard]] inline const char* status_name(Status s) {
    switch (s) {
    case Status::pass: return "pass";
    case Status::fail: return "fail";
    case Status::inconclusive: return "inconclusive";
    }
    return "?";
}

/// Exit code of the command-line runner.
[[nodiscard]] inline int exit_code(Status s) {
    switch (s) {
    case Status::pass: return 0;
    case Status::fail: return 1;
    case Status::inconclusive: return 2;
    }
    return 1;
}

struct Check {
    std::string name;
    std::string rule;  // "value <= bound", "|z| < bound" or a short description
    double value = 0.0;
    double bound = 0.0;
    Status outcome = Status::pass;
    std::string note;
};

struct ReportBundle {
    std::string kind;
    std::uint64_t seed = 0;
    std::vector<Check> checks;
    nlohmann::json data = nlohmann::json::object();
    std::map<std::string, std::string> csv;  // file name -> contents

    void residual(std::string name, double value, double bound) {
        checks.push_back({std::move(name), "value <= bound", value, bound, value <= bound ? Status::pass : Status::fail, {}});
    }

    void z_score(std::string name, const EstimatorReport& r, double bound) {
        const double z = r.z_score ? *r.z_score : (r.estimate == r.exact_reference.value_or(r.estimate) ? 0.0 : 1e300);
        checks.push_back({std::move(name), "|z| < bound", z, bound, std::abs(z) < bound ? Status::pass : Status::fail, {}});
    }

    void flag(std::string name, bool ok, std::string rule) {
        checks.push_back({std::move(name), std::move(rule), ok ? 1.0 : 0.0, 1.0, ok ? Status::pass : Status::fail, {}});
    }

    void inconclusive(std::string name, std::string note) {
        checks.push_back({std::move(name), "enough events", 0.0, 0.0, Status::inconclusive, std::move(note)});
    }

    /// Fail if any check failed; otherwise inconclusive if any check was.
    [[nodiscard]] Status status() const {
        Status s = Status::pass;
        for (const auto& c : checks) {
            if (c.outcome == Status::fail) return Status::fail;
            if (c.outcome == Status::inconclusive) s = Status::inconclusive;
        }
        return s;
    }
};

[[nodiscard]] inline nlohmann::json to_json(const EstimatorReport& r) {
    nlohmann::json j{{"estimate", r.estimate}, {"std_error", r.std_error}, {"n_events", r.n_events}};
    j["exact_reference"] = r.exact_reference ? nlohmann::json(*r.exact_reference) : nlohmann::json(nullptr);
    j["z_score"] = r.z_score ? nlohmann::json(*r.z_score) : nlohmann::json(nullptr);
    return j;
}

[[nodiscard]] inline nlohmann::json report_json(const ReportBundle& b) {
    nlohmann::json checks = nlohmann::json::array();
    for (const auto& c : b.checks) {
        nlohmann::json j{{"name", c.name}, {"rule", c.rule}, {"value", c.value}, {"bound", c.bound},
                         {"outcome", status_name(c.outcome)}};
        if (!c.note.empty()) j["note"] = c.note;
        checks.push_back(std::move(j));
    }
    return {{"kind", b.kind}, {"seed", b.seed}, {"status", status_name(b.status())}, {"checks", checks}, {"data", b.data}};
}

[[nodiscard]] inline std::string summary_text(const ReportBundle& b) {
    std::string out = "trace-forms " + b.kind + "  seed " + std::to_string(b.seed) + "\n\n";
    char line[256];
    std::snprintf(line, sizeof line, "%-40s %-16s %14s %12s  %s\n", "check", "rule", "value", "bound", "outcome");
    out += line;
    for (const auto& c : b.checks) {
        std::snprintf(line, sizeof line, "%-40s %-16s %14.6g %12.4g  %s\n", c.name.c_str(), c.rule.c_str(), c.value,
                      c.bound, status_name(c.outcome));
        out += line;
        if (!c.note.empty()) out += "    " + c.note + "\n";
    }
    out += std::string("\nstatus: ") + status_name(b.status()) + "\n";
    return out;
}

/// Writes report.json, summary.txt and one file per CSV table; returns the
/// paths written.
inline std::vector<std::filesystem::path> emit_reports(const ReportBundle& b, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
    std::vector<std::filesystem::path> written;
    auto write = [&](const std::string& name, const std::string& text) {
        const auto p = dir / name;
        std::ofstream out(p, std::ios::binary);
        out << text;
        if (!out) throw IoError("cannot write " + p.string());
        written.push_back(p);
    };
    write("report.json", report_json(b).dump(2) + "\n");
    write("summary.txt", summary_text(b));
    for (const auto& [name, text] : b.csv) {
        if (!text.empty()) write(name, text);
    }
    return written;
}

} // namespace traceforms::cli
