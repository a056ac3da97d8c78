#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "metsfuse/cohort/types.hpp"

namespace metsfuse::cohort {

nlohmann::json to_json(const DailyRecord& r);
DailyRecord record_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ExamPanel& p);
ExamPanel panel_from_json(const nlohmann::json& j);

/// One record per line. Blank lines are skipped; errors carry the line number.
std::vector<DailyRecord> read_records_jsonl(std::istream& in, const std::string& source = "<stream>");
std::vector<DailyRecord> read_records_jsonl(const std::filesystem::path& path);
void write_records_jsonl(std::ostream& out, std::span<const DailyRecord> records);
void write_records_jsonl(const std::filesystem::path& path, std::span<const DailyRecord> records);

/// JSON array of panels. Duplicate subject ids are rejected.
std::vector<ExamPanel> read_panels_json(const std::filesystem::path& path);
std::vector<ExamPanel> parse_panels_json(const std::string& text);
void write_panels_json(const std::filesystem::path& path, std::span<const ExamPanel> panels);

/// Columns: subject_id,day_index,label,text,hr_min,hr_max,spo2_mean,steps,provenance
/// provenance is "text=...;hr_min=...;..." per field. Missing values are empty cells.
void write_records_csv(std::ostream& out, std::span<const DailyRecord> records, const SubjectLabels* labels = nullptr);
void write_records_csv(const std::filesystem::path& path, std::span<const DailyRecord> records,
                       const SubjectLabels* labels = nullptr);

struct AuditEntry {
  std::string action;  // "drop_record", "impute", "drop_subject"
  std::string subject_id;
  std::optional<int> day_index;
  std::string field;
  std::string reason;
  std::optional<double> value;

  bool operator==(const AuditEntry&) const = default;
};

nlohmann::json to_json(const AuditEntry& e);
void write_audit_jsonl(std::ostream& out, std::span<const AuditEntry> entries);
void write_audit_jsonl(const std::filesystem::path& path, std::span<const AuditEntry> entries);

}  // namespace metsfuse::cohort
