#include "metsfuse/cohort/io.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "metsfuse/error.hpp"

namespace metsfuse::cohort {
namespace {

using nlohmann::json;

std::optional<double> opt_number(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (!it->is_number()) throw DataError(fmt::format("field '{}' must be a number", key));
  double v = it->get<double>();
  if (!std::isfinite(v)) throw DataError(fmt::format("field '{}' is not finite", key));
  return v;
}

void put(json& j, const char* key, const std::optional<double>& v) {
  if (v) {
    j[key] = *v;
  } else {
    j[key] = nullptr;
  }
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

std::string csv_cell(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string csv_number(const std::optional<double>& v) { return v ? fmt::format("{}", *v) : std::string{}; }

}  // namespace

json to_json(const DailyRecord& r) {
  json j;
  j["subject_id"] = r.subject_id;
  j["day_index"] = r.day_index;
  if (r.text) {
    j["text"] = *r.text;
  } else {
    j["text"] = nullptr;
  }
  for (auto f : kAllPhysio) put(j, std::string(to_string(f)).c_str(), r.value(f));
  json prov;
  prov["text"] = to_string(r.provenance.text);
  for (auto f : kAllPhysio) prov[std::string(to_string(f))] = to_string(r.provenance[f]);
  j["provenance"] = prov;
  return j;
}

DailyRecord record_from_json(const json& j) {
  if (!j.is_object()) throw DataError("record must be a JSON object");
  DailyRecord r;
  auto sid = j.find("subject_id");
  if (sid == j.end() || !sid->is_string() || sid->get<std::string>().empty()) {
    throw DataError("record needs a non-empty string subject_id");
  }
  r.subject_id = sid->get<std::string>();
  auto day = j.find("day_index");
  if (day == j.end() || !day->is_number_integer()) throw DataError("record needs an integer day_index");
  r.day_index = day->get<int>();
  if (auto t = j.find("text"); t != j.end() && !t->is_null()) {
    if (!t->is_string()) throw DataError("field 'text' must be a string");
    r.text = t->get<std::string>();
  }
  for (auto f : kAllPhysio) r.value(f) = opt_number(j, std::string(to_string(f)).c_str());
  if (auto p = j.find("provenance"); p != j.end() && !p->is_null()) {
    if (p->is_string()) {
      // a single provenance applies to every field
      auto all = parse_provenance(p->get<std::string>());
      r.provenance.text = all;
      r.provenance.physio.fill(all);
    } else if (p->is_object()) {
      if (auto t = p->find("text"); t != p->end()) r.provenance.text = parse_provenance(t->get<std::string>());
      for (auto f : kAllPhysio) {
        if (auto v = p->find(std::string(to_string(f))); v != p->end()) {
          r.provenance[f] = parse_provenance(v->get<std::string>());
        }
      }
    } else {
      throw DataError("field 'provenance' must be a string or object");
    }
  }
  return r;
}

json to_json(const ExamPanel& p) {
  json j;
  j["subject_id"] = p.subject_id;
  put(j, "bmi", p.bmi);
  put(j, "fpg", p.fpg);
  put(j, "two_hpg", p.two_hpg);
  put(j, "sbp", p.sbp);
  put(j, "dbp", p.dbp);
  put(j, "tg", p.tg);
  put(j, "hdl", p.hdl);
  if (p.sex) {
    j["sex"] = *p.sex == Sex::Male ? "male" : "female";
  } else {
    j["sex"] = nullptr;
  }
  j["diagnosed_diabetes"] = p.diagnosed_diabetes;
  j["diagnosed_hypertension"] = p.diagnosed_hypertension;
  put(j, "age", p.age);
  put(j, "height", p.height);
  put(j, "waist", p.waist);
  return j;
}

ExamPanel panel_from_json(const json& j) {
  if (!j.is_object()) throw DataError("exam panel must be a JSON object");
  ExamPanel p;
  auto sid = j.find("subject_id");
  if (sid == j.end() || !sid->is_string()) throw DataError("exam panel needs a string subject_id");
  p.subject_id = sid->get<std::string>();
  try {
    p.bmi = opt_number(j, "bmi");
    p.fpg = opt_number(j, "fpg");
    p.two_hpg = opt_number(j, "two_hpg");
    p.sbp = opt_number(j, "sbp");
    p.dbp = opt_number(j, "dbp");
    p.tg = opt_number(j, "tg");
    p.hdl = opt_number(j, "hdl");
    p.age = opt_number(j, "age");
    p.height = opt_number(j, "height");
    p.waist = opt_number(j, "waist");
  } catch (const DataError& e) {
    throw DataError(fmt::format("exam panel {}: {}", p.subject_id, e.what()));
  }
  if (auto s = j.find("sex"); s != j.end() && !s->is_null()) {
    auto v = s->is_string() ? s->get<std::string>() : std::string{};
    if (v == "male") {
      p.sex = Sex::Male;
    } else if (v == "female") {
      p.sex = Sex::Female;
    } else {
      throw DataError(fmt::format("exam panel {}: sex must be \"male\" or \"female\"", p.subject_id));
    }
  }
  p.diagnosed_diabetes = j.value("diagnosed_diabetes", false);
  p.diagnosed_hypertension = j.value("diagnosed_hypertension", false);
  return p;
}

std::vector<DailyRecord> read_records_jsonl(std::istream& in, const std::string& source) {
  std::vector<DailyRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(record_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw DataError(fmt::format("{}:{}: invalid JSON: {}", source, lineno, e.what()));
    } catch (const DataError& e) {
      throw DataError(fmt::format("{}:{}: {}", source, lineno, e.what()));
    }
  }
  return out;
}

std::vector<DailyRecord> read_records_jsonl(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_records_jsonl(in, path.string());
}

void write_records_jsonl(std::ostream& out, std::span<const DailyRecord> records) {
  for (const auto& r : records) out << to_json(r).dump() << '\n';
}

void write_records_jsonl(const std::filesystem::path& path, std::span<const DailyRecord> records) {
  auto out = open_out(path);
  write_records_jsonl(out, records);
}

std::vector<ExamPanel> parse_panels_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(fmt::format("invalid exam panel JSON: {}", e.what()));
  }
  if (!j.is_array()) throw DataError("exam panel file must hold a JSON array");
  std::vector<ExamPanel> out;
  std::set<std::string> seen;
  for (const auto& item : j) {
    out.push_back(panel_from_json(item));
    if (!seen.insert(out.back().subject_id).second) {
      throw DataError("duplicate exam panel for subject " + out.back().subject_id);
    }
  }
  return out;
}

std::vector<ExamPanel> read_panels_json(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_panels_json(ss.str());
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_panels_json(const std::filesystem::path& path, std::span<const ExamPanel> panels) {
  json j = json::array();
  for (const auto& p : panels) j.push_back(to_json(p));
  auto out = open_out(path);
  out << j.dump(2) << '\n';
}

void write_records_csv(std::ostream& out, std::span<const DailyRecord> records, const SubjectLabels* labels) {
  out << "subject_id,day_index,label,text,hr_min,hr_max,spo2_mean,steps,provenance\n";
  for (const auto& r : records) {
    std::string label;
    if (labels) {
      if (auto it = labels->find(r.subject_id); it != labels->end()) label = std::to_string(it->second);
    }
    std::string prov = fmt::format("text={}", to_string(r.provenance.text));
    for (auto f : kAllPhysio) prov += fmt::format(";{}={}", to_string(f), to_string(r.provenance[f]));
    out << csv_cell(r.subject_id) << ',' << r.day_index << ',' << label << ',' << csv_cell(r.text.value_or(""))
        << ',' << csv_number(r.hr_min) << ',' << csv_number(r.hr_max) << ',' << csv_number(r.spo2_mean) << ','
        << csv_number(r.steps) << ',' << prov << '\n';
  }
}

void write_records_csv(const std::filesystem::path& path, std::span<const DailyRecord> records,
                       const SubjectLabels* labels) {
  auto out = open_out(path);
  write_records_csv(out, records, labels);
}

json to_json(const AuditEntry& e) {
  json j;
  j["action"] = e.action;
  j["subject_id"] = e.subject_id;
  if (e.day_index) {
    j["day_index"] = *e.day_index;
  } else {
    j["day_index"] = nullptr;
  }
  j["field"] = e.field;
  j["reason"] = e.reason;
  put(j, "value", e.value);
  return j;
}

void write_audit_jsonl(std::ostream& out, std::span<const AuditEntry> entries) {
  for (const auto& e : entries) out << to_json(e).dump() << '\n';
}

void write_audit_jsonl(const std::filesystem::path& path, std::span<const AuditEntry> entries) {
  auto out = open_out(path);
  write_audit_jsonl(out, entries);
}

}  // namespace metsfuse::cohort
