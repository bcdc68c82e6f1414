#include "sfpca/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "sfpca/errors.hpp"
#include "sfpca/stats.hpp"

namespace sfpca {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.emplace_back("");
  return out;
}

double parse_double(const std::string& tok, const std::string& what, std::size_t row) {
  double v = 0.0;
  const char* first = tok.data();
  const char* last = tok.data() + tok.size();
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc{} || res.ptr != last) {
    throw ParseError("row " + std::to_string(row) + ": cannot parse " + what + " '" + tok + "'");
  }
  if (!std::isfinite(v)) {
    throw ParseError("row " + std::to_string(row) + ": non-finite " + what + " '" + tok + "'");
  }
  return v;
}

LongitudinalDataset group_rows(const std::vector<std::string>& ids,
                               const std::vector<double>& times,
                               const std::vector<double>& values) {
  LongitudinalDataset data;
  std::map<std::string, int> index;
  std::vector<std::vector<std::pair<double, double>>> rows;
  std::vector<std::string> order;
  for (std::size_t r = 0; r < ids.size(); ++r) {
    auto it = index.find(ids[r]);
    if (it == index.end()) {
      it = index.emplace(ids[r], static_cast<int>(order.size())).first;
      order.push_back(ids[r]);
      rows.emplace_back();
    }
    rows[it->second].emplace_back(times[r], values[r]);
  }
  for (std::size_t i = 0; i < order.size(); ++i) {
    auto& obs = rows[i];
    std::stable_sort(obs.begin(), obs.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    for (std::size_t j = 1; j < obs.size(); ++j) {
      if (obs[j].first == obs[j - 1].first) {
        throw ValidationError("duplicate time " + std::to_string(obs[j].first) +
                              " for subject '" + order[i] + "'");
      }
    }
    SubjectRecord rec;
    rec.id = order[i];
    rec.times.resize(static_cast<int>(obs.size()));
    rec.values.resize(static_cast<int>(obs.size()));
    for (std::size_t j = 0; j < obs.size(); ++j) {
      rec.times[static_cast<int>(j)] = obs[j].first;
      rec.values[static_cast<int>(j)] = obs[j].second;
    }
    data.n_total += rec.n_obs();
    data.subjects.push_back(std::move(rec));
  }
  double tmin = std::numeric_limits<double>::infinity();
  double tmax = -std::numeric_limits<double>::infinity();
  for (const auto& s : data.subjects) {
    tmin = std::min(tmin, s.times.minCoeff());
    tmax = std::max(tmax, s.times.maxCoeff());
  }
  if (!data.subjects.empty()) data.time_range = {tmin, tmax};
  return data;
}

}  // namespace

int LongitudinalDataset::subject_index(const std::string& id) const {
  for (int i = 0; i < n_subjects(); ++i) {
    if (subjects[i].id == id) return i;
  }
  throw LookupError("unknown subject '" + id + "'");
}

std::vector<double> LongitudinalDataset::pooled_times() const {
  std::vector<double> out;
  out.reserve(n_total);
  for (const auto& s : subjects) {
    out.insert(out.end(), s.times.data(), s.times.data() + s.times.size());
  }
  return out;
}

std::vector<double> LongitudinalDataset::pooled_values() const {
  std::vector<double> out;
  out.reserve(n_total);
  for (const auto& s : subjects) {
    out.insert(out.end(), s.values.data(), s.values.data() + s.values.size());
  }
  return out;
}

LongitudinalDataset LongitudinalDataset::without_subject(int i) const {
  if (i < 0 || i >= n_subjects()) throw LookupError("subject index out of range");
  LongitudinalDataset out = *this;
  out.n_total -= out.subjects[i].n_obs();
  out.subjects.erase(out.subjects.begin() + i);
  return out;
}

void LongitudinalDataset::validate() const {
  int total = 0;
  for (const auto& s : subjects) {
    if (s.n_obs() < 1) throw ValidationError("subject '" + s.id + "' has no observations");
    if (s.times.size() != s.values.size()) {
      throw ValidationError("subject '" + s.id + "' has mismatched times/values");
    }
    for (int j = 0; j < s.n_obs(); ++j) {
      if (!std::isfinite(s.times[j]) || !std::isfinite(s.values[j])) {
        throw ValidationError("subject '" + s.id + "' has non-finite entries");
      }
      if (j > 0 && s.times[j] <= s.times[j - 1]) {
        throw ValidationError("subject '" + s.id + "' times not strictly increasing");
      }
    }
    total += s.n_obs();
  }
  if (total != n_total) throw ValidationError("n_total does not match subject counts");
}

LongitudinalDataset make_dataset(const std::vector<std::string>& subject_ids,
                                 const std::vector<double>& times,
                                 const std::vector<double>& values) {
  if (subject_ids.size() != times.size() || times.size() != values.size()) {
    throw ValidationError("subject_ids, times, values must have equal length");
  }
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (!std::isfinite(times[i]) || !std::isfinite(values[i])) {
      throw ValidationError("non-finite entry at position " + std::to_string(i));
    }
  }
  auto data = group_rows(subject_ids, times, values);
  data.validate();
  return data;
}

LongitudinalDataset load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LookupError("cannot open data file '" + path + "'");

  std::string line;
  if (!std::getline(in, line)) throw FormatError("empty file '" + path + "'");
  const auto header = split_csv_line(line);
  int col_id = -1, col_time = -1, col_value = -1;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == "subject_id") col_id = static_cast<int>(c);
    if (header[c] == "time") col_time = static_cast<int>(c);
    if (header[c] == "value") col_value = static_cast<int>(c);
  }
  if (col_id < 0) throw FormatError("missing column 'subject_id' in '" + path + "'");
  if (col_time < 0) throw FormatError("missing column 'time' in '" + path + "'");
  if (col_value < 0) throw FormatError("missing column 'value' in '" + path + "'");

  std::vector<std::string> ids;
  std::vector<double> times, values;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const auto fields = split_csv_line(line);
    const int needed = std::max({col_id, col_time, col_value}) + 1;
    if (static_cast<int>(fields.size()) < needed) {
      throw ParseError("row " + std::to_string(row) + ": expected at least " +
                       std::to_string(needed) + " fields, got " + std::to_string(fields.size()));
    }
    const std::string& id = fields[col_id];
    if (id.empty()) throw ParseError("row " + std::to_string(row) + ": empty subject_id");
    ids.push_back(id);
    times.push_back(parse_double(fields[col_time], "time", row));
    values.push_back(parse_double(fields[col_value], "value", row));
  }
  if (ids.empty()) throw FormatError("no data rows in '" + path + "'");
  auto data = group_rows(ids, times, values);
  data.validate();
  return data;
}

void save_csv(const LongitudinalDataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw LookupError("cannot open '" + path + "' for writing");
  out << "subject_id,time,value\n";
  char buf[64];
  for (const auto& s : data.subjects) {
    for (int j = 0; j < s.n_obs(); ++j) {
      out << s.id << ',';
      std::snprintf(buf, sizeof(buf), "%.17g", s.times[j]);
      out << buf << ',';
      std::snprintf(buf, sizeof(buf), "%.17g", s.values[j]);
      out << buf << '\n';
    }
  }
}

std::pair<LongitudinalDataset, Standardization> standardize(const LongitudinalDataset& data) {
  if (data.n_total < 2) throw DegenerateDataError("need at least 2 observations to standardize");
  const auto pooled = data.pooled_values();
  const double m = stats::mean(pooled);
  double ss = 0.0;
  for (double v : pooled) ss += (v - m) * (v - m);
  const double sd = std::sqrt(ss / static_cast<double>(pooled.size() - 1));
  if (sd <= 0.0 || !std::isfinite(sd)) {
    throw DegenerateDataError("outcome is constant; cannot standardize");
  }
  LongitudinalDataset out = data;
  for (auto& s : out.subjects) {
    s.values = (s.values.array() - m) / sd;
  }
  Standardization st{m, sd, true};
  return {out, st};
}

LongitudinalDataset rescale_time(const LongitudinalDataset& data) {
  const auto [tmin, tmax] = data.time_range;
  if (!(tmax > tmin)) throw DegenerateDataError("all observations share one time point");
  LongitudinalDataset out = data;
  const double span = tmax - tmin;
  for (auto& s : out.subjects) {
    s.times = (s.times.array() - tmin) / span;
  }
  out.time_rescaled = true;
  out.time_range = data.time_range;  // original units, for reporting
  return out;
}

}  // namespace sfpca
