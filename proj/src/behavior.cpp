#include "cocreate/behavior.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace cocreate {

namespace {

double clamp(double v, double lo, double hi) { return std::min(std::max(v, lo), hi); }

void check_range(double mean, const ChannelRange& r, const char* name) {
  if (!(mean >= r.lo && mean <= r.hi))
    throw std::invalid_argument(std::string("profile ") + name + " mean " +
                                std::to_string(mean) + " outside [" + std::to_string(r.lo) +
                                ", " + std::to_string(r.hi) + "]");
}

}  // namespace

double UserProfile::extra_mean(int channel) const {
  switch (channel) {
    case 0: return calories_mean;
    case 1: return fatigue_mean;
    case 2: return mood_mean;
    case 3: return srpe_mean;
    default: throw std::out_of_range("extra channel index");
  }
}

double UserProfile::extra_std(int channel) const {
  switch (channel) {
    case 0: return calories_std;
    case 1: return fatigue_std;
    case 2: return mood_std;
    case 3: return srpe_std;
    default: throw std::out_of_range("extra channel index");
  }
}

void UserProfile::validate() const {
  check_range(readiness_mean, kReadinessRange, "readiness");
  check_range(calories_mean, kExtraRanges[0], "calories");
  check_range(fatigue_mean, kExtraRanges[1], "fatigue");
  check_range(mood_mean, kExtraRanges[2], "mood");
  check_range(srpe_mean, kExtraRanges[3], "srpe");
  const double stds[] = {readiness_std, calories_std, fatigue_std, mood_std, srpe_std};
  for (double s : stds)
    if (!(s >= 0.0)) throw std::invalid_argument("profile stds must be non-negative");
}

void ExtrasCoupling::validate() const {
  for (double r : target_r)
    if (!(std::abs(r) < 1.0))
      throw std::invalid_argument("extras coupling target correlations must satisfy |r| < 1");
}

std::string to_string(ScenarioKind k) {
  switch (k) {
    case ScenarioKind::E1: return "E1";
    case ScenarioKind::E2: return "E2";
    case ScenarioKind::E3: return "E3";
    case ScenarioKind::E4: return "E4";
  }
  return "E?";
}

ScenarioKind scenario_from_string(const std::string& s) {
  if (s == "E1") return ScenarioKind::E1;
  if (s == "E2") return ScenarioKind::E2;
  if (s == "E3") return ScenarioKind::E3;
  if (s == "E4") return ScenarioKind::E4;
  throw std::invalid_argument("unknown scenario kind '" + s + "' (expected E1..E4)");
}

ScenarioSpec ScenarioSpec::standard(ScenarioKind kind, int horizon) {
  ScenarioSpec s;
  s.kind = kind;
  s.phase_length = std::max(1, horizon / 3);
  switch (kind) {
    case ScenarioKind::E1: s.multipliers = {1.0}; break;
    case ScenarioKind::E2: s.multipliers = {1.0, 1.4}; break;
    case ScenarioKind::E3: s.multipliers = {1.0, 2.0}; break;
    case ScenarioKind::E4: s.multipliers = {0.8, 1.0, 1.6}; break;
  }
  return s;
}

void ScenarioSpec::validate() const {
  if (phase_length < 1) throw std::invalid_argument("scenario.phase_length must be at least 1");
  if (multipliers.empty()) throw std::invalid_argument("scenario.multipliers must be non-empty");
  for (double m : multipliers)
    if (!(m > 0.0)) throw std::invalid_argument("scenario.multipliers must be positive");
  if (kind == ScenarioKind::E1 && (multipliers.size() != 1 || multipliers[0] != 1.0))
    throw std::invalid_argument("scenario E1 must have the single multiplier 1.0");
}

double scenario_multiplier(const ScenarioSpec& spec, int t) {
  if (t < 0) throw std::invalid_argument("scenario_multiplier: t must be non-negative");
  int phase = t / spec.phase_length;
  int last = static_cast<int>(spec.multipliers.size()) - 1;
  return spec.multipliers[std::min(phase, last)];
}

double sample_engagement(const UserProfile& profile, const ScenarioSpec& spec, int t, Rng& rng) {
  double raw = rng.normal(profile.readiness_mean, profile.readiness_std);
  return clamp(scenario_multiplier(spec, t) * raw, 0.0, 10.0);
}

std::array<double, kNumExtraChannels> sample_extras(const UserProfile& profile,
                                                    const ExtrasCoupling& coupling,
                                                    double engagement, Rng& rng) {
  std::array<double, kNumExtraChannels> out{};
  for (int c = 0; c < kNumExtraChannels; ++c) {
    double r = coupling.target_r[c];
    double sd = profile.extra_std(c);
    double slope = profile.readiness_std > 0.0 ? r * sd / profile.readiness_std : 0.0;
    double noise_sd = std::sqrt(1.0 - r * r) * sd;
    // The noise variate is drawn unconditionally so the stream position does
    // not depend on the profile.
    double v = profile.extra_mean(c) + slope * (engagement - profile.readiness_mean) +
               noise_sd * rng.normal();
    out[c] = clamp(v, kExtraRanges[c].lo, kExtraRanges[c].hi);
  }
  return out;
}

ScenarioEmulator::ScenarioEmulator(std::vector<UserProfile> profiles, ScenarioSpec spec,
                                   ExtrasCoupling coupling)
    : profiles_(std::move(profiles)), spec_(std::move(spec)), coupling_(coupling) {
  if (profiles_.empty()) throw std::invalid_argument("scenario emulator needs at least one profile");
  for (const auto& p : profiles_) p.validate();
  spec_.validate();
  coupling_.validate();
}

void ScenarioEmulator::sample(int t, int n_users, Rng& rng, std::span<double> engagement,
                              std::span<double> extras) const {
  for (int i = 0; i < n_users; ++i) {
    const UserProfile& p = profiles_[static_cast<std::size_t>(i) % profiles_.size()];
    double x = sample_engagement(p, spec_, t, rng);
    engagement[i] = x;
    auto e = sample_extras(p, coupling_, x, rng);
    for (int c = 0; c < kNumExtraChannels; ++c)
      extras[static_cast<std::size_t>(c) * n_users + i] = e[c];
  }
}

FixedScheduleSource::FixedScheduleSource(std::vector<std::vector<double>> schedule,
                                         int extra_channels)
    : schedule_(std::move(schedule)), extra_channels_(extra_channels) {
  if (schedule_.empty()) throw std::invalid_argument("fixed schedule must be non-empty");
  for (const auto& row : schedule_)
    if (row.size() != schedule_.front().size())
      throw std::invalid_argument("fixed schedule rows must have equal length");
}

void FixedScheduleSource::sample(int t, int n_users, Rng& /*rng*/,
                                 std::span<double> engagement, std::span<double> extras) const {
  if (t < 0 || t >= static_cast<int>(schedule_.size()))
    throw std::out_of_range("fixed schedule has no row for step " + std::to_string(t));
  if (n_users != static_cast<int>(schedule_[t].size()))
    throw std::invalid_argument("fixed schedule width does not match user count");
  std::copy(schedule_[t].begin(), schedule_[t].end(), engagement.begin());
  std::fill(extras.begin(), extras.end(), 0.0);
}

std::optional<double> LifelogRecord::channel(int idx) const {
  switch (idx) {
    case 0: return calories;
    case 1: return fatigue;
    case 2: return mood;
    case 3: return srpe;
    default: throw std::out_of_range("extra channel index");
  }
}

namespace {

const char* kLifelogHeader = "participant_id,date,readiness,calories,fatigue,mood,srpe";

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

bool valid_iso_date(const std::string& s) {
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') return false;
  for (int i : {0, 1, 2, 3, 5, 6, 8, 9})
    if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
  int month = (s[5] - '0') * 10 + (s[6] - '0');
  int day = (s[8] - '0') * 10 + (s[9] - '0');
  return month >= 1 && month <= 12 && day >= 1 && day <= 31;
}

std::optional<double> parse_cell(const std::string& cell, const char* column, int row,
                                 std::vector<std::string>* diagnostics,
                                 const ChannelRange& range) {
  if (cell.empty()) return std::nullopt;
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(cell, &pos);
  } catch (const std::exception&) {
    throw std::runtime_error("row " + std::to_string(row) + ": cell '" + cell +
                             "' in column " + column + " is not a number");
  }
  if (pos != cell.size())
    throw std::runtime_error("row " + std::to_string(row) + ": cell '" + cell +
                             "' in column " + column + " has trailing characters");
  if (v < range.lo || v > range.hi)
    diagnostics->push_back("row " + std::to_string(row) + ": " + column + " " + cell +
                           " outside declared range [" + std::to_string(range.lo) + ", " +
                           std::to_string(range.hi) + "]");
  return v;
}

}  // namespace

IngestResult ingest_lifelog_text(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error(origin + ": empty file, expected header '" + kLifelogHeader + "'");
  // Strip a UTF-8 BOM if present, then require the exact header.
  if (line.size() >= 3 && line.compare(0, 3, "\xef\xbb\xbf") == 0) line.erase(0, 3);
  while (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kLifelogHeader)
    throw std::runtime_error(origin + ": header mismatch, expected '" + kLifelogHeader +
                             "', got '" + line + "'");

  IngestResult result;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    auto cells = split_csv_line(line);
    if (cells.size() != 7)
      throw std::runtime_error(origin + ": row " + std::to_string(row) + " has " +
                               std::to_string(cells.size()) + " columns, expected 7");
    LifelogRecord rec;
    rec.participant_id = cells[0];
    rec.date = cells[1];
    if (rec.participant_id.empty())
      throw std::runtime_error(origin + ": row " + std::to_string(row) +
                               " has an empty participant_id");
    if (!valid_iso_date(rec.date))
      throw std::runtime_error(origin + ": row " + std::to_string(row) + ": date '" + rec.date +
                               "' is not an ISO-8601 calendar day (YYYY-MM-DD)");
    rec.readiness = parse_cell(cells[2], "readiness", row, &result.diagnostics, kReadinessRange);
    rec.calories = parse_cell(cells[3], "calories", row, &result.diagnostics, kExtraRanges[0]);
    rec.fatigue = parse_cell(cells[4], "fatigue", row, &result.diagnostics, kExtraRanges[1]);
    rec.mood = parse_cell(cells[5], "mood", row, &result.diagnostics, kExtraRanges[2]);
    rec.srpe = parse_cell(cells[6], "srpe", row, &result.diagnostics, kExtraRanges[3]);
    result.records.push_back(std::move(rec));
  }
  return result;
}

IngestResult ingest_lifelog(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open lifelog file '" + path + "'");
  std::ostringstream buf;
  buf << f.rdbuf();
  return ingest_lifelog_text(buf.str(), path);
}

std::vector<double> impute_missing(const std::vector<std::optional<double>>& series,
                                   ImputeMethod method) {
  const int n = static_cast<int>(series.size());
  int first = -1, last = -1;
  for (int i = 0; i < n; ++i)
    if (series[i]) {
      if (first < 0) first = i;
      last = i;
    }
  if (first < 0) throw std::invalid_argument("cannot impute an all-missing series");

  std::vector<double> out(n);
  for (int i = 0; i < n; ++i) out[i] = series[i].value_or(0.0);
  // Leading and trailing gaps take the nearest present value under both
  // methods.
  for (int i = 0; i < first; ++i) out[i] = *series[first];
  for (int i = last + 1; i < n; ++i) out[i] = *series[last];

  int prev = first;
  for (int i = first + 1; i <= last; ++i) {
    if (!series[i]) continue;
    if (i > prev + 1) {
      for (int k = prev + 1; k < i; ++k) {
        if (method == ImputeMethod::Linear) {
          double f = static_cast<double>(k - prev) / static_cast<double>(i - prev);
          out[k] = *series[prev] + f * (*series[i] - *series[prev]);
        } else {
          out[k] = *series[prev];
        }
      }
    }
    prev = i;
  }
  return out;
}

double pearson_correlation(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size())
    throw std::invalid_argument("pearson_correlation: length mismatch (" +
                                std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
  if (a.size() < 2) throw std::invalid_argument("pearson_correlation: need at least 2 samples");
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double da = a[i] - ma, db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0)
    throw std::invalid_argument("pearson_correlation: zero-variance input");
  return sab / std::sqrt(saa * sbb);
}

namespace {

struct SeriesStats {
  double mean;
  double std;  // sample std (n - 1)
};

SeriesStats stats_of(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  double sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
  return {m, sd};
}

}  // namespace

std::map<std::string, UserProfile> fit_profiles(const std::vector<LifelogRecord>& records,
                                                ImputeMethod method) {
  std::map<std::string, std::vector<const LifelogRecord*>> by_participant;
  for (const auto& r : records) by_participant[r.participant_id].push_back(&r);

  std::map<std::string, UserProfile> out;
  for (auto& [pid, recs] : by_participant) {
    std::stable_sort(recs.begin(), recs.end(),
                     [](const LifelogRecord* a, const LifelogRecord* b) { return a->date < b->date; });
    auto fit_channel = [&](const char* name,
                           auto getter) -> SeriesStats {
      std::vector<std::optional<double>> series;
      series.reserve(recs.size());
      int present = 0;
      for (const auto* r : recs) {
        series.push_back(getter(*r));
        if (series.back()) ++present;
      }
      if (present < 2)
        throw std::runtime_error("participant '" + pid + "' has fewer than 2 present values for " +
                                 name + "; cannot fit a profile");
      return stats_of(impute_missing(series, method));
    };
    UserProfile p;
    auto rs = fit_channel("readiness", [](const LifelogRecord& r) { return r.readiness; });
    auto cs = fit_channel("calories", [](const LifelogRecord& r) { return r.calories; });
    auto fs = fit_channel("fatigue", [](const LifelogRecord& r) { return r.fatigue; });
    auto ms = fit_channel("mood", [](const LifelogRecord& r) { return r.mood; });
    auto ss = fit_channel("srpe", [](const LifelogRecord& r) { return r.srpe; });
    p.readiness_mean = rs.mean;
    p.readiness_std = rs.std;
    p.calories_mean = cs.mean;
    p.calories_std = cs.std;
    p.fatigue_mean = fs.mean;
    p.fatigue_std = fs.std;
    p.mood_mean = ms.mean;
    p.mood_std = ms.std;
    p.srpe_mean = ss.mean;
    p.srpe_std = ss.std;
    out.emplace(pid, p);
  }
  return out;
}

std::vector<UserProfile> profiles_for_population(const std::vector<UserProfile>& profiles, int n) {
  if (profiles.empty()) throw std::invalid_argument("need at least one profile");
  std::vector<UserProfile> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) out.push_back(profiles[static_cast<std::size_t>(i) % profiles.size()]);
  return out;
}

}  // namespace cocreate
