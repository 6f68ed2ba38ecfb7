#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cocreate/env.hpp"
#include "cocreate/rng.hpp"

namespace cocreate {

// Indicator channels carried alongside engagement, in storage order.
// Channel 0..3 = calories, fatigue, mood, sRPE.
inline constexpr int kNumExtraChannels = 4;
inline constexpr std::array<const char*, kNumExtraChannels> kExtraChannelNames = {
    "calories", "fatigue", "mood", "srpe"};

// Declared value ranges per channel (clamping and ingest validation).
struct ChannelRange {
  double lo;
  double hi;
};
inline constexpr ChannelRange kReadinessRange{1.0, 10.0};
inline constexpr std::array<ChannelRange, kNumExtraChannels> kExtraRanges = {{
    {1374.0, 11185.0},  // calories
    {1.0, 5.0},         // fatigue
    {1.0, 5.0},         // mood
    {30.0, 1800.0},     // srpe
}};

// Per-user sampling statistics, either fitted from lifelog data or taken
// from the pooled defaults.
struct UserProfile {
  double readiness_mean = 5.17;
  double readiness_std = 1.66;
  double calories_mean = 3044.0;
  double calories_std = 867.0;
  double fatigue_mean = 2.71;
  double fatigue_std = 0.62;
  double mood_mean = 3.20;
  double mood_std = 0.63;
  double srpe_mean = 379.0;
  double srpe_std = 265.0;

  double extra_mean(int channel) const;
  double extra_std(int channel) const;

  // Pooled population statistics; also the config default.
  static UserProfile pooled_default() { return UserProfile{}; }

  // Throws std::invalid_argument on out-of-range means or negative stds.
  void validate() const;
};

// Target correlations between engagement and each extra channel.  The
// generator preserves each channel's marginal std and hits the target r
// (before clamp attenuation): slope = r * channel_std / readiness_std,
// noise std = sqrt(1 - r^2) * channel_std.
struct ExtrasCoupling {
  std::array<double, kNumExtraChannels> target_r = {0.40, -0.45, 0.45, 0.40};
  void validate() const;  // each |r| < 1
};

enum class ScenarioKind { E1, E2, E3, E4 };

std::string to_string(ScenarioKind k);
ScenarioKind scenario_from_string(const std::string& s);

// Piecewise-constant engagement multiplier over the horizon.  Phase p covers
// steps [p*phase_length, (p+1)*phase_length); the last factor extends to the
// end of the horizon.
struct ScenarioSpec {
  ScenarioKind kind = ScenarioKind::E1;
  int phase_length = 10;
  std::vector<double> multipliers = {1.0};

  // Standard shapes: E1 {1.0}; E2 {1.0, 1.4}; E3 {1.0, 2.0};
  // E4 {0.8, 1.0, 1.6}; boundaries at thirds of the horizon.
  static ScenarioSpec standard(ScenarioKind kind, int horizon);

  void validate() const;
};

double scenario_multiplier(const ScenarioSpec& spec, int t);

// Truncated-normal engagement draw: normal(mean, std) scaled by the scenario
// multiplier, clamped to [0, 10].
double sample_engagement(const UserProfile& profile, const ScenarioSpec& spec, int t, Rng& rng);

// Linear-gaussian extras coupled to the realized engagement; channels are
// clamped to their declared ranges.  Noise-free centering: engagement at the
// profile mean yields exactly the channel means.
std::array<double, kNumExtraChannels> sample_extras(const UserProfile& profile,
                                                    const ExtrasCoupling& coupling,
                                                    double engagement, Rng& rng);

// Engagement source backed by the scenario emulator: one profile per user
// (cycled if fewer profiles than users) and a shared scenario spec.
class ScenarioEmulator : public EngagementSource {
 public:
  ScenarioEmulator(std::vector<UserProfile> profiles, ScenarioSpec spec,
                   ExtrasCoupling coupling = {});

  int extra_channels() const override { return kNumExtraChannels; }
  void sample(int t, int n_users, Rng& rng, std::span<double> engagement,
              std::span<double> extras) const override;

  const std::vector<UserProfile>& profiles() const { return profiles_; }
  const ScenarioSpec& spec() const { return spec_; }

 private:
  std::vector<UserProfile> profiles_;
  ScenarioSpec spec_;
  ExtrasCoupling coupling_;
};

// Deterministic engagement schedule for exact tests and the enumeration
// oracle: engagement[t][i] fixed, extras all zero.
class FixedScheduleSource : public EngagementSource {
 public:
  FixedScheduleSource(std::vector<std::vector<double>> schedule, int extra_channels = 0);

  int extra_channels() const override { return extra_channels_; }
  void sample(int t, int n_users, Rng& rng, std::span<double> engagement,
              std::span<double> extras) const override;

  const std::vector<std::vector<double>>& schedule() const { return schedule_; }

 private:
  std::vector<std::vector<double>> schedule_;
  int extra_channels_;
};

// ---- Lifelog ingestion ----

struct LifelogRecord {
  std::string participant_id;
  std::string date;  // ISO-8601 calendar day
  std::optional<double> readiness;
  std::optional<double> calories;
  std::optional<double> fatigue;
  std::optional<double> mood;
  std::optional<double> srpe;

  std::optional<double> channel(int idx) const;  // 0..3 = extras order
};

struct IngestResult {
  std::vector<LifelogRecord> records;
  std::vector<std::string> diagnostics;  // out-of-range flags, one per finding
};

// Parses a lifelog CSV with the exact header
// `participant_id,date,readiness,calories,fatigue,mood,srpe`.
// Empty cells become missing values.  Out-of-range values are kept but
// flagged in diagnostics; structural problems (bad header, wrong column
// count, unparseable cells, bad dates) throw std::runtime_error with the
// offending row number.
IngestResult ingest_lifelog(const std::string& path);
IngestResult ingest_lifelog_text(const std::string& text, const std::string& origin);

enum class ImputeMethod { Linear, ForwardFill };

// Fills missing entries.  Linear interpolates across interior gaps;
// forward-fill carries the last present value.  Either way, leading and
// trailing gaps take the nearest present value.  Throws on an all-missing
// series.  Present values pass through unchanged.
std::vector<double> impute_missing(const std::vector<std::optional<double>>& series,
                                   ImputeMethod method);

// Product-moment correlation.  Throws on length mismatch, length < 2, or
// zero variance in either argument.
double pearson_correlation(const std::vector<double>& a, const std::vector<double>& b);

// Per-participant sample statistics after imputation.  Records are grouped
// by participant and ordered by date.  Every fitted channel needs >= 2
// present values; violations throw with the participant and channel named.
std::map<std::string, UserProfile> fit_profiles(const std::vector<LifelogRecord>& records,
                                                ImputeMethod method = ImputeMethod::Linear);

// Cycle or truncate a profile list to exactly n entries.
std::vector<UserProfile> profiles_for_population(const std::vector<UserProfile>& profiles, int n);

}  // namespace cocreate
