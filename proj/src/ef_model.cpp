#include "vmtco2/ef_model.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>

#include "vmtco2/errors.hpp"
#include "vmtco2/io.hpp"

namespace vmtco2 {

std::string_view to_string(TimeOfDay tod) {
  switch (tod) {
    case TimeOfDay::AM: return "AM";
    case TimeOfDay::MD: return "MD";
    case TimeOfDay::PM: return "PM";
    case TimeOfDay::NT: return "NT";
  }
  throw InputError("unknown time of day");
}

TimeOfDay parse_time_of_day(std::string_view s) {
  std::string u(s);
  std::transform(u.begin(), u.end(), u.begin(), [](unsigned char c) { return std::toupper(c); });
  for (auto t : kTimesOfDay)
    if (to_string(t) == u) return t;
  throw InputError("unknown time of day '" + std::string(s) + "'");
}

EfModel::EfModel(const BinArray& ef_by_bin, const ShareTable& vmt_share, const std::array<double, 4>& tod_share)
    : ef_by_bin_(ef_by_bin), vmt_share_(vmt_share), tod_share_(tod_share) {
  for (std::size_t b = 0; b < kNumSpeedBins; ++b) {
    if (!(ef_by_bin_[b] > 0.0) || !std::isfinite(ef_by_bin_[b]))
      throw InputError("emission factor for bin " + std::to_string(b) + " must be positive");
    for (double p : vmt_share_[b])
      if (!(p >= 0.0 && p <= 1.0)) throw InputError("VMT share outside [0,1] in bin " + std::to_string(b));
  }
  for (auto t : kTimesOfDay) {
    double sum = 0.0;
    for (std::size_t b = 0; b < kNumSpeedBins; ++b) sum += vmt_share_[b][static_cast<int>(t)];
    if (std::abs(sum - 1.0) > kBinShareSumTolerance)
      throw InputError("speed-bin shares for " + std::string(to_string(t)) + " sum to " + io::fmt(sum));
  }
  double tod_sum = 0.0;
  for (double p : tod_share_) {
    if (!(p >= 0.0 && p <= 1.0)) throw InputError("time-of-day share outside [0,1]");
    tod_sum += p;
  }
  if (std::abs(tod_sum - 1.0) > kTodShareSumTolerance)
    throw InputError("time-of-day shares sum to " + io::fmt(tod_sum));
}

namespace {

// Columns AM, MD, PM, NT in percent.
constexpr double kSharePercent[kNumSpeedBins][4] = {
    {2.30, 9.13, 3.33, 3.93},    {0.43, 0.57, 0.38, 0.20},    {3.16, 4.47, 4.03, 1.38},
    {12.03, 15.30, 13.54, 9.23}, {17.01, 18.92, 17.31, 13.04}, {12.80, 12.48, 13.13, 13.20},
    {10.95, 9.16, 10.46, 13.10}, {8.81, 7.29, 9.94, 9.23},    {5.72, 6.65, 8.43, 4.42},
    {7.04, 4.86, 6.79, 7.89},    {6.29, 2.43, 4.53, 7.21},    {4.45, 4.00, 3.75, 5.55},
    {6.79, 3.47, 2.89, 7.99},    {2.23, 1.26, 1.49, 3.62},
};

constexpr EfModel::BinArray kEfGramsPerMile = {1184.21, 1184.21, 873.37, 675.03, 539.09, 446.67, 383.63,
                                              344.23,  319.98,  308.42, 308.34, 319.60, 340.58, 380.39};

constexpr std::array<double, 4> kTodShare = {0.1662, 0.3266, 0.2109, 0.2943};

}  // namespace

EfModel load_default_ef_model() {
  EfModel::ShareTable shares{};
  for (std::size_t b = 0; b < kNumSpeedBins; ++b)
    for (int t = 0; t < 4; ++t) shares[b][t] = kSharePercent[b][t] / 100.0;
  return EfModel(kEfGramsPerMile, shares, kTodShare);
}

EfModel parse_ef_model_csv(std::istream& in) {
  const auto table = io::parse_csv(in);
  const auto cols = table.require({"bin_lower", "ef_w", "p_am", "p_md", "p_pm", "p_nt"});
  if (table.rows.size() != kNumSpeedBins)
    throw InputError("EF model needs " + std::to_string(kNumSpeedBins) + " rows, found " +
                     std::to_string(table.rows.size()));
  EfModel::BinArray ef{};
  EfModel::ShareTable shares{};
  std::array<bool, kNumSpeedBins> seen{};
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const int line = table.lines[r];
    const double lower = io::parse_double(row[cols[0]], "bin_lower", line);
    const double idx = lower / 5.0;
    if (idx < 0 || idx >= kNumSpeedBins || idx != std::floor(idx))
      throw InputError("line " + std::to_string(line) + ": bin_lower must be a multiple of 5 in [0,65]");
    const auto b = static_cast<std::size_t>(idx);
    if (seen[b]) throw InputError("line " + std::to_string(line) + ": duplicate bin_lower");
    seen[b] = true;
    ef[b] = io::parse_double(row[cols[1]], "ef_w", line);
    for (int t = 0; t < 4; ++t) shares[b][t] = io::parse_double(row[cols[2 + t]], "share", line);
  }
  return EfModel(ef, shares, kTodShare);
}

EfModel load_ef_model_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  try {
    return parse_ef_model_csv(in);
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

double snap_speed_limit(double mph) { return 5.0 * std::floor(mph / 5.0 + 0.5); }

std::size_t included_bins(double speed_limit) {
  const double snapped = snap_speed_limit(speed_limit);
  const auto n = static_cast<std::size_t>(snapped / 5.0) + 1;
  return std::min(n, kNumSpeedBins);
}

double weighted_ef(const EfModel& model, double speed_limit, TimeOfDay tod) {
  if (!(speed_limit > 0.0) || !std::isfinite(speed_limit))
    throw InputError("speed limit must be positive, got " + io::fmt(speed_limit));
  const std::size_t n = included_bins(speed_limit);
  double num = 0.0;
  double den = 0.0;
  for (std::size_t b = 0; b < n; ++b) {
    const double p = model.vmt_share(b, tod);
    num += model.ef(b) * p;
    den += p;
  }
  if (!(den > 0.0))
    throw InputError("no VMT share at or below " + io::fmt(speed_limit) + " mph for " +
                     std::string(to_string(tod)));
  return num / den;
}

}  // namespace vmtco2
