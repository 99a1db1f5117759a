#pragma once

#include <array>
#include <filesystem>
#include <istream>
#include <limits>
#include <string>
#include <string_view>

namespace vmtco2 {

enum class TimeOfDay { AM = 0, MD = 1, PM = 2, NT = 3 };

inline constexpr std::array<TimeOfDay, 4> kTimesOfDay{TimeOfDay::AM, TimeOfDay::MD, TimeOfDay::PM,
                                                      TimeOfDay::NT};
inline constexpr std::size_t kNumSpeedBins = 14;

std::string_view to_string(TimeOfDay tod);
/// Accepts "AM", "MD", "PM", "NT" (case-insensitive); anything else is an InputError.
TimeOfDay parse_time_of_day(std::string_view s);

/// One 5 mph speed interval. The last bin is open-ended (65+).
struct SpeedBin {
  double lower = 0.0;
  double upper = 0.0;

  static constexpr SpeedBin at(std::size_t index) {
    const double lo = 5.0 * static_cast<double>(index);
    return {lo, index + 1 == kNumSpeedBins ? std::numeric_limits<double>::infinity() : lo + 5.0};
  }
  bool contains(double mph) const { return mph >= lower && mph < upper; }
};

/// Speed-bin emission factors (g CO2e / mile) and VMT shares by time of day.
///
/// Shares are stored as fractions exactly as tabulated; column sums are only
/// required to be 1 within rounding of the published percentages, and every
/// weighted factor divides by the realised share sum.
class EfModel {
 public:
  using BinArray = std::array<double, kNumSpeedBins>;
  using ShareTable = std::array<std::array<double, 4>, kNumSpeedBins>;

  /// Tolerance on each speed-bin share column sum.
  static constexpr double kBinShareSumTolerance = 1e-3;
  /// Tolerance on the four time-of-day shares (published values sum to 0.998).
  static constexpr double kTodShareSumTolerance = 5e-3;

  /// Validates the invariants; throws InputError on violation.
  EfModel(const BinArray& ef_by_bin, const ShareTable& vmt_share, const std::array<double, 4>& tod_share);

  double ef(std::size_t bin) const { return ef_by_bin_[bin]; }
  double vmt_share(std::size_t bin, TimeOfDay tod) const { return vmt_share_[bin][static_cast<int>(tod)]; }
  double tod_share(TimeOfDay tod) const { return tod_share_[static_cast<int>(tod)]; }

  const BinArray& ef_by_bin() const { return ef_by_bin_; }
  const std::array<double, 4>& tod_shares() const { return tod_share_; }

 private:
  BinArray ef_by_bin_;
  ShareTable vmt_share_;
  std::array<double, 4> tod_share_;
};

/// The embedded Boston-region table: 14 speed bins, four periods.
EfModel load_default_ef_model();

/// Override file with columns bin_lower, ef_w, p_am, p_md, p_pm, p_nt (fractions).
/// Time-of-day shares keep their default values.
EfModel parse_ef_model_csv(std::istream& in);
EfModel load_ef_model_csv(const std::filesystem::path& path);

/// Snaps to the nearest multiple of 5 mph, ties rounding up.
double snap_speed_limit(double mph);

/// Number of leading bins whose lower bound is at or below the snapped limit.
std::size_t included_bins(double speed_limit);

/// VMT-share-weighted mean emission factor over every bin with lower bound
/// at or below the snapped speed limit. Throws InputError for limit <= 0.
double weighted_ef(const EfModel& model, double speed_limit, TimeOfDay tod);

}  // namespace vmtco2
