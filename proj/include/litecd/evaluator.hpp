#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "litecd/di.hpp"

namespace litecd {

/// Pixel tallies of a predicted change map against a reference.
/// fa: reference unchanged, predicted changed. ma: reference changed, predicted unchanged.
struct ConfusionCounts {
  std::uint64_t tp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fa = 0;
  std::uint64_t ma = 0;

  std::uint64_t total() const { return tp + tn + fa + ma; }
  std::uint64_t nc() const { return tn + fa; }  // non-changed reference pixels
  std::uint64_t c() const { return tp + ma; }   // changed reference pixels

  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

ConfusionCounts confusion(const ChangeMask& pred, const ChangeMask& ref);

/// Cohen's kappa from exact integer counts; 0 when expected agreement is 1.
double kappa(const ConfusionCounts& counts);

/// True when expected agreement equals 1 (a single class in both maps).
bool kappa_degenerate(const ConfusionCounts& counts);

enum class PmaDenominator { NonChanged, Changed };

PmaDenominator parse_pma_denominator(const std::string& text);

struct MetricsReport {
  ConfusionCounts counts;
  std::optional<double> p_fa;  // empty when the denominator is zero
  std::optional<double> p_ma;
  double kappa = 0.0;
  bool kappa_degenerate = false;
};

/// p_fa = fa / nc; p_ma = ma / nc (or ma / c with PmaDenominator::Changed).
MetricsReport report(const ChangeMask& pred, const ChangeMask& ref,
                     PmaDenominator pma = PmaDenominator::NonChanged);
MetricsReport report(const ConfusionCounts& counts, PmaDenominator pma = PmaDenominator::NonChanged);

/// `dataset,p_fa,p_ma,kappa` with 6 decimals; undefined rates print as NA.
std::string csv_row(const std::string& dataset, const MetricsReport& r);

inline constexpr const char* kCsvHeader = "dataset,p_fa,p_ma,kappa";

/// 8-bit error map: false alarms 128, missed alarms 255, agreement 0.
Raster<MaskTag, std::uint8_t> error_map(const ChangeMask& pred, const ChangeMask& ref);

}  // namespace litecd
