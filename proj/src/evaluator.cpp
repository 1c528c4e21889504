#include "litecd/evaluator.hpp"

#include <cstdio>

namespace litecd {

namespace {

void check_pair(const ChangeMask& pred, const ChangeMask& ref) {
  if (pred.height != ref.height || pred.width != ref.width)
    contract_fail("evaluation: prediction is " + std::to_string(pred.height) + "x" + std::to_string(pred.width) +
                  " but reference is " + std::to_string(ref.height) + "x" + std::to_string(ref.width));
  for (std::size_t i = 0; i < pred.values.size(); ++i)
    if (pred.values[i] > 1 || ref.values[i] > 1) contract_fail("evaluation: masks must be binary");
}

using Wide = __int128;

}  // namespace

ConfusionCounts confusion(const ChangeMask& pred, const ChangeMask& ref) {
  check_pair(pred, ref);
  ConfusionCounts c;
  for (std::size_t i = 0; i < pred.values.size(); ++i) {
    const bool p = pred.values[i] != 0, r = ref.values[i] != 0;
    if (p && r)
      ++c.tp;
    else if (!p && !r)
      ++c.tn;
    else if (p)
      ++c.fa;
    else
      ++c.ma;
  }
  return c;
}

// With S = (tp+ma)(tp+fa) + (tn+fa)(tn+ma) and N the total:
// kappa = ((tp+tn) N - S) / (N^2 - S), evaluated in integers before the division.
bool kappa_degenerate(const ConfusionCounts& k) {
  const Wide n = k.total();
  const Wide s = Wide(k.tp + k.ma) * (k.tp + k.fa) + Wide(k.tn + k.fa) * (k.tn + k.ma);
  return n * n == s;
}

double kappa(const ConfusionCounts& k) {
  if (k.total() == 0) contract_fail("kappa: no pixels counted");
  const Wide n = k.total();
  const Wide s = Wide(k.tp + k.ma) * (k.tp + k.fa) + Wide(k.tn + k.fa) * (k.tn + k.ma);
  const Wide den = n * n - s;
  if (den == 0) return 0.0;
  const Wide num = Wide(k.tp + k.tn) * n - s;
  return static_cast<double>(num) / static_cast<double>(den);
}

PmaDenominator parse_pma_denominator(const std::string& text) {
  if (text == "nc") return PmaDenominator::NonChanged;
  if (text == "changed") return PmaDenominator::Changed;
  contract_fail("pMA denominator must be 'nc' or 'changed', got '" + text + "'");
}

MetricsReport report(const ConfusionCounts& counts, PmaDenominator pma) {
  MetricsReport r;
  r.counts = counts;
  if (counts.nc() > 0) r.p_fa = static_cast<double>(counts.fa) / static_cast<double>(counts.nc());
  const std::uint64_t ma_den = pma == PmaDenominator::NonChanged ? counts.nc() : counts.c();
  if (ma_den > 0) r.p_ma = static_cast<double>(counts.ma) / static_cast<double>(ma_den);
  r.kappa = kappa(counts);
  r.kappa_degenerate = kappa_degenerate(counts);
  return r;
}

MetricsReport report(const ChangeMask& pred, const ChangeMask& ref, PmaDenominator pma) {
  return report(confusion(pred, ref), pma);
}

std::string csv_row(const std::string& dataset, const MetricsReport& r) {
  auto fmt = [](const std::optional<double>& v) {
    if (!v) return std::string("NA");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", *v);
    return std::string(buf);
  };
  return dataset + "," + fmt(r.p_fa) + "," + fmt(r.p_ma) + "," + fmt(r.kappa);
}

Raster<MaskTag, std::uint8_t> error_map(const ChangeMask& pred, const ChangeMask& ref) {
  check_pair(pred, ref);
  Raster<MaskTag, std::uint8_t> out(pred.height, pred.width, 0);
  for (std::size_t i = 0; i < pred.values.size(); ++i) {
    if (pred.values[i] && !ref.values[i]) out.values[i] = 128;
    if (!pred.values[i] && ref.values[i]) out.values[i] = 255;
  }
  return out;
}

}  // namespace litecd
