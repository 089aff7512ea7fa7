#include "ctr/metrics.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace ctr {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double capped_ratio_db(double num, double den) {
  if (num <= 0.0) return -kMetricCapDb;
  if (den <= 0.0) return kMetricCapDb;
  const double db = 10.0 * std::log10(num / den);
  return std::clamp(db, -kMetricCapDb, kMetricCapDb);
}

}  // namespace

double si_sdr(std::span<const double> reference,
              std::span<const double> estimate) {
  if (reference.size() != estimate.size())
    throw std::invalid_argument("length mismatch");
  const double ref_e = dot(reference, reference);
  if (ref_e <= 0.0) throw std::invalid_argument("reference is all zero");
  const double alpha = dot(estimate, reference) / ref_e;
  double sig = 0.0, err = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    const double s = alpha * reference[i];
    sig += s * s;
    const double e = estimate[i] - s;
    err += e * e;
  }
  return capped_ratio_db(sig, err);
}

double snr(std::span<const double> reference, std::span<const double> estimate) {
  if (reference.size() != estimate.size())
    throw std::invalid_argument("length mismatch");
  double sig = 0.0, err = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    sig += reference[i] * reference[i];
    const double e = estimate[i] - reference[i];
    err += e * e;
  }
  return capped_ratio_db(sig, err);
}

McResidualReport mc_residual_report(const MixtureSet& mixtures,
                                    std::span<const Spectrogram> estimates,
                                    const HyperParams& hp,
                                    const LossOptions& opts) {
  const LossBreakdown bd = mc_loss_total(mixtures, estimates, hp, opts);
  McResidualReport rep;
  rep.close_talk = bd.mc_close_talk;
  rep.far_field = bd.mc_far_field;
  rep.total = bd.mc_sum();
  return rep;
}

std::string McResidualReport::to_csv() const {
  std::ostringstream os;
  os << "mic,kind,residual\n";
  for (std::size_t d = 0; d < close_talk.size(); ++d)
    os << d << ",close_talk," << close_talk[d] << "\n";
  for (std::size_t p = 0; p < far_field.size(); ++p)
    os << p << ",far_field," << far_field[p] << "\n";
  os << ",total," << total << "\n";
  return os.str();
}

std::string McResidualReport::to_json() const {
  nlohmann::json j{{"close_talk", close_talk},
                   {"far_field", far_field},
                   {"total", total}};
  return j.dump(2);
}

}  // namespace ctr
