#include "ctr/types.hpp"

#include <cmath>

namespace ctr {

bool Spectrogram::all_finite() const {
  for (const auto& v : data_) {
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
  }
  return true;
}

namespace {

void check_spec(const Spectrogram& s, const Spectrogram& ref,
                const std::string& name, std::vector<std::string>& out) {
  if (!s.same_shape(ref))
    out.push_back(name + ": shape (" + std::to_string(s.frames()) + "x" +
                  std::to_string(s.bins()) + ") differs from reference (" +
                  std::to_string(ref.frames()) + "x" +
                  std::to_string(ref.bins()) + ")");
  if (s.sample_rate() != ref.sample_rate())
    out.push_back(name + ": sample rate mismatch");
  if (!s.all_finite()) out.push_back(name + ": non-finite data");
}

}  // namespace

std::vector<std::string> validate(const MixtureSet& set) {
  std::vector<std::string> report;
  if (set.close_talk.empty()) {
    report.push_back("mixture set has no close-talk channels");
    return report;
  }
  const Spectrogram& ref = set.close_talk.front();
  for (std::size_t d = 0; d < set.close_talk.size(); ++d)
    check_spec(set.close_talk[d], ref, "close_talk[" + std::to_string(d) + "]",
               report);
  for (std::size_t a = 0; a < set.far_field.size(); ++a)
    for (std::size_t p = 0; p < set.far_field[a].size(); ++p)
      check_spec(set.far_field[a][p], ref,
                 "far_field[" + std::to_string(a) + "][" + std::to_string(p) +
                     "]",
                 report);
  if (set.activity.num_speakers != 0 &&
      set.activity.num_speakers != set.close_talk.size())
    report.push_back("activity speaker count differs from close-talk count");
  for (std::size_t c = 0; c < set.activity.sample_activity.size(); ++c) {
    const auto& v = set.activity.sample_activity[c];
    if (v.size() != set.activity.num_samples)
      report.push_back("activity[" + std::to_string(c) + "]: length mismatch");
    for (auto x : v)
      if (x > 1) {
        report.push_back("activity[" + std::to_string(c) +
                         "]: non-binary value");
        break;
      }
  }
  if (set.ground_truth) {
    const auto& gt = *set.ground_truth;
    for (std::size_t c = 0; c < gt.close_talk_speech.size(); ++c)
      check_spec(gt.close_talk_speech[c], ref,
                 "ground_truth.close_talk_speech[" + std::to_string(c) + "]",
                 report);
    if (gt.close_talk_speech.size() != set.close_talk.size())
      report.push_back("ground_truth speaker count differs from C");
  }
  return report;
}

}  // namespace ctr
