#include "ctr/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <json.hpp>

#include "ctr/simulator.hpp"

namespace ctr {

namespace {

std::size_t seconds_to_samples(double s, double sr) {
  return static_cast<std::size_t>(std::llround(s * sr));
}

}  // namespace

std::size_t BlockPlan::block_len() const {
  return seconds_to_samples(block_s, sample_rate);
}
std::size_t BlockPlan::ctx_len() const {
  return seconds_to_samples(ctx_s, sample_rate);
}
std::size_t BlockPlan::out_len() const {
  return seconds_to_samples(out_s, sample_rate);
}
std::size_t BlockPlan::shift_len() const {
  return seconds_to_samples(shift_s, sample_rate);
}

void BlockPlan::validate() const {
  if (sample_rate <= 0) throw std::invalid_argument("sample_rate must be > 0");
  if (block_len() == 0) throw std::invalid_argument("block length must be > 0");
  if (shift_len() == 0) throw std::invalid_argument("shift must be > 0");
  if (2 * ctx_len() + out_len() != block_len())
    throw std::invalid_argument("block must equal ctx + out + ctx");
}

std::vector<BlockRange> split_blocks(std::size_t session_len,
                                     const BlockPlan& plan) {
  plan.validate();
  if (session_len == 0) throw std::invalid_argument("empty session");
  const std::size_t W = plan.block_len();
  const std::size_t ctx = plan.ctx_len();
  const std::size_t shift = plan.shift_len();

  std::vector<BlockRange> out;
  if (session_len <= W) {
    out.push_back({0, W, 0, session_len});
    return out;
  }

  std::vector<std::size_t> starts;
  for (std::size_t s = 0; s + W < session_len; s += shift) starts.push_back(s);
  starts.push_back(session_len - W);  // right-aligned tail

  for (std::size_t i = 0; i < starts.size(); ++i) {
    BlockRange r;
    r.start = starts[i];
    r.length = W;
    if (i == 0) {
      r.out_start = 0;
      r.out_end = ctx + plan.out_len();
    } else {
      r.out_start = out.back().out_end;
      r.out_end = (i + 1 == starts.size()) ? session_len
                                           : r.start + ctx + plan.out_len();
    }
    r.out_end = std::max(r.out_end, r.out_start);
    out.push_back(r);
  }
  return out;
}

std::vector<double> extract_block(std::span<const double> session,
                                  const BlockRange& range) {
  std::vector<double> out(range.length, 0.0);
  for (std::size_t i = 0; i < range.length; ++i) {
    const std::size_t s = range.start + i;
    if (s < session.size()) out[i] = session[s];
  }
  return out;
}

std::vector<double> stitch_blocks(std::span<const std::vector<double>> outputs,
                                  std::span<const BlockRange> ranges,
                                  std::size_t session_len) {
  if (outputs.size() != ranges.size())
    throw std::invalid_argument("block count mismatch");
  std::vector<double> out(session_len, 0.0);
  for (std::size_t i = 0; i < ranges.size(); ++i) {
    const BlockRange& r = ranges[i];
    if (outputs[i].size() != r.length)
      throw std::invalid_argument("block output length mismatch");
    for (std::size_t s = r.out_start; s < r.out_end && s < session_len; ++s)
      out[s] = outputs[i][s - r.start];
  }
  return out;
}

ActivityTimeline activity_to_frames(const ActivityTimeline& timeline,
                                    const StftConfig& cfg) {
  cfg.validate();
  const std::size_t N = timeline.num_samples;
  const std::size_t T = cfg.num_frames(N);
  const std::size_t win = cfg.window_len();
  const std::size_t hop = cfg.hop_len();
  const std::size_t half = win / 2;

  ActivityTimeline out = timeline;
  out.window_ms = cfg.window_ms;
  out.hop_ms = cfg.hop_ms;
  out.frame_activity.assign(timeline.sample_activity.size(),
                            std::vector<std::uint8_t>(T, 0));
  for (std::size_t c = 0; c < timeline.sample_activity.size(); ++c) {
    const auto& act = timeline.sample_activity[c];
    if (act.size() != N)
      throw std::invalid_argument("sample activity length mismatch");
    for (std::size_t t = 0; t < T; ++t) {
      // frame t covers samples [t*hop - win/2, t*hop + win/2)
      const std::size_t center = t * hop;
      const std::size_t lo = center > half ? center - half : 0;
      const std::size_t hi = std::min(center + half, N);
      for (std::size_t s = lo; s < hi; ++s) {
        if (act[s]) {
          out.frame_activity[c][t] = 1;
          break;
        }
      }
    }
  }
  return out;
}

double sampling_weight(
    std::span<const std::vector<std::uint8_t>> frame_activity, double theta) {
  if (frame_activity.empty() || frame_activity.front().empty())
    throw std::invalid_argument("empty frame activity");
  const std::size_t T = frame_activity.front().size();
  double acc = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    double active = 0.0;
    for (const auto& row : frame_activity) {
      if (row.size() != T)
        throw std::invalid_argument("ragged frame activity");
      active += row[t];
    }
    acc += std::max(1.0, active) - 1.0;
  }
  return 1.0 + theta * acc / static_cast<double>(T);
}

std::vector<std::size_t> weighted_sample(std::span<const double> weights,
                                         std::size_t count,
                                         std::uint64_t seed) {
  if (weights.empty()) throw std::invalid_argument("no weights");
  std::vector<double> cum(weights.size());
  double total = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (!(weights[i] > 0.0))
      throw std::invalid_argument("weights must be strictly positive");
    total += weights[i];
    cum[i] = total;
  }
  Rng rng(seed);
  std::vector<std::size_t> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double u = rng.uniform() * total;
    const auto it = std::upper_bound(cum.begin(), cum.end(), u);
    out.push_back(std::min<std::size_t>(
        static_cast<std::size_t>(it - cum.begin()), weights.size() - 1));
  }
  return out;
}

BinauralInputs binaural_combine(
    std::span<const std::vector<double>> left,
    std::span<const std::vector<double>> right, BinauralStrategy strategy) {
  if (left.size() != right.size())
    throw std::invalid_argument("ear channel count mismatch");
  BinauralInputs out;
  for (std::size_t c = 0; c < left.size(); ++c) {
    if (left[c].size() != right[c].size())
      throw std::invalid_argument("ear signal length mismatch");
    if (strategy == BinauralStrategy::RightAsCloseTalk) {
      out.close_talk.push_back(right[c]);
      out.extra_far_field.push_back(left[c]);
    } else {
      std::vector<double> avg(left[c].size());
      for (std::size_t i = 0; i < avg.size(); ++i)
        avg[i] = 0.5 * (left[c][i] + right[c][i]);
      out.close_talk.push_back(std::move(avg));
    }
  }
  return out;
}

std::vector<SegmentRange> active_segments(const ActivityTimeline& timeline) {
  std::vector<SegmentRange> out;
  for (std::size_t c = 0; c < timeline.sample_activity.size(); ++c) {
    const auto& act = timeline.sample_activity[c];
    std::size_t begin = 0;
    bool open = false;
    for (std::size_t s = 0; s <= act.size(); ++s) {
      const bool on = s < act.size() && act[s];
      if (on && !open) {
        begin = s;
        open = true;
      } else if (!on && open) {
        out.push_back({c, begin, s});
        open = false;
      }
    }
  }
  return out;
}

namespace {

double segment_snr_db(std::span<const double> est, std::span<const double> mix,
                      std::size_t begin, std::size_t end) {
  double num = 0.0, den = 0.0, mix_e = 0.0;
  for (std::size_t s = begin; s < end; ++s) {
    const double e = s < est.size() ? est[s] : 0.0;
    const double y = s < mix.size() ? mix[s] : 0.0;
    num += e * e;
    den += (y - e) * (y - e);
    mix_e += y * y;
  }
  const double eps = 1e-12 * mix_e;
  return 10.0 * std::log10(std::max(num, 1e-300) /
                           std::max(std::max(den, eps), 1e-300));
}

}  // namespace

ArraySelection select_best_array(
    std::span<const std::vector<std::vector<double>>> per_array_estimates,
    std::span<const SegmentRange> segments,
    std::span<const std::vector<double>> per_array_ref_mixture) {
  const std::size_t A = per_array_estimates.size();
  if (A == 0) throw std::invalid_argument("no arrays");
  if (per_array_ref_mixture.size() != A)
    throw std::invalid_argument("mixture count must match array count");
  const std::size_t C = per_array_estimates.front().size();
  std::size_t N = 0;
  for (const auto& est : per_array_estimates)
    for (const auto& sig : est) N = std::max(N, sig.size());

  ArraySelection sel;
  sel.signals.assign(C, std::vector<double>(N, 0.0));
  for (const SegmentRange& seg : segments) {
    if (seg.speaker >= C) throw std::invalid_argument("segment speaker index");
    ArraySelection::Entry entry;
    entry.speaker = seg.speaker;
    entry.begin = seg.begin;
    entry.end = seg.end;
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < A; ++a) {
      const double snr = segment_snr_db(per_array_estimates[a][seg.speaker],
                                        per_array_ref_mixture[a], seg.begin,
                                        seg.end);
      entry.snr_db.push_back(snr);
      if (snr > best) {
        best = snr;
        entry.chosen_array = a;
      }
    }
    const auto& src = per_array_estimates[entry.chosen_array][seg.speaker];
    for (std::size_t s = seg.begin; s < seg.end && s < N; ++s)
      sel.signals[seg.speaker][s] = s < src.size() ? src[s] : 0.0;
    sel.log.push_back(std::move(entry));
  }
  return sel;
}

std::string selection_log_json(const ArraySelection& selection) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& e : selection.log) {
    arr.push_back({{"speaker", e.speaker},
                   {"begin", e.begin},
                   {"end", e.end},
                   {"chosen_array", e.chosen_array},
                   {"snr_db", e.snr_db}});
  }
  return arr.dump(2);
}

}  // namespace ctr
