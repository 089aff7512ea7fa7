#pragma once

// Session-level mechanics: block splitting and stitching, activity-to-frame
// conversion, overlap-weighted block sampling, binaural input strategies and
// SNR-based array selection.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ctr/stft.hpp"
#include "ctr/types.hpp"

namespace ctr {

struct BlockPlan {
  double block_s = 12.0;
  double ctx_s = 4.0;    // context on each side of the output region
  double out_s = 4.0;    // retained center
  double shift_s = 4.0;  // block start stride; 1.0 for training
  double sample_rate = 16000.0;

  std::size_t block_len() const;
  std::size_t ctx_len() const;
  std::size_t out_len() const;
  std::size_t shift_len() const;
  void validate() const;
};

struct BlockRange {
  std::size_t start = 0;      // session sample offset
  std::size_t length = 0;     // always the plan's block length
  std::size_t out_start = 0;  // session range this block's output covers
  std::size_t out_end = 0;
};

// Blocks every shift_s seconds; the final block is right-aligned to the
// session end so no synthetic silence is produced. Sessions shorter than one
// block yield a single block read with zero padding.
std::vector<BlockRange> split_blocks(std::size_t session_len,
                                     const BlockPlan& plan);

// Block samples, zero-padded where the range exceeds the session.
std::vector<double> extract_block(std::span<const double> session,
                                  const BlockRange& range);

// Concatenates each block's output region; first/last blocks also cover the
// session edges with their context. Inverse of split + identity processing.
std::vector<double> stitch_blocks(std::span<const std::vector<double>> outputs,
                                  std::span<const BlockRange> ranges,
                                  std::size_t session_len);

// Frame activity D(c,t) = 1 iff the STFT window of frame t overlaps any
// active sample of speaker c. Returns a copy with frame_activity filled.
ActivityTimeline activity_to_frames(const ActivityTimeline& timeline,
                                    const StftConfig& cfg);

// w = 1 + theta * mean_t(max(1, sum_c D(c,t)) - 1)
double sampling_weight(
    std::span<const std::vector<std::uint8_t>> frame_activity, double theta);

// Draws `count` indices with replacement, probability proportional to
// weight. Weights must be strictly positive.
std::vector<std::size_t> weighted_sample(std::span<const double> weights,
                                         std::size_t count,
                                         std::uint64_t seed);

enum class BinauralStrategy {
  RightAsCloseTalk,  // right ear close-talk, left ear extra far-field
  AverageEars,       // per-speaker average of the two ears
};

struct BinauralInputs {
  std::vector<std::vector<double>> close_talk;      // size C
  std::vector<std::vector<double>> extra_far_field; // empty for AverageEars
};

BinauralInputs binaural_combine(
    std::span<const std::vector<double>> left,
    std::span<const std::vector<double>> right, BinauralStrategy strategy);

struct SegmentRange {
  std::size_t speaker = 0;
  std::size_t begin = 0;  // sample range [begin, end)
  std::size_t end = 0;
};

// Maximal contiguous active runs per speaker.
std::vector<SegmentRange> active_segments(const ActivityTimeline& timeline);

struct ArraySelection {
  // Selected estimates stitched per speaker; zero outside segments.
  std::vector<std::vector<double>> signals;
  struct Entry {
    std::size_t speaker = 0;
    std::size_t begin = 0;
    std::size_t end = 0;
    std::size_t chosen_array = 0;
    std::vector<double> snr_db;  // one per array
  };
  std::vector<Entry> log;
};

// Per segment, picks the array whose estimate has the highest estimated SNR
// against that array's reference-mic mixture; lowest index wins ties.
ArraySelection select_best_array(
    std::span<const std::vector<std::vector<double>>> per_array_estimates,
    std::span<const SegmentRange> segments,
    std::span<const std::vector<double>> per_array_ref_mixture);

std::string selection_log_json(const ArraySelection& selection);

}  // namespace ctr
