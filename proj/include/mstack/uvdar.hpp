#pragma once

#include <optional>
#include <random>
#include <string>
#include <vector>

#include "mstack/geometry.hpp"

namespace mstack {

// Cyclic binary LED identification code.
struct BlinkSequence {
  std::vector<bool> bits;

  std::size_t length() const { return bits.size(); }
  std::string to_string() const;
  static BlinkSequence from_string(const std::string& s);
};

struct SequenceSetParams {
  int length{8};       // L >= 2
  int max_off_run{3};  // longest circular run of zeros, >= 1, < L
};

// Minimum Hamming distance between a and all cyclic rotations of b; zero iff
// the sequences are rotations of each other. Throws LengthMismatch.
int circular_hamming(const BlinkSequence& a, const BlinkSequence& b);

// Longest circular run of zeros.
int longest_zero_run(const BlinkSequence& seq);

// Maximal set of circularly distinct sequences: one canonical representative
// (lexicographically smallest rotation) per rotation class, over all
// sequences that are not all-zero and satisfy the off-run bound. Sorted.
std::vector<BlinkSequence> generate_set(const SequenceSetParams& params);

// LED state for a frame index; the sequence repeats with period L.
bool encode(const BlinkSequence& seq, std::size_t frame_index);

struct DecodeResult {
  enum class Kind { kMatch, kAmbiguous, kNoMatch };
  Kind kind{Kind::kNoMatch};
  int id{-1};  // index into the sequence set when kind == kMatch
};

// Matches a phase-unaligned window against every rotation of every set
// member. Exact unique match wins; corrupted windows yield kNoMatch
// (kAmbiguous is unreachable for well-formed sets, kept for completeness).
// Throws LengthMismatch when the window length differs from the set's.
DecodeResult decode(const std::vector<bool>& window,
                    const std::vector<BlinkSequence>& set);

// Sequence-set text export: header line `L=<n> max_off_run=<k>` then one
// '0'/'1' line per sequence.
std::string export_set(const std::vector<BlinkSequence>& set,
                       const SequenceSetParams& params);

struct CameraModel {
  double fov{2.0943951023931953};  // rad, full cone angle (120 deg) per camera
  double resolution{752.0};        // px across the fov
  double pixel_noise_sigma{1.0};   // px
  int cameras{1};                  // rig size; yaw-spaced at 2 pi / cameras
};

struct RelativePoseEstimate {
  Vec3 mean{Vec3::Zero()};  // m, relative position in observer body frame
  Mat3 covariance{Mat3::Zero()};
  int observed_id{-1};
};

// Bearing + angular-extent relative localization of a marker pair riding on
// the target. The camera looks along the observer body x-axis. Returns
// nullopt when the target is outside the field of view, behind the camera, or
// the projected marker separation is below two pixels.
std::optional<RelativePoseEstimate> observe(const UavState& observer,
                                            const UavState& target,
                                            double marker_baseline,
                                            const CameraModel& camera,
                                            std::mt19937_64& rng);

// Noise-free geometric visibility of the marker pair (same gating as
// observe); used to window blink frames.
bool marker_pair_visible(const UavState& observer, const UavState& target,
                         double marker_baseline, const CameraModel& camera);

}  // namespace mstack
