#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "skytalk/fact.hpp"
#include "skytalk/grammar.hpp"
#include "skytalk/rng.hpp"
#include "skytalk/scene.hpp"

namespace skytalk {

/// Row-major grid of values in [0, 1]. Columns follow horizontal angle
/// (left of the heading on the left), rows follow distance (near at row 0).
struct SalienceGrid {
  int width = 0;
  int height = 0;
  std::vector<double> values;

  static SalienceGrid zeros(int width, int height);
  double at(int row, int col) const { return values[static_cast<std::size_t>(row) * width + col]; }
  double& at(int row, int col) { return values[static_cast<std::size_t>(row) * width + col]; }
  bool all_zero() const;
  friend bool operator==(const SalienceGrid&, const SalienceGrid&) = default;
};

struct GridDims {
  int width = 15;
  int height = 9;
};

/// Writes the grid as plain-text PGM (P2) scaled to 0..255.
void write_pgm(std::ostream& out, const SalienceGrid& grid);

struct NoiseModel {
  double miss_base = 0.05;
  double miss_per_meter = 0.004;
  double hallucination_rate = 0.02;
  std::uint64_t seed = 0;

  static NoiseModel none() { return {0.0, 0.0, 0.0, 0}; }
  /// Throws std::invalid_argument when a probability leaves [0, 1].
  void validate() const;
};

/// Probability that a visible object is missed by one perception query.
double miss_probability(const NoiseModel& noise, const Visibility& visibility);

struct ViewQuery {
  Pose pose;
  Question question;
};

struct PerceptionResult {
  std::string answer;
  std::string caption;
  std::vector<Fact> caption_facts;
  /// Facts asserted by the answer: for presence questions the subject with the
  /// answered polarity; empty otherwise.
  std::vector<Fact> answer_facts;
  /// Every fact the query perceived, caption cap not applied.
  std::vector<Fact> detected_facts;
  double match_score = 0.0;
  SalienceGrid salience;
};

inline constexpr std::size_t kCaptionFactCap = 4;

class PerceptionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Synthetic perception g(Q, I): detection with distance and occlusion
/// dependent misses, rare hallucinations, template caption, score, salience.
PerceptionResult query(const Scene& scene, const ViewQuery& view, const NoiseModel& noise, Rng& rng,
                       GridDims grid = {});

/// Fraction of caption facts verifiable against the visible set. An empty
/// caption scores 0.
double match_score(const std::vector<Fact>& caption_facts, const std::vector<Visibility>& ground_visible,
                   const Scene& scene);

/// Salience of the visible objects matching any of `target_facts`.
SalienceGrid render_salience(const Scene& scene, const Pose& pose, const std::vector<Fact>& target_facts,
                             GridDims grid);

/// As render_salience but only `candidates` may deposit.
SalienceGrid render_salience(const Scene& scene, const Pose& pose, const std::vector<Fact>& target_facts,
                             const std::vector<Visibility>& candidates, GridDims grid);

/// Column center (in cell units, fractional) for a bearing in radians.
double salience_column(double bearing_rad, double fov_deg, int width);
/// Row center (in cell units, fractional) for a distance.
double salience_row(double distance, double max_range, int height);

}  // namespace skytalk
