#ifndef VCS_DATASET_HPP
#define VCS_DATASET_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "vcs/common.hpp"

namespace vcs {

struct Trajectory {
  std::vector<Vec> states;   // length L+1
  std::vector<Vec> actions;  // length L
  Vec rewards;               // length L
  bool terminal = false;     // true if the last state is a true terminal

  int length() const { return static_cast<int>(actions.size()); }
  double total_return() const;
  void validate(int state_dim, int action_dim) const;
};

struct Dataset {
  std::vector<Trajectory> trajectories;
  int state_dim = 0;
  int action_dim = 0;
  double r_star = 0.0;  // optimal/target return; >= max trajectory return
  std::map<std::string, std::string> meta;

  std::size_t transition_count() const;
  double max_return() const;
  void validate() const;
};

// Undiscounted return-to-go: rtg[t] = sum_{t' >= t} rewards[t'].
Vec compute_rtg(const Trajectory& traj);

// A K-slot training window. Real steps are right-aligned; windows that run
// past the episode end are left-padded with zeros and masked invalid.
struct SubTrajectory {
  Vec rtg_window;                  // K entries
  std::vector<Vec> state_window;   // K entries
  std::vector<Vec> action_targets; // K entries
  std::vector<std::uint8_t> valid; // K entries, 1 = real step
  double source_return = 0.0;      // R(tau) of the source trajectory
  int traj_index = -1;
  int start = -1;                  // t of the first real step
};

SubTrajectory make_subtrajectory(const Dataset& data, int traj_index, int start, int K);

// Uniform trajectory, then uniform start t in [0, L-1].
SubTrajectory sample_subtrajectory(const Dataset& data, int K, Rng& rng);

// Uniform per-dimension binning used to pool actions by quantized state.
struct StateQuantizer {
  int bins_per_dim = 20;
  Vec lo;
  Vec hi;

  int dim() const { return static_cast<int>(lo.size()); }
  long cell_of(const Vec& state) const;
};

// Action spread H(D): mean over occupied quantized states of the mean
// pairwise L2 distance between value-distinct in-sample actions in that
// cell. Cells without two distinct actions contribute 0.
double action_spread(const Dataset& data, const StateQuantizer& quant);

// ---- dataset file format ("VCSD" v1, little-endian)

void save_dataset(const std::string& path, const Dataset& data);
Dataset load_dataset(const std::string& path);

}  // namespace vcs

#endif  // VCS_DATASET_HPP
