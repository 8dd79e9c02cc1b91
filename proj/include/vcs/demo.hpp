#ifndef VCS_DEMO_HPP
#define VCS_DEMO_HPP

#include <cstdint>
#include <string>

#include "vcs/iql.hpp"
#include "vcs/policy.hpp"

namespace vcs {

// End-to-end stitching demonstration on StitchGrid: value pretraining on
// the two logged trajectories, then the three policy objectives, then
// greedy rollouts. The dataset's best trajectory returns 6; the stitched
// optimum is 7 and is reachable only through the critic.
struct StitchDemoResult {
  double q_s1_up = 0.0;
  double q_s1_right = 0.0;
  double v_loss_final = 0.0;
  double q_loss_final = 0.0;
  double rcsl_return = 0.0;
  double vcs_return = 0.0;
  double q_greedy_return = 0.0;
  double elapsed_seconds = 0.0;
};

IqlConfig stitch_iql_config(std::uint64_t seed);
VcsConfig stitch_policy_config(std::uint64_t seed);

StitchDemoResult run_stitch_demo(std::uint64_t seed,
                                 const std::string& out_dir = "");

}  // namespace vcs

#endif  // VCS_DEMO_HPP
