#ifndef VCS_NTK_HPP
#define VCS_NTK_HPP

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "vcs/dataset.hpp"
#include "vcs/iql.hpp"
#include "vcs/net.hpp"

namespace vcs {

// Uniform action grid: B bins per dimension, grid points at bin centers.
struct ActionQuantizer {
  int bins = 25;
  Vec lo;
  Vec hi;

  int dim() const { return static_cast<int>(lo.size()); }
  long grid_size() const;
  Vec center(long flat_index) const;
  long nearest(const Vec& action) const;  // flat index of the closest center
};

ActionQuantizer box_quantizer(int action_dim, double lo, double hi, int bins = 25);

// Empirical NTK of the critic between two state-action pairs:
// grad_theta Q(sbar, abar) . grad_theta Q(s, a).
double ntk(const ParamSet& critic, const NetSpec& spec, const Vec& sbar,
           const Vec& abar, const Vec& s, const Vec& a);

// |k(sbar, abar, s, a)| / |grad_theta Q(s, a)|^2, reference pair last.
// Throws DegenerateReferenceError when the reference gradient vanishes.
double normalized_ntk(const ParamSet& critic, const NetSpec& spec,
                      const Vec& sbar, const Vec& abar, const Vec& s,
                      const Vec& a);

struct MrrResult {
  double value = 0.0;
  long skipped = 0;  // references with vanishing gradient
};

// Mean ratio of off-diagonal to diagonal entries of the normalized NTK over
// the full state x action product set.
MrrResult mrr(const ParamSet& critic, const NetSpec& spec,
              const std::vector<Vec>& states, const std::vector<Vec>& actions);

struct OmrrReport {
  double estimate = 0.0;
  std::vector<double> per_pair;  // mean ratio per sampled reference pair
  long n_pairs = 0;
  long skipped = 0;
  int bins = 0;
  std::uint64_t seed = 0;
};

// Offline MRR: for sampled in-sample (s, a), average the normalized NTK of
// (s, abar) against (s, a) over all grid actions abar except the one nearest
// to a. n_pairs >= |D| switches to one exhaustive pass over the dataset.
OmrrReport omrr(const ParamSet& critic, const NetSpec& spec, const Dataset& data,
                const ActionQuantizer& quant, long n_pairs, std::uint64_t seed);

std::string omrr_report_json(const OmrrReport& report);

struct ProfileRow {
  Vec action;
  double q_value = 0.0;
  double normalized = 0.0;
};

// Q and normalized NTK against the reference action, over the whole grid.
std::vector<ProfileRow> ntk_profile(const ParamSet& critic, const NetSpec& spec,
                                    const Vec& state, const Vec& ref_action,
                                    const ActionQuantizer& quant);

// CSV with header: a0,...,a{d-1},q_value,normalized_ntk
void write_profile_csv(std::ostream& out, const std::vector<ProfileRow>& rows);

}  // namespace vcs

#endif  // VCS_NTK_HPP
