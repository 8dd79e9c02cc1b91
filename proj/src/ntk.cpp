#include "vcs/ntk.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

namespace vcs {

long ActionQuantizer::grid_size() const {
  if (bins < 1) throw ConfigError("quantizer needs at least one bin");
  long n = 1;
  for (int d = 0; d < dim(); ++d) n *= bins;
  return n;
}

Vec ActionQuantizer::center(long flat_index) const {
  if (flat_index < 0 || flat_index >= grid_size())
    throw DimensionError("grid index out of range");
  Vec c(dim());
  long rest = flat_index;
  for (int d = 0; d < dim(); ++d) {
    long idx = rest % bins;
    rest /= bins;
    c[d] = lo[d] + (idx + 0.5) * (hi[d] - lo[d]) / bins;
  }
  return c;
}

long ActionQuantizer::nearest(const Vec& action) const {
  if (static_cast<int>(action.size()) != dim())
    throw DimensionError("quantizer dimension mismatch");
  long flat = 0;
  long stride = 1;
  for (int d = 0; d < dim(); ++d) {
    double span = hi[d] - lo[d];
    long idx = 0;
    if (span > 0.0) {
      idx = std::lround((action[d] - lo[d]) / span * bins - 0.5);
      idx = std::clamp(idx, 0L, static_cast<long>(bins - 1));
    }
    flat += idx * stride;
    stride *= bins;
  }
  return flat;
}

ActionQuantizer box_quantizer(int action_dim, double lo, double hi, int bins) {
  if (action_dim < 1) throw ConfigError("quantizer needs a positive dimension");
  ActionQuantizer q;
  q.bins = bins;
  q.lo.assign(action_dim, lo);
  q.hi.assign(action_dim, hi);
  return q;
}

namespace {

Vec concat_sa(const Vec& s, const Vec& a) {
  Vec sa = s;
  sa.insert(sa.end(), a.begin(), a.end());
  return sa;
}

Gradient critic_grad(const ParamSet& critic, const NetSpec& spec, const Vec& sa) {
  ForwardCache cache;
  forward(critic, spec, sa, &cache);
  return backward(critic, spec, cache, {1.0});
}

}  // namespace

double ntk(const ParamSet& critic, const NetSpec& spec, const Vec& sbar,
           const Vec& abar, const Vec& s, const Vec& a) {
  Gradient g1 = critic_grad(critic, spec, concat_sa(sbar, abar));
  Gradient g2 = critic_grad(critic, spec, concat_sa(s, a));
  return dot(g1.wrt_params, g2.wrt_params);
}

double normalized_ntk(const ParamSet& critic, const NetSpec& spec,
                      const Vec& sbar, const Vec& abar, const Vec& s,
                      const Vec& a) {
  Gradient ref = critic_grad(critic, spec, concat_sa(s, a));
  double denom = dot(ref.wrt_params, ref.wrt_params);
  if (denom == 0.0)
    throw DegenerateReferenceError("reference gradient vanishes in normalized_ntk");
  Gradient other = critic_grad(critic, spec, concat_sa(sbar, abar));
  return std::fabs(dot(other.wrt_params, ref.wrt_params)) / denom;
}

MrrResult mrr(const ParamSet& critic, const NetSpec& spec,
              const std::vector<Vec>& states, const std::vector<Vec>& actions) {
  if (states.empty() || actions.empty())
    throw DimensionError("mrr needs nonempty state and action sets");
  std::size_t n = states.size() * actions.size();
  std::vector<Vec> grads(n);
  std::vector<double> sq(n);
  std::size_t k = 0;
  for (const Vec& s : states)
    for (const Vec& a : actions) {
      Gradient g = critic_grad(critic, spec, concat_sa(s, a));
      sq[k] = dot(g.wrt_params, g.wrt_params);
      grads[k] = std::move(g.wrt_params);
      ++k;
    }

  MrrResult res;
  double total = 0.0;
  long used = 0;
  for (std::size_t ref = 0; ref < n; ++ref) {
    if (sq[ref] == 0.0) {
      res.skipped += 1;
      continue;
    }
    double row = 0.0;
    for (std::size_t other = 0; other < n; ++other) {
      if (other == ref) continue;
      row += std::fabs(dot(grads[other], grads[ref])) / sq[ref];
    }
    total += row / static_cast<double>(n - 1);
    ++used;
  }
  if (used == 0)
    throw DegenerateReferenceError("all reference gradients vanish in mrr");
  res.value = total / static_cast<double>(used);
  return res;
}

OmrrReport omrr(const ParamSet& critic, const NetSpec& spec, const Dataset& data,
                const ActionQuantizer& quant, long n_pairs, std::uint64_t seed) {
  data.validate();
  if (quant.dim() != data.action_dim)
    throw DimensionError("quantizer does not match dataset action dimension");
  if (n_pairs < 1) throw ConfigError("omrr needs n_pairs >= 1");

  // gather in-sample pairs once; sampling indexes into this list
  std::vector<std::pair<const Vec*, const Vec*>> pool;
  for (const auto& traj : data.trajectories)
    for (int t = 0; t < traj.length(); ++t)
      pool.emplace_back(&traj.states[t], &traj.actions[t]);

  long pool_size = static_cast<long>(pool.size());
  bool exhaustive = n_pairs >= pool_size;
  long count = exhaustive ? pool_size : n_pairs;

  OmrrReport rep;
  rep.bins = quant.bins;
  rep.seed = seed;
  rep.per_pair.reserve(count);

  Rng rng(seed);
  long grid = quant.grid_size();
  if (grid < 2) throw ConfigError("omrr needs an action grid with >= 2 points");

  double total = 0.0;
  long used = 0;
  for (long i = 0; i < count; ++i) {
    long pick = exhaustive ? i : static_cast<long>(rng.randint(pool.size()));
    const Vec& s = *pool[pick].first;
    const Vec& a = *pool[pick].second;

    Gradient ref = critic_grad(critic, spec, concat_sa(s, a));
    double denom = dot(ref.wrt_params, ref.wrt_params);
    if (denom == 0.0) {
      rep.skipped += 1;
      continue;
    }
    long skip_cell = quant.nearest(a);
    double row = 0.0;
    long row_n = 0;
    for (long gidx = 0; gidx < grid; ++gidx) {
      if (gidx == skip_cell) continue;
      Gradient g = critic_grad(critic, spec, concat_sa(s, quant.center(gidx)));
      row += std::fabs(dot(g.wrt_params, ref.wrt_params)) / denom;
      ++row_n;
    }
    double ratio = row / static_cast<double>(row_n);
    rep.per_pair.push_back(ratio);
    total += ratio;
    ++used;
  }
  if (used == 0)
    throw DegenerateReferenceError("all sampled reference gradients vanish in omrr");
  rep.estimate = total / static_cast<double>(used);
  rep.n_pairs = count;
  return rep;
}

std::string omrr_report_json(const OmrrReport& rep) {
  std::ostringstream out;
  out.precision(17);
  out << "{\n"
      << "  \"estimate\": " << rep.estimate << ",\n"
      << "  \"n_pairs\": " << rep.n_pairs << ",\n"
      << "  \"skipped\": " << rep.skipped << ",\n"
      << "  \"bins\": " << rep.bins << ",\n"
      << "  \"seed\": " << rep.seed << "\n"
      << "}\n";
  return out.str();
}

std::vector<ProfileRow> ntk_profile(const ParamSet& critic, const NetSpec& spec,
                                    const Vec& state, const Vec& ref_action,
                                    const ActionQuantizer& quant) {
  Gradient ref = critic_grad(critic, spec, concat_sa(state, ref_action));
  double denom = dot(ref.wrt_params, ref.wrt_params);
  if (denom == 0.0)
    throw DegenerateReferenceError("reference gradient vanishes in ntk_profile");
  long grid = quant.grid_size();
  std::vector<ProfileRow> rows;
  rows.reserve(grid);
  ForwardCache cache;
  Gradient g;
  for (long i = 0; i < grid; ++i) {
    ProfileRow row;
    row.action = quant.center(i);
    Vec sa = concat_sa(state, row.action);
    row.q_value = forward(critic, spec, sa, &cache)[0];
    backward_into(critic, spec, cache, {1.0}, g);
    row.normalized = std::fabs(dot(g.wrt_params, ref.wrt_params)) / denom;
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_profile_csv(std::ostream& out, const std::vector<ProfileRow>& rows) {
  if (rows.empty()) return;
  std::size_t dim = rows.front().action.size();
  for (std::size_t d = 0; d < dim; ++d) out << "a" << d << ",";
  out << "q_value,normalized_ntk\n";
  out.precision(17);
  for (const auto& row : rows) {
    for (double x : row.action) out << x << ",";
    out << row.q_value << "," << row.normalized << "\n";
  }
}

}  // namespace vcs
