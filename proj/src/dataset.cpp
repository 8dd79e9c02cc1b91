#include "vcs/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <unordered_map>

namespace vcs {

double Trajectory::total_return() const {
  double s = 0.0;
  for (double r : rewards) s += r;
  return s;
}

void Trajectory::validate(int state_dim, int action_dim) const {
  std::size_t L = actions.size();
  if (L == 0) throw DimensionError("trajectory has no transitions");
  if (states.size() != L + 1)
    throw DimensionError("trajectory needs exactly L+1 states");
  if (rewards.size() != L) throw DimensionError("trajectory needs L rewards");
  for (const Vec& s : states)
    if (static_cast<int>(s.size()) != state_dim)
      throw DimensionError("trajectory state dimension mismatch");
  for (const Vec& a : actions)
    if (static_cast<int>(a.size()) != action_dim)
      throw DimensionError("trajectory action dimension mismatch");
}

std::size_t Dataset::transition_count() const {
  std::size_t n = 0;
  for (const auto& t : trajectories) n += t.actions.size();
  return n;
}

double Dataset::max_return() const {
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& t : trajectories) best = std::max(best, t.total_return());
  return best;
}

void Dataset::validate() const {
  if (state_dim < 1 || action_dim < 1)
    throw DimensionError("dataset dimensions must be positive");
  if (trajectories.empty()) throw DimensionError("dataset has no trajectories");
  for (const auto& t : trajectories) t.validate(state_dim, action_dim);
}

Vec compute_rtg(const Trajectory& traj) {
  Vec rtg(traj.rewards.size());
  double acc = 0.0;
  for (int t = static_cast<int>(traj.rewards.size()) - 1; t >= 0; --t) {
    acc += traj.rewards[t];
    rtg[t] = acc;
  }
  return rtg;
}

SubTrajectory make_subtrajectory(const Dataset& data, int traj_index, int start, int K) {
  if (K < 1) throw ConfigError("window length K must be >= 1");
  if (traj_index < 0 || traj_index >= static_cast<int>(data.trajectories.size()))
    throw DimensionError("trajectory index out of range");
  const Trajectory& traj = data.trajectories[traj_index];
  int L = traj.length();
  if (start < 0 || start >= L) throw DimensionError("window start out of range");

  Vec rtg = compute_rtg(traj);
  int last = std::min(start + K - 1, L - 1);
  int n_real = last - start + 1;
  int pad = K - n_real;  // zeros on the left

  SubTrajectory sub;
  sub.rtg_window.assign(K, 0.0);
  sub.state_window.assign(K, Vec(data.state_dim, 0.0));
  sub.action_targets.assign(K, Vec(data.action_dim, 0.0));
  sub.valid.assign(K, 0);
  sub.source_return = traj.total_return();
  sub.traj_index = traj_index;
  sub.start = start;
  for (int j = 0; j < n_real; ++j) {
    int slot = pad + j;
    int t = start + j;
    sub.rtg_window[slot] = rtg[t];
    sub.state_window[slot] = traj.states[t];
    sub.action_targets[slot] = traj.actions[t];
    sub.valid[slot] = 1;
  }
  return sub;
}

SubTrajectory sample_subtrajectory(const Dataset& data, int K, Rng& rng) {
  if (data.trajectories.empty()) throw DimensionError("dataset has no trajectories");
  int ti = static_cast<int>(rng.randint(data.trajectories.size()));
  int L = data.trajectories[ti].length();
  int t = static_cast<int>(rng.randint(static_cast<std::uint64_t>(L)));
  return make_subtrajectory(data, ti, t, K);
}

long StateQuantizer::cell_of(const Vec& state) const {
  if (static_cast<int>(state.size()) != dim())
    throw DimensionError("quantizer dimension mismatch");
  if (bins_per_dim < 1) throw ConfigError("quantizer needs at least one bin");
  long cell = 0;
  long stride = 1;
  for (int d = 0; d < dim(); ++d) {
    double span = hi[d] - lo[d];
    int idx = 0;
    if (span > 0.0) {
      idx = static_cast<int>(std::floor((state[d] - lo[d]) / span * bins_per_dim));
      idx = std::clamp(idx, 0, bins_per_dim - 1);
    }
    cell += idx * stride;
    stride *= bins_per_dim;
  }
  return cell;
}

double action_spread(const Dataset& data, const StateQuantizer& quant) {
  data.validate();
  std::unordered_map<long, std::vector<const Vec*>> cells;
  for (const auto& traj : data.trajectories) {
    for (int t = 0; t < traj.length(); ++t)
      cells[quant.cell_of(traj.states[t])].push_back(&traj.actions[t]);
  }
  if (cells.empty()) return 0.0;

  double total = 0.0;
  for (const auto& [cell, acts] : cells) {
    (void)cell;
    // mean distance over ordered pairs of value-distinct actions; this is
    // what keeps H invariant under duplicating the whole dataset
    double sum = 0.0;
    long count = 0;
    for (std::size_t i = 0; i < acts.size(); ++i) {
      for (std::size_t j = 0; j < acts.size(); ++j) {
        if (i == j || *acts[i] == *acts[j]) continue;
        sum += l2_dist(*acts[i], *acts[j]);
        ++count;
      }
    }
    if (count > 0) total += sum / static_cast<double>(count);
  }
  return total / static_cast<double>(cells.size());
}

// ---- VCSD v1

namespace {

constexpr char kMagic[4] = {'V', 'C', 'S', 'D'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

void put_u8(std::ostream& out, std::uint8_t v) {
  out.write(reinterpret_cast<const char*>(&v), 1);
}

void put_f64(std::ostream& out, double x) {
  std::uint64_t v;
  std::memcpy(&v, &x, 8);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(b), 8);
}

void put_str(std::ostream& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::uint32_t get_u32(std::istream& in, const char* what) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (in.gcount() != 4)
    throw TruncatedFileError(std::string("truncated dataset reading ") + what);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

std::uint8_t get_u8(std::istream& in, const char* what) {
  char c;
  in.read(&c, 1);
  if (in.gcount() != 1)
    throw TruncatedFileError(std::string("truncated dataset reading ") + what);
  return static_cast<std::uint8_t>(c);
}

double get_f64(std::istream& in, const char* what) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  if (in.gcount() != 8)
    throw TruncatedFileError(std::string("truncated dataset reading ") + what);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  double x;
  std::memcpy(&x, &v, 8);
  return x;
}

std::string get_str(std::istream& in, const char* what) {
  std::uint32_t n = get_u32(in, what);
  if (n > (1u << 20))
    throw TruncatedFileError(std::string("implausible string length for ") + what);
  std::string s(n, '\0');
  in.read(s.data(), n);
  if (in.gcount() != static_cast<std::streamsize>(n))
    throw TruncatedFileError(std::string("truncated dataset reading ") + what);
  return s;
}

}  // namespace

void save_dataset(const std::string& path, const Dataset& data) {
  data.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out.write(kMagic, 4);
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(data.state_dim));
  put_u32(out, static_cast<std::uint32_t>(data.action_dim));
  put_u32(out, static_cast<std::uint32_t>(data.trajectories.size()));
  put_f64(out, data.r_star);
  put_u32(out, static_cast<std::uint32_t>(data.meta.size()));
  for (const auto& [k, v] : data.meta) {
    put_str(out, k);
    put_str(out, v);
  }
  for (const auto& traj : data.trajectories) {
    put_u32(out, static_cast<std::uint32_t>(traj.length()));
    put_u8(out, traj.terminal ? 1 : 0);
    for (const Vec& s : traj.states)
      for (double x : s) put_f64(out, x);
    for (const Vec& a : traj.actions)
      for (double x : a) put_f64(out, x);
    for (double r : traj.rewards) put_f64(out, r);
  }
  if (!out) throw IoError("write failed: " + path);
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path);
  char magic[4];
  in.read(magic, 4);
  if (in.gcount() != 4) throw TruncatedFileError("truncated dataset reading magic");
  if (std::memcmp(magic, kMagic, 4) != 0)
    throw BadMagicError("not a dataset file: " + path);
  std::uint32_t version = get_u32(in, "version");
  if (version != kVersion)
    throw UnsupportedVersionError("unsupported dataset version " +
                                  std::to_string(version));
  Dataset data;
  data.state_dim = static_cast<int>(get_u32(in, "state_dim"));
  data.action_dim = static_cast<int>(get_u32(in, "action_dim"));
  std::uint32_t n_traj = get_u32(in, "trajectory count");
  data.r_star = get_f64(in, "r_star");
  std::uint32_t n_meta = get_u32(in, "meta count");
  for (std::uint32_t i = 0; i < n_meta; ++i) {
    std::string k = get_str(in, "meta key");
    std::string v = get_str(in, "meta value");
    data.meta[k] = v;
  }
  data.trajectories.resize(n_traj);
  for (auto& traj : data.trajectories) {
    std::uint32_t L = get_u32(in, "trajectory length");
    if (L == 0 || L > (1u << 24))
      throw TruncatedFileError("implausible trajectory length");
    traj.terminal = get_u8(in, "terminal flag") != 0;
    traj.states.assign(L + 1, Vec(data.state_dim));
    for (auto& s : traj.states)
      for (double& x : s) x = get_f64(in, "state");
    traj.actions.assign(L, Vec(data.action_dim));
    for (auto& a : traj.actions)
      for (double& x : a) x = get_f64(in, "action");
    traj.rewards.resize(L);
    for (double& r : traj.rewards) r = get_f64(in, "reward");
  }
  char extra;
  if (in.read(&extra, 1)) throw TruncatedFileError("trailing bytes in " + path);
  data.validate();
  return data;
}

}  // namespace vcs
