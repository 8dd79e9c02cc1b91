#ifndef VCS_NET_HPP
#define VCS_NET_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "vcs/common.hpp"

namespace vcs {

// Fully-connected network with ReLU hidden layers and an affine output
// layer. Parameters live in one flat f64 vector, per layer: weights
// (row-major, out x in) then biases.
struct NetSpec {
  std::vector<int> layer_widths;

  int input_width() const { return layer_widths.front(); }
  int output_width() const { return layer_widths.back(); }
  int n_layers() const { return static_cast<int>(layer_widths.size()) - 1; }

  std::size_t param_count() const;
  void validate() const;  // throws ConfigError on widths < 1 or < 2 entries

  bool operator==(const NetSpec& o) const { return layer_widths == o.layer_widths; }
};

struct ParamSet {
  Vec values;
};

struct Gradient {
  Vec wrt_params;
  Vec wrt_input;
};

// Intermediate activations kept for the backward pass. `widths` records the
// spec it was produced under so a mismatched cache is rejected.
struct ForwardCache {
  std::vector<int> widths;
  std::vector<Vec> acts;  // acts[0] = input, acts[l] = post-activation of layer l
  std::vector<Vec> pre;   // pre[l] = pre-activation of layer l+1 (0-based layers)
};

// Fan-in uniform init: weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases 0.
// Deterministic for a given seed.
ParamSet net_init(const NetSpec& spec, std::uint64_t seed);

Vec forward(const ParamSet& params, const NetSpec& spec, const Vec& input,
            ForwardCache* cache = nullptr);

// Exact reverse-mode gradients of output_grad . output with respect to both
// the parameters and the input.
Gradient backward(const ParamSet& params, const NetSpec& spec,
                  const ForwardCache& cache, const Vec& output_grad);

// In-place variant that reuses the caller's buffers (overwrites them).
void backward_into(const ParamSet& params, const NetSpec& spec,
                   const ForwardCache& cache, const Vec& output_grad,
                   Gradient& out);

// ---- serialization ("VCSP", little-endian)
// magic, version u32, layer count u32, widths u32 each, f64 values.

void save_params(const std::string& path, const ParamSet& params, const NetSpec& spec);
std::pair<ParamSet, NetSpec> load_params(const std::string& path);

std::uint64_t param_hash(const ParamSet& params);

}  // namespace vcs

#endif  // VCS_NET_HPP
