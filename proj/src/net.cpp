#include "vcs/net.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

namespace vcs {

void NetSpec::validate() const {
  if (layer_widths.size() < 2)
    throw ConfigError("network spec needs at least input and output widths");
  for (int w : layer_widths)
    if (w < 1) throw ConfigError("network layer width must be >= 1");
}

std::size_t NetSpec::param_count() const {
  validate();
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < layer_widths.size(); ++l) {
    n += static_cast<std::size_t>(layer_widths[l + 1]) * layer_widths[l];  // W
    n += static_cast<std::size_t>(layer_widths[l + 1]);                    // b
  }
  return n;
}

ParamSet net_init(const NetSpec& spec, std::uint64_t seed) {
  spec.validate();
  ParamSet p;
  p.values.resize(spec.param_count());
  Rng rng(seed);
  std::size_t off = 0;
  for (int l = 0; l + 1 < static_cast<int>(spec.layer_widths.size()); ++l) {
    int in = spec.layer_widths[l];
    int out = spec.layer_widths[l + 1];
    double bound = 1.0 / std::sqrt(static_cast<double>(in));
    for (int i = 0; i < out * in; ++i) p.values[off++] = rng.uniform(-bound, bound);
    for (int i = 0; i < out; ++i) p.values[off++] = 0.0;  // biases
  }
  return p;
}

Vec forward(const ParamSet& params, const NetSpec& spec, const Vec& input,
            ForwardCache* cache) {
  spec.validate();
  if (static_cast<int>(input.size()) != spec.input_width())
    throw DimensionError("forward: input width mismatch");
  if (params.values.size() != spec.param_count())
    throw DimensionError("forward: parameter count mismatch");

  int n_layers = spec.n_layers();
  if (cache) {
    cache->widths = spec.layer_widths;
    cache->acts.assign(n_layers + 1, Vec{});
    cache->pre.assign(n_layers, Vec{});
    cache->acts[0] = input;
  }

  Vec cur = input;
  std::size_t off = 0;
  for (int l = 0; l < n_layers; ++l) {
    int in = spec.layer_widths[l];
    int out = spec.layer_widths[l + 1];
    Vec z(out);
    const double* w = params.values.data() + off;
    const double* b = params.values.data() + off + static_cast<std::size_t>(out) * in;
    for (int o = 0; o < out; ++o) {
      double s = b[o];
      const double* row = w + static_cast<std::size_t>(o) * in;
      for (int i = 0; i < in; ++i) s += row[i] * cur[i];
      z[o] = s;
    }
    off += static_cast<std::size_t>(out) * in + out;
    if (cache) cache->pre[l] = z;
    if (l + 1 < n_layers) {
      for (double& x : z) x = x > 0.0 ? x : 0.0;
    }
    cur = std::move(z);
    if (cache) cache->acts[l + 1] = cur;
  }
  return cur;
}

void backward_into(const ParamSet& params, const NetSpec& spec,
                   const ForwardCache& cache, const Vec& output_grad,
                   Gradient& out) {
  spec.validate();
  if (cache.widths != spec.layer_widths)
    throw DimensionError("backward: cache does not match network spec");
  int n_layers = spec.n_layers();
  if (static_cast<int>(cache.acts.size()) != n_layers + 1 ||
      static_cast<int>(cache.pre.size()) != n_layers)
    throw DimensionError("backward: stale or incomplete cache");
  if (static_cast<int>(output_grad.size()) != spec.output_width())
    throw DimensionError("backward: output gradient width mismatch");
  if (params.values.size() != spec.param_count())
    throw DimensionError("backward: parameter count mismatch");

  out.wrt_params.assign(params.values.size(), 0.0);
  out.wrt_input.assign(spec.input_width(), 0.0);

  // layer parameter offsets
  std::vector<std::size_t> offsets(n_layers);
  std::size_t off = 0;
  for (int l = 0; l < n_layers; ++l) {
    offsets[l] = off;
    off += static_cast<std::size_t>(spec.layer_widths[l + 1]) * spec.layer_widths[l] +
           spec.layer_widths[l + 1];
  }

  Vec delta = output_grad;  // d(loss)/d(pre-activation of current layer)
  for (int l = n_layers - 1; l >= 0; --l) {
    int in = spec.layer_widths[l];
    int out_w = spec.layer_widths[l + 1];
    if (static_cast<int>(cache.acts[l].size()) != in ||
        static_cast<int>(cache.pre[l].size()) != out_w)
      throw DimensionError("backward: stale or incomplete cache");
    if (l < n_layers - 1) {
      // delta currently holds d/d(post-activation); apply ReLU mask
      for (int o = 0; o < out_w; ++o)
        if (cache.pre[l][o] <= 0.0) delta[o] = 0.0;
    }
    const double* w = params.values.data() + offsets[l];
    double* gw = out.wrt_params.data() + offsets[l];
    double* gb = gw + static_cast<std::size_t>(out_w) * in;
    const Vec& a_prev = cache.acts[l];
    Vec prev_delta(in, 0.0);
    for (int o = 0; o < out_w; ++o) {
      double d = delta[o];
      gb[o] = d;
      double* grow = gw + static_cast<std::size_t>(o) * in;
      const double* wrow = w + static_cast<std::size_t>(o) * in;
      if (d != 0.0) {
        for (int i = 0; i < in; ++i) {
          grow[i] = d * a_prev[i];
          prev_delta[i] += d * wrow[i];
        }
      }
    }
    delta = std::move(prev_delta);
  }
  out.wrt_input = std::move(delta);
}

Gradient backward(const ParamSet& params, const NetSpec& spec,
                  const ForwardCache& cache, const Vec& output_grad) {
  Gradient g;
  backward_into(params, spec, cache, output_grad, g);
  return g;
}

// ---- VCSP serialization

namespace {

constexpr char kMagic[4] = {'V', 'C', 'S', 'P'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

void put_f64(std::ostream& out, double x) {
  std::uint64_t v;
  std::memcpy(&v, &x, 8);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint32_t get_u32(std::istream& in, const std::string& what) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (in.gcount() != 4) throw TruncatedFileError("truncated file reading " + what);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

double get_f64(std::istream& in, const std::string& what) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  if (in.gcount() != 8) throw TruncatedFileError("truncated file reading " + what);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  double x;
  std::memcpy(&x, &v, 8);
  return x;
}

}  // namespace

void save_params(const std::string& path, const ParamSet& params, const NetSpec& spec) {
  spec.validate();
  if (params.values.size() != spec.param_count())
    throw DimensionError("save_params: parameter count mismatch");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out.write(kMagic, 4);
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(spec.layer_widths.size()));
  for (int w : spec.layer_widths) put_u32(out, static_cast<std::uint32_t>(w));
  for (double x : params.values) put_f64(out, x);
  if (!out) throw IoError("write failed: " + path);
}

std::pair<ParamSet, NetSpec> load_params(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path);
  char magic[4];
  in.read(magic, 4);
  if (in.gcount() != 4) throw TruncatedFileError("truncated file reading magic");
  if (std::memcmp(magic, kMagic, 4) != 0)
    throw BadMagicError("not a parameter file: " + path);
  std::uint32_t version = get_u32(in, "version");
  if (version != kVersion)
    throw UnsupportedVersionError("unsupported parameter file version " +
                                  std::to_string(version));
  std::uint32_t n_widths = get_u32(in, "layer count");
  if (n_widths < 2 || n_widths > 64)
    throw TruncatedFileError("implausible layer count in " + path);
  NetSpec spec;
  spec.layer_widths.resize(n_widths);
  for (auto& w : spec.layer_widths)
    w = static_cast<int>(get_u32(in, "layer width"));
  spec.validate();
  ParamSet params;
  params.values.resize(spec.param_count());
  for (double& x : params.values) x = get_f64(in, "parameter value");
  // must be at end of file now
  char extra;
  if (in.read(&extra, 1)) throw TruncatedFileError("trailing bytes in " + path);
  return {std::move(params), std::move(spec)};
}

std::uint64_t param_hash(const ParamSet& params) {
  return fnv1a64(params.values.data(), params.values.size() * sizeof(double));
}

}  // namespace vcs
