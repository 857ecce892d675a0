#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "tankguard/common.hpp"
#include "tankguard/mlp.hpp"

namespace tankguard {

// Versioned binary weight files. Layout (all integers little-endian):
//   magic "TGW1" | u32 n_sizes | u32 sizes[] | u8 activation | u8 head
//   | u64 param_count | f64 params[]
// Doubles are stored as their IEEE-754 bit pattern, so save -> load is
// bit-exact on any platform we build for.

namespace detail {

inline void put_u32(std::ostream& o, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  o.write(reinterpret_cast<const char*>(b), 4);
}

inline void put_u64(std::ostream& o, uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  o.write(reinterpret_cast<const char*>(b), 8);
}

inline void put_f64(std::ostream& o, double d) {
  uint64_t bits;
  std::memcpy(&bits, &d, 8);
  put_u64(o, bits);
}

inline uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  require(in.good(), "weights: truncated file");
  return static_cast<uint32_t>(b[0]) | static_cast<uint32_t>(b[1]) << 8 |
         static_cast<uint32_t>(b[2]) << 16 | static_cast<uint32_t>(b[3]) << 24;
}

inline uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  require(in.good(), "weights: truncated file");
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
  return v;
}

inline double get_f64(std::istream& in) {
  const uint64_t bits = get_u64(in);
  double d;
  std::memcpy(&d, &bits, 8);
  return d;
}

}  // namespace detail

inline void save_weights(const Mlp& net, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "weights: cannot write " + path);
  out.write("TGW1", 4);
  const MlpSpec& s = net.spec();
  detail::put_u32(out, static_cast<uint32_t>(s.sizes.size()));
  for (int n : s.sizes) detail::put_u32(out, static_cast<uint32_t>(n));
  out.put(s.act == Activation::kTanh ? 0 : 1);
  out.put(s.head == Head::kLinear ? 0 : 1);
  detail::put_u64(out, net.params().size());
  for (double p : net.params()) detail::put_f64(out, p);
  require(out.good(), "weights: write failed for " + path);
}

inline Mlp load_weights(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "weights: cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  require(in.good() && std::memcmp(magic, "TGW1", 4) == 0,
          "weights: bad magic in " + path + " (not a weight file or unsupported version)");
  MlpSpec spec;
  const uint32_t n_sizes = detail::get_u32(in);
  require(n_sizes >= 2 && n_sizes < 64, "weights: implausible layer count");
  for (uint32_t i = 0; i < n_sizes; ++i)
    spec.sizes.push_back(static_cast<int>(detail::get_u32(in)));
  const int act = in.get(), head = in.get();
  require(act == 0 || act == 1, "weights: bad activation tag");
  require(head == 0 || head == 1, "weights: bad head tag");
  spec.act = act == 0 ? Activation::kTanh : Activation::kRelu;
  spec.head = head == 0 ? Head::kLinear : Head::kSquashedGaussian;
  validate(spec);
  const uint64_t count = detail::get_u64(in);
  require(count == Mlp::param_count(spec), "weights: parameter count does not match layout");
  Rng dummy(0);
  Mlp net = Mlp::init(spec, dummy);
  for (uint64_t i = 0; i < count; ++i) net.params()[i] = detail::get_f64(in);
  require(in.good(), "weights: truncated parameter block");
  return net;
}

}  // namespace tankguard
