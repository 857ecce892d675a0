#pragma once

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "tankguard/common.hpp"
#include "tankguard/rng.hpp"

namespace tankguard {

// Transition storage shared by online training and the offline dataset.
// `mask` records which safety conditions fired on this transition
// (bit 0 force, bit 1 budget, bit 2 flow); the safety critic's cost label is
// "any bit set".

struct Transition {
  Eigen::VectorXd s;
  Eigen::Vector4d a = Eigen::Vector4d::Zero();  // dp_x, dp_y, k1, k2 (env units)
  double r = 0.0;
  Eigen::VectorXd s2;
  bool done = false;
  uint8_t mask = 0;
};

constexpr uint8_t kMaskForce = 1;
constexpr uint8_t kMaskBudget = 2;
constexpr uint8_t kMaskFlow = 4;

inline bool is_violation(const Transition& t) { return t.mask != 0; }

// Fixed-capacity ring buffer with O(1) uniform sampling and a maintained
// index of violation transitions for oversampling.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(size_t capacity) : capacity_(capacity) {
    require(capacity > 0, "replay: capacity must be positive");
    vio_pos_.assign(capacity, -1);
  }

  void push(Transition t) {
    if (data_.size() < capacity_) {
      data_.push_back(std::move(t));
      index_violation(data_.size() - 1);
      return;
    }
    unindex_violation(head_);
    data_[head_] = std::move(t);
    index_violation(head_);
    head_ = (head_ + 1) % capacity_;
  }

  size_t size() const { return data_.size(); }
  size_t violations() const { return vio_slots_.size(); }
  const Transition& operator[](size_t i) const { return data_[i]; }

  const Transition& sample(Rng& rng) const {
    require(!data_.empty(), "replay: sampling from empty buffer");
    return data_[rng.uniform_int(data_.size())];
  }

  // Sample preferring violation transitions with the given probability (falls
  // back to uniform when no violations are stored).
  const Transition& sample_mixed(Rng& rng, double violation_fraction) const {
    if (!vio_slots_.empty() && rng.uniform() < violation_fraction)
      return data_[vio_slots_[rng.uniform_int(vio_slots_.size())]];
    return sample(rng);
  }

 private:
  void index_violation(size_t slot) {
    if (!is_violation(data_[slot])) return;
    vio_pos_[slot] = static_cast<long>(vio_slots_.size());
    vio_slots_.push_back(slot);
  }
  void unindex_violation(size_t slot) {
    const long pos = vio_pos_[slot];
    if (pos < 0) return;
    const size_t last = vio_slots_.back();
    vio_slots_[pos] = last;
    vio_pos_[last] = pos;
    vio_slots_.pop_back();
    vio_pos_[slot] = -1;
  }

  size_t capacity_;
  size_t head_ = 0;
  std::vector<Transition> data_;
  std::vector<size_t> vio_slots_;
  std::vector<long> vio_pos_;  // slot -> position in vio_slots_, or -1
};

// --- dataset files ----------------------------------------------------------
// Binary is the canonical interchange format; JSONL is the debuggable twin.
// Binary layout: magic "TGD1" | u32 obs_dim | u64 count | records, each
//   u32 payload_bytes | f64 s[obs] | f64 a[4] | f64 r | f64 s2[obs]
//   | u8 done | u8 mask
// Integers and double bit patterns are little-endian.

namespace dsdetail {

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
  require(in.good(), "dataset: truncated file");
  return static_cast<uint32_t>(b[0]) | static_cast<uint32_t>(b[1]) << 8 |
         static_cast<uint32_t>(b[2]) << 16 | static_cast<uint32_t>(b[3]) << 24;
}
inline uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  require(in.good(), "dataset: truncated file");
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

}  // namespace dsdetail

inline void save_dataset_binary(const std::vector<Transition>& data, const std::string& path) {
  require(!data.empty(), "dataset: refusing to write an empty dataset");
  const uint32_t obs = static_cast<uint32_t>(data.front().s.size());
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "dataset: cannot write " + path);
  out.write("TGD1", 4);
  dsdetail::put_u32(out, obs);
  dsdetail::put_u64(out, data.size());
  const uint32_t payload = 8 * (obs + 4 + 1 + obs) + 2;
  for (const auto& t : data) {
    require(t.s.size() == obs && t.s2.size() == obs, "dataset: inconsistent obs dim");
    dsdetail::put_u32(out, payload);
    for (uint32_t i = 0; i < obs; ++i) dsdetail::put_f64(out, t.s[i]);
    for (int i = 0; i < 4; ++i) dsdetail::put_f64(out, t.a[i]);
    dsdetail::put_f64(out, t.r);
    for (uint32_t i = 0; i < obs; ++i) dsdetail::put_f64(out, t.s2[i]);
    out.put(t.done ? 1 : 0);
    out.put(static_cast<char>(t.mask));
  }
  require(out.good(), "dataset: write failed for " + path);
}

inline std::vector<Transition> load_dataset_binary(std::istream& in, const std::string& path) {
  char magic[4];
  in.read(magic, 4);
  require(in.good() && std::memcmp(magic, "TGD1", 4) == 0,
          "dataset: bad magic in " + path);
  const uint32_t obs = dsdetail::get_u32(in);
  require(obs > 0 && obs < 1024, "dataset: implausible obs dim");
  const uint64_t count = dsdetail::get_u64(in);
  const uint32_t payload = 8 * (obs + 4 + 1 + obs) + 2;
  std::vector<Transition> data;
  data.reserve(count);
  for (uint64_t n = 0; n < count; ++n) {
    require(dsdetail::get_u32(in) == payload, "dataset: record length mismatch");
    Transition t;
    t.s.resize(obs);
    t.s2.resize(obs);
    for (uint32_t i = 0; i < obs; ++i) t.s[i] = dsdetail::get_f64(in);
    for (int i = 0; i < 4; ++i) t.a[i] = dsdetail::get_f64(in);
    t.r = dsdetail::get_f64(in);
    for (uint32_t i = 0; i < obs; ++i) t.s2[i] = dsdetail::get_f64(in);
    const int done = in.get(), mask = in.get();
    require(done == 0 || done == 1, "dataset: bad done flag");
    require(mask >= 0 && mask < 8, "dataset: bad mask bits");
    t.done = done == 1;
    t.mask = static_cast<uint8_t>(mask);
    data.push_back(std::move(t));
  }
  return data;
}

inline void save_dataset_jsonl(const std::vector<Transition>& data, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "dataset: cannot write " + path);
  for (const auto& t : data) {
    nlohmann::json j;
    j["s"] = std::vector<double>(t.s.data(), t.s.data() + t.s.size());
    j["a"] = std::vector<double>(t.a.data(), t.a.data() + 4);
    j["r"] = t.r;
    j["s2"] = std::vector<double>(t.s2.data(), t.s2.data() + t.s2.size());
    j["done"] = t.done;
    j["mask"] = {{"force", (t.mask & kMaskForce) != 0},
                 {"budget", (t.mask & kMaskBudget) != 0},
                 {"flow", (t.mask & kMaskFlow) != 0}};
    out << j.dump() << "\n";
  }
  require(out.good(), "dataset: write failed for " + path);
}

inline std::vector<Transition> load_dataset_jsonl(std::istream& in, const std::string& path) {
  std::vector<Transition> data;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
      Transition t;
      const auto s = j.at("s").get<std::vector<double>>();
      const auto s2 = j.at("s2").get<std::vector<double>>();
      const auto a = j.at("a").get<std::vector<double>>();
      require(a.size() == 4, "action must have 4 entries");
      require(s.size() == s2.size(), "s/s2 dim mismatch");
      t.s = Eigen::Map<const Eigen::VectorXd>(s.data(), s.size());
      t.s2 = Eigen::Map<const Eigen::VectorXd>(s2.data(), s2.size());
      for (int i = 0; i < 4; ++i) t.a[i] = a[i];
      t.r = j.at("r").get<double>();
      t.done = j.at("done").get<bool>();
      const auto& m = j.at("mask");
      t.mask = (m.at("force").get<bool>() ? kMaskForce : 0) |
               (m.at("budget").get<bool>() ? kMaskBudget : 0) |
               (m.at("flow").get<bool>() ? kMaskFlow : 0);
      data.push_back(std::move(t));
    } catch (const std::exception& e) {
      throw std::invalid_argument("dataset: " + path + " line " + std::to_string(lineno) + ": " +
                                  e.what());
    }
  }
  return data;
}

// Auto-detecting reader: binary magic wins, otherwise JSONL.
inline std::vector<Transition> load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "dataset: cannot open " + path);
  char magic[4] = {0, 0, 0, 0};
  in.read(magic, 4);
  in.clear();
  in.seekg(0);
  if (std::memcmp(magic, "TGD1", 4) == 0) return load_dataset_binary(in, path);
  return load_dataset_jsonl(in, path);
}

}  // namespace tankguard
