#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "tankguard/replay.hpp"
#include "tankguard/rng.hpp"

using namespace tankguard;

static const std::string kTmp = std::string(TG_BINARY_DIR) + "/test_tmp/";

static Transition make_t(Rng& rng, int obs_dim, uint8_t mask) {
  Transition t;
  t.s.resize(obs_dim);
  t.s2.resize(obs_dim);
  for (int i = 0; i < obs_dim; ++i) t.s[i] = rng.normal();
  for (int i = 0; i < obs_dim; ++i) t.s2[i] = rng.normal();
  for (int i = 0; i < 4; ++i) t.a[i] = rng.uniform(-1.0, 1.0);
  t.r = rng.normal() * 100.0;
  t.done = rng.uniform() < 0.1;
  t.mask = mask;
  return t;
}

TEST_CASE("ring buffer evicts oldest and keeps the violation index exact") {
  Rng rng(50);
  ReplayBuffer buf(100);
  // 150 pushes: the first 50 (violations) are evicted.
  for (int i = 0; i < 50; ++i) buf.push(make_t(rng, 5, kMaskForce));
  for (int i = 0; i < 100; ++i) buf.push(make_t(rng, 5, 0));
  CHECK(buf.size() == 100);
  CHECK(buf.violations() == 0);
  // Mixed pushes: count violations by scan and compare with the index.
  for (int i = 0; i < 500; ++i)
    buf.push(make_t(rng, 5, rng.uniform() < 0.3 ? kMaskFlow : 0));
  size_t scan = 0;
  for (size_t i = 0; i < buf.size(); ++i) scan += is_violation(buf[i]) ? 1 : 0;
  CHECK(buf.violations() == scan);
}

TEST_CASE("uniform and mixed sampling hit the expected populations") {
  Rng rng(51);
  ReplayBuffer buf(1000);
  for (int i = 0; i < 1000; ++i)
    buf.push(make_t(rng, 5, i % 50 == 0 ? kMaskBudget : 0));  // 2% violations
  CHECK(buf.violations() == 20);
  int vio = 0;
  Rng srng(52);
  for (int i = 0; i < 4000; ++i) vio += is_violation(buf.sample_mixed(srng, 0.5)) ? 1 : 0;
  // Half the draws come from the violation pool, the rest picks ~2%.
  CHECK(vio > 1600);
  CHECK(vio < 2600);
  vio = 0;
  for (int i = 0; i < 4000; ++i) vio += is_violation(buf.sample(srng)) ? 1 : 0;
  CHECK(vio < 200);  // uniform: ~2%
}

TEST_CASE("binary dataset round-trips bit-exactly") {
  std::filesystem::create_directories(kTmp);
  Rng rng(53);
  std::vector<Transition> data;
  for (int i = 0; i < 300; ++i)
    data.push_back(make_t(rng, 9, static_cast<uint8_t>(i % 8)));
  const std::string path = kTmp + "data.bin";
  save_dataset_binary(data, path);
  const auto back = load_dataset(path);
  REQUIRE(back.size() == data.size());
  for (size_t i = 0; i < data.size(); ++i) {
    REQUIRE(std::memcmp(back[i].s.data(), data[i].s.data(), 9 * 8) == 0);
    REQUIRE(std::memcmp(back[i].s2.data(), data[i].s2.data(), 9 * 8) == 0);
    REQUIRE(std::memcmp(back[i].a.data(), data[i].a.data(), 4 * 8) == 0);
    REQUIRE(std::memcmp(&back[i].r, &data[i].r, 8) == 0);
    REQUIRE(back[i].done == data[i].done);
    REQUIRE(back[i].mask == data[i].mask);
  }
  // Writing the same data twice produces identical bytes.
  save_dataset_binary(data, kTmp + "data2.bin");
  std::ifstream a(path, std::ios::binary), b(kTmp + "data2.bin", std::ios::binary);
  std::string sa((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
  std::string sb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
  CHECK(sa == sb);
}

TEST_CASE("jsonl dataset round-trips through the auto-detecting reader") {
  std::filesystem::create_directories(kTmp);
  Rng rng(54);
  std::vector<Transition> data;
  for (int i = 0; i < 100; ++i) data.push_back(make_t(rng, 9, i % 2 ? kMaskForce : 0));
  const std::string path = kTmp + "data.jsonl";
  save_dataset_jsonl(data, path);
  const auto back = load_dataset(path);  // detected as JSONL
  REQUIRE(back.size() == data.size());
  for (size_t i = 0; i < data.size(); ++i) {
    // nlohmann prints shortest round-trip decimals: bit-exact after reload.
    REQUIRE(back[i].s == data[i].s);
    REQUIRE(back[i].a == data[i].a);
    REQUIRE(back[i].r == data[i].r);
    REQUIRE(back[i].mask == data[i].mask);
  }
}

TEST_CASE("corrupt dataset files are rejected with a clear error") {
  std::filesystem::create_directories(kTmp);
  {
    std::ofstream bad(kTmp + "bad.bin", std::ios::binary);
    bad << "TGD1garbage";
  }
  CHECK_THROWS_AS(load_dataset(kTmp + "bad.bin"), std::invalid_argument);
  {
    std::ofstream bad(kTmp + "bad.jsonl", std::ios::binary);
    bad << "{\"s\": [1,2,3]}\n";  // missing fields
  }
  CHECK_THROWS_AS(load_dataset(kTmp + "bad.jsonl"), std::invalid_argument);
  CHECK_THROWS_AS(load_dataset(kTmp + "nope.bin"), std::invalid_argument);
  // Truncated binary: valid header, cut payload.
  {
    Rng rng(55);
    std::vector<Transition> data{make_t(rng, 9, 0)};
    save_dataset_binary(data, kTmp + "trunc.bin");
    std::filesystem::resize_file(kTmp + "trunc.bin", 40);
  }
  CHECK_THROWS_AS(load_dataset(kTmp + "trunc.bin"), std::invalid_argument);
}
