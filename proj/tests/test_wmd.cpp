#include <gtest/gtest.h>

#include <map>

#include "contrail/wmd.hpp"
#include "test_util.hpp"
#include "wmd_oracle.hpp"

using namespace contrail;

namespace {

WordVectors toy_vocab(Rng& rng, std::size_t words = 5, std::size_t dim = 3) {
  WordVectors wv(dim);
  for (std::size_t w = 0; w < words; ++w) {
    std::vector<double> v(dim);
    for (auto& x : v) x = rng.normal();
    wv.set("w" + std::to_string(w), v);
  }
  return wv;
}

std::vector<std::string> random_doc(Rng& rng, std::size_t max_len, std::size_t words = 5) {
  std::vector<std::string> d;
  const std::size_t len = 1 + rng.below(max_len);
  for (std::size_t i = 0; i < len; ++i) d.push_back("w" + std::to_string(rng.below(words)));
  return d;
}

double oracle_wmd(const std::vector<std::string>& x, const std::vector<std::string>& y,
                  const WordVectors& wv) {
  std::map<std::string, double> cx, cy;
  for (const auto& t : x) cx[t] += 1.0 / static_cast<double>(x.size());
  for (const auto& t : y) cy[t] += 1.0 / static_cast<double>(y.size());
  std::vector<double> a, b;
  std::vector<std::string> wa, wb;
  for (auto& [w, c] : cx) {
    wa.push_back(w);
    a.push_back(c);
  }
  for (auto& [w, c] : cy) {
    wb.push_back(w);
    b.push_back(c);
  }
  std::vector<std::vector<double>> cost(a.size(), std::vector<double>(b.size()));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) {
      double s = 0.0;
      const auto& u = wv.at(wa[i]);
      const auto& v = wv.at(wb[j]);
      for (std::size_t k = 0; k < u.size(); ++k) s += (u[k] - v[k]) * (u[k] - v[k]);
      cost[i][j] = std::sqrt(s);
    }
  return test_util::transport_by_enumeration(a, b, cost);
}

}  // namespace

TEST(Wmd, SingleMassIsEuclidean) {
  WordVectors wv(2);
  wv.set("a", {0.0, 0.0});
  wv.set("b", {3.0, 4.0});
  const std::vector<std::string> x{"a"}, y{"b"};
  EXPECT_DOUBLE_EQ(wmd(x, y, wv, WmdMethod::exact), 5.0);
  EXPECT_DOUBLE_EQ(wmd(x, y, wv, WmdMethod::relaxed), 5.0);
}

TEST(Wmd, IdentityAndOov) {
  Rng rng(3);
  const auto wv = toy_vocab(rng);
  const std::vector<std::string> d{"w0", "w1", "w1", "w3"};
  EXPECT_NEAR(wmd(d, d, wv, WmdMethod::exact), 0.0, 1e-15);
  const std::vector<std::string> with_oov{"w0", "w1", "w1", "w3", "zzz"};
  EXPECT_NEAR(wmd(d, with_oov, wv, WmdMethod::exact), 0.0, 1e-15);
  const std::vector<std::string> only_oov{"zzz", "yyy"};
  try {
    wmd(d, only_oov, wv);
    FAIL() << "expected empty-after-OOV";
  } catch (const Error& e) {
    EXPECT_STREQ(e.what(), "empty-after-OOV");
  }
}

TEST(Wmd, ThreeWordDocsMatchEnumeration) {
  Rng rng(11);
  const auto wv = toy_vocab(rng);
  const std::vector<std::string> x{"w0", "w2", "w4"}, y{"w1", "w3", "w3"};
  EXPECT_NEAR(wmd(x, y, wv, WmdMethod::exact), oracle_wmd(x, y, wv), 1e-9);
}

TEST(WmdProperty, RelaxedBoundSymmetryAndOracle) {
  Rng rng(2024);
  const auto wv = toy_vocab(rng, 5, 4);
  for (int trial = 0; trial < 200; ++trial) {
    const auto x = random_doc(rng, 3), y = random_doc(rng, 3);
    const double exact = wmd(x, y, wv, WmdMethod::exact);
    const double relaxed = wmd(x, y, wv, WmdMethod::relaxed);
    EXPECT_LE(relaxed, exact + 1e-12);
    EXPECT_NEAR(exact, wmd(y, x, wv, WmdMethod::exact), 1e-12);
    EXPECT_NEAR(exact, oracle_wmd(x, y, wv), 1e-9);
    EXPECT_NEAR(wmd(x, x, wv, WmdMethod::exact), 0.0, 1e-12);
  }
}

TEST(WmdProperty, LargerDocsStillBoundedByRelaxed) {
  Rng rng(99);
  const auto wv = toy_vocab(rng, 30, 5);
  for (int trial = 0; trial < 50; ++trial) {
    const auto x = random_doc(rng, 20, 30), y = random_doc(rng, 20, 30);
    EXPECT_LE(wmd(x, y, wv, WmdMethod::relaxed), wmd(x, y, wv, WmdMethod::exact) + 1e-12);
  }
}

TEST(WordVectors, Word2VecTextRoundTrip) {
  const auto dir = test_util::scratch_dir("w2v");
  Rng rng(5);
  const auto wv = toy_vocab(rng, 6, 3);
  wv.save(dir + "/v.txt");
  const auto back = WordVectors::load(dir + "/v.txt");
  EXPECT_EQ(back.dimension(), 3u);
  EXPECT_EQ(back.words(), wv.words());
  for (const auto& w : wv.words()) EXPECT_EQ(back.at(w), wv.at(w));
  test_util::write_lines(dir + "/bad.txt", "2 3\nfoo 1 2\n");
  EXPECT_THROW(WordVectors::load(dir + "/bad.txt"), Error);
  WordVectors two(2);
  EXPECT_THROW(two.set("x", {1.0}), Error);
  EXPECT_THROW(two.set("x", {1.0, std::nan("")}), Error);
}
