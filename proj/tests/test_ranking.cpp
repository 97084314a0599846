#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "zipfls/ranking.hpp"

using namespace zipfls;

namespace {

// Builds an h x w map whose per-location argmax is exactly `winners`.
DenseLogitsMap map_with_winners(int h, int w, int c, const std::vector<int>& winners) {
  DenseLogitsMap map;
  map.height = h;
  map.width = w;
  map.num_classes = c;
  map.scores.assign(static_cast<std::size_t>(h) * w * c, 0.0);
  for (int k = 0; k < h * w; ++k) {
    map.scores[static_cast<std::size_t>(k) * c + winners[k]] = 5.0;
  }
  return map;
}

}  // namespace

TEST_CASE("logit rank orders by descending logit") {
  auto r = logit_rank({2, 1, 0, -1}, 0);
  CHECK(r.ranks == std::vector<double>{1, 2, 3});
}

TEST_CASE("logit rank full tie shares the mean position") {
  auto r = logit_rank({5, 5, 5}, 1);
  CHECK(r.ranks == std::vector<double>{1.5, 1.5});
}

TEST_CASE("logit rank partial tie") {
  // classes (1,2,3) with logits (3,3,1): positions {1,2} average to 1.5
  auto r = logit_rank({0, 3, 3, 1}, 0);
  CHECK(r.ranks == std::vector<double>{1.5, 1.5, 3});
}

TEST_CASE("distinct logits produce exactly the ranks 1..C-1") {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 100; ++trial) {
    const int c = 2 + static_cast<int>(rng() % 10);
    Logits z(c);
    for (double& v : z) v = static_cast<double>(rng() % 10000) / 7.0;
    // force distinctness
    std::vector<double> sorted = z;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) continue;

    const int target = static_cast<int>(rng() % c);
    auto r = logit_rank(z, target);
    std::vector<double> got = r.ranks;
    std::sort(got.begin(), got.end());
    for (int i = 0; i < c - 1; ++i) CHECK(got[i] == static_cast<double>(i + 1));
    CHECK(*std::min_element(r.ranks.begin(), r.ranks.end()) == 1.0);
  }
}

TEST_CASE("logit rank rejects degenerate input") {
  CHECK_THROWS_WITH_AS(logit_rank({1.0}, 0), "no non-target classes",
                       std::invalid_argument);
  CHECK_THROWS_AS(logit_rank({1.0, 2.0}, 5), std::invalid_argument);
}

TEST_CASE("dense votes count argmaxes and drop the target") {
  auto map = map_with_winners(2, 2, 10, {3, 3, 7, 1});
  auto hist = dense_votes(std::span<const DenseLogitsMap>(&map, 1), 1);
  REQUIRE(hist.counts.size() == 10);
  CHECK(hist.counts[3] == 2);
  CHECK(hist.counts[7] == 1);
  CHECK(hist.counts[1] == 0);
  CHECK(hist.total_votes == 3);
  long sum = 0;
  for (long n : hist.counts) sum += n;
  CHECK(sum == hist.total_votes);
}

TEST_CASE("all-target map yields an empty histogram") {
  auto map = map_with_winners(3, 3, 4, std::vector<int>(9, 2));
  auto hist = dense_votes(std::span<const DenseLogitsMap>(&map, 1), 2);
  CHECK(hist.total_votes == 0);
  for (long n : hist.counts) CHECK(n == 0);
}

TEST_CASE("two maps: counted votes are locations minus target votes") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    const int c = 5;
    std::vector<DenseLogitsMap> maps{oracle::random_map(2, 2, c, rng),
                                     oracle::random_map(4, 4, c, rng)};
    const int target = static_cast<int>(rng() % c);
    auto hist = dense_votes(std::span<const DenseLogitsMap>(maps), target);
    long target_votes = 0;
    for (const auto& map : maps) {
      for (int k = 0; k < map.locations(); ++k) {
        int best = 0;
        for (int id = 1; id < c; ++id) {
          if (map.at(k, id) > map.at(k, best)) best = id;
        }
        if (best == target) ++target_votes;
      }
    }
    CHECK(hist.total_votes == 20 - target_votes);
    CHECK(hist.total_votes <= 20);
  }
}

TEST_CASE("dense votes reject mismatched class counts") {
  std::mt19937_64 rng(3);
  std::vector<DenseLogitsMap> maps{oracle::random_map(2, 2, 5, rng),
                                   oracle::random_map(2, 2, 6, rng)};
  CHECK_THROWS_AS(dense_votes(std::span<const DenseLogitsMap>(maps), 0),
                  std::invalid_argument);
}

TEST_CASE("argmax ties at a location go to the lowest class id") {
  DenseLogitsMap map;
  map.height = 1;
  map.width = 1;
  map.num_classes = 4;
  map.scores = {1.0, 7.0, 7.0, 7.0};
  auto hist = dense_votes(std::span<const DenseLogitsMap>(&map, 1), 0);
  CHECK(hist.counts[1] == 1);
  CHECK(hist.counts[2] == 0);
  CHECK(hist.counts[3] == 0);
}

TEST_CASE("votes_to_ranks: fractional ties then the shared floor rank") {
  VoteHistogram hist;
  hist.counts = {3, 0, 0, 0, 3, 1};  // C=6, target 2
  hist.total_votes = 7;
  auto r = votes_to_ranks(hist, 2);
  // non-target order: classes 0,1,3,4,5
  CHECK(r.ranks[0] == 1.5);  // class 0
  CHECK(r.ranks[3] == 1.5);  // class 4
  CHECK(r.ranks[4] == 3.0);  // class 5
  CHECK(r.ranks[1] == 4.0);  // class 1, zero votes -> V+1
  CHECK(r.ranks[2] == 4.0);  // class 3
}

TEST_CASE("votes_to_ranks: no votes at all degenerates to rank 1") {
  VoteHistogram hist;
  hist.counts = {0, 0, 0, 0};
  auto r = votes_to_ranks(hist, 0);
  CHECK(r.ranks == std::vector<double>{1, 1, 1});
}

TEST_CASE("votes_to_ranks: single voted class") {
  VoteHistogram hist;
  hist.counts = {0, 0, 5, 0};
  auto r = votes_to_ranks(hist, 0);
  CHECK(r.ranks[1] == 1.0);  // class 2
  CHECK(r.ranks[0] == 2.0);  // class 1
  CHECK(r.ranks[2] == 2.0);  // class 3
}

TEST_CASE("vote pipeline matches the brute-force oracle") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 1000; ++trial) {
    const int c = 2 + static_cast<int>(rng() % 7);
    const int n_maps = 1 + static_cast<int>(rng() % 2);
    std::vector<DenseLogitsMap> maps;
    for (int i = 0; i < n_maps; ++i) {
      const int h = 1 + static_cast<int>(rng() % 3);
      const int w = 1 + static_cast<int>(rng() % 3);
      // small integer score levels make argmax ties common
      maps.push_back(oracle::random_map(h, w, c, rng, 3));
    }
    const int target = static_cast<int>(rng() % c);
    auto ranks =
        votes_to_ranks(dense_votes(std::span<const DenseLogitsMap>(maps), target), target);
    CHECK(ranks.ranks == oracle::vote_rank_bruteforce(maps, target));
  }
}

TEST_CASE("vote histogram is scale invariant") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    auto map = oracle::random_map(3, 3, 6, rng);
    auto scaled = map;
    for (double& v : scaled.scores) v *= 37.5;
    auto a = dense_votes(std::span<const DenseLogitsMap>(&map, 1), 0);
    auto b = dense_votes(std::span<const DenseLogitsMap>(&scaled, 1), 0);
    CHECK(a.counts == b.counts);
  }
}

TEST_CASE("higher count always means better rank") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 200; ++trial) {
    const int c = 3 + static_cast<int>(rng() % 6);
    VoteHistogram hist;
    hist.counts.resize(c);
    for (long& n : hist.counts) n = static_cast<long>(rng() % 4);
    const int target = static_cast<int>(rng() % c);
    hist.counts[target] = 0;
    auto r = votes_to_ranks(hist, target);
    for (int a = 0; a < c; ++a) {
      for (int b = 0; b < c; ++b) {
        if (a == target || b == target) continue;
        if (hist.counts[a] > hist.counts[b]) {
          CHECK(r.ranks[nontarget_index(a, target)] < r.ranks[nontarget_index(b, target)]);
        }
      }
    }
  }
}

TEST_CASE("fractional ranks of voted classes average the occupied positions") {
  std::mt19937_64 rng(29);
  for (int trial = 0; trial < 100; ++trial) {
    const int c = 3 + static_cast<int>(rng() % 6);
    VoteHistogram hist;
    hist.counts.resize(c);
    for (long& n : hist.counts) n = static_cast<long>(rng() % 4);
    const int target = static_cast<int>(rng() % c);
    hist.counts[target] = 0;
    auto r = votes_to_ranks(hist, target);
    int voted = 0;
    double rank_sum = 0.0;
    for (int id = 0; id < c; ++id) {
      if (id != target && hist.counts[id] > 0) {
        ++voted;
        rank_sum += r.ranks[nontarget_index(id, target)];
      }
    }
    // mid-ranks redistribute but never change the total 1 + 2 + ... + V
    const double expect = voted * (voted + 1) / 2.0;
    CHECK(rank_sum == doctest::Approx(expect).epsilon(1e-12));
  }
}
