#include "md/hbst.h"

#include <doctest.h>

#include <random>

using namespace md;

namespace {

std::vector<BinaryDescriptor> randomDescriptors(int n, std::mt19937_64& rng) {
  std::vector<BinaryDescriptor> out(n);
  std::uniform_int_distribution<int> bit(0, 1);
  for (auto& d : out) {
    for (int i = 0; i < 256; ++i) {
      d.bits[i] = bit(rng);
    }
  }
  return out;
}

std::bitset<256> flipBits(std::bitset<256> bits, int flips, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> which(0, 255);
  for (int i = 0; i < flips; ++i) {
    bits.flip(which(rng));
  }
  return bits;
}

}  // namespace

TEST_CASE("insert then query finds the descriptor at distance zero") {
  std::mt19937_64 rng(3);
  const auto descs = randomDescriptors(5, rng);
  DescriptorTree tree;
  tree.insert(descs, 7);
  const auto matches = tree.query(descs, 25);
  REQUIRE(matches.size() == 5);
  for (const auto& m : matches) {
    CHECK(m.distance == 0);
    CHECK(m.keyframe_id == 7);
    CHECK(m.stored_index == m.query_index);
  }
}

TEST_CASE("query on an empty tree returns nothing") {
  std::mt19937_64 rng(4);
  DescriptorTree tree;
  CHECK(tree.query(randomDescriptors(3, rng), 256).empty());
}

TEST_CASE("self-recall is exactly 1.0 after splits") {
  std::mt19937_64 rng(5);
  const auto descs = randomDescriptors(2000, rng);
  DescriptorTree tree(100);
  tree.insert(descs, 0);
  CHECK(tree.size() == 2000);
  const auto matches = tree.query(descs, 0);
  CHECK(matches.size() == 2000);
}

TEST_CASE("recall against brute force at threshold 25") {
  std::mt19937_64 rng(6);
  const auto stored = randomDescriptors(1000, rng);
  DescriptorTree tree(100);
  tree.insert(stored, 0);

  // Queries: perturbed copies with up to 10 flipped bits.
  std::uniform_int_distribution<int> nflips(0, 10);
  std::uniform_int_distribution<int> which(0, 999);
  int brute_hits = 0, tree_hits = 0;
  for (int t = 0; t < 1000; ++t) {
    BinaryDescriptor q;
    q.bits = flipBits(stored[which(rng)].bits, nflips(rng), rng);
    // Brute-force scan.
    int best = 256;
    for (const auto& s : stored) {
      best = std::min(best, hammingDistance(q.bits, s.bits));
    }
    if (best <= 25) {
      ++brute_hits;
    } else {
      continue;
    }
    if (!tree.query({q}, 25).empty()) {
      ++tree_hits;
    }
  }
  REQUIRE(brute_hits > 900);
  CHECK(tree_hits >= 0.9 * brute_hits);
}

TEST_CASE("votes aggregate per keyframe") {
  std::mt19937_64 rng(8);
  DescriptorTree tree;
  const auto a = randomDescriptors(10, rng);
  const auto b = randomDescriptors(20, rng);
  tree.insert(a, 1);
  tree.insert(b, 2);
  auto all = a;
  all.insert(all.end(), b.begin(), b.end());
  const auto tally = DescriptorTree::votes(tree.query(all, 0));
  CHECK(tally.at(1) == 10);
  CHECK(tally.at(2) == 20);
}

TEST_CASE("identical descriptors leave an oversized leaf instead of looping") {
  BinaryDescriptor d;
  d.bits.set();
  std::vector<BinaryDescriptor> same(300, d);
  DescriptorTree tree(100);
  tree.insert(same, 0);
  CHECK(tree.query({d}, 0).size() == 1);
}
