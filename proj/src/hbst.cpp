#include "md/hbst.h"

#include <cstdlib>

namespace md {

void DescriptorTree::insert(const std::vector<BinaryDescriptor>& descriptors,
                            std::size_t keyframe_id) {
  for (std::size_t i = 0; i < descriptors.size(); ++i) {
    insertOne(*root_, {descriptors[i].bits, keyframe_id, i});
    ++size_;
  }
}

void DescriptorTree::insertOne(Node& node, Entry entry) {
  if (node.split_bit < 0) {
    node.bucket.push_back(std::move(entry));
    if (static_cast<int>(node.bucket.size()) > max_leaf_size_) {
      splitLeaf(node);
    }
    return;
  }
  insertOne(entry.bits[node.split_bit] ? *node.one : *node.zero, std::move(entry));
}

void DescriptorTree::splitLeaf(Node& node) {
  // Split on the bit whose population is closest to half the bucket.
  const int n  = static_cast<int>(node.bucket.size());
  int best_bit = -1, best_dev = n + 1;
  for (int bit = 0; bit < 256; ++bit) {
    int ones = 0;
    for (const Entry& e : node.bucket) {
      ones += e.bits[bit];
    }
    const int dev = std::abs(2 * ones - n);
    if (dev < best_dev) {
      best_dev = dev;
      best_bit = bit;
    }
  }
  if (best_dev >= n) {
    return;  // all descriptors identical on every bit: keep an oversized leaf
  }
  node.split_bit = best_bit;
  node.zero      = std::make_unique<Node>();
  node.one       = std::make_unique<Node>();
  for (Entry& e : node.bucket) {
    (e.bits[best_bit] ? node.one : node.zero)->bucket.push_back(std::move(e));
  }
  node.bucket.clear();
  node.bucket.shrink_to_fit();
}

std::vector<DescriptorMatch> DescriptorTree::query(
    const std::vector<BinaryDescriptor>& descriptors, int max_distance) const {
  std::vector<DescriptorMatch> out;
  for (std::size_t qi = 0; qi < descriptors.size(); ++qi) {
    const std::bitset<256>& bits = descriptors[qi].bits;
    const Node* node             = root_.get();
    while (node->split_bit >= 0) {
      node = bits[node->split_bit] ? node->one.get() : node->zero.get();
    }
    const Entry* best = nullptr;
    int best_distance = max_distance + 1;
    for (const Entry& e : node->bucket) {
      const int d = hammingDistance(bits, e.bits);
      if (d < best_distance) {
        best_distance = d;
        best          = &e;
      }
    }
    if (best != nullptr) {
      out.push_back({qi, best->keyframe_id, best->stored_index, best_distance});
    }
  }
  return out;
}

std::map<std::size_t, int> DescriptorTree::votes(
    const std::vector<DescriptorMatch>& matches) {
  std::map<std::size_t, int> out;
  for (const DescriptorMatch& m : matches) {
    ++out[m.keyframe_id];
  }
  return out;
}

}  // namespace md
