// Hamming-embedding binary search tree over 256-bit descriptors: interior
// nodes route on a single bit, leaves hold descriptor buckets tagged with
// the keyframe that produced them.
#pragma once

#include "md/features.h"

#include <map>
#include <memory>

namespace md {

struct DescriptorMatch {
  std::size_t query_index  = 0;
  std::size_t keyframe_id  = 0;
  std::size_t stored_index = 0;  // index within the inserted batch
  int distance             = 0;
};

class DescriptorTree {
 public:
  explicit DescriptorTree(int max_leaf_size = 100) : max_leaf_size_(max_leaf_size) {
    root_ = std::make_unique<Node>();
  }

  void insert(const std::vector<BinaryDescriptor>& descriptors,
              std::size_t keyframe_id);

  // Best in-leaf match per query descriptor with hamming <= max_distance.
  std::vector<DescriptorMatch> query(const std::vector<BinaryDescriptor>& descriptors,
                                     int max_distance) const;

  // Votes aggregated per keyframe id from a match list.
  static std::map<std::size_t, int> votes(const std::vector<DescriptorMatch>& matches);

  std::size_t size() const { return size_; }

 private:
  struct Entry {
    std::bitset<256> bits;
    std::size_t keyframe_id;
    std::size_t stored_index;
  };
  struct Node {
    int split_bit = -1;  // -1: leaf
    std::vector<Entry> bucket;
    std::unique_ptr<Node> zero, one;
  };

  void insertOne(Node& node, Entry entry);
  void splitLeaf(Node& node);

  int max_leaf_size_;
  std::size_t size_ = 0;
  std::unique_ptr<Node> root_;
};

}  // namespace md
