#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace geossl::embeddings {

enum class Split : std::uint8_t { train = 0, test = 1 };

// Node features (row i is the embedding of node i), 1-based labels and an
// optional per-node train/test tag.
struct EmbeddingSet {
  Eigen::MatrixXd data;     // n x F
  std::vector<int> labels;  // values in {1..num_classes}
  std::vector<Split> split;  // empty, or one tag per node
  int num_classes = 0;

  std::size_t size() const { return static_cast<std::size_t>(data.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(data.cols()); }
  bool has_split() const { return !split.empty(); }
};

bool operator==(const EmbeddingSet& a, const EmbeddingSet& b);

// Throws on any broken invariant (label range, lengths, non-finite data).
// With require_both_splits, each tag must occur at least once.
void validate(const EmbeddingSet& set, bool require_both_splits = false);

// Rows listed in `rows`, in that order.
EmbeddingSet subset(const EmbeddingSet& set, std::span<const std::size_t> rows);

std::vector<std::size_t> indices_with(std::span<const Split> split, Split tag);

// MEMB binary format, little-endian:
//   "MEMB" | version u32 = 1 | n u64 | F u64 | C u32 | flags u32
//   | data f32[n*F] row-major | labels u32[n] (0-based) | split u8[n] iff flags bit0
// Data is narrowed to f32 on save, so load(save(s)) == s whenever s.data is
// f32-representable.
inline constexpr std::uint32_t kMembVersion = 1;
inline constexpr std::size_t kMembHeaderBytes = 4 + 4 + 8 + 8 + 4 + 4;

void save_embeddings(const EmbeddingSet& set, const std::filesystem::path& path);
EmbeddingSet load_embeddings(const std::filesystem::path& path);

// CSV fallback with header `id,label,split,f0..f{F-1}`; label is 1-based,
// split is `train`, `test` or empty.
void save_embeddings_csv(const EmbeddingSet& set, const std::filesystem::path& path);
EmbeddingSet load_embeddings_csv(const std::filesystem::path& path);

// Dispatches on extension: `.csv` goes to the CSV reader, anything else MEMB.
EmbeddingSet load_any(const std::filesystem::path& path);

// Exactly round(nu * n) train tags at uniformly random positions.
std::vector<Split> assign_split(std::size_t n, double train_fraction, std::uint64_t seed);

}  // namespace geossl::embeddings
