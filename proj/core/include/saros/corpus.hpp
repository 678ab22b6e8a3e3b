#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "saros/common.hpp"

namespace saros {

/// One timestamped feedback event. label is +1 (preferred) or -1.
struct Interaction {
  std::uint32_t user = 0;
  std::uint32_t item = 0;
  std::int64_t timestamp = 0;
  std::int8_t label = -1;
};

/// Dense interaction log, stably sorted by (user, timestamp).
class Corpus {
 public:
  Corpus() = default;
  Corpus(std::size_t n_users, std::size_t n_items, std::vector<Interaction> rows);

  std::size_t n_users() const { return n_users_; }
  std::size_t n_items() const { return n_items_; }
  const std::vector<Interaction>& rows() const { return rows_; }
  bool empty() const { return rows_.empty(); }

  /// Time-ordered stream of one user (may be empty).
  std::span<const Interaction> user_rows(std::uint32_t user) const {
    const auto& [begin, end] = spans_[user];
    return {rows_.data() + begin, rows_.data() + end};
  }

 private:
  std::size_t n_users_ = 0;
  std::size_t n_items_ = 0;
  std::vector<Interaction> rows_;
  std::vector<std::pair<std::size_t, std::size_t>> spans_;
};

/// Raw-id <-> dense-index correspondence from loading. Dense indices are
/// assigned in order of first appearance in the file.
struct IndexMaps {
  std::vector<std::string> user_ids;  // dense -> raw
  std::vector<std::string> item_ids;
  std::unordered_map<std::string, std::uint32_t> user_index;  // raw -> dense
  std::unordered_map<std::string, std::uint32_t> item_index;
};

struct LoadedCorpus {
  Corpus corpus;
  IndexMaps maps;
};

/// Column roles for delimiter-separated input. Exactly one of label/rating
/// must be present.
enum class ColumnRole { user, item, timestamp, label, rating, skip };

struct ColumnFormat {
  std::vector<ColumnRole> columns = {ColumnRole::user, ColumnRole::item,
                                     ColumnRole::timestamp, ColumnRole::label};
  char delimiter = '\t';
  double rating_threshold = 4.0;  // rating >= threshold binarizes to +1

  /// Parses a spec like "user,item,ts,label" or "user,item,rating,ts".
  static ColumnFormat parse(const std::string& spec, char delimiter,
                            double rating_threshold = 4.0);
};

/// Reads a delimiter-separated interaction log, compacts raw identifiers to
/// dense indices and stably sorts rows by (user, timestamp).
LoadedCorpus load_interactions(const std::filesystem::path& path, const ColumnFormat& format);

/// Writes rows in the four-column layout load_interactions reads by default,
/// translating dense indices back through the maps when given.
void write_interactions(const Corpus& corpus, const std::filesystem::path& path,
                        const IndexMaps* maps = nullptr);

struct SplitSpec {
  double train_fraction = 0.7;  // per-user chronological prefix
};

/// Per-user chronological split. For each user the first ceil(f * n_u)
/// interactions form the train stream, the remainder the test stream.
struct CorpusSplit {
  Corpus train;
  Corpus test;
  /// Users whose train stream contains at least one positive and one
  /// negative; trainers skip the rest.
  std::vector<std::uint8_t> trainable;

  std::size_t n_trainable() const;
};

CorpusSplit chronological_split(const Corpus& corpus, const SplitSpec& spec);

/// B_u^t: negatives N_u^t and positives Pi_u^t collected from one user's
/// stream until both sides are non-empty.
struct Block {
  std::uint32_t user = 0;
  std::vector<std::uint32_t> negatives;
  std::vector<std::uint32_t> positives;
  std::uint32_t index = 0;  // t, counted per user from 0
};

inline constexpr std::uint32_t kUnlimitedBlocks = 0xffffffffu;

/// Scans a time-ordered user stream and invokes fn(block) each time both
/// sides become non-empty, then resets both sides. Stops after max_blocks
/// emissions; trailing items that never complete a block are discarded.
/// An item reappearing inside the current block on the opposite side is
/// moved to the side of its latest interaction. Returns the emission count.
std::uint32_t for_each_block(std::span<const Interaction> stream, std::uint32_t max_blocks,
                             const std::function<void(const Block&)>& fn);

std::vector<Block> collect_blocks(std::span<const Interaction> stream,
                                  std::uint32_t max_blocks = kUnlimitedBlocks);

/// Users ordered by (first timestamp in their stream, index); users with an
/// empty stream are omitted. This is the visiting order trainers use.
std::vector<std::uint32_t> user_visit_order(const Corpus& corpus);

}  // namespace saros
