#include "saros/corpus.hpp"

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace saros {

Corpus::Corpus(std::size_t n_users, std::size_t n_items, std::vector<Interaction> rows)
    : n_users_(n_users), n_items_(n_items), rows_(std::move(rows)) {
  std::stable_sort(rows_.begin(), rows_.end(), [](const Interaction& a, const Interaction& b) {
    if (a.user != b.user) return a.user < b.user;
    return a.timestamp < b.timestamp;
  });
  spans_.assign(n_users_, {0, 0});
  std::size_t i = 0;
  while (i < rows_.size()) {
    std::size_t j = i;
    while (j < rows_.size() && rows_[j].user == rows_[i].user) ++j;
    spans_[rows_[i].user] = {i, j};
    i = j;
  }
}

ColumnFormat ColumnFormat::parse(const std::string& spec, char delimiter,
                                 double rating_threshold) {
  ColumnFormat fmt;
  fmt.columns.clear();
  fmt.delimiter = delimiter;
  fmt.rating_threshold = rating_threshold;
  std::stringstream ss(spec);
  std::string tok;
  int n_user = 0, n_item = 0, n_ts = 0, n_value = 0;
  while (std::getline(ss, tok, ',')) {
    if (tok == "user") {
      fmt.columns.push_back(ColumnRole::user);
      ++n_user;
    } else if (tok == "item") {
      fmt.columns.push_back(ColumnRole::item);
      ++n_item;
    } else if (tok == "ts" || tok == "timestamp") {
      fmt.columns.push_back(ColumnRole::timestamp);
      ++n_ts;
    } else if (tok == "label") {
      fmt.columns.push_back(ColumnRole::label);
      ++n_value;
    } else if (tok == "rating") {
      fmt.columns.push_back(ColumnRole::rating);
      ++n_value;
    } else if (tok == "skip" || tok == "-") {
      fmt.columns.push_back(ColumnRole::skip);
    } else {
      throw ConfigError("unknown column role '" + tok + "' in format spec");
    }
  }
  if (n_user != 1 || n_item != 1 || n_ts != 1 || n_value != 1) {
    throw ConfigError("format spec must name user, item, ts and exactly one of label/rating");
  }
  return fmt;
}

namespace {

std::int64_t parse_i64(const std::string& tok, std::size_t line, const char* what) {
  std::int64_t value = 0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    throw ParseError(line, std::string("invalid ") + what + " '" + tok + "'");
  }
  return value;
}

double parse_f64(const std::string& tok, std::size_t line, const char* what) {
  errno = 0;
  char* end = nullptr;
  const double value = std::strtod(tok.c_str(), &end);
  if (errno != 0 || end != tok.c_str() + tok.size() || tok.empty()) {
    throw ParseError(line, std::string("invalid ") + what + " '" + tok + "'");
  }
  return value;
}

std::int8_t parse_label(const std::string& tok, std::size_t line) {
  if (tok == "1" || tok == "+1") return 1;
  if (tok == "-1" || tok == "0") return -1;
  throw ParseError(line, "invalid label '" + tok + "' (expected +1/1/-1/0)");
}

std::uint32_t intern(const std::string& raw, std::unordered_map<std::string, std::uint32_t>& map,
                     std::vector<std::string>& ids) {
  const auto [it, inserted] = map.emplace(raw, static_cast<std::uint32_t>(ids.size()));
  if (inserted) ids.push_back(raw);
  return it->second;
}

}  // namespace

LoadedCorpus load_interactions(const std::filesystem::path& path, const ColumnFormat& format) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open input file: " + path.string());

  LoadedCorpus out;
  std::vector<Interaction> rows;
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> fields;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    fields.clear();
    std::size_t start = 0;
    while (true) {
      const std::size_t pos = line.find(format.delimiter, start);
      fields.push_back(line.substr(start, pos == std::string::npos ? pos : pos - start));
      if (pos == std::string::npos) break;
      start = pos + 1;
    }
    if (fields.size() < format.columns.size()) {
      throw ParseError(line_no, "expected " + std::to_string(format.columns.size()) +
                                    " columns, got " + std::to_string(fields.size()));
    }
    Interaction row;
    for (std::size_t c = 0; c < format.columns.size(); ++c) {
      const std::string& tok = fields[c];
      switch (format.columns[c]) {
        case ColumnRole::user:
          row.user = intern(tok, out.maps.user_index, out.maps.user_ids);
          break;
        case ColumnRole::item:
          row.item = intern(tok, out.maps.item_index, out.maps.item_ids);
          break;
        case ColumnRole::timestamp:
          row.timestamp = parse_i64(tok, line_no, "timestamp");
          break;
        case ColumnRole::label:
          row.label = parse_label(tok, line_no);
          break;
        case ColumnRole::rating:
          row.label = parse_f64(tok, line_no, "rating") >= format.rating_threshold ? 1 : -1;
          break;
        case ColumnRole::skip:
          break;
      }
    }
    rows.push_back(row);
  }
  if (rows.empty()) throw EmptyCorpusError("no interactions in " + path.string());
  out.corpus = Corpus(out.maps.user_ids.size(), out.maps.item_ids.size(), std::move(rows));
  return out;
}

void write_interactions(const Corpus& corpus, const std::filesystem::path& path,
                        const IndexMaps* maps) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open output file: " + path.string());
  for (const Interaction& row : corpus.rows()) {
    if (maps) {
      out << maps->user_ids[row.user] << '\t' << maps->item_ids[row.item];
    } else {
      out << row.user << '\t' << row.item;
    }
    out << '\t' << row.timestamp << '\t' << int(row.label) << '\n';
  }
  if (!out) throw DataError("failed writing " + path.string());
}

std::size_t CorpusSplit::n_trainable() const {
  std::size_t n = 0;
  for (const auto flag : trainable) n += flag != 0;
  return n;
}

CorpusSplit chronological_split(const Corpus& corpus, const SplitSpec& spec) {
  if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0)) {
    throw ConfigError("train_fraction must lie in (0,1), got " +
                      std::to_string(spec.train_fraction));
  }
  std::vector<Interaction> train_rows, test_rows;
  std::vector<std::uint8_t> trainable(corpus.n_users(), 0);
  for (std::uint32_t u = 0; u < corpus.n_users(); ++u) {
    const auto stream = corpus.user_rows(u);
    if (stream.empty()) continue;
    const std::size_t n_train = static_cast<std::size_t>(
        std::ceil(spec.train_fraction * static_cast<double>(stream.size())));
    bool has_pos = false, has_neg = false;
    for (std::size_t i = 0; i < stream.size(); ++i) {
      if (i < n_train) {
        train_rows.push_back(stream[i]);
        (stream[i].label > 0 ? has_pos : has_neg) = true;
      } else {
        test_rows.push_back(stream[i]);
      }
    }
    trainable[u] = has_pos && has_neg;
  }
  CorpusSplit split;
  split.train = Corpus(corpus.n_users(), corpus.n_items(), std::move(train_rows));
  split.test = Corpus(corpus.n_users(), corpus.n_items(), std::move(test_rows));
  split.trainable = std::move(trainable);
  return split;
}

std::uint32_t for_each_block(std::span<const Interaction> stream, std::uint32_t max_blocks,
                             const std::function<void(const Block&)>& fn) {
  if (stream.empty() || max_blocks == 0) return 0;
  Block block;
  block.user = stream.front().user;
  block.index = 0;
  auto drop_from = [](std::vector<std::uint32_t>& side, std::uint32_t item) {
    const auto it = std::find(side.begin(), side.end(), item);
    if (it != side.end()) side.erase(it);
  };
  auto add_to = [](std::vector<std::uint32_t>& side, std::uint32_t item) {
    if (std::find(side.begin(), side.end(), item) == side.end()) side.push_back(item);
  };
  for (const Interaction& row : stream) {
    if (block.index >= max_blocks) break;
    if (row.label > 0) {
      drop_from(block.negatives, row.item);
      add_to(block.positives, row.item);
    } else {
      drop_from(block.positives, row.item);
      add_to(block.negatives, row.item);
    }
    if (!block.negatives.empty() && !block.positives.empty()) {
      fn(block);
      ++block.index;
      block.negatives.clear();
      block.positives.clear();
    }
  }
  return block.index;
}

std::vector<Block> collect_blocks(std::span<const Interaction> stream, std::uint32_t max_blocks) {
  std::vector<Block> blocks;
  for_each_block(stream, max_blocks, [&](const Block& b) { blocks.push_back(b); });
  return blocks;
}

std::vector<std::uint32_t> user_visit_order(const Corpus& corpus) {
  std::vector<std::uint32_t> order;
  order.reserve(corpus.n_users());
  for (std::uint32_t u = 0; u < corpus.n_users(); ++u) {
    if (!corpus.user_rows(u).empty()) order.push_back(u);
  }
  std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    const auto ta = corpus.user_rows(a).front().timestamp;
    const auto tb = corpus.user_rows(b).front().timestamp;
    if (ta != tb) return ta < tb;
    return a < b;
  });
  return order;
}

}  // namespace saros
