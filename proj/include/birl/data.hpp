#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "birl/rng.hpp"

namespace birl {

enum class Feedback : uint8_t { Click = 0, Purchase = 1 };

const char* feedback_name(Feedback f);
Feedback feedback_from_name(const std::string& s);

// One timestamped user-item record before vocabulary mapping.
struct RawEvent {
  std::string session_id;
  int64_t timestamp = 0;  // milliseconds
  int64_t raw_item = 0;
  Feedback feedback = Feedback::Click;
  size_t file_order = 0;
};

struct RawSession {
  std::string id;
  // Sorted by (timestamp, file order).
  std::vector<RawEvent> events;
};

struct ParseResult {
  std::vector<RawSession> sessions;
  size_t skipped_rows = 0;
  size_t click_count = 0;
  size_t purchase_count = 0;
};

// One normalized event inside a Session; item ids are contiguous in [1, N]
// with 0 reserved for padding.
struct NormEvent {
  int64_t timestamp = 0;
  int32_t item = 0;
  Feedback feedback = Feedback::Click;
};

struct Session {
  std::string id;
  std::vector<NormEvent> events;
};

struct Corpus {
  std::vector<Session> sessions;
  std::vector<int64_t> vocab;  // vocab[i-1] = raw id of item index i
  size_t num_items() const { return vocab.size(); }
};

using Window = std::vector<int32_t>;

// One training transition: episode-start window, state window, logged next
// item, post-action window and the feedback attached to the action.
struct DemoTuple {
  Window s0;
  Window state;
  int32_t action = 0;
  Window next;
  Feedback feedback = Feedback::Click;
};

struct SplitSet {
  std::vector<Session> train;
  std::vector<Session> validation;
  std::vector<Session> test;
  std::vector<int64_t> vocab;
  uint64_t seed = 0;
};

// Raw CSV layout: timestamp,visitorid,event,itemid,transactionid.
// view -> click, addtocart -> purchase, anything else dropped. Sessions are
// per visitor, split at inactivity gaps over 30 minutes.
ParseResult parse_retailrocket(const std::string& events_path);

// Clicks layout: session_id,timestamp,item_id,category.
// Buys layout: session_id,timestamp,item_id,price,quantity.
// Timestamps may be integer milliseconds or ISO-8601.
ParseResult parse_yoochoose(const std::string& clicks_path, const std::string& buys_path);

// Iterates item-frequency (>= min_item_freq) and session-length
// (>= min_session_len) filters to a fixed point, then remaps surviving raw
// ids to [1, N] by ascending raw id.
Corpus filter_corpus(const std::vector<RawSession>& sessions, size_t min_item_freq = 3,
                     size_t min_session_len = 3);

SplitSet split_sessions(const Corpus& corpus, uint64_t seed);

std::vector<DemoTuple> build_windows(const Session& session, size_t w);
std::vector<DemoTuple> build_tuple_pool(const std::vector<Session>& sessions, size_t w);

std::vector<DemoTuple> sample_batch(const std::vector<DemoTuple>& pool, size_t batch_size,
                                    Rng& rng);

// Latent Markov chain used by the synthetic generator. Items are 1-based.
struct SynthChain {
  // successors[i-1] lists (item, prob) choices for item i.
  std::vector<std::vector<std::pair<int32_t, double>>> successors;
  std::vector<bool> goal;  // goal[i-1]: purchases when the chain emits item i

  static SynthChain random_chain(size_t num_items, Rng& rng);
  static SynthChain cycle(size_t num_items);
};

// Each event follows the expert chain with probability beta, otherwise it is
// uniform noise; session lengths are uniform in [3, 20]; chain-emitted goal
// items become purchases, everything else clicks.
Corpus synth_generate(size_t num_sessions, size_t num_items, double beta, uint64_t seed);
Corpus synth_generate(size_t num_sessions, size_t num_items, double beta, uint64_t seed,
                      const SynthChain& chain);

// Normalized-events sidecar files (UTF-8, tab separated).
void write_normalized(const Corpus& corpus, const std::string& events_path,
                      const std::string& vocab_path);
Corpus read_normalized(const std::string& events_path, const std::string& vocab_path);

void write_split_manifest(const SplitSet& split, const std::string& path);
// Rebuilds a SplitSet by assigning the corpus sessions per the manifest.
SplitSet read_split_manifest(const Corpus& corpus, const std::string& path);

int64_t parse_timestamp_ms(const std::string& field);

}  // namespace birl
