#pragma once

#include "capscore/embedding_io.h"
#include "capscore/eval_stats.h"

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace capscore {

// FOIL pairs file, JSON Lines:
//   {"id":..., "image_ref":..., "correct":..., "foil":..., "references":[...]}
// Cache records are keyed "<id>:correct" and "<id>:foil".
struct FoilRecord {
  std::string id;
  std::string image_ref;
  std::string correct;
  std::string foil;
  std::vector<std::string> references;
};

// PASCAL-50S file, JSON Lines:
//   {"id":..., "image_ref":..., "caption_a":..., "caption_b":..., "references":[...],
//    "category":"HC|HI|HM|MM", "majority":"A|B"}
// Cache records are keyed "<id>:a" and "<id>:b".

std::string foil_key(const std::string& id, bool correct);
std::string pascal_key(const std::string& id, char side);

std::vector<FoilRecord> parse_foil_file(std::string_view text);
std::vector<Pascal50sItem> parse_pascal_file(std::string_view text);
std::string foil_to_jsonl(std::span<const FoilRecord> records);
std::string pascal_to_jsonl(std::span<const Pascal50sItem> items);

std::vector<FoilItem> join_foil(std::span<const FoilRecord> records, const EmbeddingCache& cache);
std::vector<PascalCase> join_pascal(std::span<const Pascal50sItem> items, const EmbeddingCache& cache);

}  // namespace capscore
