#include "capscore/protocol_files.h"

#include "capscore/error.h"

#include <json.hpp>

#include <functional>
#include <set>

namespace capscore {

using nlohmann::json;

std::string foil_key(const std::string& id, bool correct) {
  return id + (correct ? ":correct" : ":foil");
}

std::string pascal_key(const std::string& id, char side) {
  return id + (side == 'A' ? ":a" : ":b");
}

namespace {

template <typename T>
std::vector<T> parse_lines(std::string_view text, const std::function<T(const json&)>& convert) {
  std::vector<T> out;
  std::set<std::string> seen;
  std::size_t line_no = 0, pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    const std::string where = "line " + std::to_string(line_no) + ": ";
    try {
      out.push_back(convert(json::parse(line)));
    } catch (const json::exception& e) {
      throw Error(ErrorKind::parse, where + e.what());
    } catch (const Error& e) {
      throw Error(e.kind(), where + e.what());
    }
    if (!seen.insert(out.back().id).second) {
      throw Error(ErrorKind::validation, where + "duplicate id '" + out.back().id + "'");
    }
  }
  return out;
}

}  // namespace

std::vector<FoilRecord> parse_foil_file(std::string_view text) {
  return parse_lines<FoilRecord>(text, [](const json& j) {
    FoilRecord r;
    r.id = j.at("id").get<std::string>();
    r.image_ref = j.at("image_ref").get<std::string>();
    r.correct = j.at("correct").get<std::string>();
    r.foil = j.at("foil").get<std::string>();
    r.references = j.at("references").get<std::vector<std::string>>();
    if (r.references.empty()) throw Error(ErrorKind::validation, "references must be non-empty");
    return r;
  });
}

std::vector<Pascal50sItem> parse_pascal_file(std::string_view text) {
  return parse_lines<Pascal50sItem>(text, [](const json& j) {
    Pascal50sItem it;
    it.id = j.at("id").get<std::string>();
    it.image_ref = j.at("image_ref").get<std::string>();
    it.caption_a = j.at("caption_a").get<std::string>();
    it.caption_b = j.at("caption_b").get<std::string>();
    it.references = j.at("references").get<std::vector<std::string>>();
    it.category = pascal_category_from_string(j.at("category").get<std::string>());
    const auto label = j.at("majority").get<std::string>();
    if (label != "A" && label != "B") throw Error(ErrorKind::validation, "majority must be A or B");
    it.majority_label = label[0];
    if (it.references.empty()) throw Error(ErrorKind::validation, "references must be non-empty");
    return it;
  });
}

std::string foil_to_jsonl(std::span<const FoilRecord> records) {
  std::string out;
  for (const auto& r : records) {
    out += json{{"id", r.id}, {"image_ref", r.image_ref}, {"correct", r.correct},
                {"foil", r.foil}, {"references", r.references}}
               .dump();
    out += '\n';
  }
  return out;
}

std::string pascal_to_jsonl(std::span<const Pascal50sItem> items) {
  std::string out;
  for (const auto& it : items) {
    out += json{{"id", it.id},
                {"image_ref", it.image_ref},
                {"caption_a", it.caption_a},
                {"caption_b", it.caption_b},
                {"references", it.references},
                {"category", to_string(it.category)},
                {"majority", std::string(1, it.majority_label)}}
               .dump();
    out += '\n';
  }
  return out;
}

std::vector<FoilItem> join_foil(std::span<const FoilRecord> records, const EmbeddingCache& cache) {
  std::vector<FoilItem> out;
  for (const auto& r : records) {
    FoilItem it{r.id, cache.at(foil_key(r.id, true)), cache.at(foil_key(r.id, false))};
    if (it.correct.v != it.foil.v || it.correct.r_clip != it.foil.r_clip ||
        it.correct.r_rb != it.foil.r_rb) {
      throw Error(ErrorKind::validation, "FOIL pair '" + r.id + "' does not share image and references");
    }
    out.push_back(std::move(it));
  }
  return out;
}

std::vector<PascalCase> join_pascal(std::span<const Pascal50sItem> items, const EmbeddingCache& cache) {
  std::vector<PascalCase> out;
  for (const auto& it : items) {
    out.push_back({it, cache.at(pascal_key(it.id, 'A')), cache.at(pascal_key(it.id, 'B'))});
  }
  return out;
}

}  // namespace capscore
