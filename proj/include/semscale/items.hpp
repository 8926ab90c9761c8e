#pragma once

#include "semscale/corpus.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace semscale {

enum class Stance
{
  conservative,
  liberal,
  neutral
};

std::string_view to_string(Stance s);
Stance parse_stance(std::string_view s);

struct HypothesisSet
{
  std::string item_id;
  std::vector<std::string> conservative_hypotheses;
  std::vector<std::string> liberal_hypotheses;
  std::vector<std::string> neutral_hypotheses; // may be empty

  const std::vector<std::string>& group(Stance s) const;
};

// Phrases substituted for {stance} in an affect template.
struct StanceVerbs
{
  std::string support = "supports";
  std::string oppose = "opposes";
  std::string neutral = "does not express an opinion about";
};

inline constexpr std::string_view kTargetPlaceholder = "{target}";
inline constexpr std::string_view kStancePlaceholder = "{stance}";
inline constexpr std::string_view kDefaultAffectTemplate = "The Author of this tweet {stance} {target}";

// Supporting a target whose side is `target_side` is a `target_side` stance; opposing it is the other.
HypothesisSet expand_hypotheses(std::string_view item_id,
                                std::string_view templ,
                                std::string_view target,
                                Stance target_side = Stance::liberal,
                                const StanceVerbs& verbs = {});

// Verbatim belief statements (policy items). Throws ConfigError on empty signed lists.
HypothesisSet verbatim_hypotheses(std::string_view item_id,
                                  std::vector<std::string> conservative,
                                  std::vector<std::string> liberal,
                                  std::vector<std::string> neutral);

// One configured item: how documents are tagged with it, how they are classified,
// and which count-matrix column pair (group) and scale it feeds.
struct ItemSpec
{
  std::string id;
  std::string group;
  std::string scale;
  KeywordRule rule;
  HypothesisSet hypotheses;
};

class ItemCatalog
{
public:
  ItemCatalog() = default;
  explicit ItemCatalog(std::vector<ItemSpec> items);

  const std::vector<ItemSpec>& items() const { return items_; }
  // Groups in declaration order.
  const std::vector<std::string>& groups() const { return groups_; }
  std::vector<std::string> scales() const;

  const ItemSpec* find(std::string_view item_id) const;
  const ItemSpec& at(std::string_view item_id) const;
  std::string group_of(std::string_view item_id) const;
  std::string scale_of_group(std::string_view group) const;

  std::vector<KeywordRule> rules() const;

private:
  std::vector<ItemSpec> items_;
  std::vector<std::string> groups_;
  std::map<std::string, std::size_t, std::less<>> index_;
  std::map<std::string, std::string, std::less<>> group_scale_;
};

ItemCatalog load_item_catalog(const std::filesystem::path& path);
ItemCatalog parse_item_catalog(std::string_view yaml);
std::string item_catalog_to_yaml(const ItemCatalog& catalog);

} // namespace semscale
