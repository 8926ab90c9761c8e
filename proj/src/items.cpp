#include "semscale/items.hpp"

#include "semscale/error.hpp"
#include "semscale/io.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <set>

namespace semscale {

std::string_view to_string(Stance s)
{
  switch (s) {
    case Stance::conservative:
      return "conservative";
    case Stance::liberal:
      return "liberal";
    case Stance::neutral:
      return "neutral";
  }
  return "neutral";
}

Stance parse_stance(std::string_view s)
{
  if (s == "conservative")
    return Stance::conservative;
  if (s == "liberal")
    return Stance::liberal;
  if (s == "neutral")
    return Stance::neutral;
  throw ConfigError("unknown stance '" + std::string(s) + "'");
}

const std::vector<std::string>& HypothesisSet::group(Stance s) const
{
  switch (s) {
    case Stance::conservative:
      return conservative_hypotheses;
    case Stance::liberal:
      return liberal_hypotheses;
    default:
      return neutral_hypotheses;
  }
}

namespace {

std::string replace_all(std::string s, std::string_view from, std::string_view to)
{
  std::size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
  return s;
}

} // namespace

HypothesisSet expand_hypotheses(std::string_view item_id,
                                std::string_view templ,
                                std::string_view target,
                                Stance target_side,
                                const StanceVerbs& verbs)
{
  if (templ.find(kTargetPlaceholder) == std::string_view::npos)
    throw ConfigError("hypothesis template for '" + std::string(item_id) + "' lacks " +
                      std::string(kTargetPlaceholder));
  if (templ.find(kStancePlaceholder) == std::string_view::npos)
    throw ConfigError("hypothesis template for '" + std::string(item_id) + "' lacks " +
                      std::string(kStancePlaceholder));
  if (target.find_first_not_of(" \t") == std::string_view::npos)
    throw ConfigError("empty target for item '" + std::string(item_id) + "'");
  if (target_side == Stance::neutral)
    throw ConfigError("target side of '" + std::string(item_id) + "' must be liberal or conservative");

  auto fill = [&](std::string_view verb) {
    return replace_all(replace_all(std::string(templ), kStancePlaceholder, verb), kTargetPlaceholder, target);
  };
  std::string support = fill(verbs.support);
  std::string oppose = fill(verbs.oppose);

  HypothesisSet h;
  h.item_id = item_id;
  if (target_side == Stance::conservative) {
    h.conservative_hypotheses = { support };
    h.liberal_hypotheses = { oppose };
  } else {
    h.liberal_hypotheses = { support };
    h.conservative_hypotheses = { oppose };
  }
  h.neutral_hypotheses = { fill(verbs.neutral) };
  return h;
}

HypothesisSet verbatim_hypotheses(std::string_view item_id,
                                  std::vector<std::string> conservative,
                                  std::vector<std::string> liberal,
                                  std::vector<std::string> neutral)
{
  if (conservative.empty() || liberal.empty())
    throw ConfigError("item '" + std::string(item_id) + "' needs conservative and liberal hypotheses");
  HypothesisSet h;
  h.item_id = item_id;
  h.conservative_hypotheses = std::move(conservative);
  h.liberal_hypotheses = std::move(liberal);
  h.neutral_hypotheses = std::move(neutral);
  return h;
}

ItemCatalog::ItemCatalog(std::vector<ItemSpec> items) : items_(std::move(items))
{
  std::vector<KeywordRule> rs;
  for (std::size_t i = 0; i < items_.size(); ++i) {
    auto& it = items_[i];
    if (it.id.empty())
      throw ConfigError("item with empty id");
    if (it.group.empty())
      it.group = it.id;
    if (it.scale.empty())
      it.scale = "default";
    if (!index_.emplace(it.id, i).second)
      throw ConfigError("duplicate item id '" + it.id + "'");
    auto [gs, fresh] = group_scale_.emplace(it.group, it.scale);
    if (fresh)
      groups_.push_back(it.group);
    else if (gs->second != it.scale)
      throw ConfigError("group '" + it.group + "' spans scales '" + gs->second + "' and '" + it.scale + "'");
    if (it.rule.item_id.empty())
      it.rule.item_id = it.id;
    if (it.rule.item_id != it.id)
      throw ConfigError("rule item_id '" + it.rule.item_id + "' does not match item '" + it.id + "'");
    if (it.hypotheses.item_id.empty())
      it.hypotheses.item_id = it.id;
    if (it.hypotheses.conservative_hypotheses.empty() || it.hypotheses.liberal_hypotheses.empty())
      throw ConfigError("item '" + it.id + "' needs conservative and liberal hypotheses");
    rs.push_back(it.rule);
  }
  validate_rules(rs);
}

std::vector<std::string> ItemCatalog::scales() const
{
  std::vector<std::string> out;
  for (const auto& g : groups_) {
    const auto& s = group_scale_.find(g)->second;
    if (std::find(out.begin(), out.end(), s) == out.end())
      out.push_back(s);
  }
  return out;
}

const ItemSpec* ItemCatalog::find(std::string_view item_id) const
{
  auto it = index_.find(item_id);
  return it == index_.end() ? nullptr : &items_[it->second];
}

const ItemSpec& ItemCatalog::at(std::string_view item_id) const
{
  if (auto* p = find(item_id))
    return *p;
  throw DataError("unknown item '" + std::string(item_id) + "'");
}

std::string ItemCatalog::group_of(std::string_view item_id) const
{
  return at(item_id).group;
}

std::string ItemCatalog::scale_of_group(std::string_view group) const
{
  auto it = group_scale_.find(group);
  if (it == group_scale_.end())
    throw DataError("unknown group '" + std::string(group) + "'");
  return it->second;
}

std::vector<KeywordRule> ItemCatalog::rules() const
{
  std::vector<KeywordRule> out;
  for (const auto& it : items_)
    out.push_back(it.rule);
  return out;
}

namespace {

std::vector<std::string> string_list(const YAML::Node& n, const std::string& what)
{
  std::vector<std::string> out;
  if (!n)
    return out;
  if (n.IsScalar()) {
    out.push_back(n.as<std::string>());
    return out;
  }
  if (!n.IsSequence())
    throw ConfigError(what + " must be a string or list of strings");
  for (const auto& e : n)
    out.push_back(e.as<std::string>());
  return out;
}

ItemCatalog catalog_from_yaml(const YAML::Node& root)
{
  if (!root || !root["items"] || !root["items"].IsSequence())
    throw ConfigError("item config needs an 'items' list");
  std::string templ = root["template"] ? root["template"].as<std::string>() : std::string(kDefaultAffectTemplate);
  StanceVerbs verbs;
  if (auto v = root["stance_verbs"]) {
    if (v["support"])
      verbs.support = v["support"].as<std::string>();
    if (v["oppose"])
      verbs.oppose = v["oppose"].as<std::string>();
    if (v["neutral"])
      verbs.neutral = v["neutral"].as<std::string>();
  }
  std::vector<ItemSpec> items;
  for (const auto& n : root["items"]) {
    ItemSpec it;
    if (!n["id"])
      throw ConfigError("item without id");
    it.id = n["id"].as<std::string>();
    it.group = n["group"] ? n["group"].as<std::string>() : it.id;
    it.scale = n["scale"] ? n["scale"].as<std::string>() : "default";
    it.rule.item_id = it.id;
    it.rule.keywords = string_list(n["keywords"], it.id + ".keywords");
    it.rule.match_mode = n["match_mode"] ? parse_match_mode(n["match_mode"].as<std::string>()) : MatchMode::substring;
    if (n["target"]) {
      std::string item_templ = n["template"] ? n["template"].as<std::string>() : templ;
      Stance side = n["orientation"] ? parse_stance(n["orientation"].as<std::string>()) : Stance::liberal;
      it.hypotheses = expand_hypotheses(it.id, item_templ, n["target"].as<std::string>(), side, verbs);
    } else {
      it.hypotheses = verbatim_hypotheses(it.id,
                                          string_list(n["conservative"], it.id + ".conservative"),
                                          string_list(n["liberal"], it.id + ".liberal"),
                                          string_list(n["neutral"], it.id + ".neutral"));
    }
    items.push_back(std::move(it));
  }
  return ItemCatalog(std::move(items));
}

} // namespace

ItemCatalog parse_item_catalog(std::string_view text)
{
  try {
    return catalog_from_yaml(YAML::Load(std::string(text)));
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("item config: ") + e.what());
  }
}

ItemCatalog load_item_catalog(const std::filesystem::path& path)
{
  if (!std::filesystem::exists(path))
    throw ConfigError("item config not found: " + path.string());
  try {
    return parse_item_catalog(io::read_file(path));
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string item_catalog_to_yaml(const ItemCatalog& catalog)
{
  YAML::Emitter out;
  out << YAML::BeginMap << YAML::Key << "items" << YAML::Value << YAML::BeginSeq;
  for (const auto& it : catalog.items()) {
    out << YAML::BeginMap;
    out << YAML::Key << "id" << YAML::Value << it.id;
    out << YAML::Key << "group" << YAML::Value << it.group;
    out << YAML::Key << "scale" << YAML::Value << it.scale;
    out << YAML::Key << "keywords" << YAML::Value << YAML::Flow << it.rule.keywords;
    out << YAML::Key << "match_mode" << YAML::Value << std::string(to_string(it.rule.match_mode));
    out << YAML::Key << "conservative" << YAML::Value << YAML::Flow << it.hypotheses.conservative_hypotheses;
    out << YAML::Key << "liberal" << YAML::Value << YAML::Flow << it.hypotheses.liberal_hypotheses;
    out << YAML::Key << "neutral" << YAML::Value << YAML::Flow << it.hypotheses.neutral_hypotheses;
    out << YAML::EndMap;
  }
  out << YAML::EndSeq << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

} // namespace semscale
