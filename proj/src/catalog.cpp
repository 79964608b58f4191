#include "covol/catalog.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "covol/tact_matcher.hpp"
#include "covol/detail/random.hpp"

namespace covol {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string describe(const std::vector<Violation>& violations) {
  std::string text = "catalog schema violation";
  for (const Violation& v : violations) {
    text += "; ";
    if (!v.object_id.empty()) text += v.object_id + ".";
    text += v.field + ": " + v.rule;
  }
  return text;
}

std::size_t line_of(const std::string& text, std::size_t byte) {
  byte = std::min(byte, text.size());
  return 1 + static_cast<std::size_t>(
                 std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(byte), '\n'));
}

// Collects shape problems while reading so one pass reports all of them.
class Reader {
 public:
  std::vector<Violation> problems;

  void report(const std::string& id, const std::string& field, const std::string& rule) {
    problems.push_back({id, field, rule, Severity::violation});
  }

  void reject_unknown(const json& object, const std::set<std::string>& known,
                      const std::string& id) {
    for (const auto& [key, value] : object.items())
      if (!known.contains(key)) report(id, key, "unknown field");
  }

  std::optional<std::string> string_field(const json& object, const char* key,
                                          const std::string& id, bool required) {
    const auto it = object.find(key);
    if (it == object.end() || (!required && it->is_null())) {
      if (required) report(id, key, "required");
      return std::nullopt;
    }
    if (!it->is_string()) {
      report(id, key, "must be a string");
      return std::nullopt;
    }
    return it->get<std::string>();
  }

  std::vector<std::string> string_list(const json& value, const std::string& id,
                                       const std::string& field) {
    std::vector<std::string> out;
    if (!value.is_array()) {
      report(id, field, "must be a list of strings");
      return out;
    }
    for (const json& item : value) {
      if (!item.is_string()) {
        report(id, field, "must be a list of strings");
        continue;
      }
      out.push_back(item.get<std::string>());
    }
    return out;
  }

  PromptObject object(const json& node, std::size_t position) {
    PromptObject obj;
    std::string id = "#" + std::to_string(position);
    if (!node.is_object()) {
      report(id, "objects", "entry must be an object");
      return obj;
    }
    if (auto value = string_field(node, "id", id, true)) {
      obj.id = *value;
      id = obj.id;
    }
    reject_unknown(node, {"id", "image", "sound", "labels", "attributes", "prompt_text"}, id);
    if (auto value = string_field(node, "image", id, true)) obj.image_ref = *value;
    obj.sound_ref = string_field(node, "sound", id, false);
    if (const auto it = node.find("labels"); it != node.end())
      obj.labels = string_list(*it, id, "labels");
    else
      report(id, "labels", "required");
    if (const auto it = node.find("attributes"); it != node.end() && !it->is_null()) {
      if (!it->is_object()) {
        report(id, "attributes", "must be an object");
      } else {
        for (const auto& [name, values] : it->items())
          obj.attributes[name] = string_list(values, id, "attributes." + name);
      }
    }
    if (const auto it = node.find("prompt_text"); it == node.end()) {
      report(id, "prompt_text", "required");
    } else if (!it->is_object()) {
      report(id, "prompt_text", "must be an object");
    } else {
      for (const auto& [lang, text] : it->items()) {
        if (!text.is_string()) {
          report(id, "prompt_text." + lang, "must be a string");
          continue;
        }
        obj.prompt_text[lang] = text.get<std::string>();
      }
    }
    return obj;
  }
};

bool all_tokens_present(const std::string& answer) { return !normalize(answer).empty(); }

void check_answers(const std::vector<std::string>& values, const std::string& id,
                   const std::string& field, std::vector<Violation>& out) {
  if (values.empty()) {
    out.push_back({id, field, "non-empty", Severity::violation});
    return;
  }
  for (const std::string& value : values) {
    if (!all_tokens_present(value)) {
      out.push_back({id, field, "entries non-empty after normalization", Severity::violation});
      return;
    }
  }
}

void check_asset(const Catalog& catalog, const std::string& id, const std::string& field,
                 const std::string& ref, std::vector<Violation>& out) {
  std::error_code ec;
  if (!fs::exists(catalog.resolve_asset(ref), ec))
    out.push_back({id, field, "asset missing: " + ref, Severity::warning});
}

const char* attribute_template(const std::string& language) {
  if (language == "en") return "What %s is it?";
  return nullptr;
}

const char* sound_prompt(const std::string& language) {
  if (language == "en") return "What do you hear?";
  if (language == "is") return "Hvað heyrir þú?";
  if (language == "pl") return "Co słyszysz?";
  return nullptr;
}

}  // namespace

SchemaViolation::SchemaViolation(std::vector<Violation> violations)
    : Error(ErrorCode::schema_violation, describe(violations)),
      violations_(std::move(violations)) {}

const PromptObject* Catalog::find(const std::string& id) const {
  const auto it = std::find_if(objects.begin(), objects.end(),
                               [&](const PromptObject& o) { return o.id == id; });
  return it == objects.end() ? nullptr : &*it;
}

fs::path Catalog::resolve_asset(const std::string& ref) const {
  const fs::path path(ref);
  if (path.is_absolute() || base_dir.empty()) return path;
  return base_dir / path;
}

CatalogCheck validate_catalog(const Catalog& catalog) {
  CatalogCheck check;
  auto& out = check.violations;
  if (catalog.version != kCatalogSchemaVersion)
    out.push_back({"", "version", "unsupported schema version", Severity::violation});
  if (catalog.language.empty())
    out.push_back({"", "language", "non-empty", Severity::violation});

  std::set<std::string> seen;
  for (const PromptObject& obj : catalog.objects) {
    if (obj.id.empty()) out.push_back({obj.id, "id", "non-empty", Severity::violation});
    if (!seen.insert(obj.id).second)
      out.push_back({obj.id, "id", "duplicate id", Severity::violation});
    check_answers(obj.labels, obj.id, "labels", out);
    for (const auto& [name, values] : obj.attributes) {
      if (name.empty()) out.push_back({obj.id, "attributes", "empty attribute name", Severity::violation});
      check_answers(values, obj.id, "attributes." + name, out);
    }
    if (!obj.prompt_text.contains(catalog.language))
      out.push_back({obj.id, "prompt_text", "missing entry for catalog language", Severity::violation});
    if (obj.image_ref.empty()) {
      out.push_back({obj.id, "image", "non-empty", Severity::violation});
    } else {
      check_asset(catalog, obj.id, "image", obj.image_ref, check.warnings);
    }
    if (obj.sound_ref) {
      if (obj.sound_ref->empty())
        out.push_back({obj.id, "sound", "non-empty when present", Severity::violation});
      else
        check_asset(catalog, obj.id, "sound", *obj.sound_ref, check.warnings);
    }
  }
  return check;
}

Catalog parse_catalog(const std::string& text, const fs::path& base_dir) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(line_of(text, e.byte == 0 ? 0 : e.byte - 1), e.what());
  }

  Reader reader;
  Catalog catalog;
  catalog.base_dir = base_dir;
  if (!doc.is_object()) {
    reader.report("", "", "top level must be an object");
    throw SchemaViolation(reader.problems);
  }
  reader.reject_unknown(doc, {"version", "language", "objects"}, "");
  if (const auto it = doc.find("version"); it == doc.end() || !it->is_number_integer())
    reader.report("", "version", "required integer");
  else
    catalog.version = it->get<int>();
  if (auto language = reader.string_field(doc, "language", "", true)) catalog.language = *language;
  if (const auto it = doc.find("objects"); it == doc.end() || !it->is_array()) {
    reader.report("", "objects", "required list");
  } else {
    std::size_t position = 0;
    for (const json& node : *it) catalog.objects.push_back(reader.object(node, position++));
  }
  if (!reader.problems.empty()) throw SchemaViolation(reader.problems);

  CatalogCheck check = validate_catalog(catalog);
  if (!check.ok()) throw SchemaViolation(std::move(check.violations));
  return catalog;
}

Catalog load_catalog(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::file_not_found, "cannot open catalog " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_catalog(buffer.str(), path.parent_path());
}

json to_json(const Catalog& catalog) {
  json objects = json::array();
  for (const PromptObject& obj : catalog.objects) {
    json attributes = json::object();
    for (const auto& [name, values] : obj.attributes) attributes[name] = values;
    json prompt_text = json::object();
    for (const auto& [lang, text] : obj.prompt_text) prompt_text[lang] = text;
    objects.push_back({
        {"id", obj.id},
        {"image", obj.image_ref},
        {"sound", obj.sound_ref ? json(*obj.sound_ref) : json(nullptr)},
        {"labels", obj.labels},
        {"attributes", attributes},
        {"prompt_text", prompt_text},
    });
  }
  return {{"version", catalog.version}, {"language", catalog.language}, {"objects", objects}};
}

std::string serialize_catalog(const Catalog& catalog) { return to_json(catalog).dump(2); }

std::map<std::string, Catalog> load_catalog_dir(const fs::path& dir) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec))
    throw Error(ErrorCode::file_not_found, "catalog directory not found: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  std::sort(files.begin(), files.end());

  std::map<std::string, Catalog> catalogs;
  for (const fs::path& file : files) {
    Catalog catalog = load_catalog(file);
    const std::string language = catalog.language;
    if (!catalogs.emplace(language, std::move(catalog)).second)
      throw Error(ErrorCode::schema_violation,
                  "second catalog for language '" + language + "': " + file.string());
  }
  return catalogs;
}

std::optional<PromptTask> make_task(const PromptObject& object, const TaskMode& mode,
                                    const std::string& language,
                                    const std::string& fallback_language) {
  PromptTask task;
  task.object_id = object.id;
  task.mode = mode;
  task.image_ref = object.image_ref;
  task.sound_ref = object.sound_ref;

  std::string object_prompt;
  if (auto it = object.prompt_text.find(language); it != object.prompt_text.end())
    object_prompt = it->second;
  else if (auto fb = object.prompt_text.find(fallback_language); fb != object.prompt_text.end())
    object_prompt = fb->second;

  switch (mode.kind) {
    case PromptMode::label:
      task.expected = object.labels;
      task.display_prompt = object_prompt;
      break;
    case PromptMode::attribute: {
      const auto it = object.attributes.find(mode.attribute);
      if (it == object.attributes.end() || it->second.empty()) return std::nullopt;
      task.expected = it->second;
      if (const char* tmpl = attribute_template(language)) {
        std::string text = tmpl;
        text.replace(text.find("%s"), 2, mode.attribute);
        task.display_prompt = text;
      } else {
        task.display_prompt = object_prompt + " (" + mode.attribute + ")";
      }
      break;
    }
    case PromptMode::sound:
      if (!object.sound_ref) return std::nullopt;
      task.expected = object.labels;
      if (const char* text = sound_prompt(language))
        task.display_prompt = text;
      else
        task.display_prompt = object_prompt;
      break;
  }
  if (task.expected.empty()) return std::nullopt;
  return task;
}

std::vector<PromptTask> build_prompt_sequence(const Catalog& catalog, const SessionConfig& config,
                                              std::uint64_t seed) {
  if (catalog.objects.empty()) throw Error(ErrorCode::empty_catalog, "catalog has no objects");

  std::vector<std::pair<PromptMode, double>> enabled;
  for (const auto& [mode, weight] : config.mode_weights)
    if (weight > 0.0) enabled.emplace_back(mode, weight);

  auto supports = [](const PromptObject& obj, PromptMode mode) {
    switch (mode) {
      case PromptMode::label: return !obj.labels.empty();
      case PromptMode::attribute: return !obj.attributes.empty();
      case PromptMode::sound: return obj.sound_ref.has_value();
    }
    return false;
  };

  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < catalog.objects.size(); ++i)
    for (const auto& [mode, weight] : enabled)
      if (supports(catalog.objects[i], mode)) {
        pool.push_back(i);
        break;
      }
  if (pool.empty()) {
    std::string names;
    for (const auto& [mode, weight] : enabled) names += (names.empty() ? "" : ",") + std::string(to_string(mode));
    throw Error(ErrorCode::no_compatible_objects, "no catalog object supports mode(s): " + names);
  }

  const auto count = static_cast<std::size_t>(std::max(config.prompts_per_session, 0));
  std::vector<PromptTask> tasks;
  tasks.reserve(count);
  if (count == 0) return tasks;

  detail::Rng rng(seed);
  std::vector<std::size_t> order;
  std::size_t next = 0;
  std::optional<std::size_t> previous;
  while (tasks.size() < count) {
    if (next == order.size()) {
      order = pool;
      rng.shuffle(order);
      next = 0;
      // A fresh cycle must not open with the object that closed the last one.
      if (previous && order.size() > 1 && order.front() == *previous)
        std::swap(order.front(), order[1 + rng.below(order.size() - 1)]);
    }
    const PromptObject& obj = catalog.objects[order[next++]];
    previous = order[next - 1];

    std::vector<std::pair<PromptMode, double>> usable;
    double total = 0.0;
    for (const auto& entry : enabled)
      if (supports(obj, entry.first)) {
        usable.push_back(entry);
        total += entry.second;
      }
    PromptMode mode = usable.back().first;
    double pick = rng.unit() * total;
    for (const auto& [candidate, weight] : usable) {
      if (pick < weight) {
        mode = candidate;
        break;
      }
      pick -= weight;
    }

    TaskMode task_mode{mode, {}};
    if (mode == PromptMode::attribute) {
      auto it = obj.attributes.begin();
      std::advance(it, static_cast<std::ptrdiff_t>(rng.below(obj.attributes.size())));
      task_mode.attribute = it->first;
    }
    tasks.push_back(*make_task(obj, task_mode, config.language, catalog.language));
  }
  return tasks;
}

}  // namespace covol
