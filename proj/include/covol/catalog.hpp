#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "covol/config.hpp"
#include "covol/error.hpp"

namespace covol {

/// One tactable concept: a pictogram plus every answer that labels it.
/// `labels.front()` is the canonical label.
struct PromptObject {
  std::string id;
  std::string image_ref;
  std::optional<std::string> sound_ref;
  std::vector<std::string> labels;
  std::map<std::string, std::vector<std::string>> attributes;
  std::map<std::string, std::string> prompt_text;

  const std::string& canonical_label() const { return labels.front(); }

  bool operator==(const PromptObject&) const = default;
};

inline constexpr int kCatalogSchemaVersion = 1;

struct Catalog {
  int version = kCatalogSchemaVersion;
  std::string language;
  std::vector<PromptObject> objects;
  // Directory relative asset references resolve against. Not serialized.
  std::filesystem::path base_dir;

  const PromptObject* find(const std::string& id) const;
  std::filesystem::path resolve_asset(const std::string& ref) const;

  bool operator==(const Catalog& other) const {
    return version == other.version && language == other.language &&
           objects == other.objects;
  }
};

enum class Severity { violation, warning };

struct Violation {
  std::string object_id;
  std::string field;
  std::string rule;
  Severity severity = Severity::violation;

  bool operator==(const Violation&) const = default;
};

struct CatalogCheck {
  std::vector<Violation> violations;  // broken invariants
  std::vector<Violation> warnings;    // e.g. assets not on disk yet

  bool ok() const { return violations.empty(); }
};

CatalogCheck validate_catalog(const Catalog& catalog);

/// Thrown by the loaders when the document is well-formed JSON but not a
/// valid catalog.
class SchemaViolation : public Error {
 public:
  explicit SchemaViolation(std::vector<Violation> violations);

  const std::vector<Violation>& violations() const noexcept { return violations_; }

 private:
  std::vector<Violation> violations_;
};

/// Strict JSON loader: unknown fields are rejected, and the result must pass
/// validate_catalog. Throws Error(file_not_found), ParseError or
/// Error(schema_violation).
Catalog load_catalog(const std::filesystem::path& path);
Catalog parse_catalog(const std::string& text,
                      const std::filesystem::path& base_dir = {});
nlohmann::json to_json(const Catalog& catalog);
std::string serialize_catalog(const Catalog& catalog);

/// Loads every `*.json` catalog in a directory, keyed by language. A later
/// file for an already-seen language is an error.
std::map<std::string, Catalog> load_catalog_dir(const std::filesystem::path& dir);

// ---------------------------------------------------------------------------
// Prompt tasks

struct TaskMode {
  PromptMode kind = PromptMode::label;
  std::string attribute;  // only for PromptMode::attribute

  bool operator==(const TaskMode&) const = default;
};

/// One prompt as played: which object, what is asked, and the accepted
/// answers resolved from the catalog.
struct PromptTask {
  std::string object_id;
  TaskMode mode;
  std::vector<std::string> expected;
  std::string display_prompt;
  std::string image_ref;
  std::optional<std::string> sound_ref;

  bool operator==(const PromptTask&) const = default;
};

/// Resolves a task for one object, or nullopt when the object cannot be
/// asked in that mode (no such attribute, no sound).
std::optional<PromptTask> make_task(const PromptObject& object,
                                    const TaskMode& mode,
                                    const std::string& language,
                                    const std::string& fallback_language);

/// Picks `config.prompts_per_session` tasks. Objects are drawn without
/// replacement until the eligible pool is used up, then reshuffled; the
/// same object never appears twice in a row while the pool holds more than
/// one object. Modes are drawn per task from `config.mode_weights` among
/// those the object supports. Pure in (catalog, config, seed).
std::vector<PromptTask> build_prompt_sequence(const Catalog& catalog,
                                              const SessionConfig& config,
                                              std::uint64_t seed);

}  // namespace covol
