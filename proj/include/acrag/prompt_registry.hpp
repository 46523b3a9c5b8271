// SPDX-License-Identifier: Apache-2.0
#pragma once

// Template packs: a directory of UTF-8 text files with {name} slots, a
// manifest.json listing each template's required variables, and a
// ten-line system prompt bank. See templates/medical/ for the default pack.

#include <array>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace acrag {

enum class TemplateId {
  pre_check_mcq,
  pre_check_yesno,
  dissect_mcq,
  dissect_yesno,
  integrate_summary,
  post_check,
  qa_with_rag_mcq,
  qa_with_rag_yesno,
  qa_without_rag_mcq,
  qa_without_rag_yesno,
};

inline constexpr std::array<TemplateId, 10> kAllTemplateIds = {
    TemplateId::pre_check_mcq,      TemplateId::pre_check_yesno,      TemplateId::dissect_mcq,
    TemplateId::dissect_yesno,      TemplateId::integrate_summary,    TemplateId::post_check,
    TemplateId::qa_with_rag_mcq,    TemplateId::qa_with_rag_yesno,    TemplateId::qa_without_rag_mcq,
    TemplateId::qa_without_rag_yesno,
};

// Variable names a template may declare.
inline constexpr std::array<std::string_view, 6> kTemplateVariables = {
    "question", "options", "context", "rag_context", "summary_context", "memory"};

std::string_view to_string(TemplateId id);
TemplateId template_id_from_string(std::string_view text);

using TemplateVars = std::map<std::string, std::string, std::less<>>;

struct PromptTemplate {
  std::string name;
  std::string body;
  std::set<std::string, std::less<>> variables;
  // variable -> exact body fragment dropped when that variable is empty
  std::map<std::string, std::string, std::less<>> omit_when_empty;
};

// Literal single-pass substitution of {name} slots for declared variables.
// vars must hold exactly the declared set; a missing or extra variable
// raises TemplateError naming it. Substituted values are never re-scanned.
std::string render_template(const PromptTemplate& tmpl, const TemplateVars& vars);

class SystemPromptBank {
 public:
  // Throws ConfigurationError unless exactly ten sentences are given.
  explicit SystemPromptBank(std::vector<std::string> sentences);

  const std::vector<std::string>& sentences() const noexcept { return sentences_; }

 private:
  std::vector<std::string> sentences_;
};

// sentences[call_index mod 10]
const std::string& system_prompt(const SystemPromptBank& bank, std::size_t call_index);

class PromptRegistry {
 public:
  // Reads <dir>/manifest.json. Throws ConfigurationError on a malformed pack,
  // including one that does not define exactly the ten TemplateIds.
  static PromptRegistry load(const std::filesystem::path& dir);

  // The pack shipped with the source tree.
  static PromptRegistry load_default();

  std::string render(TemplateId id, const TemplateVars& vars) const;

  // Engine-owned templates outside the ten TemplateIds (e.g. explain_term).
  std::string render_extension(std::string_view name, const TemplateVars& vars) const;

  // Swaps the leading first bank sentence of a rendered QA prompt for the
  // sentence at call_index; other prompts pass through unchanged.
  std::string apply_system_prompt(std::string rendered, std::size_t call_index) const;

  const PromptTemplate& get(TemplateId id) const;
  const SystemPromptBank& system_prompts() const noexcept { return bank_; }
  const std::string& pack_name() const noexcept { return pack_name_; }

 private:
  PromptRegistry(std::string pack_name, std::map<TemplateId, PromptTemplate> templates,
                 std::map<std::string, PromptTemplate, std::less<>> extensions, SystemPromptBank bank);

  std::string pack_name_;
  std::map<TemplateId, PromptTemplate> templates_;
  std::map<std::string, PromptTemplate, std::less<>> extensions_;
  SystemPromptBank bank_;
};

}  // namespace acrag
