// SPDX-License-Identifier: Apache-2.0
#include "acrag/prompt_registry.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "acrag/errors.hpp"

#ifndef ACRAG_DEFAULT_TEMPLATE_DIR
#define ACRAG_DEFAULT_TEMPLATE_DIR "templates/medical"
#endif

namespace acrag {

using nlohmann::json;

std::string_view to_string(TemplateId id) {
  switch (id) {
    case TemplateId::pre_check_mcq: return "pre_check_mcq";
    case TemplateId::pre_check_yesno: return "pre_check_yesno";
    case TemplateId::dissect_mcq: return "dissect_mcq";
    case TemplateId::dissect_yesno: return "dissect_yesno";
    case TemplateId::integrate_summary: return "integrate_summary";
    case TemplateId::post_check: return "post_check";
    case TemplateId::qa_with_rag_mcq: return "qa_with_rag_mcq";
    case TemplateId::qa_with_rag_yesno: return "qa_with_rag_yesno";
    case TemplateId::qa_without_rag_mcq: return "qa_without_rag_mcq";
    case TemplateId::qa_without_rag_yesno: return "qa_without_rag_yesno";
  }
  return "unknown";
}

TemplateId template_id_from_string(std::string_view text) {
  for (auto id : kAllTemplateIds) {
    if (to_string(id) == text) return id;
  }
  throw ConfigurationError("unknown template id: " + std::string(text));
}

std::string render_template(const PromptTemplate& tmpl, const TemplateVars& vars) {
  for (const auto& name : tmpl.variables) {
    if (!vars.contains(name))
      throw TemplateError("template " + tmpl.name + ": missing variable '" + name + "'", name);
  }
  for (const auto& [name, value] : vars) {
    if (!tmpl.variables.contains(name))
      throw TemplateError("template " + tmpl.name + ": unknown variable '" + name + "'", name);
  }

  std::string body = tmpl.body;
  for (const auto& [name, fragment] : tmpl.omit_when_empty) {
    if (!vars.find(name)->second.empty()) continue;
    if (auto pos = body.find(fragment); pos != std::string::npos) body.erase(pos, fragment.size());
  }

  std::string out;
  out.reserve(body.size());
  std::size_t pos = 0;
  while (pos < body.size()) {
    const auto open = body.find('{', pos);
    if (open == std::string::npos) break;
    const auto close = body.find('}', open + 1);
    if (close == std::string::npos) break;
    const std::string_view name(body.data() + open + 1, close - open - 1);
    out.append(body, pos, open - pos);
    if (auto it = vars.find(name); it != vars.end()) {
      out += it->second;
      pos = close + 1;
    } else {
      out += '{';
      pos = open + 1;
    }
  }
  out.append(body, pos, std::string::npos);
  return out;
}

SystemPromptBank::SystemPromptBank(std::vector<std::string> sentences) : sentences_(std::move(sentences)) {
  if (sentences_.size() != 10)
    throw ConfigurationError("system prompt bank needs exactly 10 sentences, got " +
                             std::to_string(sentences_.size()));
}

const std::string& system_prompt(const SystemPromptBank& bank, std::size_t call_index) {
  return bank.sentences()[call_index % bank.sentences().size()];
}

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigurationError("cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// Template files end with one newline for editor friendliness; it is not
// part of the template.
std::string strip_final_newline(std::string text) {
  if (!text.empty() && text.back() == '\n') text.pop_back();
  return text;
}

PromptTemplate load_template(const std::filesystem::path& dir, const std::string& name, const json& spec,
                             bool restrict_names) {
  PromptTemplate tmpl;
  tmpl.name = name;
  tmpl.body = strip_final_newline(read_file(dir / spec.at("file").get<std::string>()));
  for (const auto& var : spec.at("variables")) {
    const auto v = var.get<std::string>();
    if (restrict_names &&
        std::find(kTemplateVariables.begin(), kTemplateVariables.end(), v) == kTemplateVariables.end())
      throw ConfigurationError("template " + name + ": '" + v + "' is not a known variable");
    if (tmpl.body.find("{" + v + "}") == std::string::npos)
      throw ConfigurationError("template " + name + ": declared variable '" + v + "' has no slot");
    tmpl.variables.insert(v);
  }
  if (restrict_names) {
    for (auto known : kTemplateVariables) {
      const std::string slot = "{" + std::string(known) + "}";
      if (!tmpl.variables.contains(known) && tmpl.body.find(slot) != std::string::npos)
        throw ConfigurationError("template " + name + ": slot " + slot + " is not declared");
    }
  }
  if (auto it = spec.find("omit_when_empty"); it != spec.end()) {
    for (const auto& [var, fragment] : it->items()) {
      if (!tmpl.variables.contains(var))
        throw ConfigurationError("template " + name + ": omit_when_empty names undeclared '" + var + "'");
      const auto text = fragment.get<std::string>();
      if (tmpl.body.find(text) == std::string::npos)
        throw ConfigurationError("template " + name + ": omit_when_empty fragment not found in body");
      tmpl.omit_when_empty.emplace(var, text);
    }
  }
  return tmpl;
}

}  // namespace

PromptRegistry::PromptRegistry(std::string pack_name, std::map<TemplateId, PromptTemplate> templates,
                               std::map<std::string, PromptTemplate, std::less<>> extensions,
                               SystemPromptBank bank)
    : pack_name_(std::move(pack_name)),
      templates_(std::move(templates)),
      extensions_(std::move(extensions)),
      bank_(std::move(bank)) {}

PromptRegistry PromptRegistry::load(const std::filesystem::path& dir) {
  try {
    const auto manifest = json::parse(read_file(dir / "manifest.json"));
    std::map<TemplateId, PromptTemplate> templates;
    for (const auto& [name, spec] : manifest.at("templates").items()) {
      templates.emplace(template_id_from_string(name), load_template(dir, name, spec, true));
    }
    for (auto id : kAllTemplateIds) {
      if (!templates.contains(id))
        throw ConfigurationError("template pack " + dir.string() + " lacks " + std::string(to_string(id)));
    }
    std::map<std::string, PromptTemplate, std::less<>> extensions;
    if (auto it = manifest.find("extensions"); it != manifest.end()) {
      for (const auto& [name, spec] : it->items()) extensions.emplace(name, load_template(dir, name, spec, false));
    }
    std::vector<std::string> sentences;
    std::istringstream lines(read_file(dir / manifest.at("system_prompts").get<std::string>()));
    for (std::string line; std::getline(lines, line);) {
      if (!line.empty()) sentences.push_back(line);
    }
    return PromptRegistry(manifest.value("pack", dir.filename().string()), std::move(templates),
                          std::move(extensions), SystemPromptBank(std::move(sentences)));
  } catch (const json::exception& e) {
    throw ConfigurationError("malformed template manifest in " + dir.string() + ": " + e.what());
  }
}

PromptRegistry PromptRegistry::load_default() { return load(ACRAG_DEFAULT_TEMPLATE_DIR); }

const PromptTemplate& PromptRegistry::get(TemplateId id) const { return templates_.at(id); }

std::string PromptRegistry::render(TemplateId id, const TemplateVars& vars) const {
  return render_template(get(id), vars);
}

std::string PromptRegistry::render_extension(std::string_view name, const TemplateVars& vars) const {
  auto it = extensions_.find(name);
  if (it == extensions_.end())
    throw ConfigurationError("template pack " + pack_name_ + " has no extension '" + std::string(name) + "'");
  return render_template(it->second, vars);
}

std::string PromptRegistry::apply_system_prompt(std::string rendered, std::size_t call_index) const {
  const auto& first = bank_.sentences().front();
  if (!rendered.starts_with(first)) return rendered;
  return system_prompt(bank_, call_index) + rendered.substr(first.size());
}

}  // namespace acrag
