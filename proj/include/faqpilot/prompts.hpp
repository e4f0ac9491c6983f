#pragma once

#include <array>
#include <filesystem>
#include <string>

#include "faqpilot/llm_gateway.hpp"

namespace faqpilot {

/// Prompt templates, one per role. Templates use {{name}} placeholders;
/// lines starting with '#' are header comments (e.g. "# template-version: 3")
/// and are not sent to the model.
class PromptLibrary {
 public:
  /// Templates compiled in from the prompts/ directory of the source tree.
  static PromptLibrary defaults();
  /// Defaults, overridden by any "<role>.txt" found in `dir`.
  static PromptLibrary load_dir(const std::filesystem::path& dir);

  void set(Role role, std::string raw_template);
  [[nodiscard]] const std::string& raw(Role role) const { return templates_[static_cast<std::size_t>(role)]; }
  /// Value of the "# template-version:" header, or 0 when absent.
  [[nodiscard]] int version(Role role) const;

  /// Substitutes every placeholder. Throws invalid-argument if the template
  /// references a name missing from `vars`.
  [[nodiscard]] std::string render(Role role, const PromptVars& vars) const;

 private:
  std::array<std::string, kRoleCount> templates_;
};

}  // namespace faqpilot
