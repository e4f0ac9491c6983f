#include "faqpilot/prompts.hpp"

#include <fstream>
#include <sstream>

#include "faqpilot/error.hpp"
#include "faqpilot/text.hpp"
#include "prompt_defaults.hpp"  // generated

namespace faqpilot {

PromptLibrary PromptLibrary::defaults() {
  PromptLibrary lib;
  for (std::size_t i = 0; i < kRoleCount; ++i) lib.templates_[i] = std::string(detail::kDefaultPrompts[i]);
  return lib;
}

PromptLibrary PromptLibrary::load_dir(const std::filesystem::path& dir) {
  auto lib = defaults();
  if (!std::filesystem::is_directory(dir)) {
    throw Error(ErrorCode::InvalidConfig, "prompt directory not found: " + dir.string());
  }
  for (std::size_t i = 0; i < kRoleCount; ++i) {
    const auto role = static_cast<Role>(i);
    const auto file = dir / (std::string(to_string(role)) + ".txt");
    if (!std::filesystem::exists(file)) continue;
    std::ifstream in(file);
    std::ostringstream ss;
    ss << in.rdbuf();
    if (!in) throw Error(ErrorCode::StorageIo, "cannot read " + file.string());
    lib.set(role, ss.str());
  }
  return lib;
}

void PromptLibrary::set(Role role, std::string raw_template) {
  templates_[static_cast<std::size_t>(role)] = std::move(raw_template);
}

int PromptLibrary::version(Role role) const {
  constexpr std::string_view key = "# template-version:";
  for (const auto& line : text::split_lines(raw(role))) {
    if (line.rfind(key, 0) == 0) return std::stoi(std::string(text::trim(line.substr(key.size()))));
  }
  return 0;
}

std::string PromptLibrary::render(Role role, const PromptVars& vars) const {
  std::string body;
  for (const auto& line : text::split_lines(raw(role))) {
    if (!line.empty() && line.front() == '#') continue;
    body += line;
    body += '\n';
  }

  std::string out;
  std::size_t pos = 0;
  while (pos < body.size()) {
    const auto open = body.find("{{", pos);
    if (open == std::string::npos) {
      out.append(body, pos);
      break;
    }
    const auto close = body.find("}}", open + 2);
    if (close == std::string::npos) {
      out.append(body, pos);
      break;
    }
    out.append(body, pos, open - pos);
    const auto name = body.substr(open + 2, close - open - 2);
    const auto it = vars.find(name);
    if (it == vars.end()) {
      throw Error(ErrorCode::InvalidArgument,
                  "template '" + std::string(to_string(role)) + "' needs placeholder '" + name + "'");
    }
    out += it->second;
    pos = close + 2;
  }
  return std::string(text::trim(out));
}

}  // namespace faqpilot
