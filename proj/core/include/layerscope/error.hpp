#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace layerscope {

// Every failure raised by the library carries the module that detected it and
// a short machine-readable code. The CLI renders these as
// `E:<module>:<code>: <message>`.
class Error : public std::runtime_error {
 public:
  Error(std::string module, std::string code, const std::string& message);

  const std::string& module() const noexcept { return module_; }
  const std::string& code() const noexcept { return code_; }

  // "E:<module>:<code>: <message>"
  std::string formatted() const;

 private:
  std::string module_;
  std::string code_;
};

using WarningSink = std::function<void(std::string_view module, std::string_view message)>;

// Warnings go to stderr as `W:<module>: <message>` unless a sink is installed.
void set_warning_sink(WarningSink sink);
void warn(std::string_view module, std::string_view message);

}  // namespace layerscope
