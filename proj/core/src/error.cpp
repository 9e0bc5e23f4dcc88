#include "layerscope/error.hpp"

#include <iostream>
#include <mutex>

namespace layerscope {

Error::Error(std::string module, std::string code, const std::string& message)
    : std::runtime_error(message), module_(std::move(module)), code_(std::move(code)) {}

std::string Error::formatted() const {
  return "E:" + module_ + ":" + code_ + ": " + what();
}

namespace {
std::mutex g_sink_mutex;
WarningSink g_sink;
}  // namespace

void set_warning_sink(WarningSink sink) {
  std::lock_guard lock(g_sink_mutex);
  g_sink = std::move(sink);
}

void warn(std::string_view module, std::string_view message) {
  std::lock_guard lock(g_sink_mutex);
  if (g_sink) {
    g_sink(module, message);
    return;
  }
  std::cerr << "W:" << module << ": " << message << '\n';
}

}  // namespace layerscope
