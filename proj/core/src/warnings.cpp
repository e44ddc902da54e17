#include "valrl/warnings.hpp"

#include <iostream>
#include <mutex>
#include <utility>

namespace valrl {
namespace {

std::mutex& sink_mutex() {
  static std::mutex m;
  return m;
}

WarningSink& current_sink() {
  static WarningSink sink = [](const std::string& message) {
    std::cerr << "warning: " << message << '\n';
  };
  return sink;
}

}  // namespace

void warn(const std::string& message) {
  std::lock_guard<std::mutex> lock(sink_mutex());
  if (current_sink()) current_sink()(message);
}

WarningSink set_warning_sink(WarningSink sink) {
  std::lock_guard<std::mutex> lock(sink_mutex());
  return std::exchange(current_sink(), std::move(sink));
}

}  // namespace valrl
