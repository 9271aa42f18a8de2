#pragma once

#include <iostream>
#include <string>

namespace dygenc::log {

enum class Level { debug = 0, info = 1, warn = 2, error = 3, off = 4 };

Level level();
void set_level(Level l);

void write(Level l, const std::string& msg);
inline void info(const std::string& msg) { write(Level::info, msg); }
inline void warn(const std::string& msg) { write(Level::warn, msg); }

} // namespace dygenc::log
