#include "dygenc/log.hpp"

#include <atomic>

namespace dygenc::log {

namespace {
std::atomic<Level> g_level{Level::info};
}

Level level() { return g_level.load(); }
void set_level(Level l) { g_level.store(l); }

void write(Level l, const std::string& msg) {
    if (l < g_level.load()) return;
    static const char* names[] = {"debug", "info", "warn", "error"};
    std::cerr << "[" << names[int(l)] << "] " << msg << "\n";
}

} // namespace dygenc::log
