#include "ari/log.hpp"

#include <cstdlib>
#include <cstring>
#include <iostream>

namespace ari::log {

namespace {

Level resolve_from_env() {
    const char* env = std::getenv("ARI_LOG");
    if (env == nullptr) return Level::Info;
    if (std::strcmp(env, "error") == 0) return Level::Error;
    if (std::strcmp(env, "debug") == 0) return Level::Debug;
    return Level::Info;
}

Level g_level = resolve_from_env();

}  // namespace

Level level() { return g_level; }
void set_level(Level lv) { g_level = lv; }

void write(Level lv, const std::string& msg) {
    const char* tag = lv == Level::Error ? "error" : (lv == Level::Debug ? "debug" : "info");
    std::cerr << "[ari:" << tag << "] " << msg << "\n";
}

}  // namespace ari::log
