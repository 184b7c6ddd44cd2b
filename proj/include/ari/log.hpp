#pragma once

#include <sstream>
#include <string>

namespace ari::log {

enum class Level { Error = 0, Info = 1, Debug = 2 };

// Resolved once from ARI_LOG={error,info,debug}; default info.
Level level();
void set_level(Level lv);
void write(Level lv, const std::string& msg);

template <class... Args>
void emit(Level lv, Args&&... args) {
    if (lv > level()) return;
    std::ostringstream os;
    (os << ... << args);
    write(lv, os.str());
}

template <class... Args>
void error(Args&&... args) { emit(Level::Error, std::forward<Args>(args)...); }
template <class... Args>
void info(Args&&... args) { emit(Level::Info, std::forward<Args>(args)...); }
template <class... Args>
void debug(Args&&... args) { emit(Level::Debug, std::forward<Args>(args)...); }

}  // namespace ari::log
