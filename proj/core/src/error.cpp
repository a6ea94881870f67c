#include "divad/error.hpp"

#include <iostream>
#include <mutex>

namespace divad {
namespace {

std::mutex& handler_mutex() {
    static std::mutex m;
    return m;
}

WarningHandler& handler_slot() {
    static WarningHandler h;
    return h;
}

}  // namespace

void warn(const std::string& message) {
    std::lock_guard lock(handler_mutex());
    if (handler_slot()) {
        handler_slot()(message);
    } else {
        std::cerr << "warning: " << message << '\n';
    }
}

WarningHandler set_warning_handler(WarningHandler handler) {
    std::lock_guard lock(handler_mutex());
    auto previous = std::move(handler_slot());
    handler_slot() = std::move(handler);
    return previous;
}

}  // namespace divad
