#pragma once

#include <functional>
#include <string_view>

namespace scarq {

using WarningHandler = std::function<void(std::string_view)>;

/// Installs the sink for non-fatal warnings and returns the previous one.
/// The default handler writes to stderr.
WarningHandler set_warning_handler(WarningHandler handler);

void warn(std::string_view message);

/// Routes warnings into a callback for the lifetime of the guard.
class ScopedWarningCapture {
public:
    explicit ScopedWarningCapture(WarningHandler handler)
        : previous_(set_warning_handler(std::move(handler))) {}
    ~ScopedWarningCapture() { set_warning_handler(std::move(previous_)); }

    ScopedWarningCapture(const ScopedWarningCapture&) = delete;
    ScopedWarningCapture& operator=(const ScopedWarningCapture&) = delete;

private:
    WarningHandler previous_;
};

}  // namespace scarq
