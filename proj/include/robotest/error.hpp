#pragma once

#include <stdexcept>
#include <string>

namespace robotest {

enum class ErrorCode {
    // kinematics
    Unreachable,
    DegenerateTarget,
    TargetOutOfBounds,
    UnknownCharacter,
    OutOfScreen,
    // camera
    BehindCamera,
    InsufficientViews,
    DegenerateConfiguration,
    DegeneratePoints,
    QuadOutOfBounds,
    DegenerateQuad,
    // vision
    NoScreenFound,
    // simbench
    UnknownScreen,
    DeviceOutOfFrame,
    // explorer
    NoWidgets,
    // compat
    EmptyImage,
    MismatchedScreens,
    ProfileMismatch,
    // harness
    MissingRuns,
    ConfigError,
    IoError,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + message), code_(code) {}

    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& message) {
    throw Error(code, message);
}

} // namespace robotest
