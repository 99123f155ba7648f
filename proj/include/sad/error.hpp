#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sad {

enum class Errc {
    invalid_state,
    unsupported,
    invalid_action,
    horizon_exceeded,
    unknown_family,
    invalid_trust_horizon,
    non_termination,
    method_env_mismatch,
    shape_mismatch,
    context_too_long,
    empty_dataset,
    family_mismatch,
    unknown_env_tag,
    invalid_argument,
    config_invalid,
    missing_artifact,
    io,
};

std::string_view errc_name(Errc code) noexcept;

// Single exception type for the library; callers branch on code().
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

}  // namespace sad
