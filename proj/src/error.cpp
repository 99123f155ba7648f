#include "sad/error.hpp"

namespace sad {

std::string_view errc_name(Errc code) noexcept {
    switch (code) {
        case Errc::invalid_state: return "InvalidState";
        case Errc::unsupported: return "Unsupported";
        case Errc::invalid_action: return "InvalidAction";
        case Errc::horizon_exceeded: return "HorizonExceeded";
        case Errc::unknown_family: return "UnknownFamily";
        case Errc::invalid_trust_horizon: return "InvalidTrustHorizon";
        case Errc::non_termination: return "NonTermination";
        case Errc::method_env_mismatch: return "MethodEnvMismatch";
        case Errc::shape_mismatch: return "ShapeMismatch";
        case Errc::context_too_long: return "ContextTooLong";
        case Errc::empty_dataset: return "EmptyDataset";
        case Errc::family_mismatch: return "FamilyMismatch";
        case Errc::unknown_env_tag: return "UnknownEnvTag";
        case Errc::invalid_argument: return "InvalidArgument";
        case Errc::config_invalid: return "ConfigInvalid";
        case Errc::missing_artifact: return "MissingArtifact";
        case Errc::io: return "IoError";
    }
    return "Unknown";
}

}  // namespace sad
