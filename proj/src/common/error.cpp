// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 vulread contributors

#include "vulread/error.hpp"

namespace vulread {

std::string_view errc_name(Errc code) noexcept {
    switch (code) {
        case Errc::FrozenGraph: return "FrozenGraph";
        case Errc::GraphNotFrozen: return "GraphNotFrozen";
        case Errc::MalformedCweId: return "MalformedCweId";
        case Errc::UnknownNode: return "UnknownNode";
        case Errc::KindMismatch: return "KindMismatch";
        case Errc::InvalidArgument: return "InvalidArgument";
        case Errc::CorruptInput: return "CorruptInput";
        case Errc::DecodeError: return "DecodeError";
        case Errc::SchemaError: return "SchemaError";
        case Errc::ZeroVector: return "ZeroVector";
        case Errc::MissingClassNode: return "MissingClassNode";
        case Errc::TemplateMissingPlaceholder: return "TemplateMissingPlaceholder";
        case Errc::UnknownPlaceholder: return "UnknownPlaceholder";
        case Errc::BudgetExceeded: return "BudgetExceeded";
        case Errc::ParseError: return "ParseError";
        case Errc::LabelContract: return "LabelContract";
        case Errc::MissingSample: return "MissingSample";
        case Errc::BackendError: return "BackendError";
        case Errc::AuthError: return "AuthError";
        case Errc::RateLimited: return "RateLimited";
        case Errc::TransportError: return "TransportError";
        case Errc::MalformedResponse: return "MalformedResponse";
        case Errc::EmptySequence: return "EmptySequence";
        case Errc::DegenerateProbability: return "DegenerateProbability";
        case Errc::TokenOutOfRange: return "TokenOutOfRange";
        case Errc::EmptyInput: return "EmptyInput";
        case Errc::Io: return "Io";
    }
    return "Unknown";
}

} // namespace vulread
