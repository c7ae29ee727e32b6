// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 vulread contributors

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace vulread {

enum class Errc {
    // graph store
    FrozenGraph,
    GraphNotFrozen,
    MalformedCweId,
    UnknownNode,
    KindMismatch,
    InvalidArgument,
    CorruptInput,
    // corpus ingestion
    DecodeError,
    SchemaError,
    // mapping / embeddings
    ZeroVector,
    MissingClassNode,
    // prompts + distillation
    TemplateMissingPlaceholder,
    UnknownPlaceholder,
    BudgetExceeded,
    ParseError,
    LabelContract,
    MissingSample,
    // backends
    BackendError,
    AuthError,
    RateLimited,
    TransportError,
    MalformedResponse,
    // numerics
    EmptySequence,
    DegenerateProbability,
    TokenOutOfRange,
    // evaluation
    EmptyInput,
    // files
    Io,
};

std::string_view errc_name(Errc code) noexcept;

/// Library-wide exception. Every failure path in vulread throws this with a
/// machine-checkable code; the message carries the human-readable detail.
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& message)
        : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}

    [[nodiscard]] Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

} // namespace vulread
