#pragma once

#include <stdexcept>
#include <string>

namespace specfission {

enum class ErrorCode {
    // document / spec model
    MalformedDocument,
    DuplicateName,
    CyclicDependency,
    // expression language
    SyntaxError,
    TypeError,
    UnboundSignal,
    // ingestion
    RaggedRow,
    BadUtf8,
    NotAnArray,
    NestedValue,
    // transforms
    DegenerateExtent,
    NonNumericField,
    NonTimestampField,
    UnknownField,
    NonNumericAggregate,
    // runtime
    NotFound,
    FetchError,
    IngestError,
    LoadError,
    TransformError,
    MalformedRequest,
    // planner / session
    InvariantViolation,
    UnknownSignal,
    UnexpectedResponse,
    UnsupportedForOracle,
};

const char* error_code_name(ErrorCode code);

/// Single exception type carrying a machine-readable code. Parse errors
/// additionally carry the byte offset of the failure, transform errors the
/// id of the failing graph node.
class Error : public std::runtime_error {
  public:
    Error(ErrorCode code, std::string message)
        : std::runtime_error(std::move(message)), code_(code) {}
    Error(ErrorCode code, std::string message, std::size_t offset)
        : std::runtime_error(std::move(message)), code_(code), offset_(offset) {}

    ErrorCode code() const noexcept { return code_; }
    std::size_t offset() const noexcept { return offset_; }

    long node() const noexcept { return node_; }
    Error& with_node(long id) {
        node_ = id;
        return *this;
    }

  private:
    ErrorCode code_;
    std::size_t offset_ = 0;
    long node_ = -1;
};

} // namespace specfission
