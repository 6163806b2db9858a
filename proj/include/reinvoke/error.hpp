#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace reinvoke {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// corpus

class ParseError : public Error {
public:
    ParseError(const std::string& source, std::size_t record_index, const std::string& detail)
        : Error(source + ": record " + std::to_string(record_index) + ": " + detail),
          record_index_(record_index) {}

    std::size_t record_index() const noexcept { return record_index_; }

private:
    std::size_t record_index_;
};

class DuplicateId : public Error {
public:
    explicit DuplicateId(std::string id)
        : Error("duplicate doc_id: " + id), id_(std::move(id)) {}

    const std::string& id() const noexcept { return id_; }

private:
    std::string id_;
};

class EmptyDocument : public Error {
public:
    using Error::Error;
};

class UnknownDocId : public Error {
public:
    explicit UnknownDocId(std::vector<std::string> ids);

    const std::vector<std::string>& ids() const noexcept { return ids_; }

private:
    std::vector<std::string> ids_;
};

// llm_gateway

/// Non-auth provider failure (transport error, HTTP status, malformed body).
class ProviderError : public Error {
public:
    explicit ProviderError(const std::string& what, int status = 0, bool transient = true)
        : Error(what), status_(status), transient_(transient) {}

    int status() const noexcept { return status_; }
    bool transient() const noexcept { return transient_; }

private:
    int status_;
    bool transient_;
};

class Timeout : public ProviderError {
public:
    explicit Timeout(const std::string& what) : ProviderError(what, 0, true) {}
};

class AuthError : public ProviderError {
public:
    explicit AuthError(const std::string& what, int status = 401)
        : ProviderError(what, status, false) {}
};

/// One entry of a partially failed batch.
struct BatchFailure {
    std::size_t index;
    std::string message;
};

class BatchError : public Error {
public:
    explicit BatchError(std::vector<BatchFailure> failures);

    const std::vector<BatchFailure>& failures() const noexcept { return failures_; }

private:
    std::vector<BatchFailure> failures_;
};

// expansion

class GenerationError : public Error {
public:
    using Error::Error;
};

class MismatchedDoc : public Error {
public:
    using Error::Error;
};

// intent

class InvalidQuery : public Error {
public:
    using Error::Error;
};

class NoIntents : public Error {
public:
    NoIntents() : Error("response contains no intents") {}
};

// embedding / index

class EmptyCorpus : public Error {
public:
    EmptyCorpus() : Error("corpus is empty") {}
};

class DimensionMismatch : public Error {
public:
    DimensionMismatch(std::size_t expected, std::size_t actual)
        : Error("dimension mismatch: expected " + std::to_string(expected) + ", got " +
                std::to_string(actual)) {}
    explicit DimensionMismatch(const std::string& what) : Error(what) {}
};

class MissingCopies : public Error {
public:
    explicit MissingCopies(const std::string& doc_id)
        : Error("document has no expanded copies: " + doc_id) {}
};

class ChecksumError : public Error {
public:
    using Error::Error;
};

// eval

class EmptyRelevanceSet : public Error {
public:
    EmptyRelevanceSet() : Error("relevance set is empty") {}
};

class UnknownQuery : public Error {
public:
    explicit UnknownQuery(const std::string& query_id)
        : Error("query not in dataset: " + query_id) {}
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace reinvoke
