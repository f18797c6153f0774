#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace protosynth {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed descriptor or wire bytes. offset is absolute within the input.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t offset)
        : Error(what + " at byte offset " + std::to_string(offset)), offset_(offset) {}

    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

class ResolutionError : public Error {
public:
    explicit ResolutionError(const std::string& missing)
        : Error("unresolved type reference: " + missing), missing_(missing) {}

    const std::string& missing_type() const noexcept { return missing_; }

private:
    std::string missing_;
};

class LookupError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class ValidationError : public Error {
public:
    using Error::Error;
};

class CorpusQualityError : public Error {
public:
    CorpusQualityError(std::size_t skipped, std::size_t total)
        : Error("corpus quality: " + std::to_string(skipped) + " of " + std::to_string(total) +
                " records malformed"),
          skipped_(skipped), total_(total) {}

    std::size_t skipped() const noexcept { return skipped_; }
    std::size_t total() const noexcept { return total_; }

private:
    std::size_t skipped_;
    std::size_t total_;
};

}  // namespace protosynth
