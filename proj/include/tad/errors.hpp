#ifndef TAD_ERRORS_HPP
#define TAD_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace tad {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InvalidSpecError : Error {
    using Error::Error;
};

struct ShapeError : Error {
    using Error::Error;
};

struct IndexError : Error {
    using Error::Error;
};

struct EmptyTrainingSetError : Error {
    using Error::Error;
};

struct EmptyClassError : Error {
    explicit EmptyClassError(int cls)
        : Error("class " + std::to_string(cls) + " has no samples"), class_index(cls) {}
    int class_index;
};

struct DegenerateSegmentError : Error {
    using Error::Error;
};

struct BoundsError : Error {
    using Error::Error;
};

// Carries the tape index of the operation that produced a non-finite value.
struct NumericError : Error {
    NumericError(const std::string& what, int op)
        : Error(what + " (op index " + std::to_string(op) + ")"), op_index(op) {}
    int op_index;
};

struct InsufficientSamplesError : Error {
    using Error::Error;
};

struct NoReferenceError : Error {
    using Error::Error;
};

struct DistillationFailedError : Error {
    using Error::Error;
};

struct ParseError : Error {
    ParseError(const std::string& file, int line, const std::string& what)
        : Error(file + ":" + std::to_string(line) + ": " + what), file_name(file), line_number(line) {}
    std::string file_name;
    int line_number;
};

// Configuration/schema failure; `path` is the offending key path (e.g. "noise.ratio").
struct ConfigError : Error {
    ConfigError(const std::string& path, const std::string& what)
        : Error("config key '" + path + "': " + what), key_path(path) {}
    std::string key_path;
};

}  // namespace tad

#endif  // TAD_ERRORS_HPP
