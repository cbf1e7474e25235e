#pragma once

#include <stdexcept>
#include <string>

namespace adsim {

// Exit-code buckets used by the CLI: 1 = configuration problem,
// 2 = data problem, 3 = internal failure.
enum class ErrorKind { config = 1, data = 2, internal = 3 };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, std::string code, const std::string& message)
        : std::runtime_error(code + ": " + message), kind_(kind), code_(std::move(code)) {}

    ErrorKind kind() const noexcept { return kind_; }
    const std::string& code() const noexcept { return code_; }
    int exit_code() const noexcept { return static_cast<int>(kind_); }

private:
    ErrorKind kind_;
    std::string code_;
};

struct ConfigError : Error {
    ConfigError(std::string code, const std::string& message)
        : Error(ErrorKind::config, std::move(code), message) {}
};

struct DataError : Error {
    DataError(std::string code, const std::string& message)
        : Error(ErrorKind::data, std::move(code), message) {}
};

struct InternalError : Error {
    InternalError(std::string code, const std::string& message)
        : Error(ErrorKind::internal, std::move(code), message) {}
};

// Graph
struct CycleDetected : ConfigError {
    explicit CycleDetected(const std::string& message) : ConfigError("CycleDetected", message) {}
};
struct UnknownVariable : ConfigError {
    explicit UnknownVariable(const std::string& message) : ConfigError("UnknownVariable", message) {}
};

// Fitting
struct DegenerateDesign : DataError {
    explicit DegenerateDesign(const std::string& message) : DataError("DegenerateDesign", message) {}
};
struct DegenerateInput : DataError {
    explicit DegenerateInput(const std::string& message) : DataError("DegenerateInput", message) {}
};
struct EmptyInput : DataError {
    explicit EmptyInput(const std::string& message) : DataError("EmptyInput", message) {}
};
struct InsufficientData : DataError {
    explicit InsufficientData(const std::string& message) : DataError("InsufficientData", message) {}
};

// Cohort / IO
struct SchemaMismatch : DataError {
    explicit SchemaMismatch(const std::string& message) : DataError("SchemaMismatch", message) {}
};
struct CellTypeError : DataError {
    explicit CellTypeError(const std::string& message) : DataError("TypeError", message) {}
};
struct NoModelForVariable : ConfigError {
    explicit NoModelForVariable(const std::string& message) : ConfigError("NoModelForVariable", message) {}
};
struct IoError : DataError {
    explicit IoError(const std::string& message) : DataError("IoError", message) {}
};

// Bank
struct VersionMismatch : DataError {
    explicit VersionMismatch(const std::string& message) : DataError("VersionMismatch", message) {}
};
struct ChecksumMismatch : DataError {
    explicit ChecksumMismatch(const std::string& message) : DataError("ChecksumMismatch", message) {}
};
struct BankGraphMismatch : ConfigError {
    explicit BankGraphMismatch(const std::string& message) : ConfigError("BankGraphMismatch", message) {}
};

// Estimators
struct ArmStarved : DataError {
    explicit ArmStarved(const std::string& message) : DataError("ArmStarved", message) {}
};
struct UnitMismatch : DataError {
    explicit UnitMismatch(const std::string& message) : DataError("UnitMismatch", message) {}
};
struct DivergedLoss : DataError {
    explicit DivergedLoss(const std::string& message) : DataError("DivergedLoss", message) {}
};
struct LeakageDetected : DataError {
    explicit LeakageDetected(const std::string& message) : DataError("LeakageDetected", message) {}
};

}  // namespace adsim
