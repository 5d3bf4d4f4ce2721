#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace qresnet::cli {

inline constexpr const char* kVersion = "0.1.0";

/// Process exit codes.
enum ExitCode : int {
    kOk = 0,
    kValidation = 1,      // bad flag or config value, failed check
    kRuntime = 2,         // any other failure while running
    kUnknownCommand = 3,
    kMalformedConfig = 4,  // unreadable or unparsable config file
    kMissingData = 5,      // MNIST files not found
};

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes);

/// Entry point shared by the executable and the tests.
int run(int argc, const char* const* argv);

}  // namespace qresnet::cli
