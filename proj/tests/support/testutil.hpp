#pragma once

#include <filesystem>
#include <string>

namespace emrkit::testing {

// Scratch location for files a test creates; contents are overwritten freely,
// so every caller must pass a name unique to its test case.
inline std::string temp_path(const std::string& name) {
    std::filesystem::path dir = std::filesystem::temp_directory_path() / "emrkit_tests";
    std::filesystem::create_directories(dir);
    return (dir / name).string();
}

inline void remove_if_exists(const std::string& path) {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
}

}  // namespace emrkit::testing
