#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace galforge {

// Whole-file atomic write: content goes to a sibling temp file which is then
// renamed over the target, so readers never observe a half-written file.
void atomic_write_file(const std::filesystem::path& path, const std::string& content);

std::string read_file(const std::filesystem::path& path);

// FNV-1a 64-bit, used for content digests in manifests and run ids
std::uint64_t fnv1a64(const void* data, std::size_t size);
std::uint64_t fnv1a64(const std::string& s);
std::string hex64(std::uint64_t v);

// shortest decimal that round-trips the exact double (via std::to_chars)
std::string format_double(double v);
double parse_double(const std::string& s);

std::vector<std::string> split(const std::string& line, char sep);
std::string trim(const std::string& s);

// thread cap: GALFORGE_THREADS when set and > 0, otherwise hardware
// concurrency; always at least 1
unsigned thread_budget();

// Runs fn(i) for i in [0, n), splitting across at most thread_budget()
// workers. Tasks must be independent; the first exception is rethrown after
// all workers join.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace galforge
