#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <string_view>

namespace chq {

// Worker count from CHOQUARD_THREADS, else hardware concurrency (at least 1).
unsigned worker_count();

// Runs body(i) for i in [0, n) on up to worker_count() threads; static round-robin assignment.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

std::string sha256_hex(std::string_view data);

}  // namespace chq
