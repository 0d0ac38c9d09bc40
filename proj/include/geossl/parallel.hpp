#pragma once

#include <cstddef>
#include <functional>

namespace geossl {

// Worker count for internal parallel loops. Reads GEOSSL_THREADS once;
// defaults to the hardware concurrency.
std::size_t thread_count();

// Override for the current process (tests pin this to 1).
void set_thread_count(std::size_t threads);

// Runs body(i) for i in [begin, end) split into contiguous chunks. Each index
// must write only its own output slot so results do not depend on scheduling.
void parallel_for(std::size_t begin, std::size_t end,
                  const std::function<void(std::size_t)>& body);

}  // namespace geossl
