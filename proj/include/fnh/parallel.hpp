#pragma once

namespace fnh {

// Caps OpenMP worker threads; 0 restores the runtime default.
void set_thread_count(int threads);

// Applies FNH_THREADS from the environment if set. Returns the value used
// (0 = auto). Throws InvalidArgument on a malformed value.
int configure_threads_from_env();

int max_threads();

}  // namespace fnh
