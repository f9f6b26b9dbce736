#pragma once

namespace dgstgcn {

/// Keep large activation buffers on the heap and never hand freed heap back
/// to the OS, so every batch reuses the pages the first one faulted in.
/// Call once at program start; no-op outside glibc.
void tune_allocator();

} // namespace dgstgcn
