#pragma once

namespace septensor {

/// Keeps large, short-lived grid buffers in the heap instead of fresh
/// mappings. Process-wide; a no-op outside glibc.
void configure_allocator();

}  // namespace septensor
