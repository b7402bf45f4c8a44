//! Empty library; the crate exists to host the criterion benchmarks.
