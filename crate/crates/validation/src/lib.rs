//! Acceptance checks for the quench pipeline; see `tests/acceptance.rs`.
//! Run with `cargo test -p quench-validation --test acceptance`.
