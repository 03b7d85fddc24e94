//! End-to-end acceptance checks for the workspace live in `tests/acceptance.rs`.
