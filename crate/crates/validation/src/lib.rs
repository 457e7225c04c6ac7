//! Acceptance checks live in `tests/acceptance.rs`; run them with
//! `cargo test -p qbcharge-validation --test acceptance`.
