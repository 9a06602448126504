//! Holds the acceptance suite in `tests/acceptance.rs`. Run it with
//! `cargo test -p cei-validation --test acceptance -- --nocapture`.
