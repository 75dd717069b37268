//! Radial quadratic neural networks: approximation, wavelet-frame conversion
//! and inversion.
//!
//! The crate is organised by capability; each has a runnable example:
//!
//! | module            | example                                               |
//! |-------------------|-------------------------------------------------------|
//! | [`activation`]    | `cargo run --release --example activation_decay`      |
//! | [`networks`]      | `cargo run --release --example network_families`      |
//! | [`networks`]      | `cargo run --release --example gradient_audit`        |
//! | [`wavelets`]      | `cargo run --release --example ati_certification`     |
//! | [`approximation`] | `cargo run --release --example n_term_rate`           |
//! | [`approximation`] | `cargo run --release --example wavelets_to_rqnn`      |
//! | [`approximation`] | `cargo run --release --example matching_pursuit`      |
//! | [`inverse`]       | `cargo run --release --example gauss_newton_inversion`|
//! | [`phantom`]       | `cargo run --release --example shepp_logan_phantom`   |
//!
//! The `radnet` binary wraps the same functionality behind the subcommands
//! `check-ati`, `rate`, `invert`, `phantom` and `gradcheck`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod activation;
pub mod approximation;
pub mod cli;
pub mod error;
pub mod field;
pub mod inverse;
pub mod networks;
pub mod phantom;
pub mod quadrature;
pub mod rng;
pub mod wavelets;

pub use activation::{ActivationKind, ActivationProfile};
pub use error::{Error, Result};
pub use field::{Grid, SampledField};
pub use networks::{Family, NetworkParams, RadialParams};
