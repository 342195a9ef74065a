//! Differentiable core for analogical image translation, instantiated as fog
//! generation on a procedural testbed.
//!
//! The crate is organized around three layers:
//!
//! - pure translation math: the gist decomposition ([`gist`]), the fog optics
//!   that give it a closed form ([`fog`]), and the deterministic toy scenes
//!   that stand in for driving footage ([`scene`]);
//! - a small reverse-mode tensor engine ([`tensor`], [`graph`], [`kernels`])
//!   sized for CPU-only training of the translation networks;
//! - the learning stack: network construction with the tied-parameter
//!   topology ([`net`]), the loss terms and their weighted assembly
//!   ([`objectives`]), the optimizer and the minimax step ([`optim`],
//!   [`train`]), and finite-difference verification ([`gradcheck`]).
//!
//! Everything here is deterministic: identical seeds and configs produce
//! bitwise-identical parameters, scenes, and training trajectories. File
//! formats, PNG I/O, and the command-line pipeline live in the companion
//! `analogic` crate.
//!
//! The crate is `no_std`-compatible (with `alloc`); the default `std` feature
//! only switches float intrinsics and error-trait plumbing.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod error;
pub mod fog;
pub mod gist;
pub mod gradcheck;
pub mod graph;
pub mod kernels;
pub mod net;
pub mod objectives;
pub mod optim;
pub mod scalar;
pub mod scene;
pub mod tensor;
pub mod train;

pub use error::CoreError;
pub use scalar::Scalar;
pub use tensor::Tensor;
