// SPDX-License-Identifier: Apache-2.0

//! Synthesis-in-the-loop evaluation of generated RTL.

pub mod campaign;
pub mod exec;
pub mod frontend;
pub mod report;
pub mod robustness;
pub mod scoring;
pub mod taxonomy;
pub mod task;
pub mod toolchain;
