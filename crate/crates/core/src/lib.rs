//! Behavioral simulator of a wide-dynamic-range memristor read-out chain.
//!
//! The chain converts the memristor current to a voltage through one of five
//! decade-spaced NMOS resistors picked by a feedback selector, amplifies it
//! with a switched-capacitor stage and digitises it with a 12-bit
//! differential SAR ADC. The output is the one-hot range code plus the ADC
//! code.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod autorange;
pub mod cli;
pub mod config;
pub mod devices;
pub mod pipeline;
pub mod report;
pub mod sar_adc;

pub use autorange::{AutorangeOutcome, AutorangeStatus, RangeCode, Source};
pub use devices::{AmplifierSpec, BankConfig, ComparatorSpec, MemristorState, NmosResistorSpec};
pub use pipeline::{read_out, ReadoutResult, SystemConfig, Target};
