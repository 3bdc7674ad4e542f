// SPDX-License-Identifier: Apache-2.0

//! Cycle-level model of a six-core RV32IM cluster whose cores can be grouped
//! at run time into lockstep triples with majority voting.
//!
//! The [`cluster::Cluster`] type ties together the cores ([`cpu`]), the
//! redundancy units ([`odrg`]), the banked data memory ([`tcdm`]) and the
//! event unit. [`asm`] and [`firmware`] produce the programs it runs, and
//! [`campaign`] drives fault-injection experiments on top of it.

pub mod asm;
pub mod campaign;
pub mod bench;
pub mod cluster;
pub mod cpu;
pub mod event_unit;
pub mod firmware;
pub mod isa;
pub mod map;
pub mod odrg;
pub mod program;
pub mod run;
pub mod tcdm;
