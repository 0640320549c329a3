// SPDX-License-Identifier: Apache-2.0

//! Every chapter of the guide, one module each, so `cargo test --doc` runs
//! the listings and a failure points at its chapter.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/radio-configs.md")]
pub mod radio_configs {}
#[doc = include_str!("../../../book/src/link-budget.md")]
pub mod link_budget {}
#[doc = include_str!("../../../book/src/airtime.md")]
pub mod airtime {}
#[doc = include_str!("../../../book/src/measurements.md")]
pub mod measurements {}
#[doc = include_str!("../../../book/src/recommend.md")]
pub mod recommend {}
#[doc = include_str!("../../../book/src/tdma.md")]
pub mod tdma {}
#[doc = include_str!("../../../book/src/uplink.md")]
pub mod uplink {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
