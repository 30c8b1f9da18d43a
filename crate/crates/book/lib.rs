//! The guide under `book/src`, compiled so that every Rust snippet in it runs
//! as a doc-test. One module per chapter keeps failures traceable.

#[doc = include_str!("../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../book/src/walkthrough.md")]
pub mod walkthrough {}
#[doc = include_str!("../../book/src/attitude.md")]
pub mod attitude {}
#[doc = include_str!("../../book/src/lever-arms.md")]
pub mod lever_arms {}
#[doc = include_str!("../../book/src/total-station.md")]
pub mod total_station {}
#[doc = include_str!("../../book/src/pipeline.md")]
pub mod pipeline {}
#[doc = include_str!("../../book/src/simulation.md")]
pub mod simulation {}
#[doc = include_str!("../../book/src/evaluation.md")]
pub mod evaluation {}
#[doc = include_str!("../../book/src/configuration.md")]
pub mod configuration {}
#[doc = include_str!("../../book/src/formats.md")]
pub mod formats {}
