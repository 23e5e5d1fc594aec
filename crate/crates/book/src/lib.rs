//! The guide in `book/`, compiled so that its listings run as doc-tests.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/chains.md")]
pub mod chains {}
#[doc = include_str!("../../../book/src/deformation.md")]
pub mod deformation {}
#[doc = include_str!("../../../book/src/multiscale.md")]
pub mod multiscale {}
#[doc = include_str!("../../../book/src/avoidance.md")]
pub mod avoidance {}
#[doc = include_str!("../../../book/src/carnot.md")]
pub mod carnot {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
#[doc = include_str!("../../../book/src/constants.md")]
pub mod constants {}
#[doc = include_str!("../../../README.md")]
pub mod readme {}
