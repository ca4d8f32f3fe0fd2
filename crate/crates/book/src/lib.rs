//! Each chapter of `book/src` becomes the docs of an empty module, so
//! `cargo test --doc -p isolab-book` runs every listing in the guide.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/measures.md")]
pub mod measures {}
#[doc = include_str!("../../../book/src/stability.md")]
pub mod stability {}
#[doc = include_str!("../../../book/src/needles.md")]
pub mod needles {}
#[doc = include_str!("../../../book/src/rates.md")]
pub mod rates {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
#[doc = include_str!("../../../README.md")]
pub mod readme {}
