//! Container-structure forensics for ISO BMFF video files.
//!
//! A file is parsed into its box tree ([`bmff`]), flattened into a multiset of
//! path symbols ([`symbols`]), mapped onto a count vector over a training
//! vocabulary ([`vocab`]), pruned of non-discriminative symbols with pairwise
//! log-likelihood ratios ([`llr`]) and classified by a CART decision tree
//! ([`cart`]) whose decision path explains every verdict. [`pipeline`] ties
//! these together, [`model_file`] persists models, [`evaluation`] runs
//! leave-one-device-out experiments and [`synth`] writes synthetic corpora.

pub mod bmff;
pub mod cart;
pub mod evaluation;
pub mod llr;
pub mod model_file;
pub mod pipeline;
pub mod symbols;
pub mod synth;
pub mod vocab;
