pub mod annotation;
pub mod conllu;
pub mod corpus;
pub mod extraction;
pub mod faithfulness;
pub mod framing;
pub mod label;
pub mod optim;
pub mod stance;
pub mod stats;
pub mod text;

#[cfg(test)]
mod test_support;

pub use label::Stance;
