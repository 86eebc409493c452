//! Lexical semantic change detection from grammatical profiles.
//!
//! A word's grammatical profile in a period is the frequency distribution of
//! its morphological feature bundles (CONLL-U `FEATS`) and of its dependency
//! relations to the syntactic head (`DEPREL`). Comparing the profiles of a
//! word across two periods with the cosine distance yields a change score,
//! which is used to rank target words by degree of change and to split them
//! into changed and stable words.
//!
//! The pipeline is:
//!
//! 1. [`conllu`] parses tagged corpora and matches tokens to target lemmas.
//! 2. [`profiles`] aggregates matched tokens into [`Profile`]s and splits
//!    feature bundles into per-category distributions.
//! 3. [`scoring`] computes cosine distances under the method variants.
//! 4. [`decision`] ranks words and assigns binary labels.
//! 5. [`evaluation`] compares predictions with gold annotations.
//! 6. [`analysis`] estimates which categories carry the change signal.

pub mod analysis;
pub mod conllu;
pub mod decision;
mod error;
pub mod evaluation;
pub mod profiles;
pub mod scoring;
pub mod store;
pub mod tsv;

pub use conllu::{MatchOptions, Sentence, TargetSet, TargetSpec, Token};
pub use decision::{Labels, Ranking};
pub use error::{Error, Result};
pub use profiles::{CategoryProfile, CountMap, Profile};
pub use scoring::{ChangeScore, FeatureKind, MethodConfig};
pub use store::ProfileStore;
