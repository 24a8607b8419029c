pub mod abduction;
pub mod complex;
pub mod eval;
pub mod kgraph;
pub mod logic;
pub mod triplet;
pub mod vocab;

pub use triplet::{Triplet, TripletStore};
pub use vocab::{EntityId, RelationId, Vocabulary};
