pub mod channel;
pub mod error;
pub mod interleave;
pub mod lemma;
pub mod ordering;
pub mod region;
pub mod rng;
pub mod sim;

pub use channel::{BroadcastChannel, ChannelMatrix, ProbVector};
pub use error::{Error, Result};
pub use region::{AuxiliaryJoint, RateTuple};
