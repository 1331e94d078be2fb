//! Trees, the MiniLang host language, edit scripts over it, and the
//! training-data side of the repair system.

pub mod grammar;
pub mod edit;
pub mod minilang;
pub mod oracle;
pub mod placeholder;
