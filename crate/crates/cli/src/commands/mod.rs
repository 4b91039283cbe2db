pub mod compare;
pub mod decompose;
pub mod eval;
pub mod gradcheck;
pub mod pipeline;
