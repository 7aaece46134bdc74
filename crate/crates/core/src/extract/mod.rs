//! Privacy amplification: Toeplitz hashing and a Trevisan extractor built from
//! a weak design and a Reed–Solomon ⊕ Hadamard code.

mod code;
mod design;
mod gf2k;
mod toeplitz;
mod trevisan;

pub use code::{code_bit, rs_hadamard_encode, CodeParams};
pub use design::{build_weak_design, verify_weak_design, DesignCheck, WeakDesign};
pub use gf2k::{is_irreducible, Gf2k};
pub use toeplitz::{toeplitz_hash, ToeplitzSeed};
pub use trevisan::{trevisan_extract, ExtractorConfig};
