//! Exact-arithmetic laboratory for SL(n) Kloosterman sets and sums over
//! principal congruence subgroups, together with the lattice point counting
//! experiments they feed.
//!
//! The crate is organised bottom-up:
//!
//! * [`exact`] — rationals, rational matrices, cyclotomic integers, p-adic
//!   valuations;
//! * [`weyl`], [`bruhat`] — Weyl representatives and exact Bruhat
//!   factorisation;
//! * [`ksets`] — enumeration and counting of global and local Kloosterman
//!   sets, with fast-path counters for the special Weyl elements of GL(3)
//!   and `w_*`;
//! * [`ksums`] — characters, relevance, and exact Kloosterman-sum values;
//! * [`verify`] — geometric sums and the lemma verification harness;
//! * [`lattice`] — norm-ball counting in congruence subgroups and lifting
//!   experiments;
//! * [`cache`] — content-addressed result cache.

pub mod bruhat;
pub mod exact;
pub mod ksets;
pub mod ksums;
pub mod lattice;
pub mod verify;
pub mod weyl;
pub mod cache;

pub use bruhat::{bruhat_decompose, moduli_of, normalize_signs, BruhatError, BruhatFactorization, ModulusVector};
pub use exact::{
    cyclotomic_polynomial, is_prime, vp, CyclotomicValue, ExactError, PValuation, Rational, RationalMatrix,
    Valuation,
};
pub use ksets::{
    canonicalize, count_by_crt, count_global, count_local, count_local_cached, enumerate_global,
    enumerate_local, involution_image, CosetPair, EnumOptions, Enumeration, KsetError, LatticeSpec,
    LocalSpec, Side,
};
pub use ksums::{
    all_sign_vectors, audit_well_defined, classical_kloosterman, factorization_check, is_relevant,
    kloosterman_sum, kloosterman_sums_batch, theta, AuditOutcome, CharacterSpec, PerturbationScope,
    SumRecord,
};
pub use lattice::{count_ball, lifting_exceptions, BallCount, LatticeError, LiftingResult, Norm};
pub use verify::{
    geometric_sum, index_constants, verify_lemma, BoundReport, GeoSumResult, GridSpec, IndexConstants,
    LemmaId,
};
pub use weyl::{WeylElement, WeylError};
