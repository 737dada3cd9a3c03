//! Shared fixtures for the engine benchmarks.

use klab_core::bruhat::ModulusVector;
use klab_core::weyl::WeylElement;

pub fn moduli(c: &[u64]) -> ModulusVector {
    ModulusVector::new(c.to_vec()).unwrap()
}

pub fn long3() -> WeylElement {
    WeylElement::long_element(3)
}

pub fn wstar4() -> WeylElement {
    WeylElement::w_star(4)
}
