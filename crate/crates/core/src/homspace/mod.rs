//! The space of unimodular lattices `SL_{d+1}(R)/SL_{d+1}(Z)`: group
//! elements, lattice bases, reduction, box enumeration and Siegel
//! transforms.

mod boxes;
mod enumerate;
mod group;
mod haar;
mod lattice;
mod siegel;

pub use boxes::{AxisBox, TIE_REL};
pub use enumerate::{enumerate_in_box, predicted_box_points, LatticePoint, ENUMERATION_LIMIT};
pub use group::{dani_vector, make_a, make_k, make_u, GroupElement, MAX_D};
pub use haar::{haar_sample, haar_sample_sl2, haar_sample_sl2_counting};
pub use lattice::{is_lll_reduced, lll_reduce, shortest_vector, LatticeBasis, LLL_DELTA};
pub use siegel::{
    c_m, counting_lemma_check, gcd_of, restricted_density, restricted_siegel_transform,
    siegel_transform, zeta, CountingLemmaCheck,
};
