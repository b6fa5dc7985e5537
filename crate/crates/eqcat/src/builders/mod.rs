//! Stage programs for every construction, plus their shared inputs.

pub mod basic;
pub mod bounded;
pub mod bset;
pub mod ce;
pub mod diag;
pub mod from_s;
pub mod from_s1;
pub mod pair;
pub mod sets;
pub mod sfunc;
pub mod sigma2;
pub mod test_class;
pub mod union;

pub use basic::{explicit_structure, identity_structure, periodic_structure};
pub use bounded::{build_bounded, BoundedCharSpec};
pub use diag::{build_diag_pair, opponent_family, DiagPair, Opponent, RequirementReport, RequirementStatus};
pub use ce::{s_from_ce_subset, CeExtraction};
pub use bset::{b_set_member, BEnumerator, BQuadruple};
pub use from_s::build_from_s;
pub use from_s1::{build_from_s1, BlocStatus};
pub use sets::{SetEnumerator, SetSpec};
pub use sfunc::{MonotoneReader, SFunc, SFunctionSpec, SKind, Tabulation};
pub use sigma2::build_sigma2_inf;
pub use pair::{build_pair_t4, Pair, PairBase};
pub use test_class::build_test_class;
pub use union::{effective_union, Coder};
