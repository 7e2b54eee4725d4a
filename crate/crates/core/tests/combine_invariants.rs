mod common;

use common::invariants::{self, CASES};

#[test]
fn fixed_all_ones_weight_is_fisher() {
    invariants::fisher_equivalence(CASES).unwrap();
}

#[test]
fn single_phenotype_methods_agree() {
    invariants::singleton_equivalence(CASES).unwrap();
}

#[test]
fn null_statistics_respect_resolution() {
    invariants::null_resolution(CASES).unwrap();
}

#[test]
fn stronger_evidence_never_raises_p() {
    invariants::monotone_in_evidence(CASES).unwrap();
}
