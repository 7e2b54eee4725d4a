mod common;

use common::invariants::{self, CASES};

#[test]
fn variability_is_four_q_one_minus_q() {
    invariants::variability_bounds(CASES).unwrap();
}

#[test]
fn comembership_is_a_similarity() {
    invariants::comembership_similarity(CASES).unwrap();
}

#[test]
fn tight_cluster_recovers_planted_blocks() {
    invariants::planted_block_recovery(5).unwrap();
}
