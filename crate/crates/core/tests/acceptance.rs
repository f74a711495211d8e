//! Acceptance suite: one test per criterion, each printing its verdict
//! line. Run with `--nocapture` to see the lines for passing criteria
//! too; a failing criterion carries its full detail in the panic message.

use fairsched::acceptance;

fn assert_criterion(result: fairsched::CriterionResult) {
    println!("{}", result.line());
    assert!(result.passed, "{}", result.line());
}

#[test]
fn criterion_1_overload_service_shares() {
    assert_criterion(acceptance::criterion_1());
}

#[test]
fn criterion_2_rate_stability() {
    assert_criterion(acceptance::criterion_2());
}

#[test]
fn criterion_3_delay_fairness_orderings() {
    assert_criterion(acceptance::criterion_3());
}

#[test]
fn criterion_4_consensus_ranking_properties() {
    assert_criterion(acceptance::criterion_4());
}

#[test]
fn criterion_5_assignment_solver_exactness() {
    assert_criterion(acceptance::criterion_5());
}

#[test]
fn criterion_6_busy_cycle_growth_law() {
    assert_criterion(acceptance::criterion_6());
}

#[test]
fn criterion_7_negative_drift_at_high_backlog() {
    assert_criterion(acceptance::criterion_7());
}

#[test]
fn criterion_8_structural_invariants() {
    assert_criterion(acceptance::criterion_8());
}
