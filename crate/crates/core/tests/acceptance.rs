//! One test per acceptance criterion; each prints a PASS/FAIL line.

use breather_core::acceptance::{self, CriterionResult};

fn check(r: CriterionResult) {
    println!("{}", r.line());
    assert!(r.passed, "{}", r.line());
}

#[test]
fn c01_exact_solution_residual() {
    check(acceptance::exact_solution_residual());
}

#[test]
fn c02_evolution_oracle() {
    check(acceptance::evolution_oracle());
}

#[test]
fn c03_solver_oracle() {
    check(acceptance::solver_oracle());
}

#[test]
fn c04_period_asymptotics() {
    check(acceptance::period_asymptotics());
}

#[test]
fn c05_dominant_mode_concentration() {
    check(acceptance::dominant_mode_concentration());
}

#[test]
fn c06_higher_mode_smallness() {
    check(acceptance::higher_mode_smallness());
}

#[test]
fn c07_profile_decomposition() {
    check(acceptance::profile_decomposition());
}

#[test]
fn c08_cubic_mode_identity() {
    check(acceptance::cubic_mode_identity());
}

#[test]
fn c09_golden_rule() {
    check(acceptance::golden_rule());
}

#[test]
fn c10_resonance_identity() {
    check(acceptance::resonance_identity());
}

#[test]
fn c11_jacobian_correctness() {
    check(acceptance::jacobian_correctness());
}

#[test]
fn c12_virial_identities() {
    check(acceptance::virial_identities());
}
