//! Acceptance matrix: one test per criterion, each printing a pass/fail line.

use neckflow::harness::acceptance::{Acceptance, CriterionResult};
use std::io::Write;
use std::sync::OnceLock;

fn matrix() -> &'static Acceptance {
    static ACC: OnceLock<Acceptance> = OnceLock::new();
    ACC.get_or_init(Acceptance::default)
}

fn check(id: usize) {
    let r: CriterionResult = matrix().run(id);
    // bypasses the test harness capture so the line lands in the log
    let _ = writeln!(std::io::stderr(), "{r}");
    assert!(r.passed, "{r}");
}

#[test]
fn criterion_01_manufactured_annulus() {
    check(1);
}

#[test]
fn criterion_02_zero_flux() {
    check(2);
}

#[test]
fn criterion_03_potential_bounds() {
    check(3);
}

#[test]
fn criterion_04_symmetry_and_positive_flux() {
    check(4);
}

#[test]
fn criterion_05_blowup_slopes() {
    check(5);
}

#[test]
fn criterion_06_ugap_limit_p2() {
    check(6);
}

#[test]
fn criterion_07_subcritical_limit() {
    check(7);
}

#[test]
fn criterion_08_neck_integral_oracle() {
    check(8);
}

#[test]
fn criterion_09_exponential_decay() {
    check(9);
}

#[test]
fn criterion_10_pointwise_expansion() {
    check(10);
}

#[test]
fn criterion_11_holder_boundedness() {
    check(11);
}

#[test]
fn criterion_12_property_suite() {
    check(12);
}
