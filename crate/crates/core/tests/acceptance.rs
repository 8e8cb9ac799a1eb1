use lorentz_besov::harness::acceptance::run;
use std::sync::Mutex;

// criteria are timed, so they must not share the CPU with each other
static SERIAL: Mutex<()> = Mutex::new(());

fn check(id: u8) {
    let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let r = run(id).unwrap();
    println!("{}", r.line());
    assert!(r.passed, "{}", r.line());
}

#[test]
fn criterion_01_partition_of_unity() {
    check(1);
}

#[test]
fn criterion_02_lorentz_engine() {
    check(2);
}

#[test]
fn criterion_03_gamma_independence() {
    check(3);
}

#[test]
fn criterion_04_equivalence_bracket() {
    check(4);
}

#[test]
fn criterion_05_embedding_sweep() {
    check(5);
}

#[test]
fn criterion_06_counterexample_slopes() {
    check(6);
}

#[test]
fn criterion_07_retraction() {
    check(7);
}

#[test]
fn criterion_08_ab_identity() {
    check(8);
}

#[test]
fn criterion_09_wavelet_spaces() {
    check(9);
}

#[test]
fn criterion_10_half_space() {
    check(10);
}

#[test]
fn criterion_11_bv_inequality() {
    check(11);
}
