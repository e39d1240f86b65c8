//! Built-in mode dictionaries against the published tables.

use rsma::constellation::mode_dictionary;

fn labels(k: usize, r: u32) -> Vec<String> {
    mode_dictionary(k, r).unwrap().modes.iter().map(|m| m.label()).collect()
}

#[test]
fn two_users_six_bits() {
    assert_eq!(labels(2, 6), ["-/8QAM", "QPSK/QPSK", "16QAM/BPSK", "64QAM/-"]);
}

#[test]
fn two_users_eight_bits() {
    assert_eq!(labels(2, 8), ["-/16QAM", "QPSK/8QAM", "16QAM/QPSK", "64QAM/BPSK", "256QAM/-"]);
}

#[test]
fn three_users_six_bits() {
    assert_eq!(labels(3, 6), ["-/QPSK", "8QAM/BPSK", "64QAM/-"]);
}

#[test]
fn three_users_nine_bits() {
    assert_eq!(labels(3, 9), ["-/8QAM", "8QAM/QPSK", "64QAM/BPSK", "512QAM/-"]);
}
