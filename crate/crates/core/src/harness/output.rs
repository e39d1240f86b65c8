//! CSV and metadata writers.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::entropy::RNG_ALGORITHM;
use crate::error::Result;
use crate::harness::experiment::{RegionRow, SweepRow};

pub const SWEEP_HEADER: &str = "snr_db,scheme,objective_mean,objective_stderr,common_power_ratio,mode_index_mean,realizations";
pub const REGION_HEADER: &str =
    "scheme,snr_db,u1,u2,r1_mean,r1_stderr,r2_mean,r2_stderr,objective_mean,objective_stderr,realizations,frontier";

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from(SWEEP_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            r.snr_db, r.scheme, r.objective_mean, r.objective_stderr, r.common_power_ratio, r.mode_index_mean, r.realizations
        );
    }
    s
}

pub fn region_csv(rows: &[RegionRow]) -> String {
    let mut s = String::from(REGION_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.scheme,
            r.snr_db,
            r.u1,
            r.u2,
            r.r1_mean,
            r.r1_stderr,
            r.r2_mean,
            r.r2_stderr,
            r.objective_mean,
            r.objective_stderr,
            r.realizations,
            r.frontier
        );
    }
    s
}

#[derive(Debug, Serialize)]
pub struct Metadata<'a, C: Serialize> {
    pub command: &'a str,
    pub version: &'a str,
    pub rng: &'a str,
    pub snr_convention: &'a str,
    pub config: &'a C,
}

impl<'a, C: Serialize> Metadata<'a, C> {
    pub fn new(command: &'a str, config: &'a C) -> Self {
        Metadata {
            command,
            version: env!("CARGO_PKG_VERSION"),
            rng: RNG_ALGORITHM,
            snr_convention: "sigma^2 = 1, P_T = 10^(snr_db/10)",
            config,
        }
    }
}

/// Writes `<stem>.csv` and `metadata.json` into `dir`, creating it.
pub fn write_outputs<C: Serialize>(dir: &Path, stem: &str, csv: &str, meta: &Metadata<C>) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(format!("{stem}.csv")), csv)?;
    std::fs::write(dir.join("metadata.json"), serde_json::to_string_pretty(meta)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_csv_has_header_and_rows() {
        let rows = vec![SweepRow {
            snr_db: 10.0,
            scheme: "sdma".into(),
            objective_mean: 1.5,
            objective_stderr: 0.1,
            common_power_ratio: 0.0,
            mode_index_mean: 1.0,
            realizations: 4,
        }];
        let csv = sweep_csv(&rows);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], SWEEP_HEADER);
        assert_eq!(lines[1], "10,sdma,1.5,0.1,0,1,4");
    }
}
