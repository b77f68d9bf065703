//! Success-rate arithmetic against hand-counted category results.

use std::collections::BTreeMap;

use coact::harness::{overall_tenths, Stats};

/// Overall SR for five equal-size categories with the given successes.
pub fn row_average(successes: [u32; 5], per_category: u32) -> f64 {
    let cats: BTreeMap<String, Stats> = ["Shopping", "CMS", "Reddit", "Gitlab", "Maps"]
        .iter()
        .zip(successes)
        .map(|(name, s)| (name.to_string(), Stats::new(s, per_category)))
        .collect();
    overall_tenths(&cats) as f64 / 10.0
}

pub fn check_table_rows() -> Result<(), String> {
    for (successes, expected) in [([12, 11, 9, 7, 8], 9.4), ([22, 14, 12, 9, 12], 13.8)] {
        let got = row_average(successes, 100);
        if format!("{got:.1}") != format!("{expected:.1}") {
            return Err(format!("{successes:?}/100 gave {got:.1}, expected {expected:.1}"));
        }
    }
    Ok(())
}
