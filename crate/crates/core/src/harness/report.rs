use std::fmt::Write;

use super::study::ConvergenceReport;

pub const CSV_HEADER: &str = "level,h,theta,n_unknowns,err_l2,err_energy,eoc_l2,eoc_energy,energy_chain_ok,poincare_ratio";

fn num(v: f64) -> String {
    format!("{v:.12e}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// One row per level in the fixed column order; missing values are empty.
pub fn write_csv(report: &ConvergenceReport) -> String {
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in &report.levels {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.level,
            num(r.h),
            num(r.theta),
            r.n_unknowns,
            num(r.err_l2),
            num(r.err_energy),
            opt(r.eoc_l2),
            opt(r.eoc_energy),
            r.energy_chain_ok,
            opt(r.poincare_ratio),
        )
        .expect("writing to a String cannot fail");
    }
    out
}
