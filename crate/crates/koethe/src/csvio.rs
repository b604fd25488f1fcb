//! Coefficient CSV `(index, re, im)` and convergence CSV.

use std::io::{Read, Write};

use koethe_core::approx::ConvergenceReport;
use koethe_core::sequences::Coefficients;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Serialize, Deserialize)]
struct CoeffRow {
    index: usize,
    re: f64,
    im: f64,
}

pub fn read_coefficients(r: impl Read) -> Result<Coefficients, CliError> {
    let mut rows: Vec<CoeffRow> =
        csv::Reader::from_reader(r).deserialize().collect::<Result<_, _>>()?;
    rows.sort_by_key(|r| r.index);
    let len = rows.last().map_or(0, |r| r.index + 1);
    let mut c = vec![Complex64::new(0.0, 0.0); len];
    for w in rows.windows(2) {
        if w[0].index == w[1].index {
            return Err(CliError::Config(format!("duplicate coefficient index {}", w[0].index)));
        }
    }
    for row in rows {
        c[row.index] = Complex64::new(row.re, row.im);
    }
    Ok(Coefficients(c))
}

pub fn write_coefficients(w: impl Write, c: &Coefficients) -> Result<(), CliError> {
    let mut out = csv::Writer::from_writer(w);
    for (index, z) in c.0.iter().enumerate() {
        out.serialize(CoeffRow { index, re: z.re, im: z.im })?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct ConvergenceCsvRow {
    n: u64,
    value: f64,
    #[serde(rename = "branch_bound_Ipp")]
    branch_bound_ipp: f64,
    #[serde(rename = "branch_bound_Ip")]
    branch_bound_ip: f64,
}

pub fn write_convergence(w: impl Write, report: &ConvergenceReport) -> Result<(), CliError> {
    let mut out = csv::Writer::from_writer(w);
    for r in &report.rows {
        out.serialize(ConvergenceCsvRow {
            n: r.n,
            value: r.value.value(),
            branch_bound_ipp: r.branch_bound_ipp.value(),
            branch_bound_ip: r.branch_bound_ip.value(),
        })?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coefficient_round_trip() {
        let c = Coefficients(vec![Complex64::new(1.0, 0.0), Complex64::new(0.5, -0.25), Complex64::new(1e-300, 3.0)]);
        let mut buf = Vec::new();
        write_coefficients(&mut buf, &c).unwrap();
        assert!(String::from_utf8(buf.clone()).unwrap().starts_with("index,re,im\n"));
        assert_eq!(read_coefficients(&buf[..]).unwrap(), c);
    }

    #[test]
    fn gaps_are_zero() {
        let c = read_coefficients("index,re,im\n2,1,0\n0,3,0\n".as_bytes()).unwrap();
        assert_eq!(c.0, [Complex64::new(3.0, 0.0), Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)]);
        assert!(read_coefficients("index,re,im\n1,1,0\n1,2,0\n".as_bytes()).is_err());
    }
}
