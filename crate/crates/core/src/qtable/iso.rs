use std::io::{self, Write};

use super::QTable;
use crate::error::{Error, Result};
use crate::report::sig6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsoRecord {
    pub g: f64,
    pub mu: f64,
    pub sigma: f64,
    pub q: f64,
}

/// All grid nodes whose value is within `tolerance` of `level`, in storage order.
pub fn export_isosurface_slice(table: &QTable, level: f64, tolerance: f64) -> Result<Vec<IsoRecord>> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::param(format!("isosurface level must lie in (0, 1), got {level}")));
    }
    if !(tolerance >= 0.0) {
        return Err(Error::param(format!("tolerance must be non-negative, got {tolerance}")));
    }
    let axes = table.axes();
    let mut out = Vec::new();
    for (ig, &g) in axes.g().iter().enumerate() {
        for (im, &mu) in axes.mu().iter().enumerate() {
            for (is, &sigma) in axes.sigma().iter().enumerate() {
                let q = table.at(ig, im, is) as f64;
                if (q - level).abs() <= tolerance {
                    out.push(IsoRecord { g, mu, sigma, q });
                }
            }
        }
    }
    Ok(out)
}

pub fn write_isosurface_csv<W: Write>(records: &[IsoRecord], mut out: W) -> io::Result<()> {
    writeln!(out, "g,mu,sigma,q")?;
    for r in records {
        writeln!(out, "{},{},{},{}", sig6(r.g), sig6(r.mu), sig6(r.sigma), sig6(r.q))?;
    }
    out.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qtable::GridAxes;

    fn constant_one() -> QTable {
        QTable::from_parts(GridAxes::mini(), vec![1.0; 27], 1, 0).unwrap()
    }

    #[test]
    fn constant_table_has_no_half_level() {
        assert!(export_isosurface_slice(&constant_one(), 0.5, 0.01).unwrap().is_empty());
    }

    #[test]
    fn saturated_tolerance_returns_everything() {
        assert_eq!(export_isosurface_slice(&constant_one(), 0.9, 1.0).unwrap().len(), 27);
    }

    #[test]
    fn level_out_of_range() {
        assert!(export_isosurface_slice(&constant_one(), 1.0, 0.1).is_err());
    }

    #[test]
    fn csv_layout() {
        let recs = [IsoRecord { g: 0.01, mu: -4.95, sigma: 0.8, q: 0.912345678 }];
        let mut buf = Vec::new();
        write_isosurface_csv(&recs, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "g,mu,sigma,q\n0.01,-4.95,0.8,0.912346\n");
    }
}
