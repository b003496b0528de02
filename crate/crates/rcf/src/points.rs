//! Command-line complex vectors: comma-separated `re:im` pairs, bare reals
//! allowed.

use anyhow::{anyhow, Result};
use rcf_core::linalg::c;
use rcf_core::{CVector, C64};

pub fn parse_complex(s: &str) -> Result<C64> {
    let s = s.trim();
    let (re, im) = match s.split_once(':') {
        Some((r, i)) => (r.trim(), i.trim()),
        None => (s, "0"),
    };
    let p = |x: &str| x.parse::<f64>().map_err(|_| anyhow!("bad number '{x}' in '{s}'"));
    Ok(c(p(re)?, p(im)?))
}

pub fn parse_cvector(s: &str) -> Result<CVector> {
    s.split(',').map(parse_complex).collect::<Result<Vec<_>>>().map(CVector)
}

pub fn parse_reals(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|_| anyhow!("bad number '{x}'")))
        .collect()
}

/// Inverse of [`parse_cvector`]; exact for every finite value.
pub fn format_cvector(v: &[C64]) -> String {
    v.iter().map(|x| format!("{}:{}", x.re, x.im)).collect::<Vec<_>>().join(",")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairs_and_bare_reals() {
        let v = parse_cvector("1,0.5:-2, -3").unwrap();
        assert_eq!(v.0, vec![c(1.0, 0.0), c(0.5, -2.0), c(-3.0, 0.0)]);
        assert!(parse_cvector("1,x").is_err());
    }

    #[test]
    fn format_round_trips() {
        let v = CVector(vec![c(0.1 + 0.2, -1e-300), c(std::f64::consts::PI, 7.0)]);
        assert_eq!(parse_cvector(&format_cvector(&v)).unwrap(), v);
    }
}
