//! Externally computed density values on a regular grid.

use std::fs;
use std::path::Path;

use crate::density::Density;
use crate::error::{invalid, io_err, Error, Result};

/// Density tabulated at the nodes of a regular grid, multilinearly
/// interpolated inside the grid and zero outside.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedDensity {
    axes: Vec<Vec<f64>>,
    values: Vec<f64>,
}

impl TabulatedDensity {
    /// `axes[j]` are the node coordinates on axis `j`; `values` are flattened
    /// with the last axis varying fastest.
    pub fn new(axes: Vec<Vec<f64>>, values: Vec<f64>) -> Result<Self> {
        if axes.is_empty() {
            return Err(invalid("tabulated density needs at least one axis"));
        }
        for (j, a) in axes.iter().enumerate() {
            if a.len() < 2 || a.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(invalid(format!(
                    "axis {j} coordinates must be strictly increasing"
                )));
            }
            let step = a[1] - a[0];
            if a.windows(2)
                .any(|w| ((w[1] - w[0]) - step).abs() > 1e-9 * step.max(1.0))
            {
                return Err(invalid(format!("axis {j} is not regularly spaced")));
            }
        }
        let total: usize = axes.iter().map(Vec::len).product();
        if values.len() != total {
            return Err(invalid(format!(
                "expected {total} tabulated values, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(invalid("tabulated values must be finite and nonnegative"));
        }
        Ok(TabulatedDensity { axes, values })
    }

    /// Reads a CSV with header `x1,...,xd,density` listing every grid node.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        let parse_err = |line: usize, message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines
            .next()
            .ok_or_else(|| parse_err(1, "empty file".into()))?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        let d = cols.len().saturating_sub(1);
        let expected: Vec<String> = (1..=d)
            .map(|j| format!("x{j}"))
            .chain(["density".to_string()])
            .collect();
        if d == 0 || cols != expected {
            return Err(parse_err(
                1,
                format!("header must be {}", expected.join(",")),
            ));
        }
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (k, line) in lines {
            let row = line
                .split(',')
                .map(|t| t.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| parse_err(k + 1, e.to_string()))?;
            if row.len() != d + 1 {
                return Err(parse_err(
                    k + 1,
                    format!("expected {} columns, found {}", d + 1, row.len()),
                ));
            }
            rows.push(row);
        }
        let mut axes: Vec<Vec<f64>> = Vec::with_capacity(d);
        for j in 0..d {
            let mut a: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            a.sort_by(|x, y| x.partial_cmp(y).expect("parsed floats are not NaN"));
            a.dedup();
            axes.push(a);
        }
        let total: usize = axes.iter().map(Vec::len).product();
        if rows.len() != total {
            return Err(invalid(format!(
                "{} rows do not fill a {total}-node grid",
                rows.len()
            )));
        }
        let mut values = vec![f64::NAN; total];
        for r in &rows {
            let mut flat = 0;
            for j in 0..d {
                let pos = axes[j]
                    .binary_search_by(|v| v.partial_cmp(&r[j]).unwrap())
                    .expect("node from this file");
                flat = flat * axes[j].len() + pos;
            }
            if !values[flat].is_nan() {
                return Err(invalid(format!("duplicate grid node {:?}", &r[..d])));
            }
            values[flat] = r[d];
        }
        TabulatedDensity::new(axes, values)
    }

    pub fn axes(&self) -> &[Vec<f64>] {
        &self.axes
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        let d = self.axes.len();
        let mut base = Vec::with_capacity(d);
        let mut frac = Vec::with_capacity(d);
        for (a, &v) in self.axes.iter().zip(x) {
            if !(v >= a[0] && v <= a[a.len() - 1]) {
                return 0.0;
            }
            let step = (a[a.len() - 1] - a[0]) / (a.len() - 1) as f64;
            let i = (((v - a[0]) / step).floor() as usize).min(a.len() - 2);
            base.push(i);
            frac.push(((v - a[i]) / step).clamp(0.0, 1.0));
        }
        let mut total = 0.0;
        for corner in 0..(1usize << d) {
            let mut w = 1.0;
            let mut flat = 0;
            for j in 0..d {
                let up = (corner >> j) & 1;
                w *= if up == 1 { frac[j] } else { 1.0 - frac[j] };
                flat = flat * self.axes[j].len() + base[j] + up;
            }
            if w > 0.0 {
                total += w * self.values[flat];
            }
        }
        total
    }
}

impl Density for TabulatedDensity {
    fn dim(&self) -> usize {
        self.axes.len()
    }

    fn density(&self, x: &[f64]) -> f64 {
        self.evaluate(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn bilinear_interpolation_is_exact_for_bilinear_functions() {
        let axes = vec![vec![0.0, 1.0, 2.0], vec![-1.0, 0.0]];
        let f = |x: f64, y: f64| 1.0 + 2.0 * x + 0.5 * y + x * y + 3.0;
        let mut values = Vec::new();
        for &x in &axes[0] {
            for &y in &axes[1] {
                values.push(f(x, y));
            }
        }
        let t = TabulatedDensity::new(axes, values).unwrap();
        for &(x, y) in &[(0.3, -0.2), (1.5, -0.9), (2.0, 0.0), (0.0, -1.0)] {
            assert!((t.evaluate(&[x, y]) - f(x, y)).abs() < 1e-12);
        }
        assert_eq!(t.evaluate(&[2.1, 0.0]), 0.0);
    }

    #[test]
    fn rejects_irregular_and_negative() {
        assert!(TabulatedDensity::new(vec![vec![0.0, 1.0, 3.0]], vec![1.0; 3]).is_err());
        assert!(TabulatedDensity::new(vec![vec![0.0, 1.0]], vec![1.0, -1.0]).is_err());
        assert!(TabulatedDensity::new(vec![vec![1.0, 0.0]], vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn csv_round_trip_in_any_row_order() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "x1,x2,density").unwrap();
        for (x, y, v) in [
            (1.0, 0.0, 3.0),
            (0.0, 0.0, 1.0),
            (1.0, 1.0, 4.0),
            (0.0, 1.0, 2.0),
        ] {
            writeln!(f, "{x},{y},{v}").unwrap();
        }
        let t = TabulatedDensity::read_csv(f.path()).unwrap();
        assert_eq!(t.evaluate(&[0.0, 1.0]), 2.0);
        assert_eq!(t.evaluate(&[1.0, 0.0]), 3.0);
        assert!((t.evaluate(&[0.5, 0.5]) - 2.5).abs() < 1e-15);
    }

    #[test]
    fn csv_errors() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "a,b,density\n0,0,1").unwrap();
        assert!(matches!(
            TabulatedDensity::read_csv(f.path()),
            Err(Error::Parse { line: 1, .. })
        ));
        let mut g = tempfile::NamedTempFile::new().unwrap();
        writeln!(g, "x1,density\n0,1\n1,oops").unwrap();
        assert!(matches!(
            TabulatedDensity::read_csv(g.path()),
            Err(Error::Parse { line: 3, .. })
        ));
        let mut h = tempfile::NamedTempFile::new().unwrap();
        writeln!(h, "x1,x2,density\n0,0,1\n1,1,1\n0,1,1").unwrap();
        assert!(TabulatedDensity::read_csv(h.path()).is_err());
    }
}
