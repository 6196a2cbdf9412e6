use crate::grid::EvalGrid;

/// A pointwise-evaluable density on `R^d`.
pub trait Density: Sync {
    fn dim(&self) -> usize;

    /// Density value at `x`; finite and nonnegative for finite `x`.
    fn density(&self, x: &[f64]) -> f64;

    /// Midpoint-rule integral over a grid.
    fn integrate_on(&self, grid: &EvalGrid) -> f64 {
        grid.points().map(|p| self.density(p)).sum::<f64>() * grid.cell_volume()
    }
}

impl<T: Density + ?Sized> Density for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn density(&self, x: &[f64]) -> f64 {
        (**self).density(x)
    }
}

/// Densities with a closed-form squared L2 norm `∫ f²`.
pub trait SquaredNorm: Density {
    fn squared_l2_norm(&self) -> f64;
}

/// Standard normal density.
pub fn std_normal_pdf(z: f64) -> f64 {
    const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
    INV_SQRT_2PI * (-0.5 * z * z).exp()
}

/// Standard normal distribution function.
pub fn std_normal_cdf(z: f64) -> f64 {
    if z == f64::INFINITY {
        return 1.0;
    }
    if z == f64::NEG_INFINITY {
        return 0.0;
    }
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_cdf_reference_values() {
        assert!((std_normal_cdf(0.0) - 0.5).abs() < 1e-15);
        assert!((std_normal_cdf(1.959_963_984_540_054) - 0.975).abs() < 1e-15);
        assert_eq!(std_normal_cdf(f64::INFINITY), 1.0);
        assert_eq!(std_normal_cdf(f64::NEG_INFINITY), 0.0);
    }
}
