//! Central finite-difference oracle for tape gradients.

use super::{Result, Tape, Tensor, Var};

#[derive(Debug, Clone, Copy)]
pub struct GradCheckConfig {
    /// Probe half-width.
    pub eps: f64,
    /// Pass iff every compared coordinate has relative error below this.
    pub rtol: f64,
    /// Lower bound on the relative-error denominator, so gradients near zero
    /// are compared in absolute terms.
    pub abs_floor: f64,
    /// Relative size above which a one-sided mismatch that does not shrink
    /// with the probe width marks a kink; such coordinates are left out.
    pub kink_tol: f64,
}

impl GradCheckConfig {
    pub fn new(eps: f64, rtol: f64) -> Self {
        Self {
            eps,
            rtol,
            abs_floor: 1e-6,
            kink_tol: 1e-6,
        }
    }
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self::new(1e-4, 1e-4)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoordinateCheck {
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
    pub excluded: bool,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub coordinates: Vec<CoordinateCheck>,
    pub max_rel_error: f64,
    pub rtol: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_error < self.rtol
    }

    pub fn excluded(&self) -> usize {
        self.coordinates.iter().filter(|c| c.excluded).count()
    }

    pub fn failures(&self) -> impl Iterator<Item = &CoordinateCheck> {
        self.coordinates
            .iter()
            .filter(|c| !c.excluded && !(c.rel_error < self.rtol))
    }
}

fn eval<F>(f: &F, x: &Tensor) -> Result<f64>
where
    F: Fn(&mut Tape, Var) -> Result<Var>,
{
    let mut tape = Tape::new();
    let v = tape.constant(x.clone());
    let y = f(&mut tape, v)?;
    Ok(tape.value(y).item().unwrap_or(f64::NAN))
}

/// Compares the tape gradient of scalar `f` at `x` with central differences
/// `(f(x + h·e_i) − f(x − h·e_i)) / 2h` for every coordinate `i`.
///
/// Each coordinate is probed at `h = eps` and `h = eps/2`; the half-width
/// estimate is the one compared. On a smooth function the one-sided mismatch
/// `f(x+h) − 2f(x) + f(x−h)` shrinks linearly with `h` and the two central
/// estimates agree to O(h²). When either fails, the probe straddles a
/// non-differentiable point and the coordinate is excluded.
///
/// `f` must be deterministic; stochastic functions should reseed their RNG on
/// every call.
pub fn check_gradients<F>(f: F, x: &Tensor, cfg: GradCheckConfig) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, Var) -> Result<Var>,
{
    let mut tape = Tape::new();
    let v = tape.leaf(x.clone(), true);
    let y = f(&mut tape, v)?;
    let f0 = tape.value(y).item().unwrap_or(f64::NAN);
    tape.backward(y)?;
    let analytic = tape.grad(v).expect("leaf requires grad");

    let mut coordinates = Vec::with_capacity(x.numel());
    let mut max_rel_error: f64 = 0.0;
    let mut probe = x.clone();
    let at = |i: usize, offset: f64, probe: &mut Tensor| -> Result<f64> {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + offset;
        let value = eval(&f, probe);
        probe.data_mut()[i] = orig;
        value
    };
    let (full, half) = (cfg.eps, cfg.eps / 2.0);
    for i in 0..x.numel() {
        let (p1, m1) = (at(i, full, &mut probe)?, at(i, -full, &mut probe)?);
        let (p2, m2) = (at(i, half, &mut probe)?, at(i, -half, &mut probe)?);
        let central_full = (p1 - m1) / (2.0 * full);
        let numeric = (p2 - m2) / (2.0 * half);
        let bend_full = (p1 - 2.0 * f0 + m1) / full;
        let bend_half = (p2 - 2.0 * f0 + m2) / half;
        let scale = central_full.abs().max(numeric.abs()).max(cfg.abs_floor);
        let kink_at_point = bend_full.abs() > cfg.kink_tol * scale && bend_half.abs() > 0.75 * bend_full.abs();
        let kink_nearby = (central_full - numeric).abs() > 0.25 * cfg.rtol * scale;
        let excluded = kink_at_point || kink_nearby;

        let a = analytic.data()[i];
        let denom = a.abs().max(numeric.abs()).max(cfg.abs_floor);
        let rel_error = (a - numeric).abs() / denom;
        if !excluded {
            // NaN must fail the check.
            max_rel_error = if rel_error.is_nan() { f64::INFINITY } else { max_rel_error.max(rel_error) };
        }
        coordinates.push(CoordinateCheck {
            index: i,
            analytic: a,
            numeric,
            rel_error,
            excluded,
        });
    }
    Ok(GradCheckReport {
        coordinates,
        max_rel_error,
        rtol: cfg.rtol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_of_squares_passes() {
        let x = Tensor::from_vec(vec![0.3, -1.2, 2.5, 0.01]);
        let report = check_gradients(
            |t, v| {
                let sq = t.mul(v, v)?;
                Ok(t.sum_all(sq))
            },
            &x,
            GradCheckConfig::new(1e-4, 1e-4),
        )
        .unwrap();
        assert!(report.passed(), "{report:?}");
        assert_eq!(report.excluded(), 0);
    }

    #[test]
    fn relu_kink_at_zero_is_excluded() {
        let x = Tensor::from_vec(vec![0.0, 1.0, -2.0]);
        let report = check_gradients(
            |t, v| {
                let r = t.relu(v);
                Ok(t.sum_all(r))
            },
            &x,
            GradCheckConfig::default(),
        )
        .unwrap();
        assert!(report.coordinates[0].excluded);
        assert!(!report.coordinates[1].excluded);
        assert!(!report.coordinates[2].excluded);
        assert!(report.passed());
    }

    #[test]
    fn wrong_gradient_is_reported() {
        // grl flips the gradient sign, so against the plain forward value the
        // check must fail.
        let x = Tensor::from_vec(vec![0.5, 1.5]);
        let report = check_gradients(
            |t, v| {
                let r = t.grl(v, 1.0)?;
                let sq = t.mul(r, r)?;
                Ok(t.sum_all(sq))
            },
            &x,
            GradCheckConfig::default(),
        )
        .unwrap();
        assert!(!report.passed());
        assert_eq!(report.failures().count(), 2);
    }
}
