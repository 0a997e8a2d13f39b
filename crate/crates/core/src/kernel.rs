//! Deterministic kernels `L: R → [0, ∞)` with unit mass, and the sampling
//! densities used to place them.

use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{integrate, QuadConfig};
use crate::stats::{normal_cdf, normal_pdf};

/// Largest allowed deviation of `∫ L` from one.
pub const MASS_TOL: f64 = 1e-8;

/// Piecewise-linear kernel on uniform abscissae, zero outside the table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabulatedKernel {
    pub start: f64,
    pub step: f64,
    pub values: Vec<f64>,
}

impl TabulatedKernel {
    pub fn new(start: f64, step: f64, values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 || !(step > 0.0) || !start.is_finite() {
            return Err(Error::InvalidKernel("a tabulated kernel needs at least two uniform abscissae".into()));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidKernel("tabulated kernel values must be finite and nonnegative".into()));
        }
        Ok(Self { start, step, values })
    }

    /// Reads `coordinate,value` rows; a non-numeric first row is taken as a header.
    pub fn from_csv(path: impl AsRef<Path>) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_path(path)?;
        let mut xs = Vec::new();
        let mut vs = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.len() < 2 {
                return Err(Error::InvalidKernel(format!("row {} has fewer than two columns", i + 1)));
            }
            match (rec[0].parse::<f64>(), rec[1].parse::<f64>()) {
                (Ok(x), Ok(v)) => {
                    xs.push(x);
                    vs.push(v);
                }
                _ if i == 0 => continue,
                _ => return Err(Error::InvalidKernel(format!("row {} is not numeric", i + 1))),
            }
        }
        if xs.len() < 2 {
            return Err(Error::InvalidKernel("kernel table has fewer than two rows".into()));
        }
        let step = xs[1] - xs[0];
        for w in xs.windows(2) {
            if ((w[1] - w[0]) - step).abs() > 1e-9 * step.abs().max(1.0) {
                return Err(Error::InvalidKernel("kernel abscissae are not uniform".into()));
            }
        }
        Self::new(xs[0], step, vs)
    }

    fn end(&self) -> f64 {
        self.start + self.step * (self.values.len() - 1) as f64
    }

    fn knot(&self, i: usize) -> f64 {
        self.start + self.step * i as f64
    }

    fn eval(&self, x: f64) -> f64 {
        if x < self.start || x > self.end() {
            return 0.0;
        }
        let u = (x - self.start) / self.step;
        let i = (u.floor() as usize).min(self.values.len() - 2);
        let w = u - i as f64;
        self.values[i] * (1.0 - w) + self.values[i + 1] * w
    }

    fn integral(&self) -> f64 {
        let n = self.values.len();
        self.step * (self.values.iter().sum::<f64>() - 0.5 * (self.values[0] + self.values[n - 1]))
    }

    fn mass_between(&self, a: f64, b: f64) -> f64 {
        let (a, b) = (a.max(self.start), b.min(self.end()));
        if a >= b {
            return 0.0;
        }
        let mut pts = vec![a, b];
        pts.extend((0..self.values.len()).map(|i| self.knot(i)).filter(|x| *x > a && *x < b));
        pts.sort_by(f64::total_cmp);
        pts.windows(2).map(|w| 0.5 * (w[1] - w[0]) * (self.eval(w[0]) + self.eval(w[1]))).sum()
    }

    fn mode_interval(&self) -> Option<(f64, f64)> {
        let max = self.values.iter().cloned().fold(0.0, f64::max);
        let first = self.values.iter().position(|v| *v == max)?;
        let last = self.values.iter().rposition(|v| *v == max)?;
        let rising = self.values[..=first].windows(2).all(|w| w[0] <= w[1]);
        let falling = self.values[last..].windows(2).all(|w| w[0] >= w[1]);
        let flat = self.values[first..=last].iter().all(|v| *v == max);
        (rising && falling && flat).then(|| (self.knot(first), self.knot(last)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Kernel {
    /// Standard normal density.
    GaussianDensity,
    /// `1_{[0,1]}`.
    IndicatorUnit,
    /// `e^{-|x|} / 2`.
    Laplace,
    Tabulated(TabulatedKernel),
}

impl Kernel {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Kernel::GaussianDensity => normal_pdf(x),
            Kernel::IndicatorUnit => {
                if (0.0..=1.0).contains(&x) {
                    1.0
                } else {
                    0.0
                }
            }
            Kernel::Laplace => 0.5 * (-x.abs()).exp(),
            Kernel::Tabulated(t) => t.eval(x),
        }
    }

    pub fn sup(&self) -> f64 {
        match self {
            Kernel::GaussianDensity => normal_pdf(0.0),
            Kernel::IndicatorUnit => 1.0,
            Kernel::Laplace => 0.5,
            Kernel::Tabulated(t) => t.values.iter().cloned().fold(0.0, f64::max),
        }
    }

    /// Closed support `[lo, hi]`, possibly infinite.
    pub fn support(&self) -> (f64, f64) {
        match self {
            Kernel::GaussianDensity | Kernel::Laplace => (f64::NEG_INFINITY, f64::INFINITY),
            Kernel::IndicatorUnit => (0.0, 1.0),
            Kernel::Tabulated(t) => (t.start, t.end()),
        }
    }

    pub fn has_compact_support(&self) -> bool {
        let (a, b) = self.support();
        a.is_finite() && b.is_finite()
    }

    /// Points where `L` jumps or has a kink.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            Kernel::GaussianDensity => vec![],
            Kernel::IndicatorUnit => vec![0.0, 1.0],
            Kernel::Laplace => vec![0.0],
            Kernel::Tabulated(t) => (0..t.values.len()).map(|i| t.knot(i)).collect(),
        }
    }

    /// Interval on which `L` attains its supremum, when `L` is unimodal.
    pub fn mode_interval(&self) -> Option<(f64, f64)> {
        match self {
            Kernel::GaussianDensity | Kernel::Laplace => Some((0.0, 0.0)),
            Kernel::IndicatorUnit => Some((0.0, 1.0)),
            Kernel::Tabulated(t) => t.mode_interval(),
        }
    }

    /// `∫_a^b L`.
    pub fn mass_between(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        match self {
            Kernel::GaussianDensity => normal_cdf(b) - normal_cdf(a),
            Kernel::IndicatorUnit => (b.min(1.0) - a.max(0.0)).max(0.0),
            Kernel::Laplace => {
                let cdf = |x: f64| if x < 0.0 { 0.5 * x.exp() } else { 1.0 - 0.5 * (-x).exp() };
                cdf(b) - cdf(a)
            }
            Kernel::Tabulated(t) => t.mass_between(a, b),
        }
    }

    /// Mass of `L` outside `[a, b]`, computed from the closed-form tails.
    pub fn tail_mass_outside(&self, a: f64, b: f64) -> f64 {
        match self {
            Kernel::GaussianDensity => normal_cdf(a) + normal_cdf(-b),
            Kernel::Laplace => {
                let left = if a < 0.0 { 0.5 * a.exp() } else { 1.0 - 0.5 * (-a).exp() };
                let right = if b > 0.0 { 0.5 * (-b).exp() } else { 1.0 - 0.5 * b.exp() };
                left + right
            }
            _ => (self.integral_exact() - self.mass_between(a, b)).max(0.0),
        }
    }

    /// Smallest interval outside of which `L` carries at most `tol` mass.
    pub fn effective_support(&self, tol: f64) -> (f64, f64) {
        match self {
            Kernel::GaussianDensity => {
                let mut z = 1.0;
                while normal_cdf(-z) > tol / 2.0 && z < 40.0 {
                    z += 0.25;
                }
                (-z, z)
            }
            Kernel::Laplace => {
                let z = (1.0 / tol.max(1e-300)).ln().max(1.0);
                (-z, z)
            }
            _ => self.support(),
        }
    }

    fn integral_exact(&self) -> f64 {
        match self {
            Kernel::Tabulated(t) => t.integral(),
            _ => 1.0,
        }
    }

    /// `∫ L` by adaptive quadrature over the effective support.
    pub fn integral_by_quadrature(&self) -> f64 {
        let (a, b) = self.effective_support(1e-16);
        let f = |x: f64| self.eval(x);
        let out = integrate(f, a, b, &self.breakpoints(), QuadConfig { abs_tol: 1e-13, rel_tol: 1e-13, ..Default::default() });
        out.value + self.tail_mass_outside(a, b)
    }

    /// Checks nonnegativity and unit mass.
    pub fn validate(&self) -> Result<()> {
        if let Kernel::Tabulated(t) = self {
            TabulatedKernel::new(t.start, t.step, t.values.clone())?;
        }
        let mass = self.integral_by_quadrature();
        if (mass - 1.0).abs() > MASS_TOL {
            return Err(Error::InvalidKernel(format!("kernel mass is {mass}, expected 1")));
        }
        Ok(())
    }

    /// `sup_{u ∈ [a, b]} L(u)`.
    pub fn sup_on_interval(&self, a: f64, b: f64) -> f64 {
        if let Some((m1, m2)) = self.mode_interval() {
            if a <= m2 && b >= m1 {
                return self.sup();
            }
            return self.eval(a).max(self.eval(b));
        }
        let Kernel::Tabulated(t) = self else { unreachable!("built-in kernels are unimodal") };
        let mut best = self.eval(a).max(self.eval(b));
        for i in 0..t.values.len() {
            let x = t.knot(i);
            if x >= a && x <= b {
                best = best.max(t.values[i]);
            }
        }
        best
    }

    /// `max_k L(z - t_k)` over the lattice `t_k = k δ`, `k ∈ [k_lo, k_hi]`.
    pub fn lattice_sup(&self, z: f64, delta: f64, k_lo: i64, k_hi: i64) -> f64 {
        if k_lo > k_hi {
            return 0.0;
        }
        let at = |k: i64| self.eval(z - delta * k as f64);
        if let Some((m1, m2)) = self.mode_interval() {
            // u = z - t lies in the mode interval iff t ∈ [z - m2, z - m1]
            let ka = ((z - m2) / delta).ceil() as i64;
            let kb = ((z - m1) / delta).floor() as i64;
            let clamp = |k: i64| k.clamp(k_lo, k_hi);
            return [ka - 1, ka, kb, kb + 1].into_iter().map(|k| at(clamp(k))).fold(0.0, f64::max);
        }
        let (lo, hi) = self.support();
        let first = (((z - hi) / delta).floor() as i64).max(k_lo);
        let last = (((z - lo) / delta).ceil() as i64).min(k_hi);
        (first..=last).map(at).fold(0.0, f64::max)
    }
}

/// Positive density of the random kernel location.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum SamplingDensity {
    Normal { scale: f64 },
    Laplace { scale: f64 },
}

impl Default for SamplingDensity {
    fn default() -> Self {
        SamplingDensity::Normal { scale: 1.0 }
    }
}

impl SamplingDensity {
    pub fn scale(&self) -> f64 {
        match *self {
            SamplingDensity::Normal { scale } | SamplingDensity::Laplace { scale } => scale,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.scale() > 0.0 && self.scale().is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("sampling density scale must be positive: {self:?}")))
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        match *self {
            SamplingDensity::Normal { scale } => normal_pdf(x / scale) / scale,
            SamplingDensity::Laplace { scale } => 0.5 * (-(x / scale).abs()).exp() / scale,
        }
    }

    /// Draws one location; consumes one normal or one exponential plus one uniform.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            SamplingDensity::Normal { scale } => {
                let z: f64 = StandardNormal.sample(rng);
                scale * z
            }
            SamplingDensity::Laplace { scale } => {
                let e: f64 = Exp1.sample(rng);
                let s = if rng.random::<bool>() { 1.0 } else { -1.0 };
                s * scale * e
            }
        }
    }

    /// Minimum of the density over `[a, b]` (both densities are symmetric and unimodal at 0).
    pub fn min_on(&self, a: f64, b: f64) -> f64 {
        self.pdf(a.abs().max(b.abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn builtins_have_unit_mass() {
        for k in [Kernel::GaussianDensity, Kernel::IndicatorUnit, Kernel::Laplace] {
            k.validate().unwrap();
            assert!((k.integral_by_quadrature() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn sups() {
        assert!((Kernel::GaussianDensity.sup() - 0.398_942_280_401_432_7).abs() < 1e-15);
        assert_eq!(Kernel::IndicatorUnit.sup(), 1.0);
        assert_eq!(Kernel::Laplace.sup(), 0.5);
    }

    #[test]
    fn lattice_sup_matches_brute_force() {
        for k in [Kernel::GaussianDensity, Kernel::IndicatorUnit, Kernel::Laplace, tent()] {
            for &delta in &[0.3, 1.0, 2.0] {
                for i in 0..200 {
                    let z = -3.0 + i as f64 * 0.0731;
                    let brute = (0..=10).map(|j| k.eval(z - delta * j as f64)).fold(0.0, f64::max);
                    assert_eq!(k.lattice_sup(z, delta, 0, 10), brute, "{k:?} z={z} delta={delta}");
                }
            }
        }
    }

    fn tent() -> Kernel {
        Kernel::Tabulated(TabulatedKernel::new(-1.0, 0.5, vec![0.0, 0.5, 1.0, 0.5, 0.0]).unwrap())
    }

    #[test]
    fn tabulated_tent_kernel() {
        let k = tent();
        k.validate().unwrap();
        assert_eq!(k.eval(0.25), 0.75);
        assert_eq!(k.eval(2.0), 0.0);
        assert_eq!(k.mode_interval(), Some((0.0, 0.0)));
        assert_eq!(k.sup_on_interval(0.5, 3.0), 0.5);
    }

    #[test]
    fn bimodal_table_uses_brute_force_sup() {
        let k = Kernel::Tabulated(TabulatedKernel::new(0.0, 1.0, vec![0.0, 0.5, 0.0, 0.5, 0.0]).unwrap());
        assert_eq!(k.mode_interval(), None);
        assert_eq!(k.lattice_sup(3.0, 2.0, 0, 5), 0.5);
        assert_eq!(k.sup_on_interval(1.5, 2.5), 0.25);
    }

    #[test]
    fn csv_round_trip_and_errors() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "x,value\n-1,0\n0,1\n1,0").unwrap();
        let k = Kernel::Tabulated(TabulatedKernel::from_csv(f.path()).unwrap());
        k.validate().unwrap();

        let mut g = tempfile::NamedTempFile::new().unwrap();
        writeln!(g, "0,0\n1,1\n3,0").unwrap();
        assert!(TabulatedKernel::from_csv(g.path()).is_err());

        let mut h = tempfile::NamedTempFile::new().unwrap();
        writeln!(h, "0,0\n1,3\n2,0").unwrap();
        let k = Kernel::Tabulated(TabulatedKernel::from_csv(h.path()).unwrap());
        assert!(matches!(k.validate(), Err(Error::InvalidKernel(_))));
    }

    #[test]
    fn tails() {
        assert!((Kernel::GaussianDensity.tail_mass_outside(-1.0, 1.0) - 0.317_310_507_862_914).abs() < 1e-10);
        assert!((Kernel::Laplace.tail_mass_outside(-2.0, 3.0) - 0.5 * ((-2f64).exp() + (-3f64).exp())).abs() < 1e-15);
        assert_eq!(Kernel::IndicatorUnit.tail_mass_outside(0.0, 0.5), 0.5);
    }

    #[test]
    fn density_min() {
        let p = SamplingDensity::Normal { scale: 1.0 };
        assert_eq!(p.min_on(-1.0, 0.0), normal_pdf(1.0));
        assert!((SamplingDensity::Laplace { scale: 2.0 }.pdf(0.0) - 0.25).abs() < 1e-15);
    }
}
