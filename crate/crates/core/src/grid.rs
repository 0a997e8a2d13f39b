//! Finite lattices `[0,T]^d ∩ δZ^d` (boxes) and `[-R,R]^d ∩ δZ^d` (windows).
//!
//! Points are always `anchor + delta * k` for an integer index vector `k`;
//! coordinates are never produced by accumulating floating-point steps.

use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};

pub const DEFAULT_POINT_CAP: u64 = 100_000_000;

/// Relative slack when deciding whether `T/δ` or `R/δ` is an integer.
pub const RATIO_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Extent {
    /// `[0, T]` along every axis.
    Box { horizon: f64 },
    /// `[-R, R]` along every axis.
    Window { radius: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub dim: usize,
    pub delta: f64,
    pub extent: Extent,
    pub anchor: Vec<f64>,
    #[serde(default = "default_cap")]
    pub cap: u64,
}

fn default_cap() -> u64 {
    DEFAULT_POINT_CAP
}

/// Number of whole steps of size `delta` in `len`, tolerant to representation error.
pub fn steps(len: f64, delta: f64) -> i64 {
    (len / delta + RATIO_TOL).floor() as i64
}

/// Integer ratio `a / b` if `a` is a multiple of `b` within tolerance.
pub fn integer_ratio(a: f64, b: f64) -> Option<i64> {
    let r = a / b;
    let k = r.round();
    if (r - k).abs() <= RATIO_TOL * r.abs().max(1.0) {
        Some(k as i64)
    } else {
        None
    }
}

impl GridSpec {
    pub fn boxed(dim: usize, delta: f64, horizon: f64) -> Result<Self> {
        let g = Self { dim, delta, extent: Extent::Box { horizon }, anchor: vec![0.0; dim], cap: DEFAULT_POINT_CAP };
        g.validate()?;
        Ok(g)
    }

    pub fn window(dim: usize, delta: f64, radius: f64) -> Result<Self> {
        let g = Self { dim, delta, extent: Extent::Window { radius }, anchor: vec![0.0; dim], cap: DEFAULT_POINT_CAP };
        g.validate()?;
        Ok(g)
    }

    pub fn with_anchor(mut self, anchor: Vec<f64>) -> Result<Self> {
        self.anchor = anchor;
        self.validate()?;
        Ok(self)
    }

    pub fn with_cap(mut self, cap: u64) -> Self {
        self.cap = cap;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.dim) {
            return Err(config_err(format!("dimension must be 1 or 2, got {}", self.dim)));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(config_err(format!("grid spacing must be positive, got {}", self.delta)));
        }
        let len = match self.extent {
            Extent::Box { horizon } => horizon,
            Extent::Window { radius } => radius,
        };
        if !(len > 0.0 && len.is_finite()) {
            return Err(config_err(format!("grid extent must be positive, got {len}")));
        }
        if self.anchor.len() != self.dim || self.anchor.iter().any(|a| !a.is_finite()) {
            return Err(config_err("anchor must be a finite vector of length dim"));
        }
        Ok(())
    }

    /// Integer index range along one axis.
    pub fn axis_range(&self) -> std::ops::RangeInclusive<i64> {
        match self.extent {
            Extent::Box { horizon } => 0..=steps(horizon, self.delta),
            Extent::Window { radius } => {
                let m = steps(radius, self.delta);
                -m..=m
            }
        }
    }

    pub fn points_per_axis(&self) -> usize {
        let r = self.axis_range();
        (r.end() - r.start() + 1) as usize
    }

    pub fn point_count(&self) -> u128 {
        (self.points_per_axis() as u128).pow(self.dim as u32)
    }

    fn check_cap(&self) -> Result<()> {
        let n = self.point_count();
        if n > self.cap as u128 {
            return Err(Error::GridTooLarge { points: n, cap: self.cap });
        }
        Ok(())
    }

    /// Index vectors in lexicographic order.
    pub fn indices(&self) -> Result<Vec<[i64; 2]>> {
        self.validate()?;
        self.check_cap()?;
        let r = self.axis_range();
        Ok(match self.dim {
            1 => r.map(|k| [k, 0]).collect(),
            _ => r.clone().flat_map(|i| r.clone().map(move |j| [i, j])).collect(),
        })
    }

    pub fn point_of(&self, k: [i64; 2]) -> [f64; 2] {
        let mut p = [0.0; 2];
        for (a, slot) in p.iter_mut().enumerate().take(self.dim) {
            *slot = self.anchor[a] + self.delta * k[a] as f64;
        }
        p
    }

    /// Index of the lattice point at the origin, if the origin is on the lattice and inside.
    pub fn origin_index(&self) -> Option<[i64; 2]> {
        let mut k = [0i64; 2];
        for a in 0..self.dim {
            let ka = integer_ratio(-self.anchor[a], self.delta)?;
            if !self.axis_range().contains(&ka) {
                return None;
            }
            k[a] = ka;
        }
        Some(k)
    }
}

/// A flat list of points in `R^d`, `d ∈ {1, 2}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSet {
    pub dim: usize,
    coords: Vec<f64>,
}

impl PointSet {
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if !(1..=2).contains(&dim) || coords.len() % dim != 0 {
            return Err(config_err("point coordinates must come in groups of dim"));
        }
        Ok(Self { dim, coords })
    }

    pub fn from_1d(xs: &[f64]) -> Self {
        Self { dim: 1, coords: xs.to_vec() }
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn get(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn to_vecs(&self) -> Vec<Vec<f64>> {
        self.iter().map(<[f64]>::to_vec).collect()
    }

    pub fn shifted(&self, c: &[f64]) -> Self {
        let coords = self.coords.chunks_exact(self.dim).flat_map(|p| p.iter().zip(c).map(|(x, s)| x + s)).collect();
        Self { dim: self.dim, coords }
    }
}

/// All grid points, lexicographically ordered.
pub fn enumerate_points(g: &GridSpec) -> Result<PointSet> {
    let idx = g.indices()?;
    let mut coords = Vec::with_capacity(idx.len() * g.dim);
    for k in idx {
        coords.extend_from_slice(&g.point_of(k)[..g.dim]);
    }
    PointSet::new(g.dim, coords)
}

/// `[-R,R]^d ∩ δZ^d`; `R/δ` is rounded down when not integral.
pub fn window_points(radius: f64, delta: f64, dim: usize) -> Result<PointSet> {
    enumerate_points(&GridSpec::window(dim, delta, radius)?)
}
