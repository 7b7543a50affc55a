//! Spatial discretization, trap geometry and the two-body wavefunction.

use std::f64::consts::PI;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{SapError, SapResult};

/// Uniform periodic grid on `[x_min, x_max)`.
#[derive(Debug, Clone)]
pub struct Grid1D {
    n: usize,
    x_min: f64,
    x_max: f64,
    dx: f64,
    x: Vec<f64>,
    k: Vec<f64>,
}

impl PartialEq for Grid1D {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.x_min == other.x_min && self.x_max == other.x_max
    }
}

impl Grid1D {
    pub fn new(n: usize, x_min: f64, x_max: f64) -> SapResult<Self> {
        if n < 4 || !n.is_power_of_two() {
            return Err(SapError::InvalidConfig(format!(
                "grid size {n} must be a power of two and at least 4"
            )));
        }
        if !(x_max > x_min) || !x_min.is_finite() || !x_max.is_finite() {
            return Err(SapError::InvalidConfig(format!(
                "grid extent [{x_min}, {x_max}] is empty"
            )));
        }
        let dx = (x_max - x_min) / n as f64;
        let x = (0..n).map(|i| x_min + i as f64 * dx).collect();
        let dk = 2.0 * PI / (n as f64 * dx);
        let k = (0..n)
            .map(|j| {
                if j < n / 2 {
                    j as f64 * dk
                } else {
                    (j as f64 - n as f64) * dk
                }
            })
            .collect();
        Ok(Self { n, x_min, x_max, dx, x, k })
    }

    /// Symmetric box `[-half_width, half_width)`.
    pub fn symmetric(n: usize, half_width: f64) -> SapResult<Self> {
        Self::new(n, -half_width, half_width)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn positions(&self) -> &[f64] {
        &self.x
    }

    /// Wavenumbers in standard DFT order (0, dk, …, -dk).
    pub fn wavenumbers(&self) -> &[f64] {
        &self.k
    }

    pub fn k_max(&self) -> f64 {
        PI / self.dx
    }

    /// Index of the mirror image `x → -x`. Only meaningful on symmetric boxes,
    /// where the periodic grid maps onto itself.
    pub fn mirror_index(&self, i: usize) -> usize {
        (self.n - i) % self.n
    }

    pub fn is_symmetric(&self) -> bool {
        (self.x_min + self.x_max).abs() <= 1e-12 * self.x_max.abs().max(1.0)
    }
}

/// Which trap a label refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Site {
    Left,
    Middle,
    Right,
}

impl Site {
    pub const ALL: [Site; 3] = [Site::Left, Site::Middle, Site::Right];

    pub fn index(self) -> usize {
        match self {
            Site::Left => 0,
            Site::Middle => 1,
            Site::Right => 2,
        }
    }
}

/// Three harmonic traps of unit frequency at a single instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrapConfiguration {
    pub centers: [f64; 3],
    #[serde(default)]
    pub offsets: [f64; 3],
}

impl TrapConfiguration {
    pub fn new(centers: [f64; 3], offsets: [f64; 3]) -> SapResult<Self> {
        let c = Self { centers, offsets };
        c.validate()?;
        Ok(c)
    }

    /// Traps at `(-d, 0, d)` with no offsets.
    pub fn symmetric(d: f64) -> Self {
        Self { centers: [-d, 0.0, d], offsets: [0.0; 3] }
    }

    /// All three traps on the same spot: a single harmonic well.
    pub fn single(center: f64) -> Self {
        Self { centers: [center; 3], offsets: [0.0; 3] }
    }

    pub fn with_offsets(mut self, offsets: [f64; 3]) -> Self {
        self.offsets = offsets;
        self
    }

    pub fn validate(&self) -> SapResult<()> {
        let [l, m, r] = self.centers;
        if !(l <= m && m <= r) {
            return Err(SapError::Geometry(format!(
                "trap centers must be ordered, got ({l}, {m}, {r})"
            )));
        }
        if self.centers.iter().chain(&self.offsets).any(|v| !v.is_finite()) {
            return Err(SapError::Geometry("non-finite trap parameter".into()));
        }
        Ok(())
    }

    pub fn center(&self, site: Site) -> f64 {
        self.centers[site.index()]
    }

    /// Pointwise minimum of the three offset parabolas.
    pub fn potential_at(&self, x: f64) -> f64 {
        self.centers
            .iter()
            .zip(&self.offsets)
            .map(|(c, e)| 0.5 * (x - c) * (x - c) + e)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn potential_on(&self, grid: &Grid1D) -> Vec<f64> {
        grid.positions().iter().map(|&x| self.potential_at(x)).collect()
    }

    /// Potential maxima between adjacent traps, i.e. where neighbouring
    /// parabolas intersect. A trap sitting on top of the middle one owns no
    /// region, so a fully merged configuration is all `Middle`.
    pub fn region_boundaries(&self) -> [f64; 2] {
        let cross = |a: usize, b: usize, merged: f64| {
            let (ca, cb) = (self.centers[a], self.centers[b]);
            let gap = cb - ca;
            if gap <= 1e-12 {
                return merged;
            }
            0.5 * (ca + cb) + (self.offsets[b] - self.offsets[a]) / gap
        };
        let b1 = cross(0, 1, f64::NEG_INFINITY);
        let b2 = cross(1, 2, f64::INFINITY).max(b1);
        [b1, b2]
    }

    pub fn site_of(&self, x: f64) -> Site {
        let [b1, b2] = self.region_boundaries();
        if x < b1 {
            Site::Left
        } else if x < b2 {
            Site::Middle
        } else {
            Site::Right
        }
    }
}

/// Contact term `g δ(x1 - x2)` on the grid: `g/dx` on the diagonal.
pub fn interaction_diagonal(g: f64, grid: &Grid1D) -> Array2<f64> {
    let n = grid.len();
    let mut v = Array2::zeros((n, n));
    if g != 0.0 {
        for i in 0..n {
            v[[i, i]] = g / grid.dx();
        }
    }
    v
}

/// Two-particle amplitude `Ψ(x1, x2)`; row index is `x1`.
#[derive(Debug, Clone)]
pub struct TwoBodyWavefunction {
    grid: Grid1D,
    amps: Array2<C64>,
}

impl TwoBodyWavefunction {
    pub fn zeros(grid: &Grid1D) -> Self {
        let n = grid.len();
        Self { grid: grid.clone(), amps: Array2::zeros((n, n)) }
    }

    pub fn from_amplitudes(grid: &Grid1D, amps: Array2<C64>) -> SapResult<Self> {
        let n = grid.len();
        if amps.dim() != (n, n) {
            return Err(SapError::GridMismatch(format!(
                "amplitude array {:?} does not match grid size {n}",
                amps.dim()
            )));
        }
        Ok(Self { grid: grid.clone(), amps: amps.as_standard_layout().into_owned() })
    }

    pub fn from_fn(grid: &Grid1D, f: impl Fn(f64, f64) -> C64) -> Self {
        let x = grid.positions();
        let amps = Array2::from_shape_fn((grid.len(), grid.len()), |(i, j)| f(x[i], x[j]));
        Self { grid: grid.clone(), amps }
    }

    /// Symmetrized product `φa(x1)φb(x2) + φb(x1)φa(x2)`, normalized.
    pub fn symmetrized_product(grid: &Grid1D, a: &[C64], b: &[C64]) -> SapResult<Self> {
        let n = grid.len();
        if a.len() != n || b.len() != n {
            return Err(SapError::GridMismatch("orbital length differs from grid".into()));
        }
        let amps = Array2::from_shape_fn((n, n), |(i, j)| a[i] * b[j] + b[i] * a[j]);
        let mut psi = Self { grid: grid.clone(), amps };
        psi.normalize()?;
        Ok(psi)
    }

    /// Both atoms in the Gaussian ground state of a unit-frequency trap at
    /// `center` (non-interacting pair).
    pub fn gaussian_pair(grid: &Grid1D, center: f64) -> Self {
        let phi = gaussian_orbital(grid, center);
        let amps = Array2::from_shape_fn((grid.len(), grid.len()), |(i, j)| phi[i] * phi[j]);
        Self { grid: grid.clone(), amps }
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn amplitudes(&self) -> &Array2<C64> {
        &self.amps
    }

    pub fn amplitudes_mut(&mut self) -> &mut Array2<C64> {
        &mut self.amps
    }

    pub fn into_amplitudes(self) -> Array2<C64> {
        self.amps
    }

    pub fn norm_sq(&self) -> f64 {
        let w = self.grid.dx() * self.grid.dx();
        // row sums first, then a fixed-order total
        self.amps
            .rows()
            .into_iter()
            .map(|r| r.iter().map(|z| z.norm_sqr()).sum::<f64>())
            .sum::<f64>()
            * w
    }

    pub fn normalize(&mut self) -> SapResult<f64> {
        let norm = self.norm_sq().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(SapError::Numerical { t: f64::NAN, msg: format!("cannot normalize, norm {norm}") });
        }
        let s = 1.0 / norm;
        self.amps.mapv_inplace(|z| z * s);
        Ok(norm)
    }

    /// `⟨self|other⟩ = Σ conj(self)·other dx²`.
    pub fn inner(&self, other: &Self) -> SapResult<C64> {
        self.check_grid(other)?;
        let w = self.grid.dx() * self.grid.dx();
        let s = self
            .amps
            .rows()
            .into_iter()
            .zip(other.amps.rows())
            .map(|(a, b)| a.iter().zip(b.iter()).map(|(p, q)| p.conj() * q).sum::<C64>())
            .sum::<C64>();
        Ok(s * w)
    }

    pub fn check_grid(&self, other: &Self) -> SapResult<()> {
        if self.grid != other.grid {
            return Err(SapError::GridMismatch(format!(
                "grids differ: n={} [{}, {}] vs n={} [{}, {}]",
                self.grid.len(),
                self.grid.x_min(),
                self.grid.x_max(),
                other.grid.len(),
                other.grid.x_min(),
                other.grid.x_max()
            )));
        }
        Ok(())
    }

    /// Replace `Ψ` by `(Ψ + Ψᵀ)/2`.
    pub fn symmetrize(&mut self) {
        let n = self.grid.len();
        for i in 0..n {
            for j in (i + 1)..n {
                let s = 0.5 * (self.amps[[i, j]] + self.amps[[j, i]]);
                self.amps[[i, j]] = s;
                self.amps[[j, i]] = s;
            }
        }
    }

    /// Largest pointwise `|Ψ(x1,x2) - Ψ(x2,x1)|`.
    pub fn exchange_asymmetry(&self) -> f64 {
        let n = self.grid.len();
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in (i + 1)..n {
                worst = worst.max((self.amps[[i, j]] - self.amps[[j, i]]).norm());
            }
        }
        worst
    }

    /// Mirror image `Ψ(-x1, -x2)`. Requires a symmetric box.
    pub fn mirrored(&self) -> SapResult<Self> {
        if !self.grid.is_symmetric() {
            return Err(SapError::GridMismatch("mirror needs a symmetric box".into()));
        }
        let g = &self.grid;
        let amps = Array2::from_shape_fn(self.amps.dim(), |(i, j)| {
            self.amps[[g.mirror_index(i), g.mirror_index(j)]]
        });
        Ok(Self { grid: self.grid.clone(), amps })
    }

    pub fn has_non_finite(&self) -> bool {
        self.amps.iter().any(|z| !z.re.is_finite() || !z.im.is_finite())
    }

    /// Little-endian binary snapshot: `n: u64, x_min: f64, x_max: f64`, then
    /// `n²` row-major `(re, im)` pairs of `f64`.
    pub fn write_binary<W: Write>(&self, w: W) -> SapResult<()> {
        let mut w = BufWriter::new(w);
        w.write_all(&(self.grid.len() as u64).to_le_bytes())?;
        w.write_all(&self.grid.x_min().to_le_bytes())?;
        w.write_all(&self.grid.x_max().to_le_bytes())?;
        for z in self.amps.iter() {
            w.write_all(&z.re.to_le_bytes())?;
            w.write_all(&z.im.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_binary<R: Read>(r: R) -> SapResult<Self> {
        let mut r = BufReader::new(r);
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b8)?;
        let n = u64::from_le_bytes(b8) as usize;
        r.read_exact(&mut b8)?;
        let x_min = f64::from_le_bytes(b8);
        r.read_exact(&mut b8)?;
        let x_max = f64::from_le_bytes(b8);
        let grid = Grid1D::new(n, x_min, x_max)?;
        let mut data = Vec::with_capacity(n * n);
        for _ in 0..n * n {
            r.read_exact(&mut b8)?;
            let re = f64::from_le_bytes(b8);
            r.read_exact(&mut b8)?;
            data.push(C64::new(re, f64::from_le_bytes(b8)));
        }
        let amps = Array2::from_shape_vec((n, n), data)
            .map_err(|e| SapError::Format(e.to_string()))?;
        Ok(Self { grid, amps })
    }

    /// CSV snapshot: a `n,x_min,x_max` header row and its values, then an
    /// `re,im` header and one row per amplitude in row-major order.
    pub fn write_csv<W: Write>(&self, w: W) -> SapResult<()> {
        let mut w = BufWriter::new(w);
        writeln!(w, "n,x_min,x_max")?;
        writeln!(w, "{},{:e},{:e}", self.grid.len(), self.grid.x_min(), self.grid.x_max())?;
        writeln!(w, "re,im")?;
        for z in self.amps.iter() {
            writeln!(w, "{:e},{:e}", z.re, z.im)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> SapResult<Self> {
        let mut lines = BufReader::new(r).lines();
        let mut next = |what: &str| -> SapResult<String> {
            lines
                .next()
                .transpose()?
                .ok_or_else(|| SapError::Format(format!("missing {what}")))
        };
        if next("header")?.trim() != "n,x_min,x_max" {
            return Err(SapError::Format("bad snapshot header".into()));
        }
        let meta = next("grid line")?;
        let f: Vec<&str> = meta.trim().split(',').collect();
        if f.len() != 3 {
            return Err(SapError::Format(format!("bad grid line {meta:?}")));
        }
        let parse = |s: &str| s.trim().parse::<f64>().map_err(|e| SapError::Format(e.to_string()));
        let n: usize = f[0].trim().parse().map_err(|_| SapError::Format(format!("bad n {:?}", f[0])))?;
        let grid = Grid1D::new(n, parse(f[1])?, parse(f[2])?)?;
        if next("amplitude header")?.trim() != "re,im" {
            return Err(SapError::Format("bad amplitude header".into()));
        }
        let mut data = Vec::with_capacity(n * n);
        for _ in 0..n * n {
            let line = next("amplitude row")?;
            let (re, im) = line
                .trim()
                .split_once(',')
                .ok_or_else(|| SapError::Format(format!("bad amplitude row {line:?}")))?;
            data.push(C64::new(parse(re)?, parse(im)?));
        }
        let amps = Array2::from_shape_vec((n, n), data)
            .map_err(|e| SapError::Format(e.to_string()))?;
        Ok(Self { grid, amps })
    }

    pub fn save(&self, path: &Path) -> SapResult<()> {
        let file = std::fs::File::create(path)?;
        match path.extension().and_then(|e| e.to_str()) {
            Some("csv") => self.write_csv(file),
            _ => self.write_binary(file),
        }
    }

    pub fn load(path: &Path) -> SapResult<Self> {
        let file = std::fs::File::open(path)?;
        match path.extension().and_then(|e| e.to_str()) {
            Some("csv") => Self::read_csv(file),
            _ => Self::read_binary(file),
        }
    }
}

/// Normalized harmonic ground state `π^{-1/4} exp(-(x-c)²/2)` sampled on the grid.
pub fn gaussian_orbital(grid: &Grid1D, center: f64) -> Vec<C64> {
    let a = PI.powf(-0.25);
    grid.positions()
        .iter()
        .map(|&x| C64::new(a * (-0.5 * (x - center) * (x - center)).exp(), 0.0))
        .collect()
}

/// Normalized first excited harmonic state centred at `center`.
pub fn first_excited_orbital(grid: &Grid1D, center: f64) -> Vec<C64> {
    let a = PI.powf(-0.25) * 2f64.sqrt();
    grid.positions()
        .iter()
        .map(|&x| {
            let y = x - center;
            C64::new(a * y * (-0.5 * y * y).exp(), 0.0)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_layout() {
        let g = Grid1D::symmetric(8, 4.0).unwrap();
        assert_eq!(g.dx(), 1.0);
        assert_eq!(g.positions()[0], -4.0);
        let k = g.wavenumbers();
        assert_eq!(k[0], 0.0);
        assert!((k[4].abs() - g.k_max()).abs() < 1e-12);
        assert!(k.iter().all(|v| v.abs() <= g.k_max() + 1e-12));
        assert!(Grid1D::new(100, -1.0, 1.0).is_err());
        assert!(Grid1D::new(64, 1.0, 1.0).is_err());
    }

    #[test]
    fn potential_examples() {
        let c = TrapConfiguration::symmetric(5.0);
        assert_eq!(c.potential_at(0.0), 0.0);
        assert!((c.potential_at(-2.5) - 3.125).abs() < 1e-15);
        let c = c.with_offsets([0.0, 0.4, 0.4]);
        assert!((c.potential_at(5.0) - 0.4).abs() < 1e-15);
        // continuity at the L/M intersection
        let [b1, _] = TrapConfiguration::symmetric(5.0).region_boundaries();
        assert_eq!(b1, -2.5);
    }

    #[test]
    fn boundaries_follow_offsets() {
        let c = TrapConfiguration::symmetric(4.0).with_offsets([0.0, 0.4, 0.4]);
        let [b1, b2] = c.region_boundaries();
        assert!((b1 - (-2.0 + 0.1)).abs() < 1e-12);
        assert_eq!(b2, 2.0);
        assert!((c.potential_at(b1) - (0.5 * (b1 + 4.0).powi(2))).abs() < 1e-12);
        assert_eq!(c.site_of(-4.0), Site::Left);
        assert_eq!(c.site_of(0.0), Site::Middle);
        assert_eq!(c.site_of(3.0), Site::Right);
        let single = TrapConfiguration::single(0.0);
        assert_eq!(single.region_boundaries(), [f64::NEG_INFINITY, f64::INFINITY]);
        assert_eq!(single.site_of(-7.0), Site::Middle);
    }

    #[test]
    fn rejects_unordered_traps() {
        assert!(TrapConfiguration::new([1.0, 0.0, 2.0], [0.0; 3]).is_err());
        assert!(TrapConfiguration::new([0.0, 0.0, f64::NAN], [0.0; 3]).is_err());
    }

    #[test]
    fn discrete_delta() {
        let g = Grid1D::new(16, 0.0, 1.6).unwrap();
        let v = interaction_diagonal(2.0, &g);
        assert!((v[[3, 3]] - 20.0).abs() < 1e-12);
        assert_eq!(v[[3, 4]], 0.0);
        assert!(interaction_diagonal(0.0, &g).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn gaussian_pair_is_normalized_and_symmetric() {
        let g = Grid1D::symmetric(64, 10.0).unwrap();
        let psi = TwoBodyWavefunction::gaussian_pair(&g, 1.0);
        assert!((psi.norm_sq() - 1.0).abs() < 1e-10);
        assert!(psi.exchange_asymmetry() < 1e-15);
    }

    #[test]
    fn mirror_is_involution() {
        let g = Grid1D::symmetric(32, 8.0).unwrap();
        let psi = TwoBodyWavefunction::from_fn(&g, |a, b| C64::new(a + 2.0 * b, a * b));
        let back = psi.mirrored().unwrap().mirrored().unwrap();
        assert_eq!(back.amplitudes(), psi.amplitudes());
    }

    #[test]
    fn snapshot_formats_round_trip() {
        let g = Grid1D::new(8, -3.0, 5.0).unwrap();
        let psi = TwoBodyWavefunction::from_fn(&g, |a, b| C64::new(a.sin() * b, -0.3 * a + b.cos()));
        let mut bin = Vec::new();
        psi.write_binary(&mut bin).unwrap();
        assert_eq!(bin.len(), 24 + 16 * 64);
        let back = TwoBodyWavefunction::read_binary(&bin[..]).unwrap();
        assert_eq!(back.grid(), psi.grid());
        assert_eq!(back.amplitudes(), psi.amplitudes());

        let mut csv = Vec::new();
        psi.write_csv(&mut csv).unwrap();
        let back = TwoBodyWavefunction::read_csv(&csv[..]).unwrap();
        assert_eq!(back.amplitudes(), psi.amplitudes());
        assert!(TwoBodyWavefunction::read_csv(&b"x,y\n"[..]).is_err());
    }
}
