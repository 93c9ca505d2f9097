//! Unit-cell and macroscopic geometry.
//!
//! The periodicity cell is `Y = (-1/2, 1/2)^n`. It contains an axis-aligned
//! obstacle block `B`; the resonator interior `R_Y` is a rectangle strictly
//! inside `B`, and a straight channel along `e_1` connects the right face of
//! `R_Y` (at `y_r`) with the right face of `B` (at `y_q`). The channel has
//! half-width `alpha * eps^p` in cell coordinates. Everything in `Y` outside
//! `B` is the exterior `Q_Y`.

use std::fmt;

use crate::error::{Error, Result};

/// Axis-aligned box in one, two or three dimensions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisBox {
    lo: [f64; 3],
    hi: [f64; 3],
    dim: usize,
}

impl AxisBox {
    pub fn new(lo: &[f64], hi: &[f64]) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() || lo.len() > 3 {
            return Err(Error::Geometry(format!(
                "box bounds must have matching length 1..=3, got {} and {}",
                lo.len(),
                hi.len()
            )));
        }
        let mut b = AxisBox {
            lo: [0.0; 3],
            hi: [0.0; 3],
            dim: lo.len(),
        };
        for d in 0..lo.len() {
            if !(lo[d].is_finite() && hi[d].is_finite()) || lo[d] >= hi[d] {
                return Err(Error::Geometry(format!(
                    "box interval {} is empty or not finite: [{}, {}]",
                    d, lo[d], hi[d]
                )));
            }
            b.lo[d] = lo[d];
            b.hi[d] = hi[d];
        }
        Ok(b)
    }

    /// Rectangle `[x0, x1] x [y0, y1]`.
    pub fn rect(x0: f64, x1: f64, y0: f64, y1: f64) -> Result<Self> {
        Self::new(&[x0, y0], &[x1, y1])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lo(&self, d: usize) -> f64 {
        self.lo[d]
    }

    pub fn hi(&self, d: usize) -> f64 {
        self.hi[d]
    }

    pub fn extent(&self, d: usize) -> f64 {
        self.hi[d] - self.lo[d]
    }

    pub fn measure(&self) -> f64 {
        (0..self.dim).map(|d| self.extent(d)).product()
    }

    pub fn contains_open(&self, p: &[f64]) -> bool {
        (0..self.dim).all(|d| p[d] > self.lo[d] && p[d] < self.hi[d])
    }

    pub fn contains_closed(&self, p: &[f64]) -> bool {
        (0..self.dim).all(|d| p[d] >= self.lo[d] && p[d] <= self.hi[d])
    }

    /// True when the closure of `self` lies in the interior of `outer`.
    pub fn compactly_inside(&self, outer: &AxisBox) -> bool {
        self.dim == outer.dim
            && (0..self.dim).all(|d| self.lo[d] > outer.lo[d] && self.hi[d] < outer.hi[d])
    }

    /// True when `self` is contained in the closure of `outer`.
    pub fn inside_closed(&self, outer: &AxisBox) -> bool {
        self.dim == outer.dim
            && (0..self.dim).all(|d| self.lo[d] >= outer.lo[d] && self.hi[d] <= outer.hi[d])
    }
}

impl fmt::Display for AxisBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for d in 0..self.dim {
            if d > 0 {
                write!(f, "x")?;
            }
            write!(f, "[{}, {}]", self.lo[d], self.hi[d])?;
        }
        Ok(())
    }
}

/// Region of a point of the periodicity cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CellRegion {
    /// Resonator interior `R_Y`.
    Resonator,
    /// Sound-hard obstacle `Sigma_Y` (closed; boundary points land here).
    Obstacle,
    /// Channel `K_Y^eps`.
    Channel,
    /// Exterior `Q_Y`.
    Exterior,
}

/// Geometry of one resonator cell, in cell coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct ResonatorCell {
    pub r_rect: AxisBox,
    pub block_rect: AxisBox,
    pub y_r: f64,
    pub y_q: f64,
    pub alpha: f64,
    pub p: u32,
    pub dim: usize,
}

/// The four geometric numbers that drive the effective model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometricConstants {
    /// Relative channel cross-section `A`.
    pub a_cross: f64,
    /// Channel length `L`.
    pub l_chan: f64,
    /// Resonator volume `V = |R_Y|`.
    pub v_res: f64,
    /// Exterior volume `Q = |Q_Y|`.
    pub q_ext: f64,
    /// Squared resonance frequency `A / (L V)`.
    pub omega_star_sq: f64,
}

const FACE_TOL: f64 = 1e-12;

impl ResonatorCell {
    /// Builds a cell and checks every geometric invariant.
    pub fn new(
        r_rect: AxisBox,
        block_rect: AxisBox,
        y_r: f64,
        y_q: f64,
        alpha: f64,
        p: u32,
        dim: usize,
    ) -> Result<Self> {
        let cell = ResonatorCell {
            r_rect,
            block_rect,
            y_r,
            y_q,
            alpha,
            p,
            dim,
        };
        cell.validate()?;
        Ok(cell)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Geometry(msg));
        if self.dim != 2 && self.dim != 3 {
            return bad(format!("dimension must be 2 or 3, got {}", self.dim));
        }
        if self.r_rect.dim() != self.dim || self.block_rect.dim() != self.dim {
            return bad(format!(
                "r_rect and block_rect must be {}-dimensional boxes",
                self.dim
            ));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad(format!("alpha must be positive, got {}", self.alpha));
        }
        if self.p == 0 {
            return bad("channel exponent p must be at least 1".into());
        }
        if (self.y_q - self.y_r).abs() <= FACE_TOL {
            return bad("channel length zero (y_r == y_q)".into());
        }
        if !(self.y_r < self.y_q) {
            return bad(format!(
                "channel must run in +e1 direction: y_r = {} must be below y_q = {}",
                self.y_r, self.y_q
            ));
        }
        if !(self.y_r > -0.5 && self.y_q < 0.5) {
            return bad("channel endpoints must lie inside (-1/2, 1/2)".into());
        }
        let cube = AxisBox::new(&vec![-0.5; self.dim], &vec![0.5; self.dim])?;
        if !self.block_rect.compactly_inside(&cube) {
            return bad(format!(
                "block_rect {} must not touch the cell boundary",
                self.block_rect
            ));
        }
        if !self.r_rect.compactly_inside(&self.block_rect) {
            return bad(format!(
                "r_rect {} must lie strictly inside block_rect {}",
                self.r_rect, self.block_rect
            ));
        }
        if (self.y_r - self.r_rect.hi(0)).abs() > FACE_TOL {
            return bad(format!(
                "channel must start on the right face of r_rect (y_r = {}, face at {})",
                self.y_r,
                self.r_rect.hi(0)
            ));
        }
        if (self.y_q - self.block_rect.hi(0)).abs() > FACE_TOL {
            return bad(format!(
                "channel must end on the right face of block_rect (y_q = {}, face at {})",
                self.y_q,
                self.block_rect.hi(0)
            ));
        }
        for d in 1..self.dim {
            if !(self.r_rect.lo(d) < 0.0 && self.r_rect.hi(d) > 0.0) {
                return bad("channel axis y = 0 must cross the resonator face".into());
            }
        }
        Ok(())
    }

    /// Largest channel half-width (cell coordinates) that keeps the channel
    /// mouth on the flat face of `R_Y`, which also keeps it inside `Sigma_Y`.
    pub fn max_half_width(&self) -> f64 {
        (1..self.dim)
            .map(|d| self.r_rect.lo(d).abs().min(self.r_rect.hi(d)))
            .fold(f64::INFINITY, f64::min)
    }

    /// Channel half-width `alpha * eps^p` in cell coordinates.
    pub fn channel_half_width(&self, eps: f64) -> Result<f64> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::Input(format!("eps must be positive, got {eps}")));
        }
        let w = self.alpha * eps.powi(self.p as i32);
        if w >= self.max_half_width() {
            return Err(Error::Geometry(format!(
                "channel half-width {w} at eps = {eps} does not fit the resonator face (limit {})",
                self.max_half_width()
            )));
        }
        Ok(w)
    }

    /// Region of the point `y` of the cell for scale `eps`. Ties go to the
    /// closed obstacle.
    pub fn classify(&self, eps: f64, y: &[f64]) -> CellRegion {
        let w = self.alpha * eps.powi(self.p as i32);
        let radial_sq: f64 = (1..self.dim).map(|d| y[d] * y[d]).sum();
        if y[0] > self.y_r && y[0] < self.y_q && radial_sq < w * w {
            CellRegion::Channel
        } else if self.r_rect.contains_open(y) {
            CellRegion::Resonator
        } else if self.block_rect.contains_closed(y) {
            CellRegion::Obstacle
        } else {
            CellRegion::Exterior
        }
    }

    pub fn constants(&self) -> Result<GeometricConstants> {
        derived_constants(self)
    }
}

/// Computes `A`, `L`, `V`, `Q` and `A/(LV)` for a validated cell.
pub fn derived_constants(cell: &ResonatorCell) -> Result<GeometricConstants> {
    cell.validate()?;
    let a_cross = match cell.dim {
        2 => 2.0 * cell.alpha,
        _ => std::f64::consts::PI * cell.alpha * cell.alpha,
    };
    let l_chan = cell.y_q - cell.y_r;
    let v_res = cell.r_rect.measure();
    let q_ext = 1.0 - cell.block_rect.measure();
    Ok(GeometricConstants {
        a_cross,
        l_chan,
        v_res,
        q_ext,
        omega_star_sq: a_cross / (l_chan * v_res),
    })
}

/// Convenience wrapper for [`ResonatorCell::classify`].
pub fn classify_point(cell: &ResonatorCell, eps: f64, y: &[f64]) -> CellRegion {
    cell.classify(eps, y)
}

/// Macroscopic domain `Omega` with the scatterer region `D` (possibly absent).
#[derive(Debug, Clone, PartialEq)]
pub struct MacroDomain {
    pub omega_rect: AxisBox,
    pub d_rect: Option<AxisBox>,
}

impl MacroDomain {
    pub fn new(omega_rect: AxisBox, d_rect: Option<AxisBox>) -> Result<Self> {
        if omega_rect.dim() != 2 {
            return Err(Error::Geometry("omega_rect must be two-dimensional".into()));
        }
        if let Some(d) = &d_rect {
            if !d.compactly_inside(&omega_rect) {
                return Err(Error::Geometry(format!(
                    "closure of D = {d} must lie inside Omega = {omega_rect}"
                )));
            }
        }
        Ok(MacroDomain { omega_rect, d_rect })
    }

    pub fn in_scatterer(&self, x: &[f64]) -> bool {
        self.d_rect.map_or(false, |d| d.contains_open(x))
    }
}

/// Index of a resonator cell. Cell `k` occupies `eps * (k + [0, 1]^2)`.
pub type LatticeIndex = [i64; 2];

/// Lower-left corner of lattice cell `k`.
pub fn cell_origin(k: LatticeIndex, eps: f64) -> [f64; 2] {
    [eps * k[0] as f64, eps * k[1] as f64]
}

/// Centre of lattice cell `k`; cell coordinates are `(x - centre) / eps`.
pub fn cell_center(k: LatticeIndex, eps: f64) -> [f64; 2] {
    [eps * (k[0] as f64 + 0.5), eps * (k[1] as f64 + 0.5)]
}

/// All lattice cells whose closure lies in the closure of `D`, ordered with
/// the first index running fastest.
pub fn resonator_lattice(domain: &MacroDomain, eps: f64) -> Result<Vec<LatticeIndex>> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::Input(format!("eps must be positive, got {eps}")));
    }
    let Some(d) = domain.d_rect else {
        return Ok(Vec::new());
    };
    // Relative slack so that D boundaries that are exact multiples of eps in
    // exact arithmetic are not lost to rounding.
    const SLACK: f64 = 1e-9;
    let range = |lo: f64, hi: f64| {
        let first = (lo / eps - SLACK).ceil() as i64;
        let last = (hi / eps + SLACK).floor() as i64 - 1;
        first..=last
    };
    let kx = range(d.lo(0), d.hi(0));
    let ky = range(d.lo(1), d.hi(1));
    let mut out = Vec::new();
    for j in ky {
        for i in kx.clone() {
            out.push([i, j]);
        }
    }
    Ok(out)
}

/// One row of the scaling table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingRow {
    pub eps: f64,
    /// Physical channel cross-section (width for n = 2, area for n = 3).
    pub a_eps: f64,
    pub l_eps: f64,
    pub v_eps: f64,
    /// `A_eps / (L_eps V_eps)`.
    pub ratio: f64,
}

/// Physical channel, length and volume scales for each `eps`.
///
/// The ratio is evaluated as `A/(LV) * eps^e` with the integer exponent
/// `e = (n-1)(p+1) - 1 - n`, so that it is exactly `A/(LV)` whenever the
/// scaling is critical (`e = 0`).
pub fn scaling_report(cell: &ResonatorCell, eps_list: &[f64]) -> Result<Vec<ScalingRow>> {
    if eps_list.is_empty() {
        return Err(Error::Input("eps list is empty".into()));
    }
    let c = derived_constants(cell)?;
    let n = cell.dim as i32;
    let p = cell.p as i32;
    let exponent = (n - 1) * (p + 1) - 1 - n;
    eps_list
        .iter()
        .map(|&eps| {
            if !(eps > 0.0 && eps.is_finite()) {
                return Err(Error::Input(format!("eps must be positive, got {eps}")));
            }
            let a_eps = c.a_cross * eps.powi((n - 1) * (p + 1));
            Ok(ScalingRow {
                eps,
                a_eps,
                l_eps: c.l_chan * eps,
                v_eps: c.v_res * eps.powi(n),
                ratio: c.omega_star_sq * eps.powi(exponent),
            })
        })
        .collect()
}

/// Sampled area fractions of the resonator and the exterior in the cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampledAreas {
    pub resonator: f64,
    pub exterior: f64,
    pub samples: usize,
}

impl SampledAreas {
    /// Standard error of a sampled fraction with true value `p`.
    pub fn standard_error(&self, p: f64) -> f64 {
        (p * (1.0 - p) / self.samples as f64).sqrt()
    }
}

pub fn sample_areas(cell: &ResonatorCell, eps: f64, samples: usize, seed: u64) -> SampledAreas {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let (mut n_r, mut n_q) = (0usize, 0usize);
    let mut y = vec![0.0; cell.dim];
    for _ in 0..samples {
        y.iter_mut().for_each(|c| *c = rng.gen_range(-0.5..0.5));
        match cell.classify(eps, &y) {
            CellRegion::Resonator => n_r += 1,
            CellRegion::Exterior => n_q += 1,
            _ => {}
        }
    }
    SampledAreas {
        resonator: n_r as f64 / samples as f64,
        exterior: n_q as f64 / samples as f64,
        samples,
    }
}
