//! Bound states of the motion perpendicular to the helium surface.
//!
//! The Hamiltonian `-d²/dz² - 2/z + f z` (scaled units) is discretised with
//! second-order finite differences on a uniform grid with Dirichlet nodes at
//! `z = 0` (rigid wall) and `z = z_max`. All matrix elements are trapezoidal
//! sums on the same grid.

use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::tridiag::SymTridiagonal;
use crate::units::{constants::V_PER_CM, MaterialProperties, Scale};

/// Weight of the highest state allowed in the outer 10% of the box.
pub const TAIL_LIMIT: f64 = 1e-6;

/// Step used by [`stark_slope`], V/cm.
pub const STARK_STEP_VCM: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Box size in units of `r_B`.
    pub z_max: f64,
    /// Number of intervals; the grid has `n_points - 1` interior nodes.
    pub n_points: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { z_max: 150.0, n_points: 30_000 }
    }
}

impl GridSpec {
    pub fn new(z_max: f64, n_points: usize) -> Self {
        Self { z_max, n_points }
    }

    pub fn step(&self) -> f64 {
        self.z_max / self.n_points as f64
    }

    fn validate(&self, n_max: usize) -> Result<()> {
        if !(self.z_max.is_finite() && self.z_max > 0.0) {
            return Err(invalid("z_max", format!("must be > 0, got {}", self.z_max)));
        }
        if self.n_points < 100 {
            return Err(invalid("n_points", format!("need at least 100, got {}", self.n_points)));
        }
        if n_max + 1 >= self.n_points {
            return Err(invalid("n_max", "more states requested than grid nodes"));
        }
        Ok(())
    }
}

/// Rydberg energies, wavefunctions and matrix-element tables (scaled units).
#[derive(Debug, Clone)]
pub struct VerticalSpectrum {
    material: MaterialProperties,
    e_perp: f64,
    grid: GridSpec,
    energies: Vec<f64>,
    wavefunctions: Vec<Vec<f64>>,
    z: DMatrix<f64>,
    z2: DMatrix<f64>,
    dvdz: Vec<f64>,
    wall_slope: Vec<f64>,
}

/// Solves for the lowest `n_max` vertical states at perpendicular field
/// `e_perp` (V/m).
pub fn solve_vertical(
    material: &MaterialProperties,
    e_perp: f64,
    n_max: usize,
    grid: GridSpec,
) -> Result<VerticalSpectrum> {
    if n_max < 2 {
        return Err(invalid("n_max", format!("need at least 2 states, got {n_max}")));
    }
    if !(e_perp.is_finite() && e_perp >= 0.0) {
        return Err(invalid("e_perp", format!("must be >= 0, got {e_perp}")));
    }
    grid.validate(n_max)?;

    let scale = material.scale();
    let force = scale.stark_force(e_perp);
    let h = grid.step();
    let nodes = grid.n_points - 1;
    let kinetic = 1.0 / (h * h);
    let zs: Vec<f64> = (1..=nodes).map(|i| i as f64 * h).collect();
    let diag: Vec<f64> = zs.iter().map(|&z| 2.0 * kinetic - 2.0 / z + force * z).collect();
    let off = vec![-kinetic; nodes - 1];
    let (energies, vectors) = SymTridiagonal::new(diag, off).lowest_eigenpairs(n_max)?;

    let norm = h.sqrt();
    let wavefunctions: Vec<Vec<f64>> = vectors
        .into_iter()
        .map(|v| {
            // phase convention: ψ_n > 0 just above the wall
            let sign = if v[0] < 0.0 { -1.0 } else { 1.0 };
            v.into_iter().map(|x| sign * x / norm).collect()
        })
        .collect();

    let tail_start = (0.9 * nodes as f64) as usize;
    let top = &wavefunctions[n_max - 1];
    let tail: f64 = top[tail_start..].iter().map(|p| p * p).sum::<f64>() * h;
    if tail > TAIL_LIMIT {
        return Err(Error::GridTooSmall { n: n_max, tail, limit: TAIL_LIMIT });
    }

    let wall_slope: Vec<f64> =
        wavefunctions.iter().map(|psi| (4.0 * psi[0] - psi[1]) / (2.0 * h)).collect();

    let mut z = DMatrix::zeros(n_max, n_max);
    let mut z2 = DMatrix::zeros(n_max, n_max);
    for a in 0..n_max {
        for b in a..n_max {
            let (pa, pb) = (&wavefunctions[a], &wavefunctions[b]);
            let mut s1 = 0.0;
            let mut s2 = 0.0;
            for i in 0..nodes {
                let w = pa[i] * pb[i] * zs[i];
                s1 += w;
                s2 += w * zs[i];
            }
            z[(a, b)] = s1 * h;
            z[(b, a)] = s1 * h;
            z2[(a, b)] = s2 * h;
            z2[(b, a)] = s2 * h;
        }
    }

    // ⟨n|Λ/z² + eE|n⟩ = ⟨2/z²⟩ + f ; the z = 0 endpoint carries the limit 2ψ'(0)².
    let dvdz: Vec<f64> = wavefunctions
        .iter()
        .zip(&wall_slope)
        .map(|(psi, slope)| {
            let interior: f64 = psi.iter().zip(&zs).map(|(p, z)| p * p / (z * z)).sum();
            2.0 * (interior * h + 0.5 * h * slope * slope) + force
        })
        .collect();

    Ok(VerticalSpectrum {
        material: *material,
        e_perp,
        grid,
        energies,
        wavefunctions,
        z,
        z2,
        dvdz,
        wall_slope,
    })
}

impl VerticalSpectrum {
    pub fn material(&self) -> &MaterialProperties {
        &self.material
    }
    pub fn scale(&self) -> Scale {
        self.material.scale()
    }
    /// V/m.
    pub fn e_perp(&self) -> f64 {
        self.e_perp
    }
    pub fn grid(&self) -> GridSpec {
        self.grid
    }
    pub fn n_max(&self) -> usize {
        self.energies.len()
    }

    /// Interior grid nodes in units of `r_B`.
    pub fn grid_points(&self) -> Vec<f64> {
        let h = self.grid.step();
        (1..self.grid.n_points).map(|i| i as f64 * h).collect()
    }

    /// All energies (scaled), index `n - 1`.
    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    /// Energy of state `n` (1-based), units of `R_e`.
    pub fn energy(&self, n: usize) -> f64 {
        self.energies[n - 1]
    }

    /// `ψ_n` on the interior nodes, normalised so that `Σψ² Δz = 1`.
    pub fn wavefunction(&self, n: usize) -> &[f64] {
        &self.wavefunctions[n - 1]
    }

    /// `z_{nn'}` in units of `r_B` (1-based labels).
    pub fn z(&self, n: usize, m: usize) -> f64 {
        self.z[(n - 1, m - 1)]
    }

    /// `(z²)_{nn'}` in units of `r_B²`.
    pub fn z2(&self, n: usize, m: usize) -> f64 {
        self.z2[(n - 1, m - 1)]
    }

    pub fn z_matrix(&self) -> &DMatrix<f64> {
        &self.z
    }

    pub fn z2_matrix(&self) -> &DMatrix<f64> {
        &self.z2
    }

    /// `(∂υ/∂z)_{nn}` by quadrature of `Λ/z² + eE_perp`, units of `R_e/r_B`.
    pub fn dvdz(&self, n: usize) -> f64 {
        self.dvdz[n - 1]
    }

    /// `(∂υ/∂z)_{nn}` from the wavefunction slope at the wall,
    /// `(ħ²/2m)ψ'_n(0)²`, units of `R_e/r_B`.
    pub fn dvdz_from_slope(&self, n: usize) -> f64 {
        self.wall_slope[n - 1].powi(2)
    }

    /// Overlap `∫ψ_n ψ_m dz` by the trapezoidal rule.
    pub fn overlap(&self, n: usize, m: usize) -> f64 {
        let h = self.grid.step();
        self.wavefunctions[n - 1]
            .iter()
            .zip(&self.wavefunctions[m - 1])
            .map(|(a, b)| a * b)
            .sum::<f64>()
            * h
    }

    /// Transition frequency `(E_m - E_n)/h`, GHz.
    pub fn transition_ghz(&self, n: usize, m: usize) -> f64 {
        self.scale().energy_to_ghz(self.energy(m) - self.energy(n))
    }

    /// CSV dump: `z_rb, psi_1, ..., psi_nmax`.
    pub fn write_wavefunctions_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["z_rb".to_string()];
        header.extend((1..=self.n_max()).map(|n| format!("psi_{n}")));
        w.write_record(&header)?;
        for (i, z) in self.grid_points().iter().enumerate() {
            let mut row = vec![z.to_string()];
            row.extend(self.wavefunctions.iter().map(|psi| psi[i].to_string()));
            w.write_record(&row)?;
        }
        w.flush()
    }
}

/// Per-state sum-rule residuals `|(z²)_nn - Σ_{n'} |z_nn'|²| / (z²)_nn`.
pub fn truncation_report(spectrum: &VerticalSpectrum) -> Vec<f64> {
    sum_rule_residuals(spectrum.z_matrix(), spectrum.z2_matrix())
}

pub(crate) fn sum_rule_residuals(z: &DMatrix<f64>, z2: &DMatrix<f64>) -> Vec<f64> {
    (0..z.nrows())
        .map(|n| {
            let partial: f64 = z.row(n).iter().map(|v| v * v).sum();
            (z2[(n, n)] - partial).abs() / z2[(n, n)]
        })
        .collect()
}

/// Stark slope of the `n -> m` transition, GHz per V/cm, by central
/// difference with step [`STARK_STEP_VCM`].
pub fn stark_slope(
    material: &MaterialProperties,
    e_perp_vcm: f64,
    n: usize,
    m: usize,
    grid: GridSpec,
) -> Result<f64> {
    stark_slope_with_step(material, e_perp_vcm, n, m, grid, STARK_STEP_VCM)
}

pub fn stark_slope_with_step(
    material: &MaterialProperties,
    e_perp_vcm: f64,
    n: usize,
    m: usize,
    grid: GridSpec,
    step_vcm: f64,
) -> Result<f64> {
    if n == 0 || m == 0 {
        return Err(invalid("n", "quantum numbers start at 1"));
    }
    if e_perp_vcm - step_vcm < 0.0 {
        return Err(invalid("e_perp", "central difference would need a negative field"));
    }
    if n == m {
        return Ok(0.0);
    }
    let n_max = n.max(m).max(2);
    let freq = |e: f64| -> Result<f64> {
        let vs = solve_vertical(material, e * V_PER_CM, n_max, grid)?;
        Ok(vs.transition_ghz(n, m))
    };
    Ok((freq(e_perp_vcm + step_vcm)? - freq(e_perp_vcm - step_vcm)?) / (2.0 * step_vcm))
}

/// E_perp (V/cm) at which the `n -> m` transition equals `target_ghz`, by
/// bisection on `[lo, hi]`.
pub fn field_for_transition(
    material: &MaterialProperties,
    n: usize,
    m: usize,
    target_ghz: f64,
    lo_vcm: f64,
    hi_vcm: f64,
    grid: GridSpec,
) -> Result<f64> {
    let n_max = n.max(m).max(2);
    let detune = |e: f64| -> Result<f64> {
        Ok(solve_vertical(material, e * V_PER_CM, n_max, grid)?.transition_ghz(n, m) - target_ghz)
    };
    let (mut a, mut b) = (lo_vcm, hi_vcm);
    let (mut fa, fb) = (detune(a)?, detune(b)?);
    if fa.signum() == fb.signum() {
        return Err(invalid(
            "e_perp range",
            format!("transition {n}->{m} does not reach {target_ghz} GHz in [{lo_vcm}, {hi_vcm}] V/cm"),
        ));
    }
    while b - a > 1e-6 {
        let mid = 0.5 * (a + b);
        let fm = detune(mid)?;
        if fm.signum() == fa.signum() {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    Ok(0.5 * (a + b))
}
