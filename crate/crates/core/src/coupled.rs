//! Tilted-field Hamiltonian on the truncated product basis `|n, l>`.
//!
//! In scaled units (energies in `R_e`, lengths in `r_B`) the matrix is
//!
//! ```text
//! H[(n,l),(n',l')] = (E_n + ħω_c l) δ_nn' δ_ll'
//!                  + (ħω_y)²/4 · (z²)_nn' δ_ll'
//!                  + (ħω_y √(ħω_c) / 2) · z_nn' (√(l+1) δ_l',l+1 + √l δ_l',l-1)
//! ```
//!
//! which is the lab-unit form `m ω_y² z²/2 + ħω_y z (a + a†)/(√2 l_B)` with the
//! cyclotron zero-point energy `ħω_c/2` removed.

use std::io::Write;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::units::{FieldConfiguration, Scale};
use crate::vertical::VerticalSpectrum;

/// Product state label `(n, l)`, `n >= 1`, `l >= 0`.
pub type Level = (usize, usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProductBasis {
    n_max: usize,
    l_max: usize,
}

impl Default for ProductBasis {
    fn default() -> Self {
        Self { n_max: 6, l_max: 50 }
    }
}

impl ProductBasis {
    pub fn new(n_max: usize, l_max: usize) -> Result<Self> {
        if n_max == 0 {
            return Err(invalid("n_max", "basis needs at least one Rydberg state"));
        }
        Ok(Self { n_max, l_max })
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }
    pub fn l_max(&self) -> usize {
        self.l_max
    }
    pub fn size(&self) -> usize {
        self.n_max * (self.l_max + 1)
    }

    pub fn contains(&self, (n, l): Level) -> bool {
        n >= 1 && n <= self.n_max && l <= self.l_max
    }

    pub fn index(&self, (n, l): Level) -> usize {
        debug_assert!(self.contains((n, l)), "({n},{l}) outside basis");
        (n - 1) * (self.l_max + 1) + l
    }

    pub fn label(&self, i: usize) -> Level {
        (i / (self.l_max + 1) + 1, i % (self.l_max + 1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DiamagneticMode {
    /// Full `(z²)_nn'` block within each Landau level.
    #[default]
    Full,
    /// Keep only `(z²)_nn`; used to quantify the off-diagonal renormalisation.
    DiagonalOnly,
}

/// Field-dependent energy scales in units of `R_e`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldScales {
    pub hw_c: f64,
    pub hw_y: f64,
    /// Prefactor of `(z²)_nn'`.
    pub diamagnetic: f64,
    /// Prefactor of `z_nn' √l`, i.e. `g_nn' = coupling · z_nn'`.
    pub coupling: f64,
}

impl FieldScales {
    pub fn new(scale: &Scale, cfg: &FieldConfiguration) -> Result<Self> {
        let hw_c = scale.cyclotron_energy(cfg.b_z());
        let hw_y = scale.cyclotron_energy(cfg.b_y());
        if hw_c == 0.0 && hw_y != 0.0 {
            return Err(Error::DegenerateField("in-plane coupling"));
        }
        Ok(Self { hw_c, hw_y, diamagnetic: hw_y * hw_y / 4.0, coupling: hw_y * hw_c.sqrt() / 2.0 })
    }
}

fn check_compatible(vs: &VerticalSpectrum, cfg: &FieldConfiguration, basis: &ProductBasis) -> Result<()> {
    if basis.n_max() > vs.n_max() {
        return Err(Error::BasisMismatch(format!(
            "basis n_max {} exceeds vertical spectrum n_max {}",
            basis.n_max(),
            vs.n_max()
        )));
    }
    let (a, b) = (vs.e_perp(), cfg.e_perp());
    if (a - b).abs() > 1e-9 * a.abs().max(b.abs()).max(1.0) {
        return Err(Error::BasisMismatch(format!(
            "vertical spectrum solved at {a} V/m but configuration has {b} V/m"
        )));
    }
    Ok(())
}

pub fn assemble_hamiltonian(
    vs: &VerticalSpectrum,
    cfg: &FieldConfiguration,
    basis: &ProductBasis,
) -> Result<DMatrix<f64>> {
    assemble_hamiltonian_with(vs, cfg, basis, DiamagneticMode::Full)
}

pub fn assemble_hamiltonian_with(
    vs: &VerticalSpectrum,
    cfg: &FieldConfiguration,
    basis: &ProductBasis,
    mode: DiamagneticMode,
) -> Result<DMatrix<f64>> {
    check_compatible(vs, cfg, basis)?;
    let fs = FieldScales::new(&vs.scale(), cfg)?;
    let dim = basis.size();
    let mut h = DMatrix::zeros(dim, dim);
    let nm = basis.n_max();
    for n in 1..=nm {
        for l in 0..=basis.l_max() {
            let i = basis.index((n, l));
            h[(i, i)] += vs.energy(n) + fs.hw_c * l as f64;
            for m in 1..=nm {
                let j = basis.index((m, l));
                let z2 = match mode {
                    DiamagneticMode::Full => vs.z2(n, m),
                    DiamagneticMode::DiagonalOnly if n == m => vs.z2(n, m),
                    DiamagneticMode::DiagonalOnly => 0.0,
                };
                h[(i, j)] += fs.diamagnetic * z2;
                if l < basis.l_max() {
                    let k = basis.index((m, l + 1));
                    let c = fs.coupling * vs.z(n, m) * ((l + 1) as f64).sqrt();
                    h[(i, k)] += c;
                    h[(k, i)] += c;
                }
            }
        }
    }
    Ok(h)
}

/// Eigen-decomposition of the coupled Hamiltonian with product-state amplitudes.
#[derive(Debug, Clone)]
pub struct CoupledSpectrum {
    basis: ProductBasis,
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<f64>,
    config: FieldConfiguration,
    scale: Scale,
    z: DMatrix<f64>,
}

/// Full eigen-decomposition of a symmetric matrix; eigenvalues ascending,
/// each eigenvector's largest component made positive.
pub fn symmetric_eigen(h: DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let dim = h.nrows();
    if h.ncols() != dim {
        return Err(invalid("hamiltonian", "matrix must be square"));
    }
    if h.iter().any(|v| !v.is_finite()) {
        return Err(invalid("hamiltonian", "non-finite entry"));
    }
    let eig = SymmetricEigen::try_new(h, f64::EPSILON, 0)
        .ok_or_else(|| Error::ConvergenceFailure("dense symmetric eigensolver".into()))?;
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = DMatrix::zeros(dim, dim);
    for (col, &k) in order.iter().enumerate() {
        let v = eig.eigenvectors.column(k);
        let pivot = v.iamax();
        let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
        vectors.set_column(col, &(v * sign));
    }
    Ok((values, vectors))
}

pub fn diagonalize(
    h: DMatrix<f64>,
    vs: &VerticalSpectrum,
    cfg: &FieldConfiguration,
    basis: &ProductBasis,
) -> Result<CoupledSpectrum> {
    if h.nrows() != basis.size() {
        return Err(Error::BasisMismatch(format!(
            "matrix is {}x{}, basis has {} states",
            h.nrows(),
            h.ncols(),
            basis.size()
        )));
    }
    let (eigenvalues, eigenvectors) = symmetric_eigen(h)?;
    let nm = basis.n_max();
    Ok(CoupledSpectrum {
        basis: *basis,
        eigenvalues,
        eigenvectors,
        config: *cfg,
        scale: vs.scale(),
        z: vs.z_matrix().view((0, 0), (nm, nm)).into_owned(),
    })
}

/// Assemble and diagonalise in one step.
pub fn solve_coupled(
    vs: &VerticalSpectrum,
    cfg: &FieldConfiguration,
    basis: &ProductBasis,
    mode: DiamagneticMode,
) -> Result<CoupledSpectrum> {
    let h = assemble_hamiltonian_with(vs, cfg, basis, mode)?;
    diagonalize(h, vs, cfg, basis)
}

impl CoupledSpectrum {
    pub fn basis(&self) -> &ProductBasis {
        &self.basis
    }
    pub fn config(&self) -> &FieldConfiguration {
        &self.config
    }
    pub fn scale(&self) -> Scale {
        self.scale
    }
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }
    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }
    /// Scaled eigenvalues, ascending.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }
    pub fn energy_ghz(&self, k: usize) -> f64 {
        self.scale.energy_to_ghz(self.eigenvalues[k])
    }
    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }
    pub fn vector(&self, k: usize) -> DVector<f64> {
        self.eigenvectors.column(k).into_owned()
    }
    pub fn amplitude(&self, k: usize, level: Level) -> f64 {
        self.eigenvectors[(self.basis.index(level), k)]
    }

    /// Dominant product state of eigenvector `k` and its weight.
    pub fn dominant(&self, k: usize) -> (Level, f64) {
        let col = self.eigenvectors.column(k);
        let i = col.iamax();
        (self.basis.label(i), col[i] * col[i])
    }

    /// Total weight of eigenvector `k` on the given product states.
    pub fn weight_on(&self, k: usize, levels: &[Level]) -> f64 {
        levels.iter().map(|&lv| self.amplitude(k, lv).powi(2)).sum()
    }

    /// Index of the eigenvector with the largest weight on `level`.
    pub fn find_state(&self, level: Level) -> usize {
        let row = self.basis.index(level);
        self.eigenvectors.row(row).transpose().iamax()
    }

    /// `⟨a|z|b⟩` in units of `r_B`; `z` acts on the vertical factor only.
    pub fn z_moment(&self, a: usize, b: usize) -> f64 {
        let ca = self.eigenvectors.column(a);
        let cb = self.eigenvectors.column(b);
        let lmax = self.basis.l_max();
        let nm = self.basis.n_max();
        let mut s = 0.0;
        for l in 0..=lmax {
            for n in 1..=nm {
                let an = ca[self.basis.index((n, l))];
                if an == 0.0 {
                    continue;
                }
                for m in 1..=nm {
                    s += an * self.z[(n - 1, m - 1)] * cb[self.basis.index((m, l))];
                }
            }
        }
        s
    }

    pub fn trace(&self) -> f64 {
        self.eigenvalues.iter().sum()
    }
}

/// Solves the coupled problem for each field configuration, in parallel,
/// returning results in input order.
pub fn sweep(
    vs: &VerticalSpectrum,
    configs: &[FieldConfiguration],
    basis: &ProductBasis,
    mode: DiamagneticMode,
) -> Vec<Result<CoupledSpectrum>> {
    configs.par_iter().map(|cfg| solve_coupled(vs, cfg, basis, mode)).collect()
}

fn level_energy(vs: &VerticalSpectrum, hw_c: f64, (n, l): Level) -> f64 {
    vs.energy(n) + hw_c * l as f64
}

/// B_z (T) where the uncoupled levels `upper` and `lower` cross, by bisection
/// to `tol` T.
pub fn find_crossing(
    vs: &VerticalSpectrum,
    upper: Level,
    lower: Level,
    b_lo: f64,
    b_hi: f64,
    tol: f64,
) -> Result<f64> {
    if upper.0 > vs.n_max() || lower.0 > vs.n_max() || upper.0 == 0 || lower.0 == 0 {
        return Err(Error::BasisMismatch("crossing level outside vertical spectrum".into()));
    }
    if !(b_lo >= 0.0 && b_hi > b_lo) {
        return Err(invalid("b_z range", format!("need 0 <= lo < hi, got [{b_lo}, {b_hi}]")));
    }
    let scale = vs.scale();
    let diff = |b: f64| {
        let hw = scale.cyclotron_energy(b);
        level_energy(vs, hw, upper) - level_energy(vs, hw, lower)
    };
    let (mut a, mut b) = (b_lo, b_hi);
    let fa = diff(a);
    let fb = diff(b);
    if !(fa * fb < 0.0) {
        return Err(Error::NoCrossingInRange {
            pair: format!("({},{})/({},{})", upper.0, upper.1, lower.0, lower.1),
            lo: b_lo,
            hi: b_hi,
        });
    }
    let mut fa = fa;
    while b - a > tol {
        let mid = 0.5 * (a + b);
        let fm = diff(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == fa.signum() {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    Ok(0.5 * (a + b))
}

/// Minimum overlap below which a branch is considered lost.
pub const TRACKING_THRESHOLD: f64 = 0.5;

/// Follows branches through a sweep by maximal eigenvector overlap between
/// successive points. `start` holds eigen-indices at the first point; the
/// result holds one index per point for each branch.
pub fn track_branches(spectra: &[CoupledSpectrum], start: &[usize]) -> Result<Vec<Vec<usize>>> {
    let mut paths: Vec<Vec<usize>> = start.iter().map(|&k| vec![k]).collect();
    for p in 1..spectra.len() {
        let prev = &spectra[p - 1];
        let cur = &spectra[p];
        // overlaps of every branch against every current eigenvector
        let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
        for (b, path) in paths.iter().enumerate() {
            let v = prev.eigenvectors.column(*path.last().unwrap());
            let ov = cur.eigenvectors.tr_mul(&v);
            for (k, o) in ov.iter().enumerate() {
                candidates.push((o.abs(), b, k));
            }
        }
        candidates.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
        let mut chosen: Vec<Option<(usize, f64)>> = vec![None; paths.len()];
        let mut taken = vec![false; cur.len()];
        for (o, b, k) in candidates {
            if chosen[b].is_none() && !taken[k] {
                chosen[b] = Some((k, o));
                taken[k] = true;
            }
            if chosen.iter().all(Option::is_some) {
                break;
            }
        }
        for (b, c) in chosen.into_iter().enumerate() {
            let (k, o) = c.expect("every branch gets a candidate");
            if o < TRACKING_THRESHOLD {
                return Err(Error::BranchTrackingLost { point: p, overlap: o });
            }
            paths[b].push(k);
        }
    }
    Ok(paths)
}

/// The two eigen-indices with the largest weight on `span{a, b}`, ordered by energy.
pub fn pair_states(spectrum: &CoupledSpectrum, a: Level, b: Level) -> (usize, usize) {
    let mut w: Vec<(f64, usize)> =
        (0..spectrum.len()).map(|k| (spectrum.weight_on(k, &[a, b]), k)).collect();
    w.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)));
    let (k1, k2) = (w[0].1, w[1].1);
    if spectrum.eigenvalues[k1] <= spectrum.eigenvalues[k2] {
        (k1, k2)
    } else {
        (k2, k1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapResult {
    /// T
    pub b_z: f64,
    /// Scaled energy.
    pub gap: f64,
    pub gap_ghz: f64,
}

/// Minimum separation of the dressed branches seeded on `a`/`b` at the first
/// sweep point, tracked by eigenvector overlap across `b_z_values`.
pub fn minimum_gap(spectra: &[CoupledSpectrum], b_z_values: &[f64], a: Level, b: Level) -> Result<GapResult> {
    if spectra.len() != b_z_values.len() || spectra.len() < 3 {
        return Err(invalid("sweep", "need at least three points with matching field values"));
    }
    let (k1, k2) = pair_states(&spectra[0], a, b);
    let paths = track_branches(spectra, &[k1, k2])?;
    let gaps: Vec<f64> = spectra
        .iter()
        .enumerate()
        .map(|(p, s)| (s.eigenvalues[paths[0][p]] - s.eigenvalues[paths[1][p]]).abs())
        .collect();
    let p = gaps
        .iter()
        .enumerate()
        .min_by(|x, y| x.1.total_cmp(y.1))
        .map(|(i, _)| i)
        .unwrap();
    let (mut bz, mut gap) = (b_z_values[p], gaps[p]);
    if p > 0 && p + 1 < gaps.len() {
        // gap² is quadratic in the detuning near an avoided crossing
        let (x0, x1, x2) = (b_z_values[p - 1], b_z_values[p], b_z_values[p + 1]);
        let (y0, y1, y2) = (gaps[p - 1].powi(2), gaps[p].powi(2), gaps[p + 1].powi(2));
        let d01 = (y1 - y0) / (x1 - x0);
        let d12 = (y2 - y1) / (x2 - x1);
        let curv = (d12 - d01) / (x2 - x0);
        if curv > 0.0 {
            let xm = 0.5 * (x0 + x1) - d01 / (2.0 * curv);
            let xm = xm.clamp(x0, x2);
            let ym = y1 + d01 * (xm - x1) + curv * (xm - x0) * (xm - x1) - d01 * 0.0;
            // evaluate the interpolating parabola at xm
            let ym = ym.min(y0 + d01 * (xm - x0) + curv * (xm - x0) * (xm - x1));
            bz = xm;
            gap = ym.max(0.0).sqrt().min(gap);
        }
    }
    Ok(GapResult { b_z: bz, gap, gap_ghz: spectra[0].scale.energy_to_ghz(gap) })
}

/// Largest eigenvalue change (GHz) between bases `l_max` and `l_max_hi`, over
/// states below the `(4,0)` level (or the top level when `n_max < 4`) whose
/// dominant Landau index is at most `l_max / 2`. States are matched by
/// eigenvector overlap.
pub fn truncation_drift(
    vs: &VerticalSpectrum,
    cfg: &FieldConfiguration,
    n_max: usize,
    l_max: usize,
    l_max_hi: usize,
) -> Result<f64> {
    let small = ProductBasis::new(n_max, l_max)?;
    let large = ProductBasis::new(n_max, l_max_hi)?;
    let a = solve_coupled(vs, cfg, &small, DiamagneticMode::Full)?;
    let b = solve_coupled(vs, cfg, &large, DiamagneticMode::Full)?;
    let ceiling = vs.energy(n_max.min(4));
    let mut worst = 0.0_f64;
    for k in 0..a.len() {
        if a.eigenvalues[k] >= ceiling {
            break;
        }
        let ((_, l), _) = a.dominant(k);
        if l > l_max / 2 {
            continue;
        }
        // embed into the larger basis
        let mut best = (0.0, 0usize);
        for j in 0..b.len() {
            let mut o = 0.0;
            for i in 0..small.size() {
                let lv = small.label(i);
                o += a.eigenvectors[(i, k)] * b.eigenvectors[(large.index(lv), j)];
            }
            if o.abs() > best.0 {
                best = (o.abs(), j);
            }
        }
        worst = worst.max((a.eigenvalues[k] - b.eigenvalues[best.1]).abs());
    }
    Ok(a.scale.energy_to_ghz(worst))
}

/// CSV rows `(sweep_value, k, energy_ghz, dominant_n, dominant_l, dominant_weight)`
/// for the lowest `levels` eigenvalues of each spectrum.
pub fn write_spectrum_csv<W: Write>(
    out: W,
    sweep_name: &str,
    rows: &[(f64, &CoupledSpectrum)],
    levels: usize,
) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([sweep_name, "k", "energy_ghz", "dominant_n", "dominant_l", "dominant_weight"])?;
    for (x, s) in rows {
        for k in 0..levels.min(s.len()) {
            let ((n, l), wt) = s.dominant(k);
            w.write_record(&[
                x.to_string(),
                k.to_string(),
                s.energy_ghz(k).to_string(),
                n.to_string(),
                l.to_string(),
                wt.to_string(),
            ])?;
        }
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::{constants::V_PER_CM, Isotope, MaterialProperties};
    use crate::vertical::{solve_vertical, GridSpec};

    fn vs15() -> VerticalSpectrum {
        let m = MaterialProperties::default_for(Isotope::He3);
        solve_vertical(&m, 15.0 * V_PER_CM, 6, GridSpec::new(150.0, 6000)).unwrap()
    }

    #[test]
    fn basis_index_is_bijective() {
        let b = ProductBasis::new(6, 50).unwrap();
        assert_eq!(b.size(), 306);
        for i in 0..b.size() {
            assert_eq!(b.index(b.label(i)), i);
        }
        assert_eq!(b.label(0), (1, 0));
        assert_eq!(b.label(51), (2, 0));
    }

    #[test]
    fn zero_coupling_is_diagonal_fan() {
        let vs = vs15();
        let cfg = FieldConfiguration::lab(15.0, 1.0, 0.0, 0.3).unwrap();
        let basis = ProductBasis::new(3, 4).unwrap();
        let h = assemble_hamiltonian(&vs, &cfg, &basis).unwrap();
        let hw = vs.scale().cyclotron_energy(1.0);
        for i in 0..basis.size() {
            for j in 0..basis.size() {
                let (n, l) = basis.label(i);
                let expect = if i == j { vs.energy(n) + hw * l as f64 } else { 0.0 };
                assert_eq!(h[(i, j)], expect);
            }
        }
    }

    #[test]
    fn coupling_block_selection_rule() {
        let vs = vs15();
        let cfg = FieldConfiguration::lab(15.0, 1.0, 0.3, 0.3).unwrap();
        let basis = ProductBasis::new(4, 6).unwrap();
        let h = assemble_hamiltonian(&vs, &cfg, &basis).unwrap();
        let h_dia = assemble_hamiltonian(&vs, &cfg.with_b_y(0.0).unwrap(), &basis).unwrap();
        let fs = FieldScales::new(&vs.scale(), &cfg).unwrap();
        for i in 0..basis.size() {
            for j in 0..basis.size() {
                let ((n, l), (m, lp)) = (basis.label(i), basis.label(j));
                let hij = h[(i, j)] - h_dia[(i, j)];
                if l == lp {
                    assert!((hij - fs.diamagnetic * vs.z2(n, m)).abs() < 1e-15);
                } else if lp == l + 1 {
                    let g = fs.coupling * vs.z(n, m);
                    assert!((hij - g * ((l + 1) as f64).sqrt()).abs() < 1e-15);
                } else if l == lp + 1 {
                    assert!((hij - fs.coupling * vs.z(n, m) * (l as f64).sqrt()).abs() < 1e-15);
                } else {
                    assert_eq!(hij, 0.0);
                }
                assert_eq!(h[(i, j)], h[(j, i)]);
            }
        }
    }

    #[test]
    fn two_by_two_closed_form() {
        let (a, b, g) = (1.3, -0.4, 0.7);
        let (vals, _) = symmetric_eigen(DMatrix::from_row_slice(2, 2, &[a, g, g, b])).unwrap();
        let r = ((a - b) * (a - b) / 4.0 + g * g).sqrt();
        assert!((vals[0] - ((a + b) / 2.0 - r)).abs() < 1e-14);
        assert!((vals[1] - ((a + b) / 2.0 + r)).abs() < 1e-14);
    }

    #[test]
    fn basis_mismatch_is_reported() {
        let vs = vs15();
        let cfg = FieldConfiguration::lab(15.0, 1.0, 0.1, 0.3).unwrap();
        let too_big = ProductBasis::new(7, 3).unwrap();
        assert!(matches!(assemble_hamiltonian(&vs, &cfg, &too_big), Err(Error::BasisMismatch(_))));
        let other_field = FieldConfiguration::lab(16.0, 1.0, 0.1, 0.3).unwrap();
        assert!(matches!(
            assemble_hamiltonian(&vs, &other_field, &ProductBasis::new(3, 3).unwrap()),
            Err(Error::BasisMismatch(_))
        ));
    }

    #[test]
    fn coupling_without_perpendicular_field_is_degenerate() {
        let vs = vs15();
        let cfg = FieldConfiguration::lab(15.0, 0.0, 0.1, 0.3).unwrap();
        assert!(matches!(
            assemble_hamiltonian(&vs, &cfg, &ProductBasis::new(3, 3).unwrap()),
            Err(Error::DegenerateField(_))
        ));
    }

    #[test]
    fn same_manifold_never_crosses() {
        let vs = vs15();
        let err = find_crossing(&vs, (1, 1), (1, 0), 0.1, 3.0, 1e-4).unwrap_err();
        assert!(matches!(err, Error::NoCrossingInRange { .. }));
    }

    #[test]
    fn gap_vanishes_without_coupling() {
        let vs = vs15();
        let b_star = find_crossing(&vs, (2, 1), (3, 0), 0.3, 2.0, 1e-6).unwrap();
        let basis = ProductBasis::new(4, 6).unwrap();
        let bz: Vec<f64> = (0..21).map(|i| b_star - 0.05 + 0.005 * i as f64).collect();
        let cfgs: Vec<_> =
            bz.iter().map(|&b| FieldConfiguration::lab(15.0, b, 0.0, 0.3).unwrap()).collect();
        let spectra: Vec<_> =
            sweep(&vs, &cfgs, &basis, DiamagneticMode::Full).into_iter().collect::<Result<_>>().unwrap();
        let gap = minimum_gap(&spectra, &bz, (2, 1), (3, 0)).unwrap();
        assert!(gap.gap_ghz.abs() < 1e-6, "{gap:?}");
        assert!((gap.b_z - b_star).abs() < 1e-3);
    }
}
