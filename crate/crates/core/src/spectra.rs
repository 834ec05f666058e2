//! Reference eigenvalue solvers and index recovery.
//!
//! Two eigenproblems back the indicator peaks: the plate-buckling problem
//! `Delta(n^{-1} Delta w) = -lambda Delta w` on `Omega_b` with clamped
//! boundary conditions (ZIM background) and the cavity problem
//! `Delta w + k^2 n w = 0` with a Dirichlet or Robin condition (obstacle
//! background). Both are discretized on a uniform lattice with the 5-point
//! Laplacian and zero extension outside `Omega_b`; analytic disk references
//! come from Bessel-zero characteristic equations.

use crate::error::{CoreError, Result};
use crate::geometry::{BoundaryCondition, MediumSpec, Point, Shape};
use crate::glsm::PeakList;
use crate::linalg::{banded_pencil_smallest_eigs, gen_symdef_eig, RMat, SymBanded};
use crate::special::{bessel_j, bessel_j_deriv, bessel_j_zero, bisect};

/// Eigenproblem identity carried by every spectrum.
#[derive(Debug, Clone, PartialEq)]
pub enum ProblemTag {
    Buckling,
    Cavity(BoundaryCondition),
}

/// Ascending eigenvalues of one discretized (or analytic) eigenproblem.
/// For the cavity problem the values are `k^2`.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub problem: ProblemTag,
    pub domain: String,
    pub index: String,
    pub eigenvalues: Vec<f64>,
    /// Grid spacing used; 0 for analytic references.
    pub h: f64,
}

impl Spectrum {
    fn validated(self) -> Result<Spectrum> {
        for w in self.eigenvalues.windows(2) {
            if w[1] < w[0] - 1e-9 * w[0].abs().max(1.0) {
                return Err(CoreError::backend(
                    "spectrum",
                    format!("eigenvalues out of order: {} then {}", w[0], w[1]),
                ));
            }
        }
        if let Some(&first) = self.eigenvalues.first() {
            if first <= 0.0 {
                return Err(CoreError::backend(
                    "spectrum",
                    format!("nonpositive leading eigenvalue {first}"),
                ));
            }
        }
        Ok(self)
    }
}

/// Above this many lattice unknowns the solvers switch from dense LAPACK to
/// the banded Cholesky + subspace-iteration path.
const DENSE_CUTOFF: usize = 1600;
const MIN_CELLS_ACROSS: f64 = 20.0;

/// Uniform lattice over `Omega_b` with the stencils shared by the buckling
/// and cavity discretizations.
pub struct LatticeProblem {
    h: f64,
    /// extended lattice width/height (one ghost layer around the box)
    ext_nx: usize,
    ext_ny: usize,
    /// interior index per extended node, usize::MAX if not interior
    interior_of: Vec<usize>,
    /// extended node id per interior index
    node_of: Vec<usize>,
    /// 1/n at every stencil center (interior and ring), with center node id
    centers: Vec<(usize, f64)>,
    /// n at each interior node
    n_interior: Vec<f64>,
}

impl LatticeProblem {
    pub fn new(omega_b: &Shape, n: &MediumSpec, h: f64) -> Result<LatticeProblem> {
        if !(h > 0.0) {
            return Err(CoreError::invalid("lattice spacing must be positive"));
        }
        let bb = omega_b.bounding_box();
        let wx = bb.x_max - bb.x_min;
        let wy = bb.y_max - bb.y_min;
        if wx.min(wy) / h < MIN_CELLS_ACROSS {
            return Err(CoreError::invalid(format!(
                "grid too coarse: {:.1} cells across, need at least {}",
                wx.min(wy) / h,
                MIN_CELLS_ACROSS
            )));
        }
        let nx = (wx / h).ceil() as usize;
        let ny = (wy / h).ceil() as usize;
        let ext_nx = nx + 2;
        let ext_ny = ny + 2;
        let pos = |i: usize, j: usize| -> Point {
            Point::new(
                bb.x_min + (i as f64 - 0.5) * h,
                bb.y_min + (j as f64 - 0.5) * h,
            )
        };
        let mut interior_of = vec![usize::MAX; ext_nx * ext_ny];
        let mut node_of = Vec::new();
        let mut n_interior = Vec::new();
        for j in 0..ext_ny {
            for i in 0..ext_nx {
                let p = pos(i, j);
                if omega_b.contains(p) {
                    let id = j * ext_nx + i;
                    interior_of[id] = node_of.len();
                    node_of.push(id);
                    let nv = n.value_at(p);
                    if !(nv > 0.0) {
                        return Err(CoreError::invalid(format!(
                            "index must be positive on omega_b, got {nv}"
                        )));
                    }
                    n_interior.push(nv);
                }
            }
        }
        if node_of.is_empty() {
            return Err(CoreError::invalid("no lattice nodes inside omega_b"));
        }
        // stencil centers: interior nodes plus the ring of exterior nodes
        // touching an interior node (zero extension outside omega_b)
        let mut centers = Vec::new();
        for j in 0..ext_ny {
            for i in 0..ext_nx {
                let id = j * ext_nx + i;
                if interior_of[id] != usize::MAX {
                    centers.push((id, 1.0 / n_interior[interior_of[id]]));
                    continue;
                }
                // ring node: the index weight is taken from the interior
                // side of the boundary (n is only defined on omega_b)
                let mut sum = 0.0;
                let mut cnt = 0usize;
                for nb in neighbor_ids(id, ext_nx, ext_ny).into_iter().flatten() {
                    if interior_of[nb] != usize::MAX {
                        sum += n_interior[interior_of[nb]];
                        cnt += 1;
                    }
                }
                if cnt > 0 {
                    centers.push((id, cnt as f64 / sum));
                }
            }
        }
        Ok(LatticeProblem {
            h,
            ext_nx,
            ext_ny,
            interior_of,
            node_of,
            centers,
            n_interior,
        })
    }

    pub fn num_unknowns(&self) -> usize {
        self.node_of.len()
    }

    /// Row of the extended Laplacian at center node `id`: pairs of
    /// (interior index, coefficient), zero extension elsewhere.
    fn laplacian_row(&self, id: usize) -> Vec<(usize, f64)> {
        let inv_h2 = 1.0 / (self.h * self.h);
        let mut row = Vec::with_capacity(5);
        if self.interior_of[id] != usize::MAX {
            row.push((self.interior_of[id], -4.0 * inv_h2));
        }
        for nb in neighbor_ids(id, self.ext_nx, self.ext_ny).into_iter().flatten() {
            if self.interior_of[nb] != usize::MAX {
                row.push((self.interior_of[nb], inv_h2));
            }
        }
        row
    }

    /// Exact half-bandwidth of the buckling stiffness matrix.
    fn bandwidth(&self) -> usize {
        let mut bw = 0;
        for &(id, _) in &self.centers {
            let row = self.laplacian_row(id);
            for a in &row {
                for b in &row {
                    bw = bw.max(a.0.abs_diff(b.0));
                }
            }
        }
        bw
    }

    /// Stiffness `A = L_r^T diag(1/n) L_r` accumulated through `add`.
    fn assemble_stiffness(&self, mut add: impl FnMut(usize, usize, f64)) {
        for &(id, inv_n) in &self.centers {
            let row = self.laplacian_row(id);
            for &(i, ci) in &row {
                for &(j, cj) in &row {
                    if j <= i {
                        add(i, j, inv_n * ci * cj);
                    }
                }
            }
        }
    }

    /// `B = -L` on interior nodes (symmetric positive definite).
    fn assemble_neg_laplacian(&self, mut add: impl FnMut(usize, usize, f64)) {
        let inv_h2 = 1.0 / (self.h * self.h);
        for (idx, &id) in self.node_of.iter().enumerate() {
            add(idx, idx, 4.0 * inv_h2);
            for nb in neighbor_ids(id, self.ext_nx, self.ext_ny).into_iter().flatten() {
                let other = self.interior_of[nb];
                if other != usize::MAX && other < idx {
                    add(idx, other, -inv_h2);
                }
            }
        }
    }

    /// `-L` for the cavity problem: a missing neighbor is replaced by the
    /// reflected ghost value `-w` so the Dirichlet wall sits half a cell
    /// beyond the last interior node instead of a full cell.
    fn assemble_cavity_laplacian(&self, mut add: impl FnMut(usize, usize, f64)) {
        let inv_h2 = 1.0 / (self.h * self.h);
        for (idx, &id) in self.node_of.iter().enumerate() {
            let mut diag = 0.0;
            for nb in neighbor_ids(id, self.ext_nx, self.ext_ny).into_iter().flatten() {
                let other = self.interior_of[nb];
                if other != usize::MAX {
                    diag += inv_h2;
                    if other < idx {
                        add(idx, other, -inv_h2);
                    }
                } else {
                    diag += 2.0 * inv_h2;
                }
            }
            add(idx, idx, diag);
        }
    }

    fn neg_laplacian_mul(&self, x: &[f64], y: &mut [f64]) {
        let inv_h2 = 1.0 / (self.h * self.h);
        for (idx, &id) in self.node_of.iter().enumerate() {
            let mut acc = 4.0 * x[idx];
            for nb in neighbor_ids(id, self.ext_nx, self.ext_ny).into_iter().flatten() {
                let other = self.interior_of[nb];
                if other != usize::MAX {
                    acc -= x[other];
                }
            }
            y[idx] = acc * inv_h2;
        }
    }

    fn dense_from(&self, assemble: impl FnOnce(&mut dyn FnMut(usize, usize, f64))) -> RMat {
        let n = self.num_unknowns();
        let mut m = RMat::zeros((n, n));
        assemble(&mut |i, j, v| {
            m[[i, j]] += v;
            if i != j {
                m[[j, i]] += v;
            }
        });
        m
    }

    /// Discrete Rayleigh quotient `(n^{-1} Delta w, Delta w) / ||grad w||^2`
    /// with the same stencils as the eigen-solver.
    pub fn rayleigh_quotient(&self, w: &[f64]) -> Result<f64> {
        if w.len() != self.num_unknowns() {
            return Err(CoreError::invalid("rayleigh_quotient dimension mismatch"));
        }
        let mut num = 0.0;
        for &(id, inv_n) in &self.centers {
            let lw: f64 = self
                .laplacian_row(id)
                .iter()
                .map(|&(i, c)| c * w[i])
                .sum();
            num += inv_n * lw * lw;
        }
        let mut bw = vec![0.0; w.len()];
        self.neg_laplacian_mul(w, &mut bw);
        let den: f64 = w.iter().zip(&bw).map(|(a, b)| a * b).sum();
        if den <= 0.0 {
            return Err(CoreError::invalid(
                "rayleigh_quotient needs a nonzero function",
            ));
        }
        Ok(num / den)
    }

    /// Smallest `count` buckling eigenpairs `A w = lambda B w`.
    pub fn buckling_eigenpairs(&self, count: usize) -> Result<Vec<(f64, Vec<f64>)>> {
        let n = self.num_unknowns();
        if count == 0 || count > n {
            return Err(CoreError::invalid(format!(
                "requested {count} eigenvalues from {n} unknowns"
            )));
        }
        if n <= DENSE_CUTOFF {
            let a = self.dense_from(|add| self.assemble_stiffness(add));
            let b = self.dense_from(|add| self.assemble_neg_laplacian(add));
            let (vals, vecs) = gen_symdef_eig(&a, &b, count)?;
            Ok(vals
                .into_iter()
                .enumerate()
                .map(|(c, v)| (v, vecs.column(c).to_vec()))
                .collect())
        } else {
            let bw = self.bandwidth();
            let mut a = SymBanded::zeros(n, bw);
            self.assemble_stiffness(|i, j, v| a.add(i, j, v));
            let chol = a.cholesky()?;
            let (vals, vecs) = banded_pencil_smallest_eigs(
                &chol,
                &|x, y| self.neg_laplacian_mul(x, y),
                n,
                count,
                1e-10,
                400,
            )?;
            Ok(vals.into_iter().zip(vecs).collect())
        }
    }

    /// Smallest `count` cavity eigenpairs `-L w = k^2 diag(n) w` (Dirichlet
    /// by lattice masking).
    pub fn cavity_eigenpairs(&self, count: usize) -> Result<Vec<(f64, Vec<f64>)>> {
        let n = self.num_unknowns();
        if count == 0 || count > n {
            return Err(CoreError::invalid(format!(
                "requested {count} eigenvalues from {n} unknowns"
            )));
        }
        if n <= DENSE_CUTOFF {
            let k = self.dense_from(|add| self.assemble_cavity_laplacian(add));
            let mut mass = RMat::zeros((n, n));
            for (i, &nv) in self.n_interior.iter().enumerate() {
                mass[[i, i]] = nv;
            }
            let (vals, vecs) = gen_symdef_eig(&k, &mass, count)?;
            Ok(vals
                .into_iter()
                .enumerate()
                .map(|(c, v)| (v, vecs.column(c).to_vec()))
                .collect())
        } else {
            // bandwidth of -L alone: nearest lattice row
            let mut bw = 0;
            for (idx, &id) in self.node_of.iter().enumerate() {
                for nb in neighbor_ids(id, self.ext_nx, self.ext_ny).into_iter().flatten() {
                    let other = self.interior_of[nb];
                    if other != usize::MAX {
                        bw = bw.max(idx.abs_diff(other));
                    }
                }
            }
            let mut k = SymBanded::zeros(n, bw);
            self.assemble_cavity_laplacian(|i, j, v| k.add(i, j, v));
            let chol = k.cholesky()?;
            let n_int = self.n_interior.clone();
            let (vals, vecs) = banded_pencil_smallest_eigs(
                &chol,
                &move |x: &[f64], y: &mut [f64]| {
                    for ((yo, xi), nv) in y.iter_mut().zip(x).zip(&n_int) {
                        *yo = xi * nv;
                    }
                },
                n,
                count,
                1e-10,
                400,
            )?;
            Ok(vals.into_iter().zip(vecs).collect())
        }
    }
}

fn neighbor_ids(id: usize, nx: usize, ny: usize) -> [Option<usize>; 4] {
    let i = id % nx;
    let j = id / nx;
    [
        (i > 0).then(|| id - 1),
        (i + 1 < nx).then(|| id + 1),
        (j > 0).then(|| id - nx),
        (j + 1 < ny).then(|| id + nx),
    ]
}

/// Smallest `count` eigenvalues of the clamped plate-buckling problem
/// `Delta(n^{-1} Delta w) = -lambda Delta w` on `omega_b`.
pub fn buckling_spectrum(
    omega_b: &Shape,
    n: &MediumSpec,
    h: f64,
    count: usize,
) -> Result<Spectrum> {
    let lattice = LatticeProblem::new(omega_b, n, h)?;
    let pairs = lattice.buckling_eigenpairs(count)?;
    Spectrum {
        problem: ProblemTag::Buckling,
        domain: format!("{omega_b:?}"),
        index: format!("{n:?}"),
        eigenvalues: pairs.into_iter().map(|(v, _)| v).collect(),
        h,
    }
    .validated()
}

/// Smallest `count` values `k^2` of the cavity problem
/// `Delta w + k^2 n w = 0`, `B(w) = 0` on the boundary.
pub fn cavity_spectrum(
    omega_b: &Shape,
    n: &MediumSpec,
    bc: BoundaryCondition,
    h: f64,
    count: usize,
) -> Result<Spectrum> {
    let eigenvalues = match bc {
        BoundaryCondition::Dirichlet => {
            let lattice = LatticeProblem::new(omega_b, n, h)?;
            lattice
                .cavity_eigenpairs(count)?
                .into_iter()
                .map(|(v, _)| v)
                .collect()
        }
        BoundaryCondition::Robin { gamma } => robin_disk_cavity(omega_b, n, gamma, count)?,
    };
    Spectrum {
        problem: ProblemTag::Cavity(bc),
        domain: format!("{omega_b:?}"),
        index: format!("{n:?}"),
        eigenvalues,
        h: if matches!(bc, BoundaryCondition::Robin { .. }) {
            0.0
        } else {
            h
        },
    }
    .validated()
}

/// Constant index value of `n` on a disk, or an error if it varies.
fn constant_index_on_disk(center: Point, radius: f64, n: &MediumSpec) -> Result<f64> {
    let probe = n.value_at(center);
    for t in 0..16 {
        let ang = t as f64 * std::f64::consts::PI / 8.0;
        for frac in [0.3, 0.6, 0.9] {
            let p = Point::new(
                center.x + frac * radius * ang.cos(),
                center.y + frac * radius * ang.sin(),
            );
            if (n.value_at(p) - probe).abs() > 1e-12 {
                return Err(CoreError::invalid(
                    "Robin cavity solver requires a constant index on the disk",
                ));
            }
        }
    }
    if !(probe > 0.0) {
        return Err(CoreError::invalid("index must be positive"));
    }
    Ok(probe)
}

/// Cavity Robin eigenvalues on a disk by per-mode root finding on
/// `sqrt(n) k J_m'(sqrt(n) k R) + gamma J_m(sqrt(n) k R) = 0`;
/// modes `m >= 1` count twice.
fn robin_disk_cavity(omega_b: &Shape, n: &MediumSpec, gamma: f64, count: usize) -> Result<Vec<f64>> {
    let (center, radius) = match omega_b {
        Shape::Disk { center, radius } => (*center, *radius),
        _ => {
            return Err(CoreError::UnsupportedShape(
                "Robin cavity spectra require a disk".into(),
            ))
        }
    };
    let nv = constant_index_on_disk(center, radius, n)?;
    let sq = nv.sqrt();
    // characteristic in x = sqrt(n) k R
    let char_fn = |m: usize, x: f64| (x / radius) * bessel_j_deriv(m, x) + gamma * bessel_j(m, x);
    let mut x_max = 15.0;
    loop {
        let mut vals: Vec<f64> = Vec::new();
        let mut m = 0usize;
        loop {
            let roots = scan_all_roots(|x| char_fn(m, x), 0.05, x_max, 0.05);
            if roots.is_empty() && m as f64 > x_max {
                break;
            }
            for r in roots {
                let k = r / (sq * radius);
                vals.push(k * k);
                if m >= 1 {
                    vals.push(k * k);
                }
            }
            m += 1;
        }
        vals.sort_by(|a, b| a.total_cmp(b));
        if vals.len() >= count {
            vals.truncate(count);
            return Ok(vals);
        }
        x_max *= 1.6;
        if x_max > 1e4 {
            return Err(CoreError::NoConvergence(
                "could not find enough Robin cavity eigenvalues".into(),
            ));
        }
    }
}

/// All sign-change roots of `f` on `(start, stop)` with the given scan step.
fn scan_all_roots(f: impl Fn(f64) -> f64, start: f64, stop: f64, step: f64) -> Vec<f64> {
    let mut roots = Vec::new();
    let mut x = start;
    let mut fx = f(x);
    while x < stop {
        let x2 = (x + step).min(stop);
        let f2 = f(x2);
        if fx == 0.0 {
            roots.push(x);
        } else if fx.signum() != f2.signum() && f2 != 0.0 {
            roots.push(bisect(&f, x, x2, 80));
        }
        x = x2;
        fx = f2;
    }
    roots
}

/// Analytic clamped-buckling spectrum of the unit disk with `n = 1`.
///
/// The radial solutions `J_m(sqrt(lambda) r)` and `r^m` reduce the clamped
/// conditions to `J_{m+1}(sqrt(lambda)) = 0`, so the eigenvalues are
/// `j_{m,s}^2` for `m >= 1`, with multiplicity two for `m >= 2`.
pub fn disk_buckling_reference(count: usize) -> Spectrum {
    let mut vals: Vec<f64> = Vec::new();
    for m in 1..=(count + 2) {
        for s in 1..=count {
            let z = bessel_j_zero(m, s);
            vals.push(z * z);
            if m >= 2 {
                vals.push(z * z);
            }
        }
    }
    vals.sort_by(|a, b| a.total_cmp(b));
    vals.truncate(count);
    Spectrum {
        problem: ProblemTag::Buckling,
        domain: "unit disk".into(),
        index: "n = 1".into(),
        eigenvalues: vals,
        h: 0.0,
    }
}

/// Least-squares fit of `lambda(h) = lambda* + C h` over matched samples;
/// returns the extrapolated `lambda*`.
pub fn richardson_extrapolate(h: &[f64], lambda: &[f64]) -> Result<f64> {
    if h.len() != lambda.len() || h.len() < 2 {
        return Err(CoreError::invalid(
            "richardson_extrapolate needs >= 2 matched samples",
        ));
    }
    let n = h.len() as f64;
    let sh: f64 = h.iter().sum();
    let sl: f64 = lambda.iter().sum();
    let shh: f64 = h.iter().map(|v| v * v).sum();
    let shl: f64 = h.iter().zip(lambda).map(|(a, b)| a * b).sum();
    let det = n * shh - sh * sh;
    if det.abs() < 1e-300 {
        return Err(CoreError::invalid("degenerate h samples"));
    }
    let slope = (n * shl - sh * sl) / det;
    Ok((sl - slope * sh) / n)
}

/// Matched peaks, per-peak index estimates, and the aggregate constant-index
/// estimate with its essential bounds.
#[derive(Debug, Clone)]
pub struct RecoveryReport {
    /// `(k_hat, lambda_ref)` pairs in ascending peak order.
    pub pairs: Vec<(f64, f64)>,
    /// `lambda_ref / k_hat^2` per pair.
    pub estimates: Vec<f64>,
    /// Median of the estimates.
    pub n_hat: f64,
    /// `ess inf n <= min_ratio`.
    pub min_ratio: f64,
    /// `ess sup n >= max_ratio`.
    pub max_ratio: f64,
}

fn median_of(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Match detected peaks to an `n = 1` reference spectrum and invert
/// `n = lambda_p(1) / lambda_p(n)` under the constant-index assumption.
pub fn recover_index(peaks: &PeakList, reference: &Spectrum) -> Result<RecoveryReport> {
    if peaks.peaks.is_empty() {
        return Err(CoreError::NoPeaks);
    }
    let refs = &reference.eigenvalues;
    if refs.is_empty() {
        return Err(CoreError::invalid("empty reference spectrum"));
    }
    let mut pairs: Vec<(f64, f64)> = Vec::new();
    let mut used = 0usize; // references below this index are consumed
    let mut n_hat = refs[0] / (peaks.peaks[0].k * peaks.peaks[0].k);
    for peak in &peaks.peaks {
        let k2 = peak.k * peak.k;
        if used >= refs.len() {
            break;
        }
        // nearest unused reference slot under the current estimate,
        // order-preserving
        let mut best = used;
        let mut best_err = f64::INFINITY;
        for (p, &r) in refs.iter().enumerate().skip(used) {
            let err = (r / k2 - n_hat).abs();
            if err < best_err {
                best_err = err;
                best = p;
            }
        }
        pairs.push((peak.k, refs[best]));
        used = best + 1;
        let ratios: Vec<f64> = pairs.iter().map(|&(k, r)| r / (k * k)).collect();
        n_hat = median_of(ratios);
    }
    let estimates: Vec<f64> = pairs.iter().map(|&(k, r)| r / (k * k)).collect();
    let min_ratio = estimates.iter().copied().fold(f64::INFINITY, f64::min);
    let max_ratio = estimates.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(RecoveryReport {
        pairs,
        estimates: estimates.clone(),
        n_hat: median_of(estimates),
        min_ratio,
        max_ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::glsm::Peak;

    fn unit_disk() -> Shape {
        Shape::disk(0.0, 0.0, 1.0).unwrap()
    }

    fn constant_medium(n: f64) -> MediumSpec {
        MediumSpec::constant(unit_disk(), n).unwrap()
    }

    #[test]
    fn disk_reference_starts_at_j11_squared() {
        let sp = disk_buckling_reference(6);
        let j11 = bessel_j_zero(1, 1);
        assert!((sp.eigenvalues[0] - j11 * j11).abs() < 1e-8);
        // next: j_{2,1}^2 doubly
        let j21 = bessel_j_zero(2, 1);
        assert!((sp.eigenvalues[1] - j21 * j21).abs() < 1e-8);
        assert!((sp.eigenvalues[2] - j21 * j21).abs() < 1e-8);
        for w in sp.eigenvalues.windows(2) {
            assert!(w[1] >= w[0]);
        }
    }

    #[test]
    fn buckling_disk_converges_to_reference() {
        let reference = bessel_j_zero(1, 1).powi(2);
        let n = constant_medium(1.0);
        let mut hs = Vec::new();
        let mut l0 = Vec::new();
        for &h in &[1.0 / 16.0, 1.0 / 24.0, 1.0 / 32.0] {
            let sp = buckling_spectrum(&unit_disk(), &n, h, 1).unwrap();
            hs.push(h);
            l0.push(sp.eigenvalues[0]);
        }
        // errors shrink monotonically under refinement
        assert!((l0[1] - reference).abs() < (l0[0] - reference).abs());
        assert!((l0[2] - reference).abs() < (l0[1] - reference).abs());
        let extrapolated = richardson_extrapolate(&hs, &l0).unwrap();
        let rel = (extrapolated - reference).abs() / reference;
        assert!(rel < 0.02, "extrapolated {extrapolated}, reference {reference}, rel {rel}");
    }

    #[test]
    fn buckling_scaling_is_exact_on_fixed_grid() {
        let h = 1.0 / 12.0;
        let one = buckling_spectrum(&unit_disk(), &constant_medium(1.0), h, 5).unwrap();
        let two = buckling_spectrum(&unit_disk(), &constant_medium(2.0), h, 5).unwrap();
        for (a, b) in one.eigenvalues.iter().zip(&two.eigenvalues) {
            assert!((a / 2.0 - b).abs() < 1e-9 * a);
        }
    }

    #[test]
    fn buckling_monotone_in_index() {
        let h = 1.0 / 12.0;
        let inner = Shape::disk(0.2, 0.0, 0.4).unwrap();
        let larger = MediumSpec::new(vec![(inner.clone(), 2.5), (unit_disk(), 1.5)]).unwrap();
        let smaller = constant_medium(1.5);
        let sp_large = buckling_spectrum(&unit_disk(), &larger, h, 5).unwrap();
        let sp_small = buckling_spectrum(&unit_disk(), &smaller, h, 5).unwrap();
        for (a, b) in sp_large.eigenvalues.iter().zip(&sp_small.eigenvalues) {
            assert!(a <= &(b * (1.0 + 1e-12)));
        }
    }

    #[test]
    fn buckling_eigen_ratio_bounds() {
        let h = 1.0 / 12.0;
        let inner = Shape::disk(-0.1, 0.2, 0.5).unwrap();
        let medium = MediumSpec::new(vec![(inner, 2.5), (unit_disk(), 1.5)]).unwrap();
        let sp_n = buckling_spectrum(&unit_disk(), &medium, h, 5).unwrap();
        let sp_1 = buckling_spectrum(&unit_disk(), &constant_medium(1.0), h, 5).unwrap();
        for (l1, ln) in sp_1.eigenvalues.iter().zip(&sp_n.eigenvalues) {
            let ratio = l1 / ln;
            assert!(ratio >= 1.5 - 1e-9 && ratio <= 2.5 + 1e-9, "ratio {ratio}");
        }
    }

    #[test]
    fn rayleigh_quotient_matches_eigenvalue() {
        let lattice =
            LatticeProblem::new(&unit_disk(), &constant_medium(2.0), 1.0 / 12.0).unwrap();
        let pairs = lattice.buckling_eigenpairs(3).unwrap();
        for (val, vec) in &pairs {
            let q = lattice.rayleigh_quotient(vec).unwrap();
            assert!((q - val).abs() < 1e-9 * val.max(1.0));
            // variational lower bound
            assert!(q >= pairs[0].0 - 1e-9 * pairs[0].0);
        }
    }

    #[test]
    fn rayleigh_quotient_scaling() {
        let one = LatticeProblem::new(&unit_disk(), &constant_medium(1.0), 1.0 / 12.0).unwrap();
        let three = LatticeProblem::new(&unit_disk(), &constant_medium(3.0), 1.0 / 12.0).unwrap();
        let n = one.num_unknowns();
        let w: Vec<f64> = (0..n).map(|i| ((i * 37 % 11) as f64) - 5.0).collect();
        let q1 = one.rayleigh_quotient(&w).unwrap();
        let q3 = three.rayleigh_quotient(&w).unwrap();
        assert!((q1 / 3.0 - q3).abs() < 1e-12 * q1);
    }

    #[test]
    fn cavity_dirichlet_disk_matches_bessel_zero() {
        let n = constant_medium(2.0);
        let sp = cavity_spectrum(
            &unit_disk(),
            &n,
            BoundaryCondition::Dirichlet,
            1.0 / 64.0,
            1,
        )
        .unwrap();
        let expected = bessel_j_zero(0, 1).powi(2) / 2.0;
        let rel = (sp.eigenvalues[0] - expected).abs() / expected;
        assert!(rel < 0.01, "k^2 {} vs {} (rel {})", sp.eigenvalues[0], expected, rel);
    }

    #[test]
    fn cavity_scaling_is_exact_on_fixed_grid() {
        let h = 1.0 / 20.0;
        let one = cavity_spectrum(&unit_disk(), &constant_medium(1.0), BoundaryCondition::Dirichlet, h, 4)
            .unwrap();
        let three =
            cavity_spectrum(&unit_disk(), &constant_medium(3.0), BoundaryCondition::Dirichlet, h, 4)
                .unwrap();
        for (a, b) in one.eigenvalues.iter().zip(&three.eigenvalues) {
            assert!((a / 3.0 - b).abs() < 1e-9 * a);
        }
    }

    #[test]
    fn robin_large_gamma_approaches_dirichlet() {
        let n = constant_medium(2.0);
        let robin = cavity_spectrum(
            &unit_disk(),
            &n,
            BoundaryCondition::Robin { gamma: 1e6 },
            0.0,
            4,
        )
        .unwrap();
        let sq = 2.0_f64.sqrt();
        // Dirichlet disk values: k = j_{m,s} / sqrt(n), modes m >= 1 doubled
        let mut dirichlet = vec![
            bessel_j_zero(0, 1) / sq,
            bessel_j_zero(1, 1) / sq,
            bessel_j_zero(1, 1) / sq,
            bessel_j_zero(2, 1) / sq,
        ];
        dirichlet.sort_by(|a, b| a.total_cmp(b));
        for (r, d) in robin.eigenvalues.iter().zip(&dirichlet) {
            assert!((r.sqrt() - d).abs() < 1e-3, "{} vs {}", r.sqrt(), d);
        }
    }

    #[test]
    fn coarse_grid_is_rejected() {
        let res = buckling_spectrum(&unit_disk(), &constant_medium(1.0), 0.5, 2);
        assert!(res.is_err());
    }

    #[test]
    fn recover_constant_two() {
        let reference = disk_buckling_reference(4);
        let peaks = PeakList {
            peaks: reference
                .eigenvalues
                .iter()
                .map(|&l| Peak {
                    k: (l / 2.0).sqrt(),
                    prominence: 1.0,
                    width: 0.1,
                })
                .collect(),
        };
        let report = recover_index(&peaks, &reference).unwrap();
        assert!((report.n_hat - 2.0).abs() < 1e-6);
        assert!(report.min_ratio <= 2.0 + 1e-9 && report.max_ratio >= 2.0 - 1e-9);
    }

    #[test]
    fn recover_requires_peaks() {
        let reference = disk_buckling_reference(3);
        let res = recover_index(&PeakList { peaks: vec![] }, &reference);
        assert!(matches!(res, Err(CoreError::NoPeaks)));
    }
}
