//! Generalized linear sampling indicator.
//!
//! For each wavenumber the regularized functional
//! `J_alpha(g) = alpha (T~# g, g) + ||M_art g - phi_z||^2`
//! is minimized exactly through its normal equations, once per sampling
//! point `z`; the penalty values are aggregated into the indicator
//! `I(k) = dA * sum_z (T~# g_z, g_z)`, whose peaks against `k` mark the
//! transmission eigenvalues of the artificial background.

use crate::background::{BackgroundFarfield, SharpOperator};
use crate::error::{CoreError, Result};
use crate::forward::FarfieldMatrix;
use crate::geometry::{DirectionGrid, FarfieldConvention, Point, SamplingGrid};
use crate::linalg::{conj_transpose, hermitian_eig, CluFactor, CMat, CVec};
use num_complex::Complex64;
use rayon::prelude::*;

/// Sign convention for the point-source farfield.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PointSourceConvention {
    /// Farfield of `(i/4) H_0(k|x - z|)` under the run's expansion
    /// convention: `phi_z(theta_s) = gamma_ff e^{-ik theta_s . z}`.
    #[default]
    Derived,
    /// The bare phase `e^{ik theta_s . z}` (no constant, opposite sign),
    /// kept as a switch; peak locations are insensitive to the choice.
    BarePhase,
}

/// Farfield of a point source at `z`, sampled on the observation grid.
pub fn point_source_rhs(
    z: Point,
    k: f64,
    observation: &DirectionGrid,
    convention: PointSourceConvention,
) -> CVec {
    let gamma = FarfieldConvention::gamma_ff(k);
    CVec::from_iter((0..observation.len()).map(|s| {
        let phase = k * observation.unit(s).dot(z);
        match convention {
            PointSourceConvention::Derived => gamma * Complex64::from_polar(1.0, -phase),
            PointSourceConvention::BarePhase => Complex64::from_polar(1.0, phase),
        }
    }))
}

/// Outcome of one regularized solve.
#[derive(Debug, Clone)]
pub struct TikhonovSolveResult {
    pub g: CVec,
    /// `(T~# g, g)`, real and nonnegative up to roundoff.
    pub penalty: f64,
    /// `||M_art g - phi||^2`.
    pub misfit: f64,
    pub alpha: f64,
}

/// Shared per-wavenumber state: the factored normal matrix
/// `alpha T~# + eps I + M^H M` plus the pieces needed for diagnostics.
pub struct GlsmSolver {
    m_art: CMat,
    m_adj: CMat,
    tsharp: CMat,
    factor: CluFactor,
    pub alpha: f64,
    pub ridge: f64,
}

impl GlsmSolver {
    /// `f_art` is subtracted data; the discrete operator is `(2 pi / N) F_art`.
    pub fn new(f_art: &FarfieldMatrix, tsharp: &SharpOperator, alpha: f64) -> Result<GlsmSolver> {
        if !(alpha > 0.0) {
            return Err(CoreError::invalid("tikhonov alpha must be positive"));
        }
        let n = tsharp.dim();
        if f_art.entries.nrows() != n || f_art.entries.ncols() != n {
            return Err(CoreError::IncompatibleOperands(
                "farfield and sharp operator dimensions differ".into(),
            ));
        }
        let w = f_art.incident.weight();
        let m_art = f_art.entries.mapv(|z| w * z);
        let m_adj = conj_transpose(&m_art);
        let ridge = 1e-12 * tsharp.trace() / n as f64;
        let mut normal = tsharp.matrix.mapv(|z| alpha * z) + m_adj.dot(&m_art);
        for i in 0..n {
            normal[[i, i]] += Complex64::new(ridge, 0.0);
        }
        let factor = CluFactor::new(&normal)?;
        Ok(GlsmSolver {
            m_art,
            m_adj,
            tsharp: tsharp.matrix.clone(),
            factor,
            alpha,
            ridge,
        })
    }

    pub fn solve(&self, phi: &CVec) -> Result<TikhonovSolveResult> {
        let rhs = self.m_adj.dot(phi);
        let g = self.factor.solve_vec(&rhs)?;
        let tg = self.tsharp.dot(&g);
        let penalty = g
            .iter()
            .zip(tg.iter())
            .map(|(gi, ti)| (gi.conj() * ti).re)
            .sum::<f64>();
        let resid = self.m_art.dot(&g) - phi;
        let misfit = resid.iter().map(|z| z.norm_sqr()).sum();
        Ok(TikhonovSolveResult {
            g,
            penalty,
            misfit,
            alpha: self.alpha,
        })
    }

    /// `J_alpha(g)` evaluated directly (used by optimality tests).
    pub fn functional(&self, g: &CVec, phi: &CVec) -> f64 {
        let tg = self.tsharp.dot(g);
        let pen: f64 = g
            .iter()
            .zip(tg.iter())
            .map(|(gi, ti)| (gi.conj() * ti).re)
            .sum();
        let resid = self.m_art.dot(g) - phi;
        let mis: f64 = resid.iter().map(|z| z.norm_sqr()).sum();
        self.alpha * pen + mis
    }
}

/// How alpha is chosen at each wavenumber.
#[derive(Debug, Clone, Copy)]
pub enum AlphaRule {
    /// `alpha = alpha0 * ||M_art||^2 / ||T~#||` with spectral norms.
    Relative { alpha0: f64 },
    /// A fixed absolute value for every k.
    Fixed { alpha: f64 },
}

impl Default for AlphaRule {
    fn default() -> Self {
        AlphaRule::Relative { alpha0: 1e-5 }
    }
}

fn spectral_norm_sq_of(m: &CMat) -> Result<f64> {
    // largest eigenvalue of the Hermitian matrix M^H M
    let gram = conj_transpose(m).dot(m);
    let (vals, _) = hermitian_eig(&gram)?;
    Ok(vals.iter().fold(0.0_f64, |a, &v| a.max(v)))
}

fn resolve_alpha(rule: AlphaRule, f_art: &FarfieldMatrix, tsharp: &SharpOperator) -> Result<f64> {
    match rule {
        AlphaRule::Fixed { alpha } => Ok(alpha),
        AlphaRule::Relative { alpha0 } => {
            let w = f_art.incident.weight();
            let op_sq = w * w * spectral_norm_sq_of(&f_art.entries)?;
            let t_norm = tsharp.spectral_norm()?;
            let floor = 1e-300;
            Ok(alpha0 * op_sq.max(floor) / t_norm.max(floor))
        }
    }
}

/// Indicator value at one wavenumber with its diagnostics.
#[derive(Debug, Clone)]
pub struct IndicatorSample {
    pub k: f64,
    pub value: f64,
    pub alpha: f64,
}

/// `I(k) = dA * sum_z (T~# g_z, g_z)` over the sampling grid.
pub fn indicator_at_k(
    data: &FarfieldMatrix,
    background: &BackgroundFarfield,
    sampling: &SamplingGrid,
    rule: AlphaRule,
    convention: PointSourceConvention,
) -> Result<IndicatorSample> {
    let f_art = crate::background::artificial_farfield(data, background)?;
    let tsharp = crate::background::sharp_operator(background)?;
    let alpha = resolve_alpha(rule, &f_art, &tsharp)?;
    let solver = GlsmSolver::new(&f_art, &tsharp, alpha)?;
    let mut total = 0.0;
    for &z in sampling.points() {
        let phi = point_source_rhs(z, data.k, &data.observation, convention);
        let res = solver.solve(&phi)?;
        total += res.penalty.max(0.0);
    }
    Ok(IndicatorSample {
        k: data.k,
        value: sampling.cell_area() * total,
        alpha,
    })
}

/// Sampled indicator curve; per-k solver failures are recorded, not fatal.
#[derive(Debug, Clone)]
pub struct IndicatorCurve {
    pub samples: Vec<IndicatorSample>,
    pub failures: Vec<(f64, String)>,
    pub background: String,
}

impl IndicatorCurve {
    pub fn from_samples(samples: Vec<IndicatorSample>, background: String) -> Result<IndicatorCurve> {
        if samples.is_empty() {
            return Err(CoreError::invalid("indicator curve needs at least one k"));
        }
        for w in samples.windows(2) {
            if !(w[1].k > w[0].k) {
                return Err(CoreError::invalid("indicator k grid must be increasing"));
            }
        }
        Ok(IndicatorCurve {
            samples,
            failures: Vec::new(),
            background,
        })
    }
}

/// Evaluate the indicator over an ascending k grid. `source` produces the
/// data and background farfields for one wavenumber; evaluations run in
/// parallel and are reassembled in grid order.
pub fn indicator_curve<S>(
    k_grid: &[f64],
    source: S,
    sampling: &SamplingGrid,
    rule: AlphaRule,
    convention: PointSourceConvention,
) -> Result<IndicatorCurve>
where
    S: Fn(f64) -> Result<(FarfieldMatrix, BackgroundFarfield)> + Sync,
{
    if k_grid.is_empty() {
        return Err(CoreError::invalid("indicator_curve needs a nonempty k grid"));
    }
    for w in k_grid.windows(2) {
        if !(w[1] > w[0]) {
            return Err(CoreError::invalid("k grid must be strictly increasing"));
        }
    }
    let results: Vec<(f64, std::result::Result<IndicatorSample, String>)> = k_grid
        .par_iter()
        .map(|&k| {
            let out = source(k)
                .and_then(|(data, bg)| indicator_at_k(&data, &bg, sampling, rule, convention))
                .map_err(|e| e.to_string());
            (k, out)
        })
        .collect();
    let mut samples = Vec::with_capacity(k_grid.len());
    let mut failures = Vec::new();
    let mut background = String::new();
    for (k, r) in results {
        match r {
            Ok(s) => samples.push(s),
            Err(msg) => failures.push((k, msg)),
        }
    }
    if samples.is_empty() {
        return Err(CoreError::invalid(format!(
            "all {} wavenumbers failed; first: {}",
            failures.len(),
            failures
                .first()
                .map(|(k, m)| format!("k={k}: {m}"))
                .unwrap_or_default()
        )));
    }
    if let Some((_, msg)) = failures.first() {
        background = format!("partial ({} gaps): {}", failures.len(), msg);
    }
    let mut curve = IndicatorCurve::from_samples(samples, background)?;
    curve.failures = failures;
    Ok(curve)
}

/// One detected peak of the indicator curve.
#[derive(Debug, Clone)]
pub struct Peak {
    /// Parabolically refined abscissa.
    pub k: f64,
    /// Prominence of `log I` at the peak.
    pub prominence: f64,
    /// Approximate half-prominence width in k.
    pub width: f64,
}

#[derive(Debug, Clone)]
pub struct PeakList {
    pub peaks: Vec<Peak>,
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Local maxima of `log I` with prominence at least
/// `prominence_factor * MAD(log I)`, refined by a three-point parabola.
pub fn detect_peaks(curve: &IndicatorCurve, prominence_factor: f64) -> Result<PeakList> {
    let n = curve.samples.len();
    if n < 3 {
        return Err(CoreError::invalid("peak detection needs at least 3 samples"));
    }
    let floor = curve
        .samples
        .iter()
        .map(|s| s.value)
        .filter(|&v| v > 0.0)
        .fold(f64::INFINITY, f64::min);
    let floor = if floor.is_finite() { floor * 1e-3 } else { 1e-300 };
    let y: Vec<f64> = curve.samples.iter().map(|s| s.value.max(floor).ln()).collect();
    let ks: Vec<f64> = curve.samples.iter().map(|s| s.k).collect();

    let mut sorted = y.clone();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let med = median(&sorted);
    let mut dev: Vec<f64> = y.iter().map(|v| (v - med).abs()).collect();
    dev.sort_by(|a, b| a.total_cmp(b));
    let mad = median(&dev);
    let threshold = prominence_factor * mad;

    let mut peaks = Vec::new();
    for i in 1..n - 1 {
        if !(y[i] > y[i - 1] && y[i] >= y[i + 1]) {
            continue;
        }
        // prominence: lowest saddle toward higher ground on each side
        let side_min = |range: Box<dyn Iterator<Item = usize>>| -> f64 {
            let mut low = y[i];
            for j in range {
                if y[j] > y[i] {
                    return low;
                }
                low = low.min(y[j]);
            }
            low
        };
        let left = side_min(Box::new((0..i).rev()));
        let right = side_min(Box::new(i + 1..n));
        let prominence = y[i] - left.max(right);
        if prominence < threshold {
            continue;
        }
        // parabolic refinement in (k, log I)
        let (k0, k1, k2) = (ks[i - 1], ks[i], ks[i + 1]);
        let (y0, y1, y2) = (y[i - 1], y[i], y[i + 1]);
        let denom = (y0 - 2.0 * y1 + y2).abs();
        let k_hat = if denom > 1e-300 {
            let h_l = k1 - k0;
            let h_r = k2 - k1;
            // vertex of the interpolating parabola on a possibly nonuniform stencil
            let num = h_l * h_l * (y1 - y2) - h_r * h_r * (y1 - y0);
            let den = h_l * (y1 - y2) + h_r * (y1 - y0);
            if den.abs() > 1e-300 {
                (k1 + 0.5 * num / den).clamp(k0, k2)
            } else {
                k1
            }
        } else {
            k1
        };
        // half-prominence width by linear interpolation on each flank
        let half = y[i] - 0.5 * prominence;
        let cross = |dir: i64| -> f64 {
            let mut j = i as i64;
            loop {
                let next = j + dir;
                if next < 0 || next as usize >= n {
                    return ks[j as usize];
                }
                if y[next as usize] <= half {
                    let (ya, yb) = (y[j as usize], y[next as usize]);
                    let t = (ya - half) / (ya - yb);
                    return ks[j as usize] + t * (ks[next as usize] - ks[j as usize]);
                }
                j = next;
            }
        };
        let width = (cross(1) - cross(-1)).abs();
        peaks.push(Peak {
            k: k_hat,
            prominence,
            width,
        });
    }
    Ok(PeakList { peaks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn dirs(n: usize) -> DirectionGrid {
        DirectionGrid::new(n).unwrap()
    }

    fn random_setup(n: usize, seed: u64) -> (FarfieldMatrix, SharpOperator) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = dirs(n);
        let mut f = CMat::zeros((n, n));
        let mut b = CMat::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                f[[i, j]] = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                b[[i, j]] = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            }
        }
        // Hermitian PSD penalty from a random factor
        let t = conj_transpose(&b).dot(&b);
        let ff = FarfieldMatrix::new(2.0, d.clone(), d, f).unwrap();
        let sharp = SharpOperator {
            matrix: t,
            source: "test".into(),
        };
        (ff, sharp)
    }

    #[test]
    fn point_source_basics() {
        let d = dirs(8);
        let k = 2.0;
        let gamma = FarfieldConvention::gamma_ff(k);
        let at_origin = point_source_rhs(Point::new(0.0, 0.0), k, &d, PointSourceConvention::Derived);
        for v in at_origin.iter() {
            assert!((v - gamma).norm() < 1e-15);
        }
        let z = Point::new(0.3, -0.4);
        let phi = point_source_rhs(z, k, &d, PointSourceConvention::Derived);
        for v in phi.iter() {
            assert!((v.norm() - gamma.norm()).abs() < 1e-14);
        }
        // translation phase
        let t = Point::new(0.2, 0.1);
        let shifted = point_source_rhs(Point::new(z.x + t.x, z.y + t.y), k, &d, PointSourceConvention::Derived);
        for s in 0..d.len() {
            let expect = phi[s] * Complex64::from_polar(1.0, -k * d.unit(s).dot(t));
            assert!((shifted[s] - expect).norm() < 1e-14);
        }
    }

    #[test]
    fn zero_rhs_gives_zero_density() {
        let (ff, sharp) = random_setup(6, 1);
        let solver = GlsmSolver::new(&ff, &sharp, 1e-3).unwrap();
        let phi = CVec::zeros(6);
        let res = solver.solve(&phi).unwrap();
        assert!(res.g.iter().all(|z| z.norm() < 1e-14));
        assert!(res.penalty.abs() < 1e-14);
        assert!(res.misfit.abs() < 1e-14);
    }

    #[test]
    fn large_alpha_kills_density() {
        let (ff, sharp) = random_setup(6, 2);
        let phi = point_source_rhs(Point::new(0.1, 0.2), ff.k, &ff.observation, PointSourceConvention::Derived);
        let phi_norm_sq: f64 = phi.iter().map(|z| z.norm_sqr()).sum();
        let solver = GlsmSolver::new(&ff, &sharp, 1e9).unwrap();
        let res = solver.solve(&phi).unwrap();
        let g_norm: f64 = res.g.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        assert!(g_norm < 1e-6);
        assert!((res.misfit - phi_norm_sq).abs() < 1e-5 * phi_norm_sq);
    }

    #[test]
    fn solve_is_optimal_under_perturbations() {
        let (ff, sharp) = random_setup(8, 3);
        let solver = GlsmSolver::new(&ff, &sharp, 1e-4).unwrap();
        let phi = point_source_rhs(Point::new(-0.2, 0.5), ff.k, &ff.observation, PointSourceConvention::Derived);
        let res = solver.solve(&phi).unwrap();
        let j_star = solver.functional(&res.g, &phi);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let mut delta = CVec::zeros(8);
            for v in delta.iter_mut() {
                *v = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            }
            let norm: f64 = delta.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let delta = delta.mapv(|z| z * (1e-3 / norm));
            let perturbed = &res.g + &delta;
            assert!(solver.functional(&perturbed, &phi) >= j_star - 1e-12);
        }
    }

    #[test]
    fn misfit_monotone_in_alpha() {
        let (ff, sharp) = random_setup(8, 4);
        let phi = point_source_rhs(Point::new(0.4, -0.1), ff.k, &ff.observation, PointSourceConvention::Derived);
        let mut last = f64::INFINITY;
        for &alpha in &[1e-1, 1e-2, 1e-3, 1e-4, 1e-5] {
            let solver = GlsmSolver::new(&ff, &sharp, alpha).unwrap();
            let res = solver.solve(&phi).unwrap();
            assert!(res.misfit <= last + 1e-10);
            last = res.misfit;
        }
    }

    fn synthetic_curve(values: &[(f64, f64)]) -> IndicatorCurve {
        let samples = values
            .iter()
            .map(|&(k, v)| IndicatorSample { k, value: v, alpha: 1e-5 })
            .collect();
        IndicatorCurve::from_samples(samples, "synthetic".into()).unwrap()
    }

    #[test]
    fn monotone_curve_has_no_peaks() {
        let pts: Vec<(f64, f64)> = (0..50).map(|i| (1.0 + 0.1 * i as f64, (i + 1) as f64)).collect();
        let curve = synthetic_curve(&pts);
        let peaks = detect_peaks(&curve, 3.0).unwrap();
        assert!(peaks.peaks.is_empty());
    }

    #[test]
    fn lorentzian_bump_is_found() {
        let pts: Vec<(f64, f64)> = (0..200)
            .map(|i| {
                let k = 3.0 + 0.02 * i as f64;
                let bump = 100.0 / (1.0 + ((k - 5.0) / 0.05).powi(2));
                (k, 1.0 + bump)
            })
            .collect();
        let curve = synthetic_curve(&pts);
        let peaks = detect_peaks(&curve, 3.0).unwrap();
        assert_eq!(peaks.peaks.len(), 1);
        assert!((peaks.peaks[0].k - 5.0).abs() <= 0.02);
    }

    #[test]
    fn two_bumps_are_separated() {
        let pts: Vec<(f64, f64)> = (0..300)
            .map(|i| {
                let k = 2.0 + 0.01 * i as f64;
                let b1 = 50.0 / (1.0 + ((k - 3.0) / 0.03).powi(2));
                let b2 = 80.0 / (1.0 + ((k - 4.2) / 0.03).powi(2));
                (k, 0.5 + b1 + b2)
            })
            .collect();
        let curve = synthetic_curve(&pts);
        let peaks = detect_peaks(&curve, 3.0).unwrap();
        assert_eq!(peaks.peaks.len(), 2);
        assert!((peaks.peaks[0].k - 3.0).abs() <= 0.01);
        assert!((peaks.peaks[1].k - 4.2).abs() <= 0.01);
    }

    #[test]
    fn empty_k_grid_is_rejected() {
        let sampling = SamplingGrid::from_shape(
            &crate::geometry::Shape::disk(0.0, 0.0, 1.0).unwrap(),
            0.5,
        )
        .unwrap();
        let res = indicator_curve(
            &[],
            |_k: f64| -> Result<(FarfieldMatrix, BackgroundFarfield)> { unreachable!() },
            &sampling,
            AlphaRule::default(),
            PointSourceConvention::Derived,
        );
        assert!(res.is_err());
    }
}
