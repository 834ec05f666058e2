//! Text persistence for farfield matrices and the noise harness.
//!
//! Entries are written in decimal with 17 significant digits, which
//! round-trips every finite f64 bitwise without committing to a binary
//! layout. The header alone suffices to interpret the payload.

use anyhow::{anyhow, bail, Context, Result};
use artscat_core::forward::FarfieldMatrix;
use artscat_core::geometry::DirectionGrid;
use artscat_core::linalg::CMat;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use std::fmt::Write as _;
use std::path::Path;

pub const FORMAT_TAG: &str = "artscat-farfield v1";

fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Serialize a matrix with its metadata; `background` is the producing
/// background descriptor, or `data` for the measured/simulated farfield.
pub fn farfield_to_string(m: &FarfieldMatrix, background: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{FORMAT_TAG}");
    let _ = writeln!(out, "k = {}", fmt_f64(m.k));
    let _ = writeln!(out, "n_incident = {}", m.incident.len());
    let _ = writeln!(out, "n_observation = {}", m.observation.len());
    let _ = writeln!(out, "convention = {}", m.convention);
    let _ = writeln!(out, "background = {background}");
    let _ = writeln!(out, "generator = artscat {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(out, "entries = {}", m.entries.len());
    for s in 0..m.observation.len() {
        for i in 0..m.incident.len() {
            let z = m.entries[[s, i]];
            let _ = writeln!(out, "{} {}", fmt_f64(z.re), fmt_f64(z.im));
        }
    }
    out
}

pub fn write_farfield(path: &Path, m: &FarfieldMatrix, background: &str) -> Result<()> {
    std::fs::write(path, farfield_to_string(m, background))
        .with_context(|| format!("writing {}", path.display()))
}

/// Parsed file: the matrix plus its background descriptor.
#[derive(Debug, Clone)]
pub struct StoredFarfield {
    pub matrix: FarfieldMatrix,
    pub background: String,
}

pub fn farfield_from_string(text: &str) -> Result<StoredFarfield> {
    let mut lines = text.lines().enumerate();
    let (_, first) = lines.next().ok_or_else(|| anyhow!("empty farfield file"))?;
    if first.trim() != FORMAT_TAG {
        bail!("line 1: expected `{FORMAT_TAG}`, found `{first}`");
    }
    let mut k = None;
    let mut n_inc = None;
    let mut n_obs = None;
    let mut convention = None;
    let mut background = None;
    let mut entries_count = None;
    let mut payload_start = None;
    for (idx, raw) in lines.by_ref() {
        let line = idx + 1;
        let t = raw.trim();
        if t.is_empty() {
            continue;
        }
        if let Some((key, value)) = t.split_once('=') {
            let (key, value) = (key.trim(), value.trim());
            match key {
                "k" => {
                    k = Some(
                        value
                            .parse::<f64>()
                            .map_err(|_| anyhow!("line {line}: bad k value"))?,
                    )
                }
                "n_incident" => {
                    n_inc = Some(
                        value
                            .parse::<usize>()
                            .map_err(|_| anyhow!("line {line}: bad n_incident"))?,
                    )
                }
                "n_observation" => {
                    n_obs = Some(
                        value
                            .parse::<usize>()
                            .map_err(|_| anyhow!("line {line}: bad n_observation"))?,
                    )
                }
                "convention" => convention = Some(value.to_string()),
                "background" => background = Some(value.to_string()),
                "generator" => {}
                "entries" => {
                    entries_count = Some(
                        value
                            .parse::<usize>()
                            .map_err(|_| anyhow!("line {line}: bad entries count"))?,
                    );
                    payload_start = Some(line + 1);
                    break;
                }
                other => bail!("line {line}: unknown header key `{other}`"),
            }
        } else {
            bail!("line {line}: malformed header line `{t}`");
        }
    }
    let k = k.ok_or_else(|| anyhow!("header missing k"))?;
    let n_inc = n_inc.ok_or_else(|| anyhow!("header missing n_incident"))?;
    let n_obs = n_obs.ok_or_else(|| anyhow!("header missing n_observation"))?;
    let convention = convention.ok_or_else(|| anyhow!("header missing convention"))?;
    let background = background.ok_or_else(|| anyhow!("header missing background"))?;
    let expected = entries_count.ok_or_else(|| anyhow!("header missing entries"))?;
    if expected != n_inc * n_obs {
        bail!("entries count {expected} does not match {n_obs} x {n_inc}");
    }
    let payload_start = payload_start.unwrap_or(0);

    let mut entries = CMat::zeros((n_obs, n_inc));
    let mut seen = 0usize;
    for (idx, raw) in lines {
        let line = idx + 1;
        let t = raw.trim();
        if t.is_empty() {
            continue;
        }
        if seen >= expected {
            bail!("line {line}: more entries than the {expected} declared");
        }
        let (re, im) = t
            .split_once(' ')
            .ok_or_else(|| anyhow!("line {line}: expected `re im`"))?;
        let re: f64 = re
            .trim()
            .parse()
            .map_err(|_| anyhow!("line {line}: bad real part"))?;
        let im: f64 = im
            .trim()
            .parse()
            .map_err(|_| anyhow!("line {line}: bad imaginary part"))?;
        entries[[seen / n_inc, seen % n_inc]] = Complex64::new(re, im);
        seen += 1;
    }
    if seen != expected {
        bail!(
            "truncated payload: {seen} of {expected} entries (payload starts line {payload_start})"
        );
    }
    let incident = DirectionGrid::new(n_inc).map_err(|e| anyhow!("{e}"))?;
    let observation = DirectionGrid::new(n_obs).map_err(|e| anyhow!("{e}"))?;
    let matrix = FarfieldMatrix::new(k, incident, observation, entries)
        .map_err(|e| anyhow!("reconstructing matrix: {e}"))?;
    if matrix.convention != convention {
        bail!(
            "unsupported convention `{convention}` (this build writes `{}`)",
            matrix.convention
        );
    }
    Ok(StoredFarfield { matrix, background })
}

pub fn read_farfield(path: &Path) -> Result<StoredFarfield> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    farfield_from_string(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Read and check the header wavenumber against the one the caller expects.
pub fn read_farfield_at(path: &Path, k: f64) -> Result<StoredFarfield> {
    let stored = read_farfield(path)?;
    if stored.matrix.k.to_bits() != k.to_bits() {
        bail!(
            "{}: header k = {} does not match requested k = {}",
            path.display(),
            stored.matrix.k,
            k
        );
    }
    Ok(stored)
}

/// `M + E` with complex Gaussian `E` scaled so `||E||_F = delta ||M||_F`
/// exactly; deterministic in `seed`. `delta = 0` returns `M` unchanged.
pub fn inject_noise(m: &FarfieldMatrix, delta: f64, seed: u64) -> Result<FarfieldMatrix> {
    if !(delta >= 0.0) {
        bail!("noise level must be >= 0, got {delta}");
    }
    if delta == 0.0 {
        return Ok(m.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut e = CMat::zeros(m.entries.raw_dim());
    for v in e.iter_mut() {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        *v = Complex64::new(re, im);
    }
    let e_norm = e.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let m_norm = m.frobenius();
    if e_norm == 0.0 {
        bail!("degenerate noise draw");
    }
    let scale = delta * m_norm / e_norm;
    let entries = &m.entries + &e.mapv(|z| z * scale);
    FarfieldMatrix::new(m.k, m.incident.clone(), m.observation.clone(), entries)
        .map_err(|e| anyhow!("{e}"))
}
