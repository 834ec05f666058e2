//! Run configuration: a sectioned UTF-8 key-value file.
//!
//! ```text
//! [medium]
//! piece = disk 0 0 1 2.0
//!
//! [background]
//! kind = zim
//! shape = disk 0 0 1
//!
//! [directions]
//! count = 64
//!
//! [kgrid]
//! min = 2.2
//! max = 3.2
//! step = 0.01
//!
//! [grid]
//! h = 0.05
//!
//! [sampling]
//! h = 0.2
//! ```
//!
//! Keys may repeat (`piece`); `#` starts a comment. Unknown sections or keys
//! are rejected so typos fail loudly.

use anyhow::{anyhow, bail, Context, Result};
use artscat_core::geometry::{BackgroundSpec, BoundaryCondition, MediumSpec, Shape};
use artscat_core::glsm::{AlphaRule, PointSourceConvention};
use std::path::Path;

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub medium: MediumSpec,
    pub background: BackgroundSpec,
    pub direction_count: usize,
    pub k_min: f64,
    pub k_max: f64,
    pub k_step: f64,
    pub volume_h: f64,
    /// Sampling region; `None` means the background's `omega_b`.
    pub sampling_shape: Option<Shape>,
    pub sampling_h: f64,
    pub alpha_rule: AlphaRule,
    pub point_source: PointSourceConvention,
    pub noise_delta: f64,
    pub seed: u64,
    pub out_dir: String,
    pub spectrum_count: usize,
    pub spectrum_h: f64,
}

impl RunConfig {
    pub fn k_grid(&self) -> Vec<f64> {
        let mut ks = Vec::new();
        let mut i = 0usize;
        loop {
            let k = self.k_min + i as f64 * self.k_step;
            if k > self.k_max + 1e-12 * self.k_step.max(1.0) {
                break;
            }
            ks.push(k);
            i += 1;
        }
        ks
    }

    pub fn sampling_region(&self) -> Result<Shape> {
        if let Some(s) = &self.sampling_shape {
            return Ok(s.clone());
        }
        match &self.background {
            BackgroundSpec::Zim { omega_b } | BackgroundSpec::Obstacle { omega_b, .. } => {
                Ok(omega_b.clone())
            }
            BackgroundSpec::GeneralRho { pieces } => pieces
                .first()
                .map(|(s, _)| s.clone())
                .ok_or_else(|| anyhow!("rho background with no pieces needs [sampling] shape")),
        }
    }
}

/// One `key = value` occurrence with its line number.
struct Entry {
    section: String,
    key: String,
    value: String,
    line: usize,
}

fn parse_entries(text: &str) -> Result<Vec<Entry>> {
    let mut section = String::new();
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let stripped = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if stripped.is_empty() {
            continue;
        }
        if let Some(name) = stripped.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| anyhow!("line {line}: unterminated section header"))?;
            section = name.trim().to_string();
            continue;
        }
        let (key, value) = stripped
            .split_once('=')
            .ok_or_else(|| anyhow!("line {line}: expected `key = value`"))?;
        if section.is_empty() {
            bail!("line {line}: key outside any [section]");
        }
        out.push(Entry {
            section: section.clone(),
            key: key.trim().to_string(),
            value: value.trim().to_string(),
            line,
        });
    }
    Ok(out)
}

fn parse_shape(tokens: &[&str], line: usize) -> Result<Shape> {
    let bad = || anyhow!("line {line}: expected `disk cx cy r` or `kite cx cy scale`");
    if tokens.len() != 4 {
        return Err(bad());
    }
    let nums: Vec<f64> = tokens[1..]
        .iter()
        .map(|t| t.parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| bad())?;
    let shape = match tokens[0] {
        "disk" => Shape::disk(nums[0], nums[1], nums[2]),
        "kite" => Shape::kite(nums[0], nums[1], nums[2]),
        _ => return Err(bad()),
    };
    shape.map_err(|e| anyhow!("line {line}: {e}"))
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let entries = parse_entries(text)?;

    let mut medium_pieces: Vec<(Shape, f64)> = Vec::new();
    let mut bg_kind: Option<(String, usize)> = None;
    let mut bg_shape: Option<Shape> = None;
    let mut bg_bc: Option<BoundaryCondition> = None;
    let mut bg_pieces: Vec<(Shape, f64)> = Vec::new();
    let mut direction_count: Option<usize> = None;
    let mut k_min: Option<f64> = None;
    let mut k_max: Option<f64> = None;
    let mut k_step: Option<f64> = None;
    let mut volume_h: Option<f64> = None;
    let mut sampling_shape: Option<Shape> = None;
    let mut sampling_h: Option<f64> = None;
    let mut alpha0: Option<f64> = None;
    let mut alpha_fixed: Option<f64> = None;
    let mut point_source = PointSourceConvention::Derived;
    let mut noise_delta = 0.0_f64;
    let mut seed = 0_u64;
    let mut out_dir = String::from("run");
    let mut spectrum_count = 8usize;
    let mut spectrum_h = 0.0_f64;

    for e in &entries {
        let line = e.line;
        let toks: Vec<&str> = e.value.split_whitespace().collect();
        let fnum = |what: &str| -> Result<f64> {
            e.value
                .parse::<f64>()
                .with_context(|| format!("line {line}: {what} must be a number"))
        };
        match (e.section.as_str(), e.key.as_str()) {
            ("medium", "piece") => {
                if toks.len() != 5 {
                    bail!("line {line}: medium piece needs `<shape...> <n>`");
                }
                let shape = parse_shape(&toks[..4], line)?;
                let n: f64 = toks[4]
                    .parse()
                    .map_err(|_| anyhow!("line {line}: bad index value"))?;
                medium_pieces.push((shape, n));
            }
            ("background", "kind") => bg_kind = Some((e.value.clone(), line)),
            ("background", "shape") => bg_shape = Some(parse_shape(&toks, line)?),
            ("background", "bc") => {
                bg_bc = Some(match toks.as_slice() {
                    ["dirichlet"] => BoundaryCondition::Dirichlet,
                    ["robin", g] => BoundaryCondition::Robin {
                        gamma: g
                            .parse()
                            .map_err(|_| anyhow!("line {line}: bad robin impedance"))?,
                    },
                    _ => bail!("line {line}: bc is `dirichlet` or `robin <gamma>`"),
                });
            }
            ("background", "piece") => {
                if toks.len() != 5 {
                    bail!("line {line}: background piece needs `<shape...> <rho>`");
                }
                let shape = parse_shape(&toks[..4], line)?;
                let rho: f64 = toks[4]
                    .parse()
                    .map_err(|_| anyhow!("line {line}: bad rho value"))?;
                bg_pieces.push((shape, rho));
            }
            ("directions", "count") => {
                direction_count = Some(
                    e.value
                        .parse()
                        .with_context(|| format!("line {line}: bad direction count"))?,
                )
            }
            ("kgrid", "min") => k_min = Some(fnum("kgrid min")?),
            ("kgrid", "max") => k_max = Some(fnum("kgrid max")?),
            ("kgrid", "step") => k_step = Some(fnum("kgrid step")?),
            ("grid", "h") => volume_h = Some(fnum("grid h")?),
            ("sampling", "shape") => sampling_shape = Some(parse_shape(&toks, line)?),
            ("sampling", "h") => sampling_h = Some(fnum("sampling h")?),
            ("regularization", "alpha0") => alpha0 = Some(fnum("alpha0")?),
            ("regularization", "alpha") => alpha_fixed = Some(fnum("alpha")?),
            ("regularization", "point_source") => {
                point_source = match e.value.as_str() {
                    "derived" => PointSourceConvention::Derived,
                    "bare" => PointSourceConvention::BarePhase,
                    other => bail!("line {line}: unknown point_source `{other}`"),
                }
            }
            ("noise", "delta") => noise_delta = fnum("noise delta")?,
            ("noise", "seed") => {
                seed = e
                    .value
                    .parse()
                    .with_context(|| format!("line {line}: bad seed"))?
            }
            ("output", "dir") => out_dir = e.value.clone(),
            ("spectrum", "count") => {
                spectrum_count = e
                    .value
                    .parse()
                    .with_context(|| format!("line {line}: bad spectrum count"))?
            }
            ("spectrum", "h") => spectrum_h = fnum("spectrum h")?,
            (sec, key) => bail!("line {line}: unknown entry [{sec}] {key}"),
        }
    }

    let medium = MediumSpec::new(medium_pieces).map_err(|e| anyhow!("[medium]: {e}"))?;
    let background = match bg_kind {
        Some((kind, line)) => match kind.as_str() {
            "zim" => BackgroundSpec::zim(
                bg_shape.ok_or_else(|| anyhow!("zim background needs a shape"))?,
            ),
            "obstacle" => BackgroundSpec::obstacle(
                bg_shape.ok_or_else(|| anyhow!("obstacle background needs a shape"))?,
                bg_bc.ok_or_else(|| anyhow!("obstacle background needs bc"))?,
            )
            .map_err(|e| anyhow!("line {line}: {e}"))?,
            "rho" => BackgroundSpec::GeneralRho { pieces: bg_pieces },
            other => bail!("line {line}: unknown background kind `{other}`"),
        },
        None => bail!("missing [background] kind"),
    };

    let k_min = k_min.ok_or_else(|| anyhow!("missing [kgrid] min"))?;
    let k_max = k_max.ok_or_else(|| anyhow!("missing [kgrid] max"))?;
    let k_step = k_step.ok_or_else(|| anyhow!("missing [kgrid] step"))?;
    if !(k_min > 0.0) {
        bail!("kgrid min must be positive");
    }
    if !(k_step > 0.0) {
        bail!("kgrid step must be positive");
    }
    if k_max < k_min {
        bail!("kgrid max must be >= min");
    }
    if !(noise_delta >= 0.0) {
        bail!("noise delta must be >= 0");
    }
    let volume_h = volume_h.ok_or_else(|| anyhow!("missing [grid] h"))?;
    if !(volume_h > 0.0) {
        bail!("grid h must be positive");
    }
    let sampling_h = sampling_h.ok_or_else(|| anyhow!("missing [sampling] h"))?;
    if !(sampling_h > 0.0) {
        bail!("sampling h must be positive");
    }
    let alpha_rule = match (alpha_fixed, alpha0) {
        (Some(alpha), None) => AlphaRule::Fixed { alpha },
        (None, Some(alpha0)) => AlphaRule::Relative { alpha0 },
        (None, None) => AlphaRule::default(),
        (Some(_), Some(_)) => bail!("give either alpha or alpha0, not both"),
    };

    Ok(RunConfig {
        medium,
        background,
        direction_count: direction_count
            .ok_or_else(|| anyhow!("missing [directions] count"))?,
        k_min,
        k_max,
        k_step,
        volume_h,
        sampling_shape,
        sampling_h,
        alpha_rule,
        point_source,
        noise_delta,
        seed,
        out_dir,
        spectrum_count,
        spectrum_h,
    })
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    parse_config(&text).with_context(|| format!("parsing config {}", path.display()))
}
