//! Stage orchestration: simulate -> background -> indicator -> spectrum ->
//! recover, with a checksum manifest written last.
//!
//! Every artifact is a self-describing text file; reruns with the same
//! config and seed are bitwise identical, so the manifest checksums double
//! as a determinism check.

use crate::config::RunConfig;
use crate::farfield_file::{inject_noise, read_farfield_at, StoredFarfield};
use anyhow::{anyhow, bail, Context, Result};
use artscat_core::background::{background_farfield, BackgroundFarfield};
use artscat_core::forward::farfield_matrix;
use artscat_core::geometry::{
    BackgroundSpec, BoundaryCondition, DirectionGrid, MediumSpec, SamplingGrid, Shape,
};
use artscat_core::glsm::{
    detect_peaks, indicator_curve, IndicatorCurve, IndicatorSample, Peak, PeakList,
};
use artscat_core::series::mie_disk_farfield;
use artscat_core::spectra::{
    cavity_spectrum, disk_buckling_reference, recover_index, ProblemTag, Spectrum,
};
use artscat_core::special::bessel_j_zero;
use rayon::prelude::*;
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

const PROMINENCE_FACTOR: f64 = 3.0;

fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn data_file(i: usize) -> String {
    format!("ff_data_{i:04}.txt")
}

fn background_file(i: usize) -> String {
    format!("ff_bg_{i:04}.txt")
}

pub const INDICATOR_CSV: &str = "indicator.csv";
pub const PEAKS_CSV: &str = "peaks.csv";
pub const SPECTRUM_CSV: &str = "spectrum.csv";
pub const RECOVERY_TXT: &str = "recovery.txt";
pub const MANIFEST_TXT: &str = "manifest.txt";
pub const WARNINGS_TXT: &str = "spectrum_warnings.txt";

pub fn out_dir(cfg: &RunConfig) -> PathBuf {
    PathBuf::from(&cfg.out_dir)
}

fn ensure_dir(cfg: &RunConfig) -> Result<PathBuf> {
    let dir = out_dir(cfg);
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

/// Compute and persist the data farfield `F` for every k (with optional
/// noise, deterministic in the seed).
pub fn stage_simulate(cfg: &RunConfig) -> Result<()> {
    let dir = ensure_dir(cfg)?;
    let dirs = DirectionGrid::new(cfg.direction_count).map_err(|e| anyhow!("{e}"))?;
    let ks = cfg.k_grid();
    let results: Vec<Result<String>> = ks
        .par_iter()
        .enumerate()
        .map(|(i, &k)| {
            let m = farfield_matrix(&cfg.medium, k, &dirs, &dirs, cfg.volume_h)
                .map_err(|e| anyhow!("k = {k}: {e}"))?;
            let m = inject_noise(&m, cfg.noise_delta, cfg.seed.wrapping_add(i as u64))?;
            Ok(crate::farfield_file::farfield_to_string(&m, "data"))
        })
        .collect();
    for (i, r) in results.into_iter().enumerate() {
        let text = r?;
        fs::write(dir.join(data_file(i)), text)?;
    }
    Ok(())
}

/// Compute and persist the background farfield `F~` for every k.
pub fn stage_background(cfg: &RunConfig) -> Result<()> {
    let dir = ensure_dir(cfg)?;
    let dirs = DirectionGrid::new(cfg.direction_count).map_err(|e| anyhow!("{e}"))?;
    let ks = cfg.k_grid();
    let results: Vec<Result<String>> = ks
        .par_iter()
        .map(|&k| {
            let bf = background_farfield(&cfg.background, k, &dirs, &dirs, cfg.volume_h)
                .map_err(|e| anyhow!("k = {k}: {e}"))?;
            Ok(crate::farfield_file::farfield_to_string(
                &bf.farfield,
                &bf.descriptor,
            ))
        })
        .collect();
    for (i, r) in results.into_iter().enumerate() {
        let text = r?;
        fs::write(dir.join(background_file(i)), text)?;
    }
    Ok(())
}

fn load_pair(dir: &Path, i: usize, k: f64) -> Result<(StoredFarfield, BackgroundFarfield)> {
    let data = read_farfield_at(&dir.join(data_file(i)), k)?;
    let bg = read_farfield_at(&dir.join(background_file(i)), k)?;
    let background = BackgroundFarfield {
        farfield: bg.matrix,
        descriptor: bg.background,
    };
    Ok((data, background))
}

/// Evaluate the indicator curve from the persisted farfields and detect
/// its peaks.
pub fn stage_indicator(cfg: &RunConfig) -> Result<()> {
    let dir = ensure_dir(cfg)?;
    let sampling = SamplingGrid::from_shape(&cfg.sampling_region()?, cfg.sampling_h)
        .map_err(|e| anyhow!("{e}"))?;
    let ks = cfg.k_grid();
    let index_of = |k: f64| -> usize { ((k - cfg.k_min) / cfg.k_step).round() as usize };
    let curve = indicator_curve(
        &ks,
        |k| {
            let (data, background) = load_pair(&dir, index_of(k), k)
                .map_err(|e| artscat_core::CoreError::Backend {
                    context: "loading farfields".into(),
                    message: e.to_string(),
                })?;
            Ok((data.matrix, background))
        },
        &sampling,
        cfg.alpha_rule,
        cfg.point_source,
    )
    .map_err(|e| anyhow!("{e}"))?;
    write_indicator_csv(&dir.join(INDICATOR_CSV), &curve)?;
    let peaks = detect_peaks(&curve, PROMINENCE_FACTOR).map_err(|e| anyhow!("{e}"))?;
    write_peaks_csv(&dir.join(PEAKS_CSV), &peaks)?;
    for (k, msg) in &curve.failures {
        eprintln!("warning: indicator gap at k = {k}: {msg}");
    }
    Ok(())
}

fn write_indicator_csv(path: &Path, curve: &IndicatorCurve) -> Result<()> {
    let mut out = String::from("k,I,alpha\n");
    for s in &curve.samples {
        let _ = writeln!(out, "{},{},{}", fmt_f64(s.k), fmt_f64(s.value), fmt_f64(s.alpha));
    }
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

pub fn read_indicator_csv(path: &Path) -> Result<IndicatorCurve> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut samples = Vec::new();
    for (idx, line) in text.lines().enumerate().skip(1) {
        let mut parts = line.split(',');
        let parse = |s: Option<&str>| -> Result<f64> {
            s.ok_or_else(|| anyhow!("line {}: short row", idx + 1))?
                .trim()
                .parse::<f64>()
                .map_err(|_| anyhow!("line {}: bad number", idx + 1))
        };
        let k = parse(parts.next())?;
        let value = parse(parts.next())?;
        let alpha = parse(parts.next())?;
        samples.push(IndicatorSample { k, value, alpha });
    }
    IndicatorCurve::from_samples(samples, String::new()).map_err(|e| anyhow!("{e}"))
}

fn write_peaks_csv(path: &Path, peaks: &PeakList) -> Result<()> {
    let mut out = String::from("k,prominence,width\n");
    for p in &peaks.peaks {
        let _ = writeln!(
            out,
            "{},{},{}",
            fmt_f64(p.k),
            fmt_f64(p.prominence),
            fmt_f64(p.width)
        );
    }
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

pub fn read_peaks_csv(path: &Path) -> Result<PeakList> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut peaks = Vec::new();
    for (idx, line) in text.lines().enumerate().skip(1) {
        let nums: Vec<f64> = line
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| anyhow!("line {}: bad peak row", idx + 1))?;
        if nums.len() != 3 {
            bail!("line {}: expected 3 columns", idx + 1);
        }
        peaks.push(Peak {
            k: nums[0],
            prominence: nums[1],
            width: nums[2],
        });
    }
    Ok(PeakList { peaks })
}

/// `n = 1` reference spectrum matching the configured background:
/// buckling for penetrable backgrounds, cavity for obstacles. Disks use the
/// analytic characteristic equations.
pub fn reference_spectrum(cfg: &RunConfig) -> Result<Spectrum> {
    let count = cfg.spectrum_count;
    match &cfg.background {
        BackgroundSpec::Zim { .. } | BackgroundSpec::GeneralRho { .. } => {
            let shape = omega_b_or_sampling(cfg)?;
            if let Shape::Disk { radius, .. } = shape {
                let mut sp = disk_buckling_reference(count);
                for v in &mut sp.eigenvalues {
                    *v /= radius * radius;
                }
                sp.domain = format!("disk r = {radius}");
                Ok(sp)
            } else {
                lattice_buckling_reference(cfg, &shape, count)
            }
        }
        BackgroundSpec::Obstacle { omega_b, bc } => {
            let radius = match omega_b {
                Shape::Disk { radius, .. } => *radius,
                _ => bail!("obstacle backgrounds require a disk"),
            };
            match bc {
                BoundaryCondition::Dirichlet => {
                    // k^2 = j_{m,s}^2 / R^2, modes m >= 1 doubled
                    let mut vals = Vec::new();
                    for m in 0..=count {
                        for s in 1..=count {
                            let z = bessel_j_zero(m, s) / radius;
                            vals.push(z * z);
                            if m >= 1 {
                                vals.push(z * z);
                            }
                        }
                    }
                    vals.sort_by(|a, b| a.total_cmp(b));
                    vals.truncate(count);
                    Ok(Spectrum {
                        problem: ProblemTag::Cavity(*bc),
                        domain: format!("disk r = {radius}"),
                        index: "n = 1".into(),
                        eigenvalues: vals,
                        h: 0.0,
                    })
                }
                BoundaryCondition::Robin { .. } => cavity_spectrum(
                    omega_b,
                    &MediumSpec::free_space(),
                    *bc,
                    0.0,
                    count,
                )
                .map_err(|e| anyhow!("{e}")),
            }
        }
    }
}

fn omega_b_or_sampling(cfg: &RunConfig) -> Result<Shape> {
    match &cfg.background {
        BackgroundSpec::Zim { omega_b } | BackgroundSpec::Obstacle { omega_b, .. } => {
            Ok(omega_b.clone())
        }
        BackgroundSpec::GeneralRho { .. } => cfg.sampling_region(),
    }
}

fn lattice_buckling_reference(cfg: &RunConfig, shape: &Shape, count: usize) -> Result<Spectrum> {
    let bb = shape.bounding_box();
    let extent = (bb.x_max - bb.x_min).min(bb.y_max - bb.y_min);
    let h = if cfg.spectrum_h > 0.0 {
        cfg.spectrum_h
    } else {
        extent / 48.0
    };
    artscat_core::spectra::buckling_spectrum(shape, &MediumSpec::free_space(), h, count)
        .map_err(|e| anyhow!("{e}"))
}

/// Persist the reference spectrum; for obstacle backgrounds also warn about
/// data wavenumbers that collide with `n = 1` cavity eigenvalues, where the
/// identifiability assumption fails.
pub fn stage_spectrum(cfg: &RunConfig) -> Result<()> {
    let dir = ensure_dir(cfg)?;
    let sp = reference_spectrum(cfg)?;
    let mut out = String::from("index,lambda\n");
    for (i, v) in sp.eigenvalues.iter().enumerate() {
        let _ = writeln!(out, "{i},{}", fmt_f64(*v));
    }
    fs::write(dir.join(SPECTRUM_CSV), out)?;

    if matches!(cfg.background, BackgroundSpec::Obstacle { .. }) {
        let mut warnings = String::new();
        for &lam in &sp.eigenvalues {
            let k_eig = lam.sqrt();
            if k_eig >= cfg.k_min - cfg.k_step && k_eig <= cfg.k_max + cfg.k_step {
                let _ = writeln!(
                    warnings,
                    "k = {} lies in the scanned band and is an n = 1 cavity eigenvalue; peaks there are not usable for recovery",
                    fmt_f64(k_eig)
                );
            }
        }
        if !warnings.is_empty() {
            eprint!("{warnings}");
        }
        fs::write(dir.join(WARNINGS_TXT), warnings)?;
    }
    Ok(())
}

/// Match detected peaks against the reference spectrum and write the
/// recovery report.
pub fn stage_recover(cfg: &RunConfig) -> Result<()> {
    let dir = ensure_dir(cfg)?;
    let peaks = read_peaks_csv(&dir.join(PEAKS_CSV))?;
    let spectrum_text = fs::read_to_string(dir.join(SPECTRUM_CSV))?;
    let mut eigenvalues = Vec::new();
    for line in spectrum_text.lines().skip(1) {
        let lam = line
            .split(',')
            .nth(1)
            .ok_or_else(|| anyhow!("short spectrum row"))?
            .trim()
            .parse::<f64>()
            .map_err(|_| anyhow!("bad spectrum row"))?;
        eigenvalues.push(lam);
    }
    let reference = Spectrum {
        problem: ProblemTag::Buckling,
        domain: String::new(),
        index: "n = 1".into(),
        eigenvalues,
        h: 0.0,
    };
    let report = recover_index(&peaks, &reference).map_err(|e| anyhow!("{e}"))?;
    let mut out = String::new();
    let _ = writeln!(out, "n_hat = {}", fmt_f64(report.n_hat));
    let _ = writeln!(out, "ess_inf_at_most = {}", fmt_f64(report.min_ratio));
    let _ = writeln!(out, "ess_sup_at_least = {}", fmt_f64(report.max_ratio));
    for ((k, lam), est) in report.pairs.iter().zip(&report.estimates) {
        let _ = writeln!(
            out,
            "pair = {} {} {}",
            fmt_f64(*k),
            fmt_f64(*lam),
            fmt_f64(*est)
        );
    }
    fs::write(dir.join(RECOVERY_TXT), out)?;
    Ok(())
}

pub fn read_recovery_n_hat(path: &Path) -> Result<f64> {
    let text = fs::read_to_string(path)?;
    for line in text.lines() {
        if let Some(v) = line.strip_prefix("n_hat = ") {
            return v.trim().parse::<f64>().map_err(|_| anyhow!("bad n_hat"));
        }
    }
    bail!("no n_hat in {}", path.display())
}

/// Built-in oracle and invariant checks; prints one line per check and
/// fails if any check fails.
pub fn stage_verify(cfg: &RunConfig) -> Result<()> {
    let mut failures = 0usize;
    let mut check = |name: &str, ok: bool, detail: String| {
        println!("{} {name}{}", if ok { "PASS" } else { "FAIL" }, if detail.is_empty() { String::new() } else { format!(" ({detail})") });
        if !ok {
            failures += 1;
        }
    };

    // Mie oracle at desk scale
    {
        let dirs = DirectionGrid::new(24).map_err(|e| anyhow!("{e}"))?;
        let disk = Shape::disk(0.0, 0.0, 1.0).map_err(|e| anyhow!("{e}"))?;
        let medium = MediumSpec::constant(disk.clone(), 2.0).map_err(|e| anyhow!("{e}"))?;
        let k = 2.0;
        let ls = farfield_matrix(&medium, k, &dirs, &dirs, 1.0 / 15.0).map_err(|e| anyhow!("{e}"))?;
        let mie = mie_disk_farfield(2.0, &disk, k, &dirs, &dirs).map_err(|e| anyhow!("{e}"))?;
        let diff = (&ls.entries - &mie.entries)
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        let rel = diff / mie.max_norm();
        check("mie-oracle", rel < 2e-2, format!("rel sup {rel:.2e}"));
    }

    // reciprocity of the configured medium at k_min
    {
        let dirs = DirectionGrid::new(16).map_err(|e| anyhow!("{e}"))?;
        let f = farfield_matrix(&cfg.medium, cfg.k_min, &dirs, &dirs, cfg.volume_h.max(0.08))
            .map_err(|e| anyhow!("{e}"))?;
        let n = dirs.len();
        let mut dev = 0.0_f64;
        for s in 0..n {
            for i in 0..n {
                let a = f.entries[[s, i]];
                let b = f.entries[[(i + n / 2) % n, (s + n / 2) % n]];
                dev = dev.max((a - b).norm());
            }
        }
        let rel = dev / f.max_norm().max(1e-300);
        check("reciprocity", rel < 1e-8, format!("rel {rel:.2e}"));
    }

    // background farfield self-consistency (metadata subtraction)
    {
        let dirs = DirectionGrid::new(16).map_err(|e| anyhow!("{e}"))?;
        let bf = background_farfield(&cfg.background, cfg.k_min, &dirs, &dirs, cfg.volume_h)
            .map_err(|e| anyhow!("{e}"))?;
        let diff = artscat_core::background::artificial_farfield(&bf.farfield, &bf)
            .map_err(|e| anyhow!("{e}"))?;
        check(
            "background-subtraction",
            diff.max_norm() < 1e-14,
            String::new(),
        );
    }

    // farfield file round trip
    {
        let dirs = DirectionGrid::new(8).map_err(|e| anyhow!("{e}"))?;
        let f = farfield_matrix(&cfg.medium, cfg.k_min, &dirs, &dirs, 0.2)
            .map_err(|e| anyhow!("{e}"))?;
        let text = crate::farfield_file::farfield_to_string(&f, "data");
        let back = crate::farfield_file::farfield_from_string(&text)?;
        let bitwise = f
            .entries
            .iter()
            .zip(back.matrix.entries.iter())
            .all(|(a, b)| a.re.to_bits() == b.re.to_bits() && a.im.to_bits() == b.im.to_bits());
        check("file-round-trip", bitwise, String::new());
    }

    if failures > 0 {
        bail!("{failures} verification check(s) failed");
    }
    Ok(())
}

fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        let _ = write!(out, "{b:02x}");
    }
    out
}

fn write_manifest(cfg: &RunConfig, status: &str) -> Result<()> {
    let dir = ensure_dir(cfg)?;
    let mut out = String::from("artscat-manifest v1\n");
    let _ = writeln!(out, "status = {status}");
    let _ = writeln!(out, "background = {}", cfg.background.descriptor());
    let _ = writeln!(out, "directions = {}", cfg.direction_count);
    let _ = writeln!(
        out,
        "kgrid = {} {} {}",
        fmt_f64(cfg.k_min),
        fmt_f64(cfg.k_max),
        fmt_f64(cfg.k_step)
    );
    let _ = writeln!(out, "grid_h = {}", fmt_f64(cfg.volume_h));
    let _ = writeln!(out, "sampling_h = {}", fmt_f64(cfg.sampling_h));
    let _ = writeln!(out, "noise_delta = {}", fmt_f64(cfg.noise_delta));
    let _ = writeln!(out, "seed = {}", cfg.seed);
    let mut names: Vec<String> = fs::read_dir(&dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n != MANIFEST_TXT)
        .collect();
    names.sort();
    for name in names {
        let bytes = fs::read(dir.join(&name))?;
        let _ = writeln!(out, "artifact {name} sha256={}", sha256_hex(&bytes));
    }
    fs::write(dir.join(MANIFEST_TXT), out)?;
    Ok(())
}

/// All stages in order, manifest last. Any stage error is recorded in the
/// manifest before the error is propagated.
pub fn run_pipeline(cfg: &RunConfig) -> Result<()> {
    let stages: [(&str, fn(&RunConfig) -> Result<()>); 5] = [
        ("simulate", stage_simulate),
        ("background", stage_background),
        ("indicator", stage_indicator),
        ("spectrum", stage_spectrum),
        ("recover", stage_recover),
    ];
    for (name, stage) in stages {
        if let Err(e) = stage(cfg) {
            let _ = write_manifest(cfg, &format!("error in {name}: {e}"));
            return Err(e.context(format!("stage {name}")));
        }
    }
    write_manifest(cfg, "ok")
}
