//! On-disk cache of bath fits, keyed by a hash of the bath-relevant inputs.
//!
//! Each entry is a directory holding `lorfit.txt`, `weak.expfit`,
//! `c11.expfit`, `c22.expfit` and `meta.txt`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use dqd_core::expfit::{ExpFit, LorFit};
use dqd_core::pipeline::{fit_bath, BathFits, FitSettings, Kernel};
use dqd_core::ModelParams;

use crate::error::CliError;

/// Bumped whenever the fitting procedure changes its output.
const FORMAT_TAG: &str = "dqd-bath v1";

pub const LORFIT_FILE: &str = "lorfit.txt";
pub const META_FILE: &str = "meta.txt";

pub fn kernel_file(kernel: Kernel) -> String {
    format!("{}.expfit", kernel.name())
}

/// Hex digest of everything the fits depend on.
pub fn cache_key(p: &ModelParams, s: &FitSettings) -> String {
    let text = format!(
        "{FORMAT_TAG}\nP={:e}\nomega_c={:e}\nd_cs={:e}\nkT={:e}\nquad_tol={:e}\nfit_tol_spectral={:e}\n\
         fit_tol_kernel={:e}\nfit_tol_weak_kernel={:e}\nn_terms_max={}\ntau_max={:e}\npoints={}\n",
        p.coupling,
        p.cutoff,
        p.delay,
        p.temperature,
        s.quad_tol,
        s.fit_tol_spectral,
        s.fit_tol_kernel,
        s.fit_tol_weak_kernel,
        s.n_terms_max,
        s.grid.tau_max,
        s.grid.points
    );
    let digest = Sha256::digest(text.as_bytes());
    digest.iter().take(8).fold(String::new(), |mut acc, b| {
        let _ = write!(acc, "{b:02x}");
        acc
    })
}

pub fn entry_dir(cache_dir: &Path, p: &ModelParams, s: &FitSettings) -> PathBuf {
    cache_dir.join(cache_key(p, s))
}

/// Bath-only summary stored next to the fits.
pub fn meta_text(fits: &BathFits) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "eta = {:.16e}", fits.eta);
    let _ = writeln!(out, "eta_second_order = {:.16e}", fits.eta_second_order);
    let _ = writeln!(out, "lorfit_terms = {}", fits.lorfit.terms.len());
    let _ = writeln!(out, "lorfit_residual = {:.16e}", fits.lorfit.residual);
    for k in Kernel::ALL {
        let f = fits.kernel(k);
        let _ = writeln!(out, "{}_terms = {}", k.name(), f.len());
        let _ = writeln!(out, "{}_residual = {:.16e}", k.name(), f.residual);
    }
    out
}

fn meta_value(text: &str, key: &str) -> Option<f64> {
    text.lines().find_map(|l| {
        let (k, v) = l.split_once('=')?;
        (k.trim() == key).then(|| v.trim().parse().ok()).flatten()
    })
}

fn write_entry(dir: &Path, fits: &BathFits) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut files = vec![(LORFIT_FILE.to_string(), fits.lorfit.to_text())];
    for k in Kernel::ALL {
        files.push((kernel_file(k), fits.kernel(k).to_text(k.name())));
    }
    files.push((META_FILE.to_string(), meta_text(fits)));
    for (name, text) in files {
        let path = dir.join(name);
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
    }
    Ok(())
}

/// Writes a complete entry, replacing any previous one. A partially
/// written entry never becomes visible under the final name.
pub fn store(dir: &Path, fits: &BathFits) -> Result<(), CliError> {
    let staging = dir.with_extension(format!("partial-{}", std::process::id()));
    let _ = fs::remove_dir_all(&staging);
    if let Err(e) = write_entry(&staging, fits) {
        let _ = fs::remove_dir_all(&staging);
        return Err(e);
    }
    if dir.exists() {
        fs::remove_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::rename(&staging, dir).map_err(|e| {
        let _ = fs::remove_dir_all(&staging);
        CliError::io(dir, e)
    })
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn malformed(path: &Path, reason: impl ToString) -> CliError {
    CliError::Artifact { path: path.to_path_buf(), reason: reason.to_string() }
}

/// Reads an entry written by [`store`].
pub fn load(dir: &Path) -> Result<BathFits, CliError> {
    let meta_path = dir.join(META_FILE);
    let meta = read(&meta_path)?;
    let number = |key: &str| meta_value(&meta, key).ok_or_else(|| malformed(&meta_path, format!("missing `{key}`")));
    let eta = number("eta")?;
    let eta_second_order = number("eta_second_order")?;
    let lor_path = dir.join(LORFIT_FILE);
    let lorfit = LorFit::from_text(&read(&lor_path)?).map_err(|e| malformed(&lor_path, e))?;
    let kernel = |k: Kernel| -> Result<ExpFit, CliError> {
        let path = dir.join(kernel_file(k));
        let (name, fit) = ExpFit::from_text(&read(&path)?).map_err(|e| malformed(&path, e))?;
        if name != k.name() {
            return Err(malformed(&path, format!("holds kernel `{name}`")));
        }
        Ok(fit)
    };
    Ok(BathFits { eta, eta_second_order, lorfit, weak: kernel(Kernel::Weak)?, c11: kernel(Kernel::C11)?, c22: kernel(Kernel::C22)? })
}

/// Loads the cached entry, fitting and storing it first if absent.
pub fn load_or_fit(cache_dir: &Path, p: &ModelParams, s: &FitSettings) -> Result<BathFits, CliError> {
    let dir = entry_dir(cache_dir, p, s);
    if dir.join(META_FILE).exists() {
        return load(&dir);
    }
    let fits = fit_bath(p, s)?;
    store(&dir, &fits)?;
    Ok(fits)
}
