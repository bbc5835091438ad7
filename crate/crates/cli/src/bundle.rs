//! Problem bundles: four Matrix Market files plus the scalars β and λ̂.

use std::fs;
use std::path::{Path, PathBuf};

use gtrs_core::GtrsProblem;
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::mm;

pub const MANIFEST_NAME: &str = "manifest.json";

/// The manifest file. Paths are relative to the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub a_matrix: PathBuf,
    pub b_matrix: PathBuf,
    pub a_vector: PathBuf,
    pub b_vector: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_hat: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_case: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub planted_lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GeneratorInfo>,
}

/// Generation parameters recorded next to a generated bundle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorInfo {
    pub n: usize,
    pub density: f64,
    pub cond: f64,
    pub class: u8,
    pub identity_constraint: bool,
    pub retries: usize,
    pub density_raised: bool,
}

impl Manifest {
    pub fn standard() -> Self {
        Manifest {
            a_matrix: "A.mtx".into(),
            b_matrix: "B.mtx".into(),
            a_vector: "a.mtx".into(),
            b_vector: "b.mtx".into(),
            beta: None,
            lambda_hat: None,
            seed: None,
            expected_case: None,
            planted_lambda: None,
            generator: None,
        }
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::parse(path, &e.to_string()))
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        fs::write(path, text).map_err(|e| CliError::io(path, e))
    }
}

/// Where the data come from: an optional manifest plus explicit overrides.
#[derive(Debug, Clone, Default)]
pub struct BundleSource {
    /// A manifest file, or a directory holding `manifest.json`.
    pub manifest: Option<PathBuf>,
    pub a_matrix: Option<PathBuf>,
    pub b_matrix: Option<PathBuf>,
    pub a_vector: Option<PathBuf>,
    pub b_vector: Option<PathBuf>,
    pub beta: Option<f64>,
    pub lambda_hat: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ProblemBundle {
    pub problem: GtrsProblem,
    pub seed: Option<u64>,
    pub expected_case: Option<String>,
    pub planted_lambda: Option<f64>,
    /// Conflicts between the manifest and flags, resolved in favour of the manifest.
    pub warnings: Vec<String>,
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn pick(
    name: &str,
    from_manifest: Option<f64>,
    from_flag: Option<f64>,
    warnings: &mut Vec<String>,
) -> Result<f64, CliError> {
    match (from_manifest, from_flag) {
        (Some(m), Some(f)) => {
            if m.to_bits() != f.to_bits() {
                warnings.push(format!("{name}: manifest value {m:e} overrides flag value {f:e}"));
            }
            Ok(m)
        }
        (Some(v), None) | (None, Some(v)) => Ok(v),
        (None, None) => Err(CliError::Usage(format!("{name} is required (flag or manifest)"))),
    }
}

fn pick_path(
    name: &str,
    from_manifest: Option<PathBuf>,
    from_flag: Option<&PathBuf>,
    warnings: &mut Vec<String>,
) -> Result<PathBuf, CliError> {
    match (from_manifest, from_flag) {
        (Some(m), Some(f)) => {
            if &m != f {
                warnings.push(format!(
                    "{name}: manifest path {} overrides flag path {}",
                    m.display(),
                    f.display()
                ));
            }
            Ok(m)
        }
        (Some(p), None) => Ok(p),
        (None, Some(p)) => Ok(p.clone()),
        (None, None) => Err(CliError::Usage(format!("{name} is required (flag or manifest)"))),
    }
}

impl ProblemBundle {
    pub fn load(src: &BundleSource) -> Result<Self, CliError> {
        let mut warnings = Vec::new();
        let manifest = match &src.manifest {
            Some(p) => {
                let file = if p.is_dir() { p.join(MANIFEST_NAME) } else { p.clone() };
                let base = file.parent().map(Path::to_path_buf).unwrap_or_default();
                Some((Manifest::read(&file)?, base))
            }
            None => None,
        };
        let (m, base) = match manifest {
            Some((m, base)) => (Some(m), base),
            None => (None, PathBuf::new()),
        };
        let from = |f: fn(&Manifest) -> &PathBuf| m.as_ref().map(|m| resolve(&base, f(m)));
        let a_matrix = pick_path("A matrix", from(|m| &m.a_matrix), src.a_matrix.as_ref(), &mut warnings)?;
        let b_matrix = pick_path("B matrix", from(|m| &m.b_matrix), src.b_matrix.as_ref(), &mut warnings)?;
        let a_vector = pick_path("a vector", from(|m| &m.a_vector), src.a_vector.as_ref(), &mut warnings)?;
        let b_vector = pick_path("b vector", from(|m| &m.b_vector), src.b_vector.as_ref(), &mut warnings)?;
        let beta = pick("beta", m.as_ref().and_then(|m| m.beta), src.beta, &mut warnings)?;
        let lambda_hat = pick(
            "lambda_hat",
            m.as_ref().and_then(|m| m.lambda_hat),
            src.lambda_hat,
            &mut warnings,
        )?;

        let a = mm::read_matrix(&a_matrix)?;
        let b = mm::read_matrix(&b_matrix)?;
        let av = mm::read_vector(&a_vector)?;
        let bv = mm::read_vector(&b_vector)?;
        let n = a.n();
        for (path, len) in [(&b_matrix, b.n()), (&a_vector, av.len()), (&b_vector, bv.len())] {
            if len != n {
                return Err(CliError::parse(
                    path,
                    &format!("dimension {len} does not match A ({n})"),
                ));
            }
        }
        let problem = GtrsProblem::new(a, b, av, bv, beta, lambda_hat)?;
        Ok(ProblemBundle {
            problem,
            seed: m.as_ref().and_then(|m| m.seed),
            expected_case: m.as_ref().and_then(|m| m.expected_case.clone()),
            planted_lambda: m.as_ref().and_then(|m| m.planted_lambda),
            warnings,
        })
    }
}

/// Writes `prob` into `dir` as a standard bundle and returns the manifest written.
pub fn write_bundle(dir: &Path, prob: &GtrsProblem, mut manifest: Manifest) -> Result<Manifest, CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    mm::write_matrix(&dir.join(&manifest.a_matrix), &prob.q_mat)?;
    mm::write_matrix(&dir.join(&manifest.b_matrix), &prob.g_mat)?;
    mm::write_vector(&dir.join(&manifest.a_vector), &prob.q_lin)?;
    mm::write_vector(&dir.join(&manifest.b_vector), &prob.g_lin)?;
    manifest.beta = Some(prob.g_const);
    manifest.lambda_hat = Some(prob.lambda_hat);
    manifest.write(&dir.join(MANIFEST_NAME))?;
    Ok(manifest)
}
