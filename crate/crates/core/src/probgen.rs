//! Random test problems with planted structure.
//!
//! Two families:
//! * class 1: A positive definite, B indefinite, λ̂ = 0;
//! * class 2: C positive definite, B indefinite, A = C − B, λ̂ = 1.
//!
//! The linear term is planted as a = −(A + λB)x₀ with λ drawn inside the definiteness
//! interval (easy) or equal to its upper end (hard cases), and β is drawn so that the
//! unconstrained minimizer is infeasible; for hard case 2, β = −x₀ᵀBx₀ puts x₀ on the
//! boundary.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::config::SolverConfig;
use crate::error::{Error, Result};
use crate::gtrs::{compute_endpoint, Context, Side};
use crate::problem::GtrsProblem;
use crate::sparse::{cg_solve, SparseSymmetric};
use crate::vecops::dot;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseKind {
    Easy,
    Hard1,
    Hard2,
}

impl CaseKind {
    pub const ALL: [CaseKind; 3] = [CaseKind::Easy, CaseKind::Hard1, CaseKind::Hard2];

    pub fn as_str(self) -> &'static str {
        match self {
            CaseKind::Easy => "easy",
            CaseKind::Hard1 => "hard1",
            CaseKind::Hard2 => "hard2",
        }
    }
}

impl fmt::Display for CaseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CaseKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "easy" => Ok(CaseKind::Easy),
            "hard1" => Ok(CaseKind::Hard1),
            "hard2" => Ok(CaseKind::Hard2),
            _ => Err(Error::Input(format!(
                "unknown case kind '{s}' (easy, hard1, hard2)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassKind {
    Class1,
    Class2,
}

impl ClassKind {
    pub const ALL: [ClassKind; 2] = [ClassKind::Class1, ClassKind::Class2];

    pub fn number(self) -> u8 {
        match self {
            ClassKind::Class1 => 1,
            ClassKind::Class2 => 2,
        }
    }
}

impl fmt::Display for ClassKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

impl FromStr for ClassKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "1" | "class1" => Ok(ClassKind::Class1),
            "2" | "class2" => Ok(ClassKind::Class2),
            _ => Err(Error::Input(format!("unknown problem class '{s}' (1, 2)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenSpec {
    pub n: usize,
    pub density: f64,
    pub cond: f64,
    pub case_kind: CaseKind,
    pub class_kind: ClassKind,
    pub seed: u64,
    /// Replace B by the identity (trust-region special case).
    #[serde(default)]
    pub identity_constraint: bool,
}

impl GenSpec {
    pub fn new(
        n: usize,
        density: f64,
        cond: f64,
        case_kind: CaseKind,
        class_kind: ClassKind,
        seed: u64,
    ) -> Self {
        GenSpec {
            n,
            density,
            cond,
            case_kind,
            class_kind,
            seed,
            identity_constraint: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::Input(format!(
                "n must be at least 2, got {}",
                self.n
            )));
        }
        check_density(self.density)?;
        if !(self.cond >= 1.0 && self.cond.is_finite()) {
            return Err(Error::Input(format!(
                "cond must be finite and >= 1, got {}",
                self.cond
            )));
        }
        Ok(())
    }
}

fn check_density(density: f64) -> Result<()> {
    if !(density >= 0.0 && density <= 1.0) {
        return Err(Error::Input(format!(
            "density must lie in [0, 1], got {density}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct GenArtifact {
    pub problem: GtrsProblem,
    /// λ used in a = −(A + λB)x₀.
    pub planted_lambda: f64,
    pub x0: Vec<f64>,
    pub expected_case: CaseKind,
    /// Interval endpoints computed during generation (the lower one only for class 2).
    pub lower: Option<f64>,
    pub upper: f64,
    pub retries: usize,
    /// The requested density was below one entry per row and was raised.
    pub density_raised: bool,
}

/// A random sparse symmetric matrix and whether its density had to be raised.
#[derive(Debug, Clone)]
pub struct RandomMatrix {
    pub matrix: SparseSymmetric,
    pub density_raised: bool,
}

/// Random sparse symmetric matrix with about `density · n²` nonzeros.
///
/// With `cond` the matrix is positive definite: a diagonal with eigenvalues 1, 1/cond and
/// the rest log-uniform between them, mixed by random plane rotations until the target
/// number of nonzeros is reached (at most ⌈density·n²/2⌉ rotations). Without `cond` the
/// entries sit at random positions with values uniform in [−1, 1].
pub fn rand_sparse_sym(
    n: usize,
    density: f64,
    cond: Option<f64>,
    rng: &mut ChaCha8Rng,
) -> Result<RandomMatrix> {
    check_density(density)?;
    if n == 0 {
        return Err(Error::Input("matrix dimension is zero".into()));
    }
    let n2 = (n * n) as f64;
    let (density, density_raised) = if density * n2 < n as f64 {
        (1.0 / n as f64, true)
    } else {
        (density, false)
    };
    let target = (density * n2).round() as usize;
    let matrix = match cond {
        Some(cond) => {
            if !(cond >= 1.0 && cond.is_finite()) {
                return Err(Error::Input(format!(
                    "cond must be finite and >= 1, got {cond}"
                )));
            }
            rotated_diagonal(n, target, cond, rng)?
        }
        None => {
            let count = (density * n2 / 2.0).ceil() as usize;
            let mut t = Vec::with_capacity(count);
            for _ in 0..count {
                let i = rng.random_range(0..n);
                let j = rng.random_range(0..n);
                let v: f64 = rng.random_range(-1.0..=1.0);
                t.push((i, j, v));
            }
            SparseSymmetric::from_triplets(n, t)?
        }
    };
    Ok(RandomMatrix {
        matrix,
        density_raised,
    })
}

fn rotated_diagonal(
    n: usize,
    target: usize,
    cond: f64,
    rng: &mut ChaCha8Rng,
) -> Result<SparseSymmetric> {
    let mut eig = Vec::with_capacity(n);
    eig.push(1.0);
    if n > 1 {
        eig.push(1.0 / cond);
    }
    let log_min = -(cond.ln());
    while eig.len() < n {
        let t: f64 = rng.random_range(0.0..1.0);
        eig.push((log_min * t).exp());
    }
    eig.shuffle(rng);

    let mut rows: Vec<BTreeMap<usize, f64>> =
        (0..n).map(|i| BTreeMap::from([(i, eig[i])])).collect();
    let mut nnz = n;
    let max_rotations = (target as f64 / 2.0).ceil() as usize;
    let mut done = 0;
    while nnz < target && done < max_rotations {
        let i = rng.random_range(0..n);
        let mut j = rng.random_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        let theta: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        nnz = rotate(&mut rows, i, j, theta.cos(), theta.sin(), nnz);
        done += 1;
    }
    let t = rows.iter().enumerate().flat_map(|(r, row)| {
        row.iter()
            .filter(move |(c, _)| **c >= r)
            .map(move |(c, v)| (r, *c, *v))
    });
    SparseSymmetric::from_triplets(n, t)
}

/// M ← G M Gᵀ for the rotation acting on coordinates (i, j). Returns the new nnz.
fn rotate(
    rows: &mut [BTreeMap<usize, f64>],
    i: usize,
    j: usize,
    c: f64,
    s: f64,
    mut nnz: usize,
) -> usize {
    let get =
        |rows: &[BTreeMap<usize, f64>], r: usize, k: usize| rows[r].get(&k).copied().unwrap_or(0.0);
    let set = |rows: &mut [BTreeMap<usize, f64>], r: usize, k: usize, v: f64, nnz: &mut usize| {
        let had = rows[r].contains_key(&k);
        if v == 0.0 {
            if had {
                rows[r].remove(&k);
                *nnz -= 1;
            }
        } else {
            if !had {
                *nnz += 1;
            }
            rows[r].insert(k, v);
        }
    };
    let mut others: Vec<usize> = rows[i]
        .keys()
        .chain(rows[j].keys())
        .copied()
        .filter(|k| *k != i && *k != j)
        .collect();
    others.sort_unstable();
    others.dedup();
    for k in others {
        let a = get(rows, i, k);
        let b = get(rows, j, k);
        let na = c * a + s * b;
        let nb = -s * a + c * b;
        set(rows, i, k, na, &mut nnz);
        set(rows, k, i, na, &mut nnz);
        set(rows, j, k, nb, &mut nnz);
        set(rows, k, j, nb, &mut nnz);
    }
    let (mii, mij, mjj) = (get(rows, i, i), get(rows, i, j), get(rows, j, j));
    let nii = c * c * mii + 2.0 * c * s * mij + s * s * mjj;
    let njj = s * s * mii - 2.0 * c * s * mij + c * c * mjj;
    let nij = (c * c - s * s) * mij + c * s * (mjj - mii);
    set(rows, i, i, nii, &mut nnz);
    set(rows, j, j, njj, &mut nnz);
    set(rows, i, j, nij, &mut nnz);
    set(rows, j, i, nij, &mut nnz);
    nnz
}

const RETRY_BUDGET: usize = 50;

/// Generates one problem from `recipe`.
pub fn generate(recipe: &GenSpec) -> Result<GenArtifact> {
    recipe.validate()?;
    let n = recipe.n;
    let mut rng = ChaCha8Rng::seed_from_u64(recipe.seed);
    let cfg = SolverConfig::default();
    let mut last_reason = String::new();

    for retries in 0..RETRY_BUDGET {
        let first = rand_sparse_sym(n, recipe.density, Some(recipe.cond), &mut rng)?;
        let second = if recipe.identity_constraint {
            RandomMatrix {
                matrix: SparseSymmetric::identity(n),
                density_raised: false,
            }
        } else {
            rand_sparse_sym(n, recipe.density, None, &mut rng)?
        };
        let density_raised = first.density_raised || second.density_raised;
        let b = second.matrix;
        // `s_mat` is the definite anchor A + λ̂B.
        let (a, s_mat, lambda_hat) = match recipe.class_kind {
            ClassKind::Class1 => (first.matrix.clone(), first.matrix, 0.0),
            ClassKind::Class2 => (
                first.matrix.linear_combination(1.0, &b, -1.0)?,
                first.matrix,
                1.0,
            ),
        };
        let x0: Vec<f64> = (0..n)
            .map(|_| rng.sample::<f64, _>(StandardNormal) / 10.0)
            .collect();

        let probe = GtrsProblem::new(
            a.clone(),
            b.clone(),
            vec![0.0; n],
            vec![0.0; n],
            -1.0,
            lambda_hat,
        )?;
        let ctx = Context::new(&probe, &cfg);
        let upper = compute_endpoint(&ctx, Side::Upper)?.value;
        let lower = match recipe.class_kind {
            ClassKind::Class1 => None,
            ClassKind::Class2 => Some(compute_endpoint(&ctx, Side::Lower)?.value),
        };

        let lambda = match recipe.case_kind {
            CaseKind::Easy => {
                let (lo, hi) = match recipe.class_kind {
                    ClassKind::Class1 => (0.0, upper),
                    ClassKind::Class2 => (lower.unwrap_or(f64::NEG_INFINITY), upper),
                };
                let lo = if lo.is_finite() { lo } else { lambda_hat - 1.0 };
                let hi = if hi.is_finite() { hi } else { lambda_hat + 1.0 };
                let t: f64 = rng.random_range(0.0..1.0);
                lo + t * (hi - lo)
            }
            CaseKind::Hard1 | CaseKind::Hard2 => {
                if !upper.is_finite() {
                    last_reason = "upper endpoint is infinite".into();
                    continue;
                }
                upper
            }
        };

        let ax0 = a.matvec(&x0)?;
        let bx0 = b.matvec(&x0)?;
        let q_lin: Vec<f64> = ax0
            .iter()
            .zip(&bx0)
            .map(|(p, q)| -(p + lambda * q))
            .collect();
        let rhs: Vec<f64> = q_lin.iter().map(|v| -v).collect();
        let (xc, st) = cg_solve(&s_mat, &rhs, 1e-13, (20 * n).max(200), None)?;
        if st.breakdown {
            return Err(Error::Internal(
                "generated definite matrix failed CG".into(),
            ));
        }
        let s = dot(&xc, &b.matvec(&xc)?);
        let ell = dot(&x0, &bx0);
        let beta = match recipe.case_kind {
            CaseKind::Hard2 => -ell,
            _ => {
                let (lo, hi) = match recipe.class_kind {
                    ClassKind::Class1 if s > ell => (-s, -ell),
                    ClassKind::Class2 if s > ell => (-s, -ell),
                    ClassKind::Class2 if s < ell => (-ell, -s),
                    _ => {
                        last_reason = format!("empty interval for beta (s = {s:e}, l = {ell:e})");
                        continue;
                    }
                };
                let t: f64 = rng.random_range(0.0..1.0);
                let beta = lo + t * (hi - lo);
                if !(beta > lo && beta < hi) {
                    last_reason = "degenerate interval for beta".into();
                    continue;
                }
                beta
            }
        };
        let problem = GtrsProblem::new(a, b, q_lin, vec![0.0; n], beta, lambda_hat)?;
        return Ok(GenArtifact {
            problem,
            planted_lambda: lambda,
            x0,
            expected_case: recipe.case_kind,
            lower,
            upper,
            retries,
            density_raised,
        });
    }
    Err(Error::Input(format!(
        "generation failed after {RETRY_BUDGET} attempts: {last_reason}"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two_condition_number() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = rand_sparse_sym(2, 1.0, Some(10.0), &mut rng)
            .unwrap()
            .matrix;
        let d = m.to_dense();
        let (a, b, c) = (d[0], d[1], d[3]);
        let tr = a + c;
        let det = a * c - b * b;
        let disc = (tr * tr / 4.0 - det).sqrt();
        let (l1, l2) = (tr / 2.0 - disc, tr / 2.0 + disc);
        assert!(l1 > 0.0);
        let cond = l2 / l1;
        assert!((5.0..=20.0).contains(&cond), "cond {cond}");
    }

    #[test]
    fn zero_density_is_raised() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = rand_sparse_sym(10, 0.0, None, &mut rng).unwrap();
        assert!(r.density_raised);
    }

    #[test]
    fn invalid_density_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(rand_sparse_sym(10, 1.5, None, &mut rng).is_err());
        assert!(rand_sparse_sym(10, f64::NAN, None, &mut rng).is_err());
    }

    #[test]
    fn planted_linear_term_is_exact() {
        let recipe = GenSpec::new(12, 0.5, 10.0, CaseKind::Easy, ClassKind::Class1, 5);
        let g = generate(&recipe).unwrap();
        let p = &g.problem;
        let ax = p.q_mat.matvec(&g.x0).unwrap();
        let bx = p.g_mat.matvec(&g.x0).unwrap();
        for i in 0..12 {
            assert_eq!(p.q_lin[i], -(ax[i] + g.planted_lambda * bx[i]));
        }
        assert!(g.planted_lambda > 0.0 && g.planted_lambda < g.upper);
    }

    #[test]
    fn same_seed_same_problem() {
        let recipe = GenSpec::new(15, 0.4, 100.0, CaseKind::Hard2, ClassKind::Class2, 11);
        let a = generate(&recipe).unwrap();
        let b = generate(&recipe).unwrap();
        assert_eq!(a.problem, b.problem);
        assert_eq!(a.planted_lambda.to_bits(), b.planted_lambda.to_bits());
    }
}
