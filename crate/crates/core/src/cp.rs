//! CP decompositions: reconstruction, factored contraction, ALS fitting,
//! exact slice decomposition, heuristic rank estimation and rank-bound
//! formulas.
//!
//! A rank-`R` CP decomposition of `T ∈ ℝ^{d1×d2×d3}` is `T = Σ_r a_r ∘ b_r ∘
//! c_r`, held as factor matrices `A (d1×R)`, `B (d2×R)`, `C (d3×R)`. `R = 0`
//! is permitted and denotes the zero tensor.

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream_rng, uniform_matrix};
use crate::tensor::{Mode, Tensor3};

/// Factor-matrix triple of a CP decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct CpFactors {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
}

impl CpFactors {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>) -> Result<Self> {
        if a.ncols() != b.ncols() || b.ncols() != c.ncols() {
            return Err(Error::dims(
                "CpFactors::new",
                format!("equal column counts, got {}, {}, {}", a.ncols(), b.ncols(), c.ncols()),
                "",
            ));
        }
        Ok(CpFactors { a, b, c })
    }

    /// Rank-0 factors for the zero tensor of the given dimensions.
    pub fn zero_rank(d1: usize, d2: usize, d3: usize) -> Self {
        CpFactors {
            a: DMatrix::zeros(d1, 0),
            b: DMatrix::zeros(d2, 0),
            c: DMatrix::zeros(d3, 0),
        }
    }

    pub fn rank(&self) -> usize {
        self.a.ncols()
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.a.nrows(), self.b.nrows(), self.c.nrows())
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }

    /// `T = Σ_r a_r ∘ b_r ∘ c_r`.
    pub fn reconstruct(&self) -> Tensor3 {
        let (d1, d2, d3) = self.dims();
        let mut t = Tensor3::zeros(d1, d2, d3);
        for r in 0..self.rank() {
            for i in 0..d1 {
                let ai = self.a[(i, r)];
                if ai == 0.0 {
                    continue;
                }
                for j in 0..d2 {
                    let w = ai * self.b[(j, r)];
                    if w == 0.0 {
                        continue;
                    }
                    let fiber = t.fiber3_mut(i, j);
                    for (k, slot) in fiber.iter_mut().enumerate() {
                        *slot += w * self.c[(k, r)];
                    }
                }
            }
        }
        t
    }

    /// `⟦A,B,C⟧ ×₁ h ×₂ x = C (Aᵀh ⊙ Bᵀx)` without materializing the tensor.
    pub fn factored_contract(&self, h: &DVector<f64>, x: &DVector<f64>) -> Result<DVector<f64>> {
        let (d1, d2, d3) = self.dims();
        if h.len() != d1 {
            return Err(Error::dims("factored_contract (mode 1)", d1, h.len()));
        }
        if x.len() != d2 {
            return Err(Error::dims("factored_contract (mode 2)", d2, x.len()));
        }
        if self.rank() == 0 {
            return Ok(DVector::zeros(d3));
        }
        let p = self.a.tr_mul(h); // Aᵀh
        let q = self.b.tr_mul(x); // Bᵀx
        Ok(&self.c * p.component_mul(&q))
    }

    /// Appends one all-zero column to each factor; the represented tensor is
    /// unchanged.
    pub fn pad_rank(&self) -> CpFactors {
        let pad = |m: &DMatrix<f64>| {
            let mut out = DMatrix::zeros(m.nrows(), m.ncols() + 1);
            out.view_mut((0, 0), (m.nrows(), m.ncols())).copy_from(m);
            out
        };
        CpFactors {
            a: pad(&self.a),
            b: pad(&self.b),
            c: pad(&self.c),
        }
    }
}

/// Khatri-Rao product (column-wise Kronecker). `P` indexes slow, `Q` fast:
/// row `p*q_rows + q` holds `P[p,:] ⊙ Q[q,:]`.
pub fn khatri_rao(p: &DMatrix<f64>, q: &DMatrix<f64>) -> DMatrix<f64> {
    assert_eq!(p.ncols(), q.ncols(), "khatri_rao column mismatch");
    let mut out = DMatrix::zeros(p.nrows() * q.nrows(), p.ncols());
    for r in 0..p.ncols() {
        for ip in 0..p.nrows() {
            let w = p[(ip, r)];
            for iq in 0..q.nrows() {
                out[(ip * q.nrows() + iq, r)] = w * q[(iq, r)];
            }
        }
    }
    out
}

/// Settings for ALS fitting and the rank-estimation sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AlsConfig {
    /// Maximum ALS sweeps per restart.
    pub max_iters: usize,
    /// Stop when the relative misfit changes by less than this between sweeps.
    pub rel_change_tol: f64,
    /// Independent random restarts; the best fit wins, ties to the lowest
    /// restart index.
    pub restarts: usize,
    /// Base seed; restart `r` draws from stream `r`.
    pub seed: u64,
    /// Ridge added to the Khatri-Rao Gram before solving.
    pub ridge: f64,
    /// A candidate rank counts as an exact fit when `fit ≥ 1 - fit_tolerance`.
    pub fit_tolerance: f64,
}

impl Default for AlsConfig {
    fn default() -> Self {
        AlsConfig {
            max_iters: 500,
            rel_change_tol: 1e-10,
            restarts: 5,
            seed: 0,
            ridge: 1e-12,
            fit_tolerance: 1e-6,
        }
    }
}

/// Outcome of a rank-estimation sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RankReport {
    /// Smallest candidate rank whose fit reached `1 - tolerance`; equals the
    /// largest candidate tried when none converged (see `converged`).
    pub estimated_rank: usize,
    /// `(candidate_rank, fit)` pairs in sweep order.
    pub fits: Vec<(usize, f64)>,
    pub restarts_used: usize,
    pub tolerance: f64,
    pub converged: bool,
}

fn mttkrp(unfolding: &DMatrix<f64>, kr: &DMatrix<f64>) -> DMatrix<f64> {
    unfolding * kr
}

/// One ALS pass from the given starting factors. Returns factors and fit.
fn als_run(
    t: &Tensor3,
    unfoldings: &[DMatrix<f64>; 3],
    norm_t: f64,
    mut f: CpFactors,
    cfg: &AlsConfig,
) -> (CpFactors, f64) {
    let rank = f.rank();
    let mut gram_a = f.a.tr_mul(&f.a);
    let mut gram_b = f.b.tr_mul(&f.b);
    let mut gram_c = f.c.tr_mul(&f.c);
    let mut prev_misfit = f64::INFINITY;
    let mut fit = 0.0;

    for _ in 0..cfg.max_iters {
        // Mode 1: A <- T_(1) (C ⊙ B) [(CᵀC)∘(BᵀB) + λI]⁻¹
        let m = mttkrp(&unfoldings[0], &khatri_rao(&f.c, &f.b));
        f.a = solve_gram(&gram_c.component_mul(&gram_b), &m, cfg.ridge);
        normalize_columns(&mut f.a);
        gram_a = f.a.tr_mul(&f.a);

        // Mode 2
        let m = mttkrp(&unfoldings[1], &khatri_rao(&f.c, &f.a));
        f.b = solve_gram(&gram_c.component_mul(&gram_a), &m, cfg.ridge);
        normalize_columns(&mut f.b);
        gram_b = f.b.tr_mul(&f.b);

        // Mode 3; absorbs all scale, so leave un-normalized.
        let last_kr = khatri_rao(&f.b, &f.a);
        let last_m = mttkrp(&unfoldings[2], &last_kr);
        f.c = solve_gram(&gram_b.component_mul(&gram_a), &last_m, cfg.ridge);
        gram_c = f.c.tr_mul(&f.c);

        // ‖T - recon‖² = ‖T‖² + ‖recon‖² - 2⟨T, recon⟩ without materializing
        // the reconstruction. The cancellation floor of this form is around
        // √eps·‖T‖, so small misfits are re-measured against an explicit
        // reconstruction.
        let inner = f.c.component_mul(&last_m).sum();
        let recon_sq = gram_a
            .component_mul(&gram_b)
            .component_mul(&gram_c)
            .sum();
        let residual = (norm_t * norm_t + recon_sq - 2.0 * inner).abs().sqrt();
        let mut misfit = residual / norm_t;
        if misfit < 1e-6 {
            let mut diff = f.reconstruct();
            diff.add_scaled(t, -1.0);
            misfit = diff.frobenius_norm() / norm_t;
        }
        fit = 1.0 - misfit;

        // Converged when the fit is machine-exact or the misfit stalls in
        // relative terms.
        if misfit < 1e-14 || (prev_misfit - misfit).abs() < cfg.rel_change_tol * misfit {
            break;
        }
        prev_misfit = misfit;
    }
    (f, fit)
}

fn normalize_columns(m: &mut DMatrix<f64>) {
    for mut col in m.column_iter_mut() {
        let norm = col.norm();
        if norm > 1e-300 {
            col /= norm;
        }
    }
}

/// Solves `X (G + λI) = M` for `X`, i.e. the regularized least-squares update
/// of one ALS mode. Falls back to an SVD solve if Cholesky fails.
fn solve_gram(gram: &DMatrix<f64>, m: &DMatrix<f64>, ridge: f64) -> DMatrix<f64> {
    let r = gram.nrows();
    let reg = gram + DMatrix::<f64>::identity(r, r) * ridge;
    if let Some(chol) = Cholesky::new(reg.clone()) {
        // Solve (G+λI) Xᵀ = Mᵀ, then transpose back.
        chol.solve(&m.transpose()).transpose()
    } else {
        let svd = reg.svd(true, true);
        svd.solve(&m.transpose(), 1e-14)
            .expect("svd solve on square system")
            .transpose()
    }
}

/// Fits a rank-`R` CP decomposition by alternating least squares over the
/// mode unfoldings. Returns the best factors over `cfg.restarts` seeded
/// restarts and the achieved fit `1 - ‖T - recon‖_F / ‖T‖_F`.
///
/// A zero tensor returns zero factors with fit 1 by convention.
pub fn als_fit(t: &Tensor3, rank: usize, cfg: &AlsConfig) -> Result<(CpFactors, f64)> {
    if rank == 0 {
        return Err(Error::InvalidArgument("als_fit requires rank >= 1".into()));
    }
    let (d1, d2, d3) = t.dims();
    let norm_t = t.frobenius_norm();
    if norm_t == 0.0 {
        return Ok((
            CpFactors::new(
                DMatrix::zeros(d1, rank),
                DMatrix::zeros(d2, rank),
                DMatrix::zeros(d3, rank),
            )?,
            1.0,
        ));
    }
    let unfoldings = [t.unfold(Mode::One), t.unfold(Mode::Two), t.unfold(Mode::Three)];

    let mut best: Option<(CpFactors, f64)> = None;
    for restart in 0..cfg.restarts.max(1) {
        let mut rng = stream_rng(cfg.seed, restart as u64);
        let init = CpFactors {
            a: uniform_matrix(&mut rng, d1, rank, 1.0),
            b: uniform_matrix(&mut rng, d2, rank, 1.0),
            c: uniform_matrix(&mut rng, d3, rank, 1.0),
        };
        let (factors, fit) = als_run(t, &unfoldings, norm_t, init, cfg);
        let better = match &best {
            None => true,
            Some((_, best_fit)) => fit > *best_fit,
        };
        if better {
            best = Some((factors, fit));
        }
        if best.as_ref().map(|(_, f)| *f >= 1.0 - 1e-12).unwrap_or(false) {
            break;
        }
    }
    Ok(best.expect("at least one restart"))
}

/// Exact CP decomposition with one rank-one term per entry of the cheapest
/// pair of modes: `R = min{d1d2, d1d3, d2d3}` (ties prefer earlier pairs).
/// For the `(1,2)` pairing the terms are `e_i ∘ e_j ∘ T[i,j,:]`.
pub fn exact_slice_decomposition(t: &Tensor3) -> CpFactors {
    let (d1, d2, d3) = t.dims();
    let products = [d1 * d2, d1 * d3, d2 * d3];
    let pair = products
        .iter()
        .enumerate()
        .min_by_key(|(_, p)| **p)
        .map(|(idx, _)| idx)
        .unwrap();
    match pair {
        0 => {
            let r = d1 * d2;
            let mut a = DMatrix::zeros(d1, r);
            let mut b = DMatrix::zeros(d2, r);
            let mut c = DMatrix::zeros(d3, r);
            for i in 0..d1 {
                for j in 0..d2 {
                    let col = i * d2 + j;
                    a[(i, col)] = 1.0;
                    b[(j, col)] = 1.0;
                    for k in 0..d3 {
                        c[(k, col)] = t.get(i, j, k);
                    }
                }
            }
            CpFactors { a, b, c }
        }
        1 => {
            let r = d1 * d3;
            let mut a = DMatrix::zeros(d1, r);
            let mut b = DMatrix::zeros(d2, r);
            let mut c = DMatrix::zeros(d3, r);
            for i in 0..d1 {
                for k in 0..d3 {
                    let col = i * d3 + k;
                    a[(i, col)] = 1.0;
                    c[(k, col)] = 1.0;
                    for j in 0..d2 {
                        b[(j, col)] = t.get(i, j, k);
                    }
                }
            }
            CpFactors { a, b, c }
        }
        _ => {
            let r = d2 * d3;
            let mut a = DMatrix::zeros(d1, r);
            let mut b = DMatrix::zeros(d2, r);
            let mut c = DMatrix::zeros(d3, r);
            for j in 0..d2 {
                for k in 0..d3 {
                    let col = j * d3 + k;
                    b[(j, col)] = 1.0;
                    c[(k, col)] = 1.0;
                    for i in 0..d1 {
                        a[(i, col)] = t.get(i, j, k);
                    }
                }
            }
            CpFactors { a, b, c }
        }
    }
}

/// Heuristic CP-rank estimate: sweeps candidate ranks `1..=max_rank` and
/// reports the smallest one whose ALS fit reaches `1 - fit_tolerance`.
///
/// Exact rank certification is intractable; ALS local minima can make this
/// over-estimate, which `converged` and the per-candidate fits expose.
pub fn estimate_cp_rank(t: &Tensor3, max_rank: usize, cfg: &AlsConfig) -> Result<RankReport> {
    if max_rank == 0 {
        return Err(Error::InvalidArgument(
            "estimate_cp_rank requires max_rank >= 1".into(),
        ));
    }
    if t.frobenius_norm() == 0.0 {
        return Ok(RankReport {
            estimated_rank: 0,
            fits: vec![],
            restarts_used: 0,
            tolerance: cfg.fit_tolerance,
            converged: true,
        });
    }
    let mut fits = Vec::new();
    for rank in 1..=max_rank {
        let (_, fit) = als_fit(t, rank, cfg)?;
        fits.push((rank, fit));
        if fit >= 1.0 - cfg.fit_tolerance {
            return Ok(RankReport {
                estimated_rank: rank,
                fits,
                restarts_used: cfg.restarts,
                tolerance: cfg.fit_tolerance,
                converged: true,
            });
        }
    }
    Ok(RankReport {
        estimated_rank: max_rank,
        fits,
        restarts_used: cfg.restarts,
        tolerance: cfg.fit_tolerance,
        converged: false,
    })
}

/// `R_max ≤ min{d1·d2, d1·d3, d2·d3}` for tensors of the given dimensions.
pub fn max_rank_upper_bound(d1: usize, d2: usize, d3: usize) -> usize {
    (d1 * d2).min(d1 * d3).min(d2 * d3)
}

/// Closed-form lower bound `n²d / (2n + d - 2)` on the smallest typical CP
/// rank of `n×d×n` tensors.
pub fn typical_rank_lower_bound(n: usize, d: usize) -> f64 {
    let n = n as f64;
    let d = d as f64;
    n * n * d / (2.0 * n + d - 2.0)
}
