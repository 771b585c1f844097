//! Dense order-3 tensor arithmetic: storage, n-mode vector products,
//! Hadamard/outer products and mode-n unfoldings.
//!
//! Layout is row-major in `(i, j, k)` with `k` fastest, so mode-3 fibers
//! `T[i, j, :]` are contiguous. That is the hot access pattern of the
//! bilinear contraction `T ×₁ h ×₂ x` used by the recurrent cells.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Tensor mode (axis) selector for products and unfoldings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    One,
    Two,
    Three,
}

impl Mode {
    pub fn index(self) -> usize {
        match self {
            Mode::One => 0,
            Mode::Two => 1,
            Mode::Three => 2,
        }
    }
}

impl TryFrom<usize> for Mode {
    type Error = Error;
    fn try_from(v: usize) -> Result<Self> {
        match v {
            1 => Ok(Mode::One),
            2 => Ok(Mode::Two),
            3 => Ok(Mode::Three),
            other => Err(Error::InvalidArgument(format!(
                "mode must be 1, 2 or 3, got {other}"
            ))),
        }
    }
}

/// Dense order-3 tensor with 64-bit entries.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    dims: (usize, usize, usize),
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(d1: usize, d2: usize, d3: usize) -> Self {
        Tensor3 {
            dims: (d1, d2, d3),
            data: vec![0.0; d1 * d2 * d3],
        }
    }

    /// Builds a tensor from row-major `(i, j, k)` data, `k` fastest.
    pub fn from_vec(dims: (usize, usize, usize), data: Vec<f64>) -> Result<Self> {
        let (d1, d2, d3) = dims;
        if data.len() != d1 * d2 * d3 {
            return Err(Error::dims(
                "Tensor3::from_vec",
                d1 * d2 * d3,
                data.len(),
            ));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("tensor entries must be finite".into()));
        }
        Ok(Tensor3 { dims, data })
    }

    pub fn from_fn(
        dims: (usize, usize, usize),
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        let (d1, d2, d3) = dims;
        let mut data = Vec::with_capacity(d1 * d2 * d3);
        for i in 0..d1 {
            for j in 0..d2 {
                for k in 0..d3 {
                    data.push(f(i, j, k));
                }
            }
        }
        Tensor3 { dims, data }
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    fn offset(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.dims.1 + j) * self.dims.2 + k
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.offset(i, j, k)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        let o = self.offset(i, j, k);
        self.data[o] = v;
    }

    /// Contiguous mode-3 fiber `T[i, j, :]`.
    pub fn fiber3(&self, i: usize, j: usize) -> &[f64] {
        let o = self.offset(i, j, 0);
        &self.data[o..o + self.dims.2]
    }

    pub fn fiber3_mut(&mut self, i: usize, j: usize) -> &mut [f64] {
        let o = self.offset(i, j, 0);
        let d3 = self.dims.2;
        &mut self.data[o..o + d3]
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &Tensor3) -> f64 {
        assert_eq!(self.dims, other.dims, "max_abs_diff on mismatched dims");
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|v| *v == 0.0)
    }

    pub fn scale(&mut self, s: f64) {
        for v in &mut self.data {
            *v *= s;
        }
    }

    /// `self += s * other`.
    pub fn add_scaled(&mut self, other: &Tensor3, s: f64) {
        assert_eq!(self.dims, other.dims, "add_scaled on mismatched dims");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    /// Contracts one mode against a vector; the result keeps the two
    /// remaining modes in order.
    ///
    /// `(T ×₁ v)[j,k] = Σ_i T[i,j,k] v[i]`, and analogously for the other
    /// modes.
    pub fn mode_product(&self, v: &DVector<f64>, mode: Mode) -> Result<DMatrix<f64>> {
        let (d1, d2, d3) = self.dims;
        let need = [d1, d2, d3][mode.index()];
        if v.len() != need {
            return Err(Error::dims("mode_product", need, v.len()));
        }
        let out = match mode {
            Mode::One => {
                let mut m = DMatrix::zeros(d2, d3);
                for i in 0..d1 {
                    let w = v[i];
                    if w == 0.0 {
                        continue;
                    }
                    for j in 0..d2 {
                        let fiber = self.fiber3(i, j);
                        for k in 0..d3 {
                            m[(j, k)] += w * fiber[k];
                        }
                    }
                }
                m
            }
            Mode::Two => {
                let mut m = DMatrix::zeros(d1, d3);
                for i in 0..d1 {
                    for j in 0..d2 {
                        let w = v[j];
                        if w == 0.0 {
                            continue;
                        }
                        let fiber = self.fiber3(i, j);
                        for k in 0..d3 {
                            m[(i, k)] += w * fiber[k];
                        }
                    }
                }
                m
            }
            Mode::Three => {
                let mut m = DMatrix::zeros(d1, d2);
                for i in 0..d1 {
                    for j in 0..d2 {
                        let fiber = self.fiber3(i, j);
                        let mut acc = 0.0;
                        for k in 0..d3 {
                            acc += fiber[k] * v[k];
                        }
                        m[(i, j)] = acc;
                    }
                }
                m
            }
        };
        Ok(out)
    }

    /// `(T ×₁ h ×₂ x)[k] = Σ_{i,j} T[i,j,k] h[i] x[j]`.
    pub fn bilinear_contract(&self, h: &DVector<f64>, x: &DVector<f64>) -> Result<DVector<f64>> {
        let (d1, d2, d3) = self.dims;
        if h.len() != d1 {
            return Err(Error::dims("bilinear_contract (mode 1)", d1, h.len()));
        }
        if x.len() != d2 {
            return Err(Error::dims("bilinear_contract (mode 2)", d2, x.len()));
        }
        let mut out = DVector::zeros(d3);
        for i in 0..d1 {
            let hi = h[i];
            if hi == 0.0 {
                continue;
            }
            for j in 0..d2 {
                let c = hi * x[j];
                if c == 0.0 {
                    continue;
                }
                let fiber = self.fiber3(i, j);
                for k in 0..d3 {
                    out[k] += c * fiber[k];
                }
            }
        }
        Ok(out)
    }

    /// Mode-n unfolding (columns ordered with the lower remaining mode
    /// fastest), chosen so that `⟦A,B,C⟧` unfolds to `A (C ⊙ B)ᵀ` etc.
    pub fn unfold(&self, mode: Mode) -> DMatrix<f64> {
        let (d1, d2, d3) = self.dims;
        match mode {
            Mode::One => {
                let mut m = DMatrix::zeros(d1, d2 * d3);
                for i in 0..d1 {
                    for j in 0..d2 {
                        for k in 0..d3 {
                            m[(i, j + k * d2)] = self.get(i, j, k);
                        }
                    }
                }
                m
            }
            Mode::Two => {
                let mut m = DMatrix::zeros(d2, d1 * d3);
                for i in 0..d1 {
                    for j in 0..d2 {
                        for k in 0..d3 {
                            m[(j, i + k * d1)] = self.get(i, j, k);
                        }
                    }
                }
                m
            }
            Mode::Three => {
                let mut m = DMatrix::zeros(d3, d1 * d2);
                for i in 0..d1 {
                    for j in 0..d2 {
                        for k in 0..d3 {
                            m[(k, i + j * d1)] = self.get(i, j, k);
                        }
                    }
                }
                m
            }
        }
    }

    /// Inverse of [`Tensor3::unfold`].
    pub fn refold(m: &DMatrix<f64>, dims: (usize, usize, usize), mode: Mode) -> Result<Tensor3> {
        let (d1, d2, d3) = dims;
        let expect = match mode {
            Mode::One => (d1, d2 * d3),
            Mode::Two => (d2, d1 * d3),
            Mode::Three => (d3, d1 * d2),
        };
        if m.shape() != expect {
            return Err(Error::dims(
                "refold",
                format!("{expect:?}"),
                format!("{:?}", m.shape()),
            ));
        }
        let mut t = Tensor3::zeros(d1, d2, d3);
        for i in 0..d1 {
            for j in 0..d2 {
                for k in 0..d3 {
                    let v = match mode {
                        Mode::One => m[(i, j + k * d2)],
                        Mode::Two => m[(j, i + k * d1)],
                        Mode::Three => m[(k, i + j * d1)],
                    };
                    t.set(i, j, k, v);
                }
            }
        }
        Ok(t)
    }
}

/// Element-wise product of two equal-length vectors.
pub fn hadamard(u: &DVector<f64>, v: &DVector<f64>) -> Result<DVector<f64>> {
    if u.len() != v.len() {
        return Err(Error::dims("hadamard", u.len(), v.len()));
    }
    Ok(u.component_mul(v))
}

/// Rank-one tensor `(a ∘ b ∘ c)[i,j,k] = a[i] b[j] c[k]`.
pub fn outer3(a: &DVector<f64>, b: &DVector<f64>, c: &DVector<f64>) -> Tensor3 {
    Tensor3::from_fn((a.len(), b.len(), c.len()), |i, j, k| a[i] * b[j] * c[k])
}

/// Standard basis vector `e_i` of the given length.
pub fn basis(len: usize, i: usize) -> DVector<f64> {
    let mut v = DVector::zeros(len);
    v[i] = 1.0;
    v
}

/// Count of singular values above `rel_tol * σ_max`; 0 for a zero matrix.
pub fn numerical_rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.clone().singular_values();
    let smax = sv.iter().cloned().fold(0.0_f64, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|s| **s > rel_tol * smax).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_rng, uniform_vector};

    fn random_tensor(dims: (usize, usize, usize), seed: u64) -> Tensor3 {
        let mut rng = stream_rng(seed, 0);
        use rand::Rng;
        Tensor3::from_fn(dims, |_, _, _| rng.random_range(-1.0..=1.0))
    }

    /// Brute-force triple loop for the mode product.
    fn mode_product_oracle(t: &Tensor3, v: &DVector<f64>, mode: Mode) -> DMatrix<f64> {
        let (d1, d2, d3) = t.dims();
        match mode {
            Mode::One => DMatrix::from_fn(d2, d3, |j, k| {
                (0..d1).map(|i| t.get(i, j, k) * v[i]).sum()
            }),
            Mode::Two => DMatrix::from_fn(d1, d3, |i, k| {
                (0..d2).map(|j| t.get(i, j, k) * v[j]).sum()
            }),
            Mode::Three => DMatrix::from_fn(d1, d2, |i, j| {
                (0..d3).map(|k| t.get(i, j, k) * v[k]).sum()
            }),
        }
    }

    #[test]
    fn mode_product_all_ones() {
        let t = Tensor3::from_fn((2, 2, 2), |_, _, _| 1.0);
        let v = DVector::from_element(2, 1.0);
        let m = t.mode_product(&v, Mode::One).unwrap();
        assert_eq!(m, DMatrix::from_element(2, 2, 2.0));
    }

    #[test]
    fn mode_product_indicator() {
        let mut t = Tensor3::zeros(2, 2, 2);
        t.set(0, 0, 0, 1.0);
        let m = t.mode_product(&basis(2, 0), Mode::Two).unwrap();
        assert_eq!(m[(0, 0)], 1.0);
        assert_eq!(m.iter().map(|v| v.abs()).sum::<f64>(), 1.0);
    }

    #[test]
    fn mode_product_matches_triple_loop() {
        let t = random_tensor((3, 4, 2), 11);
        for (mode, len) in [(Mode::One, 3), (Mode::Two, 4), (Mode::Three, 2)] {
            let v = uniform_vector(&mut stream_rng(12, mode.index() as u64), len, 1.0);
            let got = t.mode_product(&v, mode).unwrap();
            let want = mode_product_oracle(&t, &v, mode);
            assert!((got - want).abs().max() <= 1e-14);
        }
    }

    #[test]
    fn mode_product_rejects_bad_length() {
        let t = Tensor3::zeros(3, 4, 2);
        let v = DVector::zeros(5);
        assert!(matches!(
            t.mode_product(&v, Mode::One),
            Err(Error::DimMismatch { .. })
        ));
    }

    #[test]
    fn bilinear_contract_zero_and_indicator() {
        let t = Tensor3::zeros(3, 4, 2);
        let h = uniform_vector(&mut stream_rng(1, 0), 3, 1.0);
        let x = uniform_vector(&mut stream_rng(1, 1), 4, 1.0);
        assert_eq!(t.bilinear_contract(&h, &x).unwrap(), DVector::zeros(2));

        let mut ind = Tensor3::zeros(2, 3, 4);
        ind.set(0, 0, 0, 1.0);
        let out = ind
            .bilinear_contract(&basis(2, 0), &basis(3, 0))
            .unwrap();
        assert_eq!(out, basis(4, 0));
    }

    #[test]
    fn bilinear_contract_matches_double_loop() {
        let t = random_tensor((3, 5, 3), 21);
        let h = uniform_vector(&mut stream_rng(22, 0), 3, 1.0);
        let x = uniform_vector(&mut stream_rng(22, 1), 5, 1.0);
        let got = t.bilinear_contract(&h, &x).unwrap();
        let want = DVector::from_fn(3, |k, _| {
            let mut acc = 0.0;
            for i in 0..3 {
                for j in 0..5 {
                    acc += t.get(i, j, k) * h[i] * x[j];
                }
            }
            acc
        });
        assert!((got - want).abs().max() <= 1e-14);
    }

    #[test]
    fn bilinear_agrees_with_two_mode_products() {
        // Contracting mode 1 then mode 2 must match the fused kernel.
        let t = random_tensor((4, 3, 5), 31);
        let h = uniform_vector(&mut stream_rng(32, 0), 4, 1.0);
        let x = uniform_vector(&mut stream_rng(32, 1), 3, 1.0);
        let m = t.mode_product(&h, Mode::One).unwrap(); // (d2, d3)
        let via_modes = m.transpose() * &x;
        let fused = t.bilinear_contract(&h, &x).unwrap();
        assert!((via_modes - fused).abs().max() <= 1e-13);
    }

    #[test]
    fn hadamard_and_outer3_basics() {
        let u = DVector::from_vec(vec![1.0, 2.0]);
        let v = DVector::from_vec(vec![3.0, 4.0]);
        assert_eq!(
            hadamard(&u, &v).unwrap(),
            DVector::from_vec(vec![3.0, 8.0])
        );
        assert!(hadamard(&u, &DVector::zeros(3)).is_err());

        let t = outer3(&basis(2, 0), &basis(3, 0), &basis(2, 0));
        assert_eq!(t.get(0, 0, 0), 1.0);
        assert_eq!(t.data().iter().map(|v| v.abs()).sum::<f64>(), 1.0);
    }

    #[test]
    fn outer3_contraction_identity() {
        // bilinear_contract(a∘b∘c, h, x) = (aᵀh)(bᵀx) c
        let mut rng = stream_rng(41, 0);
        let a = uniform_vector(&mut rng, 4, 1.0);
        let b = uniform_vector(&mut rng, 3, 1.0);
        let c = uniform_vector(&mut rng, 5, 1.0);
        let h = uniform_vector(&mut rng, 4, 1.0);
        let x = uniform_vector(&mut rng, 3, 1.0);
        let got = outer3(&a, &b, &c).bilinear_contract(&h, &x).unwrap();
        let want = &c * (a.dot(&h) * b.dot(&x));
        assert!((got - want).abs().max() <= 1e-13);
    }

    #[test]
    fn unfold_refold_roundtrip_bit_exact() {
        let t = random_tensor((3, 4, 2), 51);
        for mode in [Mode::One, Mode::Two, Mode::Three] {
            let back = Tensor3::refold(&t.unfold(mode), t.dims(), mode).unwrap();
            assert_eq!(back, t);
        }
    }

    #[test]
    fn mode_product_is_linear() {
        let t = random_tensor((3, 4, 2), 61);
        let mut rng = stream_rng(62, 0);
        use rand::Rng;
        let v = uniform_vector(&mut rng, 4, 1.0);
        let w = uniform_vector(&mut rng, 4, 1.0);
        let (alpha, beta): (f64, f64) =
            (rng.random_range(-2.0..=2.0), rng.random_range(-2.0..=2.0));
        let lhs = t
            .mode_product(&(&v * alpha + &w * beta), Mode::Two)
            .unwrap();
        let rhs = t.mode_product(&v, Mode::Two).unwrap() * alpha
            + t.mode_product(&w, Mode::Two).unwrap() * beta;
        assert!((lhs - rhs).abs().max() <= 1e-12);
    }

    #[test]
    fn numerical_rank_on_known_matrices() {
        assert_eq!(numerical_rank(&DMatrix::zeros(3, 4), 1e-9), 0);
        assert_eq!(numerical_rank(&DMatrix::identity(4, 4), 1e-9), 4);
        let m = DMatrix::from_fn(4, 4, |i, j| ((i + 1) * (j + 1)) as f64); // rank 1
        assert_eq!(numerical_rank(&m, 1e-9), 1);
    }
}
