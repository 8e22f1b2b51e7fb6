//! One-norm and condition-number estimation through a matrix-free operator
//! interface.

use serde::{Deserialize, Serialize};

use crate::densela::{dot, norm1, norm2, norm_inf, Matrix, RngSeed};
use crate::error::{Error, Result};
use crate::sketch::{basic_randomized, randomized_power_method};

/// Something that can be multiplied by a vector, and by its transpose.
///
/// `apply` and `apply_transpose` panic on a length mismatch; the estimators
/// and sketches check dimensions before calling them.
pub trait LinearOperator {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;
    fn apply(&self, x: &[f64]) -> Vec<f64>;
    fn apply_transpose(&self, y: &[f64]) -> Vec<f64>;

    /// `A·X`, column by column unless overridden.
    fn apply_block(&self, x: &Matrix) -> Matrix {
        let cols: Vec<Vec<f64>> = (0..x.cols()).map(|j| self.apply(&x.column(j))).collect();
        Matrix::from_columns(&cols)
    }

    fn apply_transpose_block(&self, y: &Matrix) -> Matrix {
        let cols: Vec<Vec<f64>> = (0..y.cols())
            .map(|j| self.apply_transpose(&y.column(j)))
            .collect();
        Matrix::from_columns(&cols)
    }
}

impl LinearOperator for Matrix {
    fn rows(&self) -> usize {
        Matrix::rows(self)
    }
    fn cols(&self) -> usize {
        Matrix::cols(self)
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.matvec(x).expect("operator length mismatch")
    }
    fn apply_transpose(&self, y: &[f64]) -> Vec<f64> {
        self.t_matvec(y).expect("operator length mismatch")
    }
    fn apply_block(&self, x: &Matrix) -> Matrix {
        self.matmul(x).expect("operator shape mismatch")
    }
    fn apply_transpose_block(&self, y: &Matrix) -> Matrix {
        self.t_matmul(y).expect("operator shape mismatch")
    }
}

impl<O: LinearOperator + ?Sized> LinearOperator for &O {
    fn rows(&self) -> usize {
        (**self).rows()
    }
    fn cols(&self) -> usize {
        (**self).cols()
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        (**self).apply(x)
    }
    fn apply_transpose(&self, y: &[f64]) -> Vec<f64> {
        (**self).apply_transpose(y)
    }
    fn apply_block(&self, x: &Matrix) -> Matrix {
        (**self).apply_block(x)
    }
    fn apply_transpose_block(&self, y: &Matrix) -> Matrix {
        (**self).apply_transpose_block(y)
    }
}

/// `Aᵀ` viewed as an operator.
pub struct Transposed<O>(pub O);

impl<O: LinearOperator> LinearOperator for Transposed<O> {
    fn rows(&self) -> usize {
        self.0.cols()
    }
    fn cols(&self) -> usize {
        self.0.rows()
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.0.apply_transpose(x)
    }
    fn apply_transpose(&self, y: &[f64]) -> Vec<f64> {
        self.0.apply(y)
    }
    fn apply_block(&self, x: &Matrix) -> Matrix {
        self.0.apply_transpose_block(x)
    }
    fn apply_transpose_block(&self, y: &Matrix) -> Matrix {
        self.0.apply_block(y)
    }
}

type VecFn = Box<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// Operator from a pair of closures.
pub struct FnOperator {
    rows: usize,
    cols: usize,
    forward: VecFn,
    adjoint: VecFn,
}

impl FnOperator {
    pub fn new(
        rows: usize,
        cols: usize,
        forward: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
        adjoint: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            rows,
            cols,
            forward: Box::new(forward),
            adjoint: Box::new(adjoint),
        }
    }
}

impl LinearOperator for FnOperator {
    fn rows(&self) -> usize {
        self.rows
    }
    fn cols(&self) -> usize {
        self.cols
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "operator length mismatch");
        (self.forward)(x)
    }
    fn apply_transpose(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.rows, "operator length mismatch");
        (self.adjoint)(y)
    }
}

/// `R⁻¹` for a square upper-triangular `R`, applied by substitution.
pub struct UpperTriangularInverse {
    r: Matrix,
}

impl UpperTriangularInverse {
    pub fn new(r: Matrix) -> Result<Self> {
        let n = r.rows();
        if r.cols() != n {
            return Err(Error::DimensionMismatch(format!(
                "triangular inverse needs a square matrix, got {}x{}",
                n,
                r.cols()
            )));
        }
        for i in 0..n {
            if r[(i, i)] == 0.0 {
                return Err(Error::Singular);
            }
            if (0..i).any(|j| r[(i, j)] != 0.0) {
                return Err(Error::InvalidArgument(
                    "matrix has entries below the diagonal".into(),
                ));
            }
        }
        Ok(Self { r })
    }
}

impl LinearOperator for UpperTriangularInverse {
    fn rows(&self) -> usize {
        self.r.rows()
    }
    fn cols(&self) -> usize {
        self.r.rows()
    }
    fn apply(&self, b: &[f64]) -> Vec<f64> {
        let n = self.r.rows();
        assert_eq!(b.len(), n, "operator length mismatch");
        let mut x = b.to_vec();
        for i in (0..n).rev() {
            let row = self.r.row(i);
            let s = dot(&row[i + 1..], &x[i + 1..]);
            x[i] = (x[i] - s) / row[i];
        }
        x
    }
    fn apply_transpose(&self, b: &[f64]) -> Vec<f64> {
        let n = self.r.rows();
        assert_eq!(b.len(), n, "operator length mismatch");
        let mut x = b.to_vec();
        for i in 0..n {
            x[i] /= self.r[(i, i)];
            let xi = x[i];
            for (xj, rij) in x[i + 1..].iter_mut().zip(&self.r.row(i)[i + 1..]) {
                *xj -= rij * xi;
            }
        }
        x
    }
}

/// `A⁻¹` through an LU factorization with partial pivoting, `PA = LU`.
pub struct LuInverse {
    lu: Matrix,
    perm: Vec<usize>,
}

impl LuInverse {
    pub fn new(a: &Matrix) -> Result<Self> {
        let n = a.rows();
        if a.cols() != n {
            return Err(Error::DimensionMismatch(format!(
                "LU needs a square matrix, got {}x{}",
                n,
                a.cols()
            )));
        }
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for c in 0..n {
            let piv = (c..n)
                .max_by(|&i, &j| lu[(i, c)].abs().total_cmp(&lu[(j, c)].abs()))
                .expect("nonempty range");
            if lu[(piv, c)] == 0.0 {
                return Err(Error::Singular);
            }
            if piv != c {
                for j in 0..n {
                    let t = lu[(c, j)];
                    lu[(c, j)] = lu[(piv, j)];
                    lu[(piv, j)] = t;
                }
                perm.swap(c, piv);
            }
            let d = lu[(c, c)];
            for i in c + 1..n {
                let l = lu[(i, c)] / d;
                lu[(i, c)] = l;
                if l != 0.0 {
                    for j in c + 1..n {
                        lu[(i, j)] -= l * lu[(c, j)];
                    }
                }
            }
        }
        Ok(Self { lu, perm })
    }
}

impl LinearOperator for LuInverse {
    fn rows(&self) -> usize {
        self.perm.len()
    }
    fn cols(&self) -> usize {
        self.perm.len()
    }
    fn apply(&self, b: &[f64]) -> Vec<f64> {
        let n = self.perm.len();
        assert_eq!(b.len(), n, "operator length mismatch");
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let s = dot(&self.lu.row(i)[..i], &x[..i]);
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let row = self.lu.row(i);
            let s = dot(&row[i + 1..], &x[i + 1..]);
            x[i] = (x[i] - s) / row[i];
        }
        x
    }
    fn apply_transpose(&self, b: &[f64]) -> Vec<f64> {
        // Aᵀ = Uᵀ Lᵀ P.
        let n = self.perm.len();
        assert_eq!(b.len(), n, "operator length mismatch");
        let mut z = b.to_vec();
        for i in 0..n {
            z[i] /= self.lu[(i, i)];
            let zi = z[i];
            for (zj, u) in z[i + 1..].iter_mut().zip(&self.lu.row(i)[i + 1..]) {
                *zj -= u * zi;
            }
        }
        for i in (0..n).rev() {
            let zi = z[i];
            for (zj, l) in z[..i].iter_mut().zip(&self.lu.row(i)[..i]) {
                *zj -= l * zi;
            }
        }
        let mut x = vec![0.0; n];
        for (i, &p) in self.perm.iter().enumerate() {
            x[p] = z[i];
        }
        x
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartVector {
    Ones,
    UnitEj,
    Randomized,
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormEstimate {
    pub value: f64,
    pub iterations: usize,
    pub matvec_count: usize,
    pub start_vector_tag: StartVector,
    /// `‖Ax‖₁` at every iteration.
    pub history: Vec<f64>,
}

pub const DEFAULT_HAGER_ITERS: usize = 5;
pub const DEFAULT_SKETCH_SAMPLES: usize = 5;

fn sign(v: f64) -> f64 {
    if v >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

fn classify_start(x: &[f64]) -> StartVector {
    let nonzero = x.iter().filter(|&&v| v != 0.0).count();
    if nonzero == 1 {
        StartVector::UnitEj
    } else if x.iter().all(|&v| v == x[0]) {
        StartVector::Ones
    } else {
        StartVector::Custom
    }
}

/// Hager's ascent over the unit ℓ₁ ball. The result is an attained `‖Ax‖₁`
/// with `‖x‖₁ = 1`, so it never exceeds `‖A‖₁`.
pub fn hager_one_norm<O: LinearOperator + ?Sized>(
    op: &O,
    x0: &[f64],
    max_iter: usize,
) -> Result<NormEstimate> {
    let tag = classify_start(x0);
    hager_tagged(op, x0, max_iter, tag)
}

fn hager_tagged<O: LinearOperator + ?Sized>(
    op: &O,
    x0: &[f64],
    max_iter: usize,
    tag: StartVector,
) -> Result<NormEstimate> {
    if x0.len() != op.cols() {
        return Err(Error::DimensionMismatch(format!(
            "start vector of length {} for an operator with {} columns",
            x0.len(),
            op.cols()
        )));
    }
    if max_iter == 0 {
        return Err(Error::InvalidArgument("max_iter must be at least 1".into()));
    }
    let s = norm1(x0);
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::InvalidArgument(
            "start vector must be finite and nonzero".into(),
        ));
    }
    let mut x: Vec<f64> = x0.iter().map(|v| v / s).collect();
    let mut history = Vec::new();
    let mut matvecs = 0;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let y = op.apply(&x);
        history.push(norm1(&y));
        let signs: Vec<f64> = y.iter().map(|&v| sign(v)).collect();
        let z = op.apply_transpose(&signs);
        matvecs += 2;
        if norm_inf(&z) <= dot(&z, &x) {
            break;
        }
        let mut j = 0;
        for (i, v) in z.iter().enumerate() {
            if v.abs() > z[j].abs() {
                j = i;
            }
        }
        x = vec![0.0; x.len()];
        x[j] = 1.0;
    }
    let value = history.iter().copied().fold(0.0, f64::max);
    Ok(NormEstimate {
        value,
        iterations,
        matvec_count: matvecs,
        start_vector_tag: tag,
        history,
    })
}

/// Hager started from the leading right singular vector of a rank-1
/// randomized approximation built from `ell` Gaussian samples.
pub fn randomized_hager<O: LinearOperator + ?Sized>(
    op: &O,
    ell: usize,
    seed: RngSeed,
    hager_iters: usize,
) -> Result<NormEstimate> {
    if ell < 2 {
        return Err(Error::InvalidArgument(format!(
            "randomized start needs ell >= 2, got {ell}"
        )));
    }
    let approx = basic_randomized(op, 1, ell, seed)?;
    let u = approx.v_hat.column(0);
    let mut est = hager_tagged(op, &u, hager_iters, StartVector::Randomized)?;
    est.matvec_count += approx.matvec_count;
    Ok(est)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionEstimate {
    pub kappa1_est: f64,
    pub kappa2_est: f64,
    pub matvec_count: usize,
}

/// `‖A‖·‖A⁻¹‖` in the 1-norm (randomized Hager on both operators) and in the
/// 2-norm (randomized power method with `q` steps on both).
pub fn condition_estimate<O, I>(
    op: &O,
    inv_op: &I,
    ell: usize,
    q: usize,
    seed: RngSeed,
) -> Result<ConditionEstimate>
where
    O: LinearOperator + ?Sized,
    I: LinearOperator + ?Sized,
{
    if op.rows() != op.cols() || inv_op.rows() != op.rows() || inv_op.cols() != op.cols() {
        return Err(Error::DimensionMismatch(
            "condition estimation needs square operators of equal size".into(),
        ));
    }
    let a1 = randomized_hager(op, ell, seed.derive(1), DEFAULT_HAGER_ITERS)?;
    let i1 = randomized_hager(inv_op, ell, seed.derive(2), DEFAULT_HAGER_ITERS)?;
    let a2 = randomized_power_method(op, q, seed.derive(3))?;
    let i2 = randomized_power_method(inv_op, q, seed.derive(4))?;
    Ok(ConditionEstimate {
        kappa1_est: a1.value * i1.value,
        kappa2_est: a2.norm_estimate * i2.norm_estimate,
        matvec_count: a1.matvec_count + i1.matvec_count + a2.matvec_count + i2.matvec_count,
    })
}

/// Largest absolute deviation from the adjoint identity `⟨Ax, y⟩ = ⟨x, Aᵀy⟩`
/// over `probes` Gaussian pairs, relative to `‖x‖‖y‖`.
pub fn adjoint_defect<O: LinearOperator + ?Sized>(op: &O, probes: usize, seed: RngSeed) -> f64 {
    let mut g = crate::densela::GaussianStream::new(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..probes {
        let x = g.vector(op.cols());
        let y = g.vector(op.rows());
        let lhs = dot(&op.apply(&x), &y);
        let rhs = dot(&x, &op.apply_transpose(&y));
        worst = worst.max((lhs - rhs).abs() / (norm2(&x) * norm2(&y)));
    }
    worst
}
