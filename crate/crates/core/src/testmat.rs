//! Matrix families used by the experiments and the counterexamples.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::densela::{qr_factor, GaussianStream, Matrix, RngSeed};
use crate::error::{Error, Result};

/// `A_ij = log ‖X_i − Y_j‖₂` for planar points.
pub fn log_kernel(x: &[[f64; 2]], y: &[[f64; 2]]) -> Matrix {
    Matrix::from_fn(x.len(), y.len(), |i, j| {
        ((x[i][0] - y[j][0]).hypot(x[i][1] - y[j][1])).ln()
    })
}

/// Log kernel between `n` standard normal points `X_i` and `n` normal
/// points `Y_j` centred at `(μ, μ)`.
pub fn log_kernel_gaussian(n: usize, mu: f64, seed: RngSeed) -> Result<Matrix> {
    if n < 2 || !mu.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "log kernel needs n >= 2 and finite mu, got n={n} mu={mu}"
        )));
    }
    let mut g = GaussianStream::new(seed);
    let x: Vec<[f64; 2]> = (0..n).map(|_| [g.normal(), g.normal()]).collect();
    let mut y: Vec<[f64; 2]> = (0..n)
        .map(|_| [mu + g.normal(), mu + g.normal()])
        .collect();
    for yj in y.iter_mut() {
        while x.iter().any(|xi| xi[0] == yj[0] && xi[1] == yj[1]) {
            *yj = [mu + g.normal(), mu + g.normal()];
        }
    }
    Ok(log_kernel(&x, &y))
}

/// Equispaced points on the circles `‖X − (−1,−1)‖ = √2` and
/// `‖Y − (2,2)‖ = 2√2`, both rotated about the origin by `angle`.
pub fn disc_points(n: usize, angle: f64) -> (Vec<[f64; 2]>, Vec<[f64; 2]>) {
    let rot = |p: [f64; 2]| {
        let (s, c) = angle.sin_cos();
        [c * p[0] - s * p[1], s * p[0] + c * p[1]]
    };
    let nf = n as f64;
    let x = (0..n)
        .map(|i| {
            let t = 2.0 * PI * i as f64 / nf;
            rot([-1.0 + SQRT_2 * t.cos(), -1.0 + SQRT_2 * t.sin()])
        })
        .collect();
    let y = (0..n)
        .map(|j| {
            let t = 2.0 * PI * (j as f64 + 0.5) / nf;
            rot([2.0 + 2.0 * SQRT_2 * t.cos(), 2.0 + 2.0 * SQRT_2 * t.sin()])
        })
        .collect();
    (x, y)
}

/// The two-disc log kernel. The circles touch at the origin; the half-step
/// offset of the `Y` angles keeps the two point sets disjoint.
pub fn log_kernel_discs(n: usize) -> Result<Matrix> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("disc kernel needs n >= 2, got {n}")));
    }
    let (x, y) = disc_points(n, 0.0);
    Ok(log_kernel(&x, &y))
}

/// `[[α, bᵀ], [b, ρ E Â E]]` with `α = 1`, `b` and `Â` uniform on (0, 1)
/// and `E = I − 11ᵀ/(n−1)`. The ones vector is annihilated by the large
/// block, so a one-norm estimator started there never sees `ρ`.
pub fn adversarial_hager(n: usize, rho: f64, seed: RngSeed) -> Result<Matrix> {
    if n < 3 || !(rho >= 0.0) || !rho.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "adversarial matrix needs n >= 3 and rho >= 0, got n={n} rho={rho}"
        )));
    }
    let mut g = GaussianStream::new(seed);
    let m = n - 1;
    let b: Vec<f64> = (0..m).map(|_| g.uniform()).collect();
    let a_hat = Matrix::from_fn(m, m, |_, _| g.uniform());
    let block = double_center(&a_hat);

    let mut a = Matrix::zeros(n, n);
    a[(0, 0)] = 1.0;
    for i in 0..m {
        a[(0, i + 1)] = b[i];
        a[(i + 1, 0)] = b[i];
        for j in 0..m {
            a[(i + 1, j + 1)] = rho * block[(i, j)];
        }
    }
    Ok(a)
}

/// `E M E` with `E = I − 11ᵀ/n`, rounded onto a dyadic grid 2⁻²⁸ below the
/// largest entry and repaired in the last row and column so that every row
/// and column sums to exactly zero in floating point.
pub fn double_center(m: &Matrix) -> Matrix {
    let (r, c) = m.shape();
    let row_mean: Vec<f64> = (0..r).map(|i| m.row(i).iter().sum::<f64>() / c as f64).collect();
    let col_mean: Vec<f64> = (0..c)
        .map(|j| (0..r).map(|i| m[(i, j)]).sum::<f64>() / r as f64)
        .collect();
    let grand = row_mean.iter().sum::<f64>() / r as f64;
    let mut out = Matrix::from_fn(r, c, |i, j| m[(i, j)] - row_mean[i] - col_mean[j] + grand);
    let top = out.as_slice().iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if r < 2 || c < 2 || top == 0.0 || !top.is_finite() {
        return Matrix::zeros(r, c);
    }
    let unit = 2f64.powi(top.log2().ceil() as i32 - 28);
    for i in 0..r - 1 {
        for j in 0..c - 1 {
            out[(i, j)] = (out[(i, j)] / unit).round() * unit;
        }
        out[(i, c - 1)] = -(0..c - 1).map(|j| out[(i, j)]).sum::<f64>();
    }
    for j in 0..c {
        out[(r - 1, j)] = -(0..r - 1).map(|i| out[(i, j)]).sum::<f64>();
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum DecayModel {
    /// `σ_j = ρ^{j−1}`.
    Exponential { rate: f64 },
    /// `σ_j = j^{−T}`.
    PowerLaw { exponent: f64 },
    Custom { sigma: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecaySpec {
    pub model: DecayModel,
    pub n: usize,
}

impl DecaySpec {
    pub fn exponential(n: usize, rate: f64) -> Self {
        Self { model: DecayModel::Exponential { rate }, n }
    }

    pub fn power_law(n: usize, exponent: f64) -> Self {
        Self { model: DecayModel::PowerLaw { exponent }, n }
    }

    pub fn custom(sigma: Vec<f64>) -> Self {
        Self { n: sigma.len(), model: DecayModel::Custom { sigma } }
    }

    pub fn sigma(&self) -> Result<Vec<f64>> {
        let n = self.n;
        if n == 0 {
            return Err(Error::InvalidArgument("decay spec needs n >= 1".into()));
        }
        let s: Vec<f64> = match &self.model {
            DecayModel::Exponential { rate } => {
                if !(*rate > 0.0 && *rate <= 1.0) {
                    return Err(Error::InvalidArgument(format!(
                        "exponential rate must lie in (0, 1], got {rate}"
                    )));
                }
                (0..n).map(|j| rate.powi(j as i32)).collect()
            }
            DecayModel::PowerLaw { exponent } => {
                if !(*exponent >= 0.0 && exponent.is_finite()) {
                    return Err(Error::InvalidArgument(format!(
                        "power-law exponent must be >= 0, got {exponent}"
                    )));
                }
                (1..=n).map(|j| (j as f64).powf(-exponent)).collect()
            }
            DecayModel::Custom { sigma } => {
                if sigma.len() != n {
                    return Err(Error::DimensionMismatch(format!(
                        "custom spectrum has {} values for n={n}",
                        sigma.len()
                    )));
                }
                sigma.clone()
            }
        };
        if s.iter().any(|x| !(*x > 0.0) || !x.is_finite()) || s.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::InvalidArgument(
                "decay spectrum must be positive, finite and nonincreasing".into(),
            ));
        }
        Ok(s)
    }
}

#[derive(Debug, Clone)]
pub struct DecayMatrix {
    pub matrix: Matrix,
    pub true_sigma: Vec<f64>,
}

/// Haar-distributed orthogonal matrix: QR of a Gaussian with `diag(R) ≥ 0`.
pub fn haar_orthogonal(n: usize, seed: RngSeed) -> Result<Matrix> {
    Ok(qr_factor(&GaussianStream::new(seed).matrix(n, n))?.q)
}

/// `U diag(σ) Vᵀ` with independent Haar `U`, `V`.
pub fn decay_matrix(spec: &DecaySpec, seed: RngSeed) -> Result<DecayMatrix> {
    let sigma = spec.sigma()?;
    let u = haar_orthogonal(spec.n, seed.derive(1))?;
    let v = haar_orthogonal(spec.n, seed.derive(2))?;
    let matrix = u.scale_columns(&sigma).matmul(&v.transpose())?;
    Ok(DecayMatrix { matrix, true_sigma: sigma })
}

/// Diagonal with `σ_1 = … = σ_{k+1} = 1` followed by `1/2, 1/4, …`.
pub fn identical_leading(n: usize, k: usize) -> Result<Matrix> {
    if n < k + 1 {
        return Err(Error::InvalidArgument(format!(
            "identical_leading needs n >= k + 1, got n={n} k={k}"
        )));
    }
    let d: Vec<f64> = (0..n)
        .map(|i| if i <= k { 1.0 } else { 0.5f64.powi((i - k) as i32) })
        .collect();
    Ok(Matrix::from_diag(&d))
}
