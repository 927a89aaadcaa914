//! Fréchet distance between two image sets, using flattened pixels as
//! features.

use crate::encoding::JetImage;
use crate::error::{Error, Result};
use crate::qlinalg::{sqrtm_psd, sym_eigvals, ComplexMatrix, C64};

/// Added to both covariances; sparse images give rank-deficient ones.
pub const COV_REGULARIZATION: f64 = 1e-6;
/// Negative results down to this value are numerical noise and clamp to 0.
pub const NEGATIVE_FLOOR: f64 = -1e-6;

/// Sample mean and unbiased covariance (plus regularisation) of a feature set.
#[derive(Clone, Debug)]
pub struct Moments {
    pub dim: usize,
    pub mean: Vec<f64>,
    /// Row-major `dim × dim`.
    pub cov: Vec<f64>,
}

impl Moments {
    pub fn from_features(dim: usize, rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n < 2 {
            return Err(Error::InvalidArgument(format!(
                "FID needs at least 2 samples per set, got {n}"
            )));
        }
        if let Some(r) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::Dimension(format!(
                "feature length {} differs from {dim}",
                r.len()
            )));
        }
        let mut mean = vec![0.0; dim];
        for r in rows {
            for (m, x) in mean.iter_mut().zip(r) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);

        let centred: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| r.iter().zip(&mean).map(|(x, m)| x - m).collect())
            .collect();
        let mut cov = vec![0.0; dim * dim];
        for c in &centred {
            for i in 0..dim {
                let ci = c[i];
                if ci == 0.0 {
                    continue;
                }
                let row = &mut cov[i * dim..(i + 1) * dim];
                for j in i..dim {
                    row[j] += ci * c[j];
                }
            }
        }
        let denom = (n - 1) as f64;
        for i in 0..dim {
            for j in i..dim {
                let v = cov[i * dim + j] / denom;
                cov[i * dim + j] = v;
                cov[j * dim + i] = v;
            }
            cov[i * dim + i] += COV_REGULARIZATION;
        }
        Ok(Self { dim, mean, cov })
    }

    pub fn from_images(images: &[JetImage]) -> Result<Self> {
        let dim = images.first().map_or(0, JetImage::len);
        if images.iter().any(|im| im.len() != dim) {
            return Err(Error::Dimension("images in a set differ in size".into()));
        }
        let rows: Vec<Vec<f64>> = images
            .iter()
            .map(|im| im.pixels().iter().map(|&p| f64::from(p)).collect())
            .collect();
        Self::from_features(dim, &rows)
    }

    fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.cov[i * self.dim + i]).sum()
    }
}

/// Reference-set statistics with `Σ_x^{1/2}` computed once, so scoring many
/// generated sets against the same real set stays cheap.
#[derive(Clone, Debug)]
pub struct FidReference {
    moments: Moments,
    sqrt_cov: Vec<f64>,
}

impl FidReference {
    pub fn new(moments: Moments) -> Result<Self> {
        let d = moments.dim;
        let m = ComplexMatrix::from_fn(d, d, |i, j| C64::new(moments.cov[i * d + j], 0.0));
        let root = sqrtm_psd(&m)?;
        let sqrt_cov = root.as_slice().iter().map(|z| z.re).collect();
        Ok(Self { moments, sqrt_cov })
    }

    pub fn from_images(images: &[JetImage]) -> Result<Self> {
        Self::new(Moments::from_images(images)?)
    }

    pub fn dim(&self) -> usize {
        self.moments.dim
    }

    pub fn score(&self, gen: &Moments) -> Result<f64> {
        let d = self.moments.dim;
        if gen.dim != d {
            return Err(Error::Dimension(format!(
                "feature dims {d} and {} differ",
                gen.dim
            )));
        }
        let mean_term: f64 = self
            .moments
            .mean
            .iter()
            .zip(&gen.mean)
            .map(|(a, b)| (a - b).powi(2))
            .sum();
        let s = &self.sqrt_cov;
        let tmp = matmul_real(d, s, &gen.cov);
        let inner = matmul_real(d, &tmp, s);
        let cross: f64 = sym_eigvals(d, &inner)?
            .iter()
            .map(|&l| l.max(0.0).sqrt())
            .sum();
        let value = mean_term + self.moments.trace() + gen.trace() - 2.0 * cross;
        Ok(if (NEGATIVE_FLOOR..0.0).contains(&value) {
            0.0
        } else {
            value
        })
    }

    pub fn score_images(&self, images: &[JetImage]) -> Result<f64> {
        self.score(&Moments::from_images(images)?)
    }
}

fn matmul_real(n: usize, a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        let orow = &mut out[i * n..(i + 1) * n];
        for k in 0..n {
            let aik = a[i * n + k];
            if aik == 0.0 {
                continue;
            }
            for (o, bkj) in orow.iter_mut().zip(&b[k * n..(k + 1) * n]) {
                *o += aik * bkj;
            }
        }
    }
    out
}

/// `‖μ_x − μ_g‖² + Tr(Σ_x + Σ_g − 2 (Σ_x^{1/2} Σ_g Σ_x^{1/2})^{1/2})`.
pub fn fid(real_set: &[JetImage], gen_set: &[JetImage]) -> Result<f64> {
    FidReference::from_images(real_set)?.score_images(gen_set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    fn image(px: &[f32]) -> JetImage {
        JetImage::new(1, px.len(), px.to_vec()).unwrap()
    }

    fn random_set(rng: &mut RngStream, n: usize, d: usize, shift: f64) -> Vec<JetImage> {
        (0..n)
            .map(|_| {
                image(
                    &(0..d)
                        .map(|_| (rng.uniform() * (1.0 + shift) + shift) as f32)
                        .collect::<Vec<_>>(),
                )
            })
            .collect()
    }

    /// Independent dense evaluation: Denman–Beavers iteration for the matrix
    /// square root of `Σ_x Σ_g`, whose trace equals the symmetric form.
    fn oracle(a: &[JetImage], b: &[JetImage]) -> f64 {
        let feats = |s: &[JetImage]| -> Vec<Vec<f64>> {
            s.iter()
                .map(|im| im.pixels().iter().map(|&p| p as f64).collect())
                .collect()
        };
        let stats = |rows: &[Vec<f64>]| {
            let d = rows[0].len();
            let n = rows.len() as f64;
            let mu: Vec<f64> = (0..d)
                .map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n)
                .collect();
            let mut cov = vec![vec![0.0; d]; d];
            for (i, ci) in cov.iter_mut().enumerate() {
                for (j, cij) in ci.iter_mut().enumerate() {
                    *cij = rows
                        .iter()
                        .map(|r| (r[i] - mu[i]) * (r[j] - mu[j]))
                        .sum::<f64>()
                        / (n - 1.0);
                }
                ci[i] += COV_REGULARIZATION;
            }
            (mu, cov)
        };
        let (mx, cx) = stats(&feats(a));
        let (mg, cg) = stats(&feats(b));
        let d = mx.len();
        let mul = |p: &Vec<Vec<f64>>, q: &Vec<Vec<f64>>| -> Vec<Vec<f64>> {
            (0..d)
                .map(|i| {
                    (0..d)
                        .map(|j| (0..d).map(|k| p[i][k] * q[k][j]).sum())
                        .collect()
                })
                .collect()
        };
        let inv = |m: &Vec<Vec<f64>>| -> Vec<Vec<f64>> {
            // Gauss–Jordan with partial pivoting.
            let mut a: Vec<Vec<f64>> = m.clone();
            let mut r: Vec<Vec<f64>> = (0..d)
                .map(|i| (0..d).map(|j| (i == j) as u8 as f64).collect())
                .collect();
            for c in 0..d {
                let piv = (c..d)
                    .max_by(|&x, &y| a[x][c].abs().total_cmp(&a[y][c].abs()))
                    .unwrap();
                a.swap(c, piv);
                r.swap(c, piv);
                let p = a[c][c];
                for j in 0..d {
                    a[c][j] /= p;
                    r[c][j] /= p;
                }
                for i in 0..d {
                    if i != c {
                        let f = a[i][c];
                        for j in 0..d {
                            a[i][j] -= f * a[c][j];
                            r[i][j] -= f * r[c][j];
                        }
                    }
                }
            }
            r
        };
        let prod = mul(&cx, &cg);
        let mut y = prod.clone();
        let mut z: Vec<Vec<f64>> = (0..d)
            .map(|i| (0..d).map(|j| (i == j) as u8 as f64).collect())
            .collect();
        for _ in 0..60 {
            let (yi, zi) = (inv(&y), inv(&z));
            let ny = (0..d)
                .map(|i| (0..d).map(|j| 0.5 * (y[i][j] + zi[i][j])).collect())
                .collect();
            let nz = (0..d)
                .map(|i| (0..d).map(|j| 0.5 * (z[i][j] + yi[i][j])).collect())
                .collect();
            y = ny;
            z = nz;
        }
        let tr_sqrt: f64 = (0..d).map(|i| y[i][i]).sum();
        let mean: f64 = mx.iter().zip(&mg).map(|(a, b)| (a - b).powi(2)).sum();
        mean + (0..d).map(|i| cx[i][i] + cg[i][i]).sum::<f64>() - 2.0 * tr_sqrt
    }

    #[test]
    fn identical_sets_score_zero() {
        let mut rng = RngStream::new(1);
        let a = random_set(&mut rng, 30, 6, 0.0);
        assert!(fid(&a, &a).unwrap().abs() < 1e-8);
    }

    #[test]
    fn two_point_closed_form() {
        // Means 0 and 1, unbiased variances 1: (0 − 1)² + 1 + 1 − 2·1.
        let a = vec![image(&[-1.0]), image(&[0.0]), image(&[1.0])];
        let b = vec![image(&[0.0]), image(&[1.0]), image(&[2.0])];
        let got = fid(&a, &b).unwrap();
        assert!((got - 1.0).abs() < 1e-9, "{got}");
    }

    #[test]
    fn matches_dense_oracle() {
        let mut rng = RngStream::new(2);
        for k in 0..5 {
            let a = random_set(&mut rng, 50, 4, 0.0);
            let b = random_set(&mut rng, 50, 4, 0.1 * k as f64);
            let (got, want) = (fid(&a, &b).unwrap(), oracle(&a, &b));
            assert!((got - want).abs() < 1e-6, "{got} vs {want}");
        }
    }

    #[test]
    fn symmetric_and_non_negative() {
        let mut rng = RngStream::new(3);
        let a = random_set(&mut rng, 40, 5, 0.0);
        let b = random_set(&mut rng, 25, 5, 0.3);
        let (ab, ba) = (fid(&a, &b).unwrap(), fid(&b, &a).unwrap());
        assert!((ab - ba).abs() < 1e-6);
        assert!(ab >= 0.0);
    }

    #[test]
    fn too_few_samples() {
        let a = vec![image(&[0.5])];
        assert!(fid(&a, &a).is_err());
    }
}
