//! Confidence regions for the coefficients as unions of F-ellipsoids.
//!
//! For a fixed permutation the F statistic `T(Y, (Π, β))` has a β-free
//! denominator and a numerator `‖ΠX(β̂_Π − β)‖²`, so its sublevel set is the
//! ellipsoid `(β − β̂_Π)ᵀ XᵀX (β − β̂_Π) ≤ (p/(n−p))·RSS_Π·F⁻¹`. The region is
//! the union over candidates. `alpha` is the coverage level throughout.

use serde::{Deserialize, Serialize};

use crate::candidates::CandidateSet;
use crate::error::{Error, Result};
use crate::numerics::linalg::{check_len, norm_sq, Matrix, Qr};
use crate::numerics::{f_quantile, RngStream};
use crate::permutation::SparsePermutation;
use rand::Rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ellipsoid {
    pub center: Vec<f64>,
    /// Symmetric positive definite.
    pub shape: Matrix,
    pub radius_sq: f64,
}

impl Ellipsoid {
    pub fn new(center: Vec<f64>, shape: Matrix, radius_sq: f64) -> Result<Self> {
        let p = center.len();
        if shape.rows() != p || shape.cols() != p {
            return Err(Error::DimMismatch(format!(
                "shape is {}x{}, center has {p}",
                shape.rows(),
                shape.cols()
            )));
        }
        if !(radius_sq >= 0.0) {
            return Err(Error::Domain(format!(
                "radius_sq must be non-negative, got {radius_sq}"
            )));
        }
        for i in 0..p {
            for j in 0..i {
                let (a, b) = (shape.get(i, j), shape.get(j, i));
                if (a - b).abs() > 1e-10 * a.abs().max(b.abs()).max(1.0) {
                    return Err(Error::Domain("ellipsoid shape is not symmetric".into()));
                }
            }
        }
        Ok(Self {
            center,
            shape,
            radius_sq,
        })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// `(β − c)ᵀ S (β − c)`.
    pub fn quad_form(&self, beta: &[f64]) -> Result<f64> {
        if beta.len() != self.dim() {
            return Err(Error::DimMismatch(format!(
                "point has {} coordinates, region has {}",
                beta.len(),
                self.dim()
            )));
        }
        let d: Vec<f64> = beta.iter().zip(&self.center).map(|(a, b)| a - b).collect();
        self.shape.quad_form(&d)
    }

    pub fn contains(&self, beta: &[f64]) -> Result<bool> {
        Ok(self.quad_form(beta)? <= self.radius_sq + 1e-12)
    }

    /// Half-widths of the bounding box, `√(r² (S⁻¹)_ii)`.
    pub fn half_widths(&self) -> Result<Vec<f64>> {
        let inv = self.shape.spd_inverse()?;
        Ok((0..self.dim())
            .map(|i| (self.radius_sq * inv.get(i, i)).sqrt())
            .collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionPiece {
    pub permutation: SparsePermutation,
    pub ellipsoid: Ellipsoid,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegionKind {
    Coefficients,
    /// `(β₁, β₂)` jointly, with `Z` unpermuted.
    Joint,
    /// `β₁` with the `Z` block partialled out.
    Beta1Only,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceRegion {
    pub kind: RegionKind,
    /// Coverage level.
    pub alpha: f64,
    pub pieces: Vec<RegionPiece>,
}

impl ConfidenceRegion {
    pub fn contains(&self, beta: &[f64]) -> Result<bool> {
        coef_region_membership(self, beta)
    }

    /// Multiply every radius² by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.pieces
            .iter_mut()
            .for_each(|p| p.ellipsoid.radius_sq *= factor);
        out
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "coverage level must lie in (0, 1), got {alpha}"
        )))
    }
}

/// `Γ = ⋃_Π {β : T(Y, (Π, β)) ≤ F⁻¹_{p, n−p}(alpha)}`.
pub fn coef_region(
    y: &[f64],
    x: &Matrix,
    cs: &CandidateSet,
    alpha: f64,
) -> Result<ConfidenceRegion> {
    partial_coef_region(y, x, None, cs, alpha, RegionKind::Coefficients)
}

/// Regions with an unpermuted block `Z`: joint in `(β₁, β₂)`, or for `β₁`
/// alone with `Z` partialled out. Without `Z` both reduce to [`coef_region`].
pub fn partial_coef_region(
    y: &[f64],
    x: &Matrix,
    z: Option<&Matrix>,
    cs: &CandidateSet,
    alpha: f64,
    kind: RegionKind,
) -> Result<ConfidenceRegion> {
    check_alpha(alpha)?;
    check_len(x.rows(), y.len())?;
    if cs.is_empty() {
        return Err(Error::EmptySet);
    }
    let n = x.rows();
    let p1 = x.cols();
    let p2 = z.map_or(0, |z| z.cols());
    if let Some(z) = z {
        check_len(n, z.rows())?;
    }
    if n <= p1 + p2 {
        return Err(Error::PreconditionViolated(format!(
            "need n > p1 + p2, got n = {n}, p = {}",
            p1 + p2
        )));
    }
    let dof = (n - p1 - p2) as f64;
    let joint = matches!(kind, RegionKind::Joint);
    let d1 = if joint { p1 + p2 } else { p1 };
    let scale = d1 as f64 / dof * f_quantile(d1, n - p1 - p2, alpha)?;
    let z_qr = match z {
        Some(z) if !joint => Some(Qr::factor(z)?),
        _ => None,
    };

    let mut pieces = Vec::with_capacity(cs.len());
    for pi in cs.permutations() {
        let px = pi.apply_rows(x)?;
        let w = match z {
            Some(z) => px.hstack(z)?,
            None => px.clone(),
        };
        let w_qr = Qr::factor(&w)?;
        let rss = w_qr.residual_norm_sq(y);
        let ellipsoid = match &z_qr {
            Some(zq) if !joint => {
                let cols: Vec<Vec<f64>> = (0..p1).map(|j| zq.residual(&px.column(j))).collect();
                let xt = Matrix::from_columns(&cols)?;
                let center = Qr::factor(&xt)?.solve(&zq.residual(y));
                Ellipsoid::new(center, xt.gram(), scale * rss)?
            }
            _ => {
                let design = if joint { &w } else { &px };
                Ellipsoid::new(w_qr.solve(y), design.gram(), scale * rss)?
            }
        };
        pieces.push(RegionPiece {
            permutation: pi.clone(),
            ellipsoid,
        });
    }
    Ok(ConfidenceRegion {
        kind,
        alpha,
        pieces,
    })
}

pub fn coef_region_membership(region: &ConfidenceRegion, beta: &[f64]) -> Result<bool> {
    for piece in &region.pieces {
        if piece.ellipsoid.contains(beta)? {
            return Ok(true);
        }
    }
    Ok(false)
}

/// `T(Y, (Π, β))` evaluated from its definition.
pub fn f_statistic(y: &[f64], x: &Matrix, pi: &SparsePermutation, beta: &[f64]) -> Result<f64> {
    let (n, p) = (x.rows(), x.cols());
    let px = pi.apply_rows(x)?;
    let qr = Qr::factor(&px)?;
    let fitted = qr.project(y);
    let xb = px.mul_vec(beta)?;
    let num: f64 = fitted.iter().zip(&xb).map(|(a, b)| (a - b) * (a - b)).sum();
    let den = qr.residual_norm_sq(y);
    Ok((num / p as f64) / (den / (n - p) as f64))
}

/// `T(Y, (Π, β₁) | Z)`: the partialled-out statistic from its definition.
pub fn partial_f_statistic(
    y: &[f64],
    x: &Matrix,
    z: &Matrix,
    pi: &SparsePermutation,
    beta1: &[f64],
) -> Result<f64> {
    let (n, p1, p2) = (x.rows(), x.cols(), z.cols());
    let px = pi.apply_rows(x)?;
    let e: Vec<f64> = y
        .iter()
        .zip(px.mul_vec(beta1)?)
        .map(|(a, b)| a - b)
        .collect();
    let w_qr = Qr::factor(&px.hstack(z)?)?;
    let z_qr = Qr::factor(z)?;
    let num = norm_sq(&w_qr.project(&e)) - norm_sq(&z_qr.project(&e));
    let den = w_qr.residual_norm_sq(&e);
    Ok((n - p1 - p2) as f64 / p1 as f64 * num / den)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VolumeEstimate {
    pub volume: f64,
    pub stderr: f64,
    pub samples: usize,
}

/// Hit-or-miss Monte Carlo over the bounding box of all pieces.
pub fn region_volume_mc(
    region: &ConfidenceRegion,
    rng: &RngStream,
    samples: usize,
) -> Result<VolumeEstimate> {
    if region.pieces.is_empty() {
        return Err(Error::EmptyRegion);
    }
    if samples < 1000 {
        return Err(Error::Domain(format!(
            "need at least 1000 samples, got {samples}"
        )));
    }
    let p = region.pieces[0].ellipsoid.dim();
    let mut lo = vec![f64::INFINITY; p];
    let mut hi = vec![f64::NEG_INFINITY; p];
    for piece in &region.pieces {
        let e = &piece.ellipsoid;
        if e.dim() != p {
            return Err(Error::DimMismatch("pieces of different dimension".into()));
        }
        for (i, h) in e.half_widths()?.into_iter().enumerate() {
            lo[i] = lo[i].min(e.center[i] - h);
            hi[i] = hi[i].max(e.center[i] + h);
        }
    }
    let box_volume: f64 = lo.iter().zip(&hi).map(|(a, b)| b - a).product();
    if box_volume == 0.0 {
        return Ok(VolumeEstimate {
            volume: 0.0,
            stderr: 0.0,
            samples,
        });
    }
    let mut gen = rng.generator();
    let mut point = vec![0.0; p];
    let mut hits = 0usize;
    for _ in 0..samples {
        for i in 0..p {
            point[i] = lo[i] + (hi[i] - lo[i]) * gen.random::<f64>();
        }
        if coef_region_membership(region, &point)? {
            hits += 1;
        }
    }
    let rate = hits as f64 / samples as f64;
    Ok(VolumeEstimate {
        volume: rate * box_volume,
        stderr: box_volume * (rate * (1.0 - rate) / samples as f64).sqrt(),
        samples,
    })
}
