//! Flat signed spaces and the quadric models of the space forms Q⁴_s(c).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_TANGENT_TOL: f64 = 1e-9;

/// R^dim with a diagonal metric of ±1 entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignedSpace {
    signature: Vec<f64>,
}

impl SignedSpace {
    pub fn new(signature: Vec<f64>) -> Result<Self> {
        if signature.iter().any(|&s| s != 1.0 && s != -1.0) {
            return Err(Error::InvalidParams(format!("signature entries must be ±1, got {signature:?}")));
        }
        Ok(Self { signature })
    }

    pub fn euclidean(dim: usize) -> Self {
        Self { signature: vec![1.0; dim] }
    }

    pub fn dim(&self) -> usize {
        self.signature.len()
    }

    pub fn signature(&self) -> &[f64] {
        &self.signature
    }

    /// Number of negative entries.
    pub fn index(&self) -> usize {
        self.signature.iter().filter(|&&s| s < 0.0).count()
    }

    pub fn inner(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.check(x)?;
        self.check(y)?;
        Ok(self.inner_unchecked(x, y))
    }

    pub(crate) fn inner_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        self.signature.iter().zip(x.iter().zip(y)).map(|(s, (a, b))| s * a * b).sum()
    }

    pub fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::Dimension { expected: self.dim(), got: x.len() });
        }
        Ok(())
    }
}

/// The space form Q⁴_s(c) together with its flat ambient model.
///
/// For c = 0 the model is R⁴ with signature (+,+,+,ε). For c ≠ 0 it is the
/// quadric ⟨p,p⟩ = 1/c in R⁵ with signature (+,+,+,ε,sign c), so the normal
/// direction is E₄ and the position direction is E₅.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceFormSpec {
    pub c: f64,
    pub s: u8,
    pub ambient: SignedSpace,
}

impl SpaceFormSpec {
    pub fn new(c: f64, s: u8) -> Result<Self> {
        if s > 1 {
            return Err(Error::InvalidParams(format!("index s must be 0 or 1, got {s}")));
        }
        if !c.is_finite() {
            return Err(Error::InvalidParams("curvature must be finite".into()));
        }
        let eps = 1.0 - 2.0 * s as f64;
        let mut sig = vec![1.0, 1.0, 1.0, eps];
        if c != 0.0 {
            sig.push(c.signum());
        }
        Ok(Self { c, s, ambient: SignedSpace { signature: sig } })
    }

    /// Space form with ε given directly.
    pub fn with_eps(c: f64, eps: f64) -> Result<Self> {
        match eps {
            e if e == 1.0 => Self::new(c, 0),
            e if e == -1.0 => Self::new(c, 1),
            _ => Err(Error::InvalidParams(format!("ε must be ±1, got {eps}"))),
        }
    }

    pub fn eps(&self) -> f64 {
        1.0 - 2.0 * self.s as f64
    }

    /// ε₀: 0 for c > 0, 1 for c < 0, none for c = 0.
    pub fn eps0(&self) -> Option<u8> {
        if self.c > 0.0 {
            Some(0)
        } else if self.c < 0.0 {
            Some(1)
        } else {
            None
        }
    }

    pub fn dim(&self) -> usize {
        self.ambient.dim()
    }

    pub fn inner(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.ambient.inner(x, y)
    }

    pub fn on_space_form(&self, p: &[f64], tol: f64) -> bool {
        if p.len() != self.dim() {
            return false;
        }
        if self.c == 0.0 {
            return true;
        }
        (self.ambient.inner_unchecked(p, p) - 1.0 / self.c).abs() <= tol
    }

    /// Geodesic through p with unit initial velocity w, evaluated at t.
    pub fn geodesic(&self, p: &[f64], w: &[f64], t: f64) -> Result<Vec<f64>> {
        self.geodesic_tol(p, w, t, DEFAULT_TANGENT_TOL)
    }

    pub fn geodesic_tol(&self, p: &[f64], w: &[f64], t: f64, tol: f64) -> Result<Vec<f64>> {
        self.ambient.check(p)?;
        self.ambient.check(w)?;
        let ww = self.ambient.inner_unchecked(w, w);
        if (ww - 1.0).abs() > tol {
            return Err(Error::InvalidTangent(format!("⟨w,w⟩ = {ww}, expected 1")));
        }
        if self.c != 0.0 {
            let pw = self.ambient.inner_unchecked(p, w);
            if pw.abs() > tol {
                return Err(Error::InvalidTangent(format!("⟨p,w⟩ = {pw}, expected 0")));
            }
        }
        let (a, b) = geodesic_coefficients(self.c, t);
        Ok(p.iter().zip(w).map(|(x, y)| a * x + b * y).collect())
    }
}

/// (cos_c t, sin_c t) with cos_c'' = −c cos_c, normalized so sin_c'(0) = 1.
pub fn geodesic_coefficients(c: f64, t: f64) -> (f64, f64) {
    if c > 0.0 {
        let r = c.sqrt();
        ((r * t).cos(), (r * t).sin() / r)
    } else if c < 0.0 {
        let r = (-c).sqrt();
        ((r * t).cosh(), (r * t).sinh() / r)
    } else {
        (1.0, t)
    }
}
