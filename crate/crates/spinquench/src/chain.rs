//! Parameters of `H = -sum_i [gx X_i X_{i+1} + gy Y_i Y_{i+1} + d X_{i-1} Z_i X_{i+1} + h Z_i]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    #[default]
    Periodic,
    Open,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainParams {
    pub gamma_x: f64,
    pub gamma_y: f64,
    pub delta: f64,
    pub h: f64,
    pub n: usize,
    #[serde(default)]
    pub boundary: Boundary,
}

impl ChainParams {
    pub fn new(gamma_x: f64, gamma_y: f64, delta: f64, h: f64, n: usize, boundary: Boundary) -> Result<Self> {
        let p = Self { gamma_x, gamma_y, delta, h, n, boundary };
        p.validate()?;
        Ok(p)
    }

    pub fn periodic(gamma_x: f64, gamma_y: f64, delta: f64, h: f64, n: usize) -> Result<Self> {
        Self::new(gamma_x, gamma_y, delta, h, n, Boundary::Periodic)
    }

    pub fn validate(&self) -> Result<()> {
        if [self.gamma_x, self.gamma_y, self.delta, self.h].iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite coupling".into()));
        }
        let min = if self.delta != 0.0 { 3 } else { 2 };
        if self.n < min {
            return Err(Error::InvalidParameter(format!(
                "chain length {} below {min} for these couplings",
                self.n
            )));
        }
        Ok(())
    }

    pub fn with_h(&self, h: f64) -> Self {
        Self { h, ..*self }
    }

    pub fn with_n(&self, n: usize) -> Self {
        Self { n, ..*self }
    }

    /// Default measured site.
    pub fn mid_site(&self) -> usize {
        self.n / 2
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuenchSpec {
    pub pre: ChainParams,
    pub post: ChainParams,
    #[serde(default)]
    pub relative_phase: f64,
}

impl QuenchSpec {
    pub fn new(pre: ChainParams, post: ChainParams, relative_phase: f64) -> Result<Self> {
        let q = Self { pre, post, relative_phase };
        q.validate()?;
        Ok(q)
    }

    pub fn validate(&self) -> Result<()> {
        self.pre.validate()?;
        self.post.validate()?;
        if self.pre.n != self.post.n || self.pre.boundary != self.post.boundary {
            return Err(Error::InvalidParameter(
                "pre- and post-quench chains differ in length or boundary".into(),
            ));
        }
        if !self.relative_phase.is_finite() {
            return Err(Error::InvalidParameter("non-finite relative phase".into()));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.pre.n
    }
}
