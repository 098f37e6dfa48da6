use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// `½‖Ax − b‖² + λ‖x‖₁` with Gaussian `A`.
    LassoGaussian,
    /// `½‖Dx − b‖² + λ‖x‖₁` with `D` the stacked forward differences on an `s×s×s` grid.
    LassoDiff3d,
    /// `½‖Ax − b‖² + λΣ‖x_b‖₂` with uniform `A`, `b` and random blocks.
    GroupLasso,
    /// `½‖Ax − b‖²` subject to `x ≥ 0`.
    Nnls,
}

impl Family {
    pub const ALL: [Family; 4] = [Family::LassoGaussian, Family::LassoDiff3d, Family::GroupLasso, Family::Nnls];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::LassoGaussian => "lasso_gaussian",
            Family::LassoDiff3d => "lasso_diff3d",
            Family::GroupLasso => "group_lasso",
            Family::Nnls => "nnls",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown family '{s}'")))
    }
}

/// Everything needed to regenerate a problem instance bit-for-bit.
///
/// For [`Family::LassoDiff3d`] `n` is the grid side `s` (the problem has `s³` variables and
/// `m` is ignored).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemRecipe {
    pub family: Family,
    pub m: usize,
    pub n: usize,
    pub lambda: f64,
    /// Largest block size of the group partition.
    pub block_cap: usize,
    pub seed: u64,
}

impl ProblemRecipe {
    /// Default sizes: one tenth of the full-size instances in each dimension.
    pub fn desk(family: Family, seed: u64) -> Self {
        let (m, n, lambda) = match family {
            Family::LassoGaussian => (150, 300, 0.1),
            Family::LassoDiff3d => (0, 7, 1.0),
            Family::GroupLasso => (160, 250, 1.0),
            Family::Nnls => (150, 300, 0.0),
        };
        Self { family, m, n, lambda, block_cap: 12, seed }
    }

    /// Full-size benchmark instances.
    pub fn paper_scale(family: Family, seed: u64) -> Self {
        let (m, n) = match family {
            Family::LassoGaussian | Family::Nnls => (1500, 3000),
            Family::LassoDiff3d => (0, 15),
            Family::GroupLasso => (1600, 2500),
        };
        Self { m, n, ..Self::desk(family, seed) }
    }

    /// Number of unknowns.
    pub fn dim(&self) -> usize {
        match self.family {
            Family::LassoDiff3d => self.n.pow(3),
            _ => self.n,
        }
    }

    /// Number of rows of the data matrix.
    pub fn rows(&self) -> usize {
        match self.family {
            Family::LassoDiff3d => 3 * self.n.pow(3),
            _ => self.m,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidArgument(format!("{}: {msg}", self.family)));
        if self.n == 0 {
            return bad("n must be positive");
        }
        if self.family != Family::LassoDiff3d && self.m == 0 {
            return bad("m must be positive");
        }
        if self.family == Family::LassoDiff3d && self.n < 2 {
            return bad("grid side must be at least 2");
        }
        if self.family != Family::Nnls && !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return bad("λ must be positive");
        }
        if self.family == Family::GroupLasso && self.block_cap == 0 {
            return bad("block cap must be positive");
        }
        Ok(())
    }

    /// Human-readable identifier, also used for file names.
    pub fn id(&self) -> String {
        match self.family {
            Family::LassoDiff3d => format!("{}-s{}-l{}-seed{}", self.family, self.n, self.lambda, self.seed),
            Family::GroupLasso => {
                format!("{}-m{}-n{}-l{}-cap{}-seed{}", self.family, self.m, self.n, self.lambda, self.block_cap, self.seed)
            }
            Family::Nnls => format!("{}-m{}-n{}-seed{}", self.family, self.m, self.n, self.seed),
            Family::LassoGaussian => format!("{}-m{}-n{}-l{}-seed{}", self.family, self.m, self.n, self.lambda, self.seed),
        }
    }

    /// SHA-256 of the canonical JSON encoding, as lowercase hex.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("recipe serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_depends_on_every_field() {
        let r = ProblemRecipe::desk(Family::GroupLasso, 3);
        let h = r.hash();
        assert_eq!(h.len(), 64);
        assert_eq!(h, r.clone().hash());
        let variants = [
            ProblemRecipe { seed: 4, ..r.clone() },
            ProblemRecipe { m: 161, ..r.clone() },
            ProblemRecipe { lambda: 0.5, ..r.clone() },
            ProblemRecipe { block_cap: 11, ..r.clone() },
            ProblemRecipe { family: Family::LassoGaussian, ..r.clone() },
        ];
        for v in variants {
            assert_ne!(v.hash(), h);
        }
    }

    #[test]
    fn family_names_round_trip() {
        for f in Family::ALL {
            assert_eq!(f.as_str().parse::<Family>().unwrap(), f);
            assert_eq!(serde_json::to_string(&f).unwrap(), format!("\"{}\"", f.as_str()));
        }
        assert!("lasso".parse::<Family>().is_err());
    }

    #[test]
    fn diff3d_dims() {
        let r = ProblemRecipe::desk(Family::LassoDiff3d, 0);
        assert_eq!(r.dim(), 343);
        assert_eq!(r.rows(), 3 * 343);
        assert!(ProblemRecipe { n: 0, ..r }.validate().is_err());
    }
}
