use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::RealMatrix;

/// Group membership of an observation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Group {
    First,
    Second,
}

impl Group {
    /// 1-based group index.
    pub fn index(self) -> usize {
        match self {
            Group::First => 1,
            Group::Second => 2,
        }
    }
}

/// Two-sample data with fixed covariates.
///
/// Rows are stored group 1 first, then group 2. `original_rows[k]` is the
/// position row `k` had in the caller's input.
#[derive(Debug, Clone, PartialEq)]
pub struct AncovaData {
    y: Vec<f64>,
    n1: usize,
    covariates: RealMatrix,
    original_rows: Vec<usize>,
}

/// Validates that `groups` is the sorted two-block pattern and returns `n1`.
pub fn two_block_split(groups: &[Group]) -> Result<usize> {
    let n1 = groups.iter().take_while(|g| **g == Group::First).count();
    if groups[n1..].contains(&Group::First) {
        return Err(Error::Structural(
            "group labels are not sorted into a group-1 block followed by a group-2 block".into(),
        ));
    }
    Ok(n1)
}

impl AncovaData {
    /// Builds data whose rows are already in two-block order.
    pub fn new(y: Vec<f64>, groups: &[Group], covariates: RealMatrix) -> Result<Self> {
        if groups.len() != y.len() {
            return Err(Error::InvalidInput(format!(
                "{} responses but {} group labels",
                y.len(),
                groups.len()
            )));
        }
        let n1 = two_block_split(groups)?;
        let original_rows = (0..y.len()).collect();
        Self::from_parts(y, n1, covariates, original_rows)
    }

    /// Builds data from rows in any order; rows are stably sorted by group.
    pub fn canonicalize(y: Vec<f64>, groups: &[Group], covariates: RealMatrix) -> Result<Self> {
        if groups.len() != y.len() || covariates.nrows() != y.len() {
            return Err(Error::InvalidInput(
                "response, group and covariate lengths differ".into(),
            ));
        }
        let mut order: Vec<usize> = (0..y.len()).collect();
        order.sort_by_key(|&k| groups[k]);
        let n1 = groups.iter().filter(|g| **g == Group::First).count();
        let y_sorted = order.iter().map(|&k| y[k]).collect();
        let m = RealMatrix::from_fn(y.len(), covariates.ncols(), |i, j| {
            covariates[(order[i], j)]
        });
        Self::from_parts(y_sorted, n1, m, order)
    }

    /// Convenience constructor from the two samples; covariate rows follow
    /// the same order (all of group 1, then all of group 2).
    pub fn from_groups(y1: &[f64], y2: &[f64], covariates: RealMatrix) -> Result<Self> {
        let mut y = y1.to_vec();
        y.extend_from_slice(y2);
        let n = y.len();
        Self::from_parts(y, y1.len(), covariates, (0..n).collect())
    }

    /// Two samples without covariates.
    pub fn from_samples(y1: &[f64], y2: &[f64]) -> Result<Self> {
        Self::from_groups(y1, y2, RealMatrix::zeros(y1.len() + y2.len(), 0))
    }

    fn from_parts(
        y: Vec<f64>,
        n1: usize,
        covariates: RealMatrix,
        original_rows: Vec<usize>,
    ) -> Result<Self> {
        let n = y.len();
        if covariates.nrows() != n {
            return Err(Error::InvalidInput(format!(
                "covariate matrix has {} rows, expected {n}",
                covariates.nrows()
            )));
        }
        if n1 < 2 || n - n1 < 2 {
            return Err(Error::InvalidInput(format!(
                "each group needs at least 2 observations (got n1 = {n1}, n2 = {})",
                n - n1
            )));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("response"));
        }
        if covariates.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("covariates"));
        }
        Ok(AncovaData {
            y,
            n1,
            covariates,
            original_rows,
        })
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn covariates(&self) -> &RealMatrix {
        &self.covariates
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn n2(&self) -> usize {
        self.y.len() - self.n1
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn n_covariates(&self) -> usize {
        self.covariates.ncols()
    }

    pub fn group_size(&self, group: Group) -> usize {
        match group {
            Group::First => self.n1(),
            Group::Second => self.n2(),
        }
    }

    pub fn groups(&self) -> Vec<Group> {
        (0..self.n())
            .map(|k| {
                if k < self.n1 {
                    Group::First
                } else {
                    Group::Second
                }
            })
            .collect()
    }

    pub fn original_rows(&self) -> &[usize] {
        &self.original_rows
    }

    fn range(&self, group: Group) -> std::ops::Range<usize> {
        match group {
            Group::First => 0..self.n1,
            Group::Second => self.n1..self.n(),
        }
    }

    pub fn group_response(&self, group: Group) -> &[f64] {
        &self.y[self.range(group)]
    }

    pub fn group_covariates(&self, group: Group) -> RealMatrix {
        let r = self.range(group);
        self.covariates.rows(r.start, r.len()).into_owned()
    }

    /// Same design, new response vector.
    pub fn with_response(&self, y: Vec<f64>) -> Result<Self> {
        if y.len() != self.n() {
            return Err(Error::InvalidInput("response length changed".into()));
        }
        Self::from_parts(
            y,
            self.n1,
            self.covariates.clone(),
            self.original_rows.clone(),
        )
    }

    /// Same response, new covariate matrix.
    pub fn with_covariates(&self, covariates: RealMatrix) -> Result<Self> {
        Self::from_parts(
            self.y.clone(),
            self.n1,
            covariates,
            self.original_rows.clone(),
        )
    }
}
