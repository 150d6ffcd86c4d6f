//! Bundled example data.

use crate::data::AncovaData;
use crate::error::Result;
use crate::io::{read_dataset, ColumnRoles, LabeledDataset};

/// Bodyweights of 52 male rats: baseline (week 1) and week 4, vehicle
/// control (dose 0, n = 13) against pooled active treatment (dose 1, n = 39).
pub const BODYWEIGHT_CSV: &str = include_str!("../data/bodyweight.csv");

/// Column roles for [`BODYWEIGHT_CSV`].
pub fn bodyweight_roles() -> ColumnRoles {
    ColumnRoles {
        group: "dose".into(),
        response: "week4".into(),
        covariates: None,
        drop: vec!["animal".into()],
        control: Some("0".into()),
    }
}

pub fn bodyweight_labeled() -> Result<LabeledDataset> {
    read_dataset(BODYWEIGHT_CSV.as_bytes(), &bodyweight_roles())
}

/// Week-4 bodyweight with the baseline weight as the single covariate.
pub fn bodyweight() -> Result<AncovaData> {
    Ok(bodyweight_labeled()?.data)
}
