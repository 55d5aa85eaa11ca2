//! Region labels of the recovery phase diagram in the coordinates
//! `x = ρ²n/log n`, `y = η²d/log n`.
//!
//! Lines, drawn at zero slack:
//! - `x + y = 4`: exact recovery threshold.
//! - `x/4 + y/2 = 1`: almost-exact achievability (also the conjectured
//!   partial-recovery threshold).
//! - `x/2 + y = 1`: below it, overlap above one half is impossible.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const LINE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Region {
    /// `x + y > 4`.
    Exact,
    /// `x/4 + y/2 > 1` and `x + y < 4`: almost exact but not exact recovery.
    AlmostExactGap,
    /// `x/2 + y < 1`: no estimator recovers more than half the nodes.
    ImpossibleHalf,
    /// Between `x/2 + y = 1` and `x/4 + y/2 = 1`, where no result is proven.
    Open,
    /// On one of the three lines.
    Boundary,
}

impl Region {
    pub fn label(self) -> &'static str {
        match self {
            Region::Exact => "exact",
            Region::AlmostExactGap => "almost-exact-gap",
            Region::ImpossibleHalf => "impossible-half",
            Region::Open => "open",
            Region::Boundary => "boundary",
        }
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Advisory label from the conjectured partial-recovery threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConjectureLabel {
    /// `x/4 + y/2 < 1`: conjectured impossibility of partial recovery.
    ImpossiblePartial,
    /// `x/4 + y/2 > 1`.
    Achievable,
    OnLine,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Classification {
    pub region: Region,
    pub conjecture: ConjectureLabel,
}

pub fn theory_classify(x: f64, y: f64) -> Result<Classification> {
    if !(x >= 0.0) {
        return Err(Error::param("x", format!("{x} is negative")));
    }
    if !(y >= 0.0) {
        return Err(Error::param("y", format!("{y} is negative")));
    }
    let exact_line = x + y - 4.0;
    let almost_line = x / 4.0 + y / 2.0 - 1.0;
    let half_line = x / 2.0 + y - 1.0;
    let on = |s: f64| s.abs() <= LINE_TOL;

    let region = if on(exact_line) || on(almost_line) || on(half_line) {
        Region::Boundary
    } else if exact_line > 0.0 {
        Region::Exact
    } else if almost_line > 0.0 {
        Region::AlmostExactGap
    } else if half_line < 0.0 {
        Region::ImpossibleHalf
    } else {
        Region::Open
    };
    let conjecture = if on(almost_line) {
        ConjectureLabel::OnLine
    } else if almost_line < 0.0 {
        ConjectureLabel::ImpossiblePartial
    } else {
        ConjectureLabel::Achievable
    };
    Ok(Classification { region, conjecture })
}
