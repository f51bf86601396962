//! Calendar arithmetic and the validated entities the rest of the library
//! schedules: seed populations, sites, and week membership.
//!
//! Day indices count days from 2020-01-01 (day 0); history sits at negative
//! indices. Weeks run Sunday through Saturday and week 1 is the week
//! containing the epoch, 2019-12-28 being the last day of week 0. That
//! convention makes "week of day d" a pure integer function with no calendar
//! lookups, which matters because the schedulers call it in inner loops.

use chrono::{Days, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Day 0 of the planning calendar.
pub fn epoch() -> NaiveDate {
    NaiveDate::from_ymd_opt(2020, 1, 1).expect("epoch is a valid date")
}

/// Calendar arithmetic is only guaranteed within this many days of the epoch
/// (about twenty years either side). Indices further out surface a range
/// error instead of silently wrapping.
pub const CALENDAR_LIMIT_DAYS: i64 = 7305;

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct SiteId(pub u32);

impl std::fmt::Display for SiteId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Offset in days from the 2020-01-01 epoch. Negative for historical days.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct DayIndex(pub i64);

impl DayIndex {
    pub fn from_date(date: NaiveDate) -> Self {
        DayIndex((date - epoch()).num_days())
    }

    pub fn to_date(self) -> Result<NaiveDate> {
        self.check_range()?;
        let d = if self.0 >= 0 {
            epoch().checked_add_days(Days::new(self.0 as u64))
        } else {
            epoch().checked_sub_days(Days::new((-self.0) as u64))
        };
        d.ok_or(Error::DayOutOfRange {
            day: self.0,
            limit: CALENDAR_LIMIT_DAYS,
        })
    }

    pub fn check_range(self) -> Result<()> {
        if self.0.abs() > CALENDAR_LIMIT_DAYS {
            return Err(Error::DayOutOfRange {
                day: self.0,
                limit: CALENDAR_LIMIT_DAYS,
            });
        }
        Ok(())
    }
}

impl std::fmt::Display for DayIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Sunday-to-Saturday week number. Week 1 contains the epoch
/// (2019-12-29 through 2020-01-04); earlier weeks are 0, -1, ...
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct WeekIndex(pub i64);

impl std::fmt::Display for WeekIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Week containing `day`. The epoch is a Wednesday, so shifting by 3 aligns
/// week boundaries to Sundays; `div_euclid` keeps the formula correct for
/// negative (historical) days.
pub fn week_of(day: DayIndex) -> Result<WeekIndex> {
    day.check_range()?;
    Ok(WeekIndex((day.0 + 3).div_euclid(7) + 1))
}

/// First day (the Sunday) of a given week.
pub fn week_start(week: WeekIndex) -> DayIndex {
    DayIndex((week.0 - 1) * 7 - 3)
}

/// Precomputed day-to-week table over a contiguous day span. Scheduling
/// touches every (population, day, scenario) triple, so the table keeps that
/// hot path free of division and range checks.
#[derive(Debug, Clone)]
pub struct WeekMembership {
    start: DayIndex,
    weeks: Vec<WeekIndex>,
}

impl WeekMembership {
    pub fn covering(start: DayIndex, len: usize) -> Result<Self> {
        if len == 0 {
            return Err(Error::InvalidConfig(
                "week membership span must be non-empty".into(),
            ));
        }
        let mut weeks = Vec::with_capacity(len);
        for off in 0..len {
            weeks.push(week_of(DayIndex(start.0 + off as i64))?);
        }
        Ok(WeekMembership { start, weeks })
    }

    pub fn start(&self) -> DayIndex {
        self.start
    }

    pub fn end(&self) -> DayIndex {
        DayIndex(self.start.0 + self.weeks.len() as i64 - 1)
    }

    /// Week of `day`, or None when the day is outside the covered span.
    pub fn week(&self, day: DayIndex) -> Option<WeekIndex> {
        let off = day.0.checked_sub(self.start.0)?;
        if off < 0 {
            return None;
        }
        self.weeks.get(off as usize).copied()
    }
}

/// A seed population to be planted once somewhere inside its window.
///
/// Construction validates every invariant and reports all violations at
/// once, so a bad CSV row surfaces as one actionable error instead of a
/// fix-one-find-another loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedPopulation {
    pub id: String,
    pub site: SiteId,
    pub earliest_plant: DayIndex,
    pub latest_plant: DayIndex,
    pub required_gdu: f64,
    pub harvest_quantity: u64,
}

impl SeedPopulation {
    pub fn new(
        id: impl Into<String>,
        site: SiteId,
        earliest_plant: DayIndex,
        latest_plant: DayIndex,
        required_gdu: f64,
        harvest_quantity: i64,
    ) -> Result<Self> {
        let id = id.into();
        let mut violations = Vec::new();
        if id.is_empty() {
            violations.push("id must be non-empty".to_string());
        }
        if earliest_plant > latest_plant {
            violations.push(format!(
                "planting window inverted (earliest {} after latest {})",
                earliest_plant.0, latest_plant.0
            ));
        }
        if earliest_plant.check_range().is_err() || latest_plant.check_range().is_err() {
            violations.push(format!(
                "planting window [{}, {}] outside supported calendar range",
                earliest_plant.0, latest_plant.0
            ));
        }
        if !(required_gdu.is_finite() && required_gdu >= 0.0) {
            violations.push(format!(
                "required GDU must be finite and non-negative (got {required_gdu})"
            ));
        }
        if harvest_quantity < 1 {
            violations.push(format!(
                "harvest quantity must be at least 1 (got {harvest_quantity})"
            ));
        }
        if !violations.is_empty() {
            return Err(Error::InvalidPopulation { id, violations });
        }
        Ok(SeedPopulation {
            id,
            site,
            earliest_plant,
            latest_plant,
            required_gdu,
            harvest_quantity: harvest_quantity as u64,
        })
    }

    /// Number of candidate planting days (window is inclusive).
    pub fn window_len(&self) -> usize {
        (self.latest_plant.0 - self.earliest_plant.0 + 1) as usize
    }
}

/// Weekly harvesting capacity of one site, in ears.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SiteCapacity {
    pub site: SiteId,
    pub weekly_capacity: u64,
}

impl SiteCapacity {
    pub fn new(site: SiteId, weekly_capacity: u64) -> Result<Self> {
        if weekly_capacity == 0 {
            return Err(Error::InvalidConfig(format!(
                "site {site}: weekly capacity must be at least 1"
            )));
        }
        Ok(SiteCapacity {
            site,
            weekly_capacity,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn epoch_is_wednesday_in_week_one() {
        assert_eq!(week_of(DayIndex(0)).unwrap(), WeekIndex(1));
        assert_eq!(
            epoch().format("%A").to_string(),
            "Wednesday",
            "the Sunday-anchored week formula assumes a Wednesday epoch"
        );
    }

    #[test]
    fn week_boundaries_around_epoch() {
        // Week 1 runs 2019-12-29 (day -3) through 2020-01-04 (day 3).
        assert_eq!(week_of(DayIndex(-3)).unwrap(), WeekIndex(1));
        assert_eq!(week_of(DayIndex(3)).unwrap(), WeekIndex(1));
        assert_eq!(week_of(DayIndex(-4)).unwrap(), WeekIndex(0));
        assert_eq!(week_of(DayIndex(4)).unwrap(), WeekIndex(2));
        assert_eq!(week_of(DayIndex(11)).unwrap(), WeekIndex(3));
    }

    #[test]
    fn week_of_known_dates() {
        let d = |y, m, d| DayIndex::from_date(NaiveDate::from_ymd_opt(y, m, d).unwrap());
        assert_eq!(week_of(d(2020, 1, 1)).unwrap(), WeekIndex(1));
        assert_eq!(week_of(d(2020, 1, 4)).unwrap(), WeekIndex(1));
        assert_eq!(week_of(d(2020, 1, 5)).unwrap(), WeekIndex(2));
        assert_eq!(week_of(d(2020, 1, 12)).unwrap(), WeekIndex(3));
    }

    #[test]
    fn date_conversions_round_trip() {
        let date = NaiveDate::from_ymd_opt(2020, 7, 15).unwrap();
        let day = DayIndex::from_date(date);
        assert_eq!(day, DayIndex(196));
        assert_eq!(day.to_date().unwrap(), date);

        let hist = NaiveDate::from_ymd_opt(2009, 1, 1).unwrap();
        assert_eq!(DayIndex::from_date(hist), DayIndex(-4017));
    }

    #[test]
    fn out_of_range_day_is_an_error_not_a_wrap() {
        assert!(week_of(DayIndex(CALENDAR_LIMIT_DAYS + 1)).is_err());
        assert!(week_of(DayIndex(-CALENDAR_LIMIT_DAYS - 1)).is_err());
        assert!(week_of(DayIndex(CALENDAR_LIMIT_DAYS)).is_ok());
        assert!(DayIndex(CALENDAR_LIMIT_DAYS + 1).to_date().is_err());
    }

    #[test]
    fn week_start_inverts_week_of() {
        for w in [-500, 0, 1, 2, 77] {
            let start = week_start(WeekIndex(w));
            assert_eq!(week_of(start).unwrap(), WeekIndex(w));
            assert_eq!(week_of(DayIndex(start.0 - 1)).unwrap(), WeekIndex(w - 1));
        }
    }

    #[test]
    fn week_membership_matches_week_of_and_bounds() {
        let m = WeekMembership::covering(DayIndex(-10), 40).unwrap();
        assert_eq!(m.start(), DayIndex(-10));
        assert_eq!(m.end(), DayIndex(29));
        for d in -10..30 {
            assert_eq!(m.week(DayIndex(d)), Some(week_of(DayIndex(d)).unwrap()));
        }
        assert_eq!(m.week(DayIndex(-11)), None);
        assert_eq!(m.week(DayIndex(30)), None);
    }

    #[test]
    fn population_validation_reports_every_violation() {
        let err = SeedPopulation::new("p1", SiteId(0), DayIndex(20), DayIndex(10), -5.0, 0)
            .expect_err("three violations");
        match err {
            Error::InvalidPopulation { id, violations } => {
                assert_eq!(id, "p1");
                assert_eq!(violations.len(), 3);
                assert!(violations[0].contains("inverted"));
                assert!(violations[1].contains("required GDU"));
                assert!(violations[2].contains("harvest quantity"));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn degenerate_one_day_window_is_valid() {
        let p =
            SeedPopulation::new("p2", SiteId(1), DayIndex(5), DayIndex(5), 100.0, 3).unwrap();
        assert_eq!(p.window_len(), 1);
        assert_eq!(p.harvest_quantity, 3);
    }

    #[test]
    fn zero_required_gdu_is_valid() {
        assert!(SeedPopulation::new("p3", SiteId(0), DayIndex(0), DayIndex(1), 0.0, 1).is_ok());
    }

    #[test]
    fn site_capacity_rejects_zero() {
        assert!(SiteCapacity::new(SiteId(0), 0).is_err());
        assert_eq!(
            SiteCapacity::new(SiteId(0), 7500).unwrap().weekly_capacity,
            7500
        );
    }
}
