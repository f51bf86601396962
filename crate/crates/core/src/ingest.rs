//! CSV ingest, CSV writers, and synthetic instance generation.
//!
//! Two file shapes come in: daily GDU history (`site,date,gdu`) and seed
//! population tables (`id,site,early_plant,late_plant,required_gdu,quantity`).
//! Parsers attach line numbers to every rejection, auto-detect whether
//! planting columns hold ISO dates or integer day indices, and accept a
//! column-name remap for files whose headers differ from the defaults.
//!
//! The synthetic generator exists so the optimizers and forecaster can be
//! exercised at production scale without the production data: a sinusoidal
//! seasonal GDU curve plus Gaussian noise, and populations with windows,
//! GDU requirements, and quantities drawn from configurable distributions.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::domain::{epoch, DayIndex, SeedPopulation, SiteId};
use crate::error::{Error, Result};

/// One site's contiguous daily GDU series. Gap-free and non-negative by
/// construction; `start_day` is the day index of `values[0]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DailyGduSeries {
    site: SiteId,
    start_day: DayIndex,
    values: Vec<f64>,
}

impl DailyGduSeries {
    pub fn new(site: SiteId, start_day: DayIndex, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::NoRows);
        }
        if let Some(bad) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidConfig(format!(
                "GDU values must be finite and non-negative (got {bad})"
            )));
        }
        Ok(DailyGduSeries {
            site,
            start_day,
            values,
        })
    }

    pub fn site(&self) -> SiteId {
        self.site
    }

    pub fn start_day(&self) -> DayIndex {
        self.start_day
    }

    pub fn end_day(&self) -> DayIndex {
        DayIndex(self.start_day.0 + self.values.len() as i64 - 1)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, day: DayIndex) -> Option<f64> {
        let off = day.0.checked_sub(self.start_day.0)?;
        if off < 0 {
            return None;
        }
        self.values.get(off as usize).copied()
    }

    /// The trailing `n` values, oldest first.
    pub fn last_window(&self, n: usize) -> Result<&[f64]> {
        if self.values.len() < n {
            return Err(Error::InsufficientHistory {
                what: "seed window",
                needed: n,
                got: self.values.len(),
            });
        }
        Ok(&self.values[self.values.len() - n..])
    }
}

/// Renames of the form `expected_column -> actual_column_in_file`.
pub type ColumnMap = Vec<(String, String)>;

fn resolve_column(headers: &csv::StringRecord, name: &str, map: &ColumnMap) -> Result<usize> {
    let actual = map
        .iter()
        .find(|(from, _)| from == name)
        .map(|(_, to)| to.as_str())
        .unwrap_or(name);
    headers
        .iter()
        .position(|h| h == actual)
        .ok_or_else(|| Error::Parse {
            line: Some(1),
            msg: format!("missing column {actual:?} (expected for {name})"),
        })
}

fn record_line(record: &csv::StringRecord) -> Option<usize> {
    record.position().map(|p| p.line() as usize)
}

/// Parse a `site,date,gdu` history file into per-site series (sorted by
/// site id). Rows may arrive in any order; each site's dates must form a
/// contiguous range with no duplicates, and GDU values must be non-negative.
pub fn parse_gdu_history(reader: impl Read, map: &ColumnMap) -> Result<Vec<DailyGduSeries>> {
    let mut csv_reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = csv_reader.headers()?.clone();
    let site_col = resolve_column(&headers, "site", map)?;
    let date_col = resolve_column(&headers, "date", map)?;
    let gdu_col = resolve_column(&headers, "gdu", map)?;

    let mut per_site: BTreeMap<u32, Vec<(NaiveDate, f64)>> = BTreeMap::new();
    for record in csv_reader.records() {
        let record = record?;
        let line = record_line(&record);
        let field = |col: usize| {
            record.get(col).ok_or_else(|| Error::Parse {
                line,
                msg: "row has too few fields".into(),
            })
        };
        let site: u32 = field(site_col)?.parse().map_err(|_| Error::Parse {
            line,
            msg: format!("unparseable site id {:?}", field(site_col).unwrap_or("")),
        })?;
        let date_str = field(date_col)?;
        let date = NaiveDate::parse_from_str(date_str, "%Y-%m-%d").map_err(|_| Error::Parse {
            line,
            msg: format!("unparseable date {date_str:?} (expected YYYY-MM-DD)"),
        })?;
        let gdu_str = field(gdu_col)?;
        let gdu: f64 = gdu_str.parse().map_err(|_| Error::Parse {
            line,
            msg: format!("unparseable GDU value {gdu_str:?}"),
        })?;
        if !(gdu.is_finite() && gdu >= 0.0) {
            return Err(Error::Parse {
                line,
                msg: format!("negative GDU value {gdu} for site {site} on {date}"),
            });
        }
        per_site.entry(site).or_default().push((date, gdu));
    }
    if per_site.is_empty() {
        return Err(Error::NoRows);
    }

    let mut out = Vec::with_capacity(per_site.len());
    for (site, mut rows) in per_site {
        rows.sort_by_key(|(date, _)| *date);
        for pair in rows.windows(2) {
            let gap = (pair[1].0 - pair[0].0).num_days();
            if gap == 0 {
                return Err(Error::Parse {
                    line: None,
                    msg: format!("duplicate date {} for site {site}", pair[0].0),
                });
            }
            if gap > 1 {
                return Err(Error::MissingDay {
                    site,
                    date: pair[0].0.succ_opt().expect("date within calendar range"),
                });
            }
        }
        let values = rows.iter().map(|(_, g)| *g).collect();
        out.push(DailyGduSeries::new(
            SiteId(site),
            DayIndex::from_date(rows[0].0),
            values,
        )?);
    }
    Ok(out)
}

/// Pick one site's series out of a multi-site history.
pub fn site_series(series: &[DailyGduSeries], site: SiteId) -> Result<&DailyGduSeries> {
    series.iter().find(|s| s.site() == site).ok_or_else(|| {
        let known: Vec<String> = series.iter().map(|s| s.site().to_string()).collect();
        Error::InvalidConfig(format!(
            "site {site} not present in history (sites: {})",
            known.join(", ")
        ))
    })
}

#[derive(Debug, Clone)]
pub struct PopulationCsvOptions {
    /// Calendar date that integer planting index 1 refers to.
    pub epoch_index_one: NaiveDate,
    pub column_map: ColumnMap,
}

impl Default for PopulationCsvOptions {
    fn default() -> Self {
        PopulationCsvOptions {
            epoch_index_one: epoch(),
            column_map: Vec::new(),
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum PlantColumnMode {
    Integer,
    IsoDate,
}

/// Decide whether every value in a planting column is an integer day index
/// or an ISO date. Mixed columns are rejected at the first offending row.
fn detect_plant_mode(
    rows: &[csv::StringRecord],
    col: usize,
    name: &str,
) -> Result<PlantColumnMode> {
    if rows
        .iter()
        .all(|r| r.get(col).is_some_and(|v| v.parse::<i64>().is_ok()))
    {
        return Ok(PlantColumnMode::Integer);
    }
    for record in rows {
        let v = record.get(col).unwrap_or("");
        if NaiveDate::parse_from_str(v, "%Y-%m-%d").is_err() {
            return Err(Error::Parse {
                line: record_line(record),
                msg: format!(
                    "{name} value {v:?} is neither an integer day index nor an ISO date"
                ),
            });
        }
    }
    Ok(PlantColumnMode::IsoDate)
}

fn parse_plant_day(
    value: &str,
    mode: PlantColumnMode,
    opts: &PopulationCsvOptions,
    line: Option<usize>,
) -> Result<DayIndex> {
    match mode {
        PlantColumnMode::Integer => {
            let idx: i64 = value.parse().map_err(|_| Error::Parse {
                line,
                msg: format!("unparseable day index {value:?}"),
            })?;
            Ok(DayIndex(
                DayIndex::from_date(opts.epoch_index_one).0 + idx - 1,
            ))
        }
        PlantColumnMode::IsoDate => {
            let date = NaiveDate::parse_from_str(value, "%Y-%m-%d").map_err(|_| Error::Parse {
                line,
                msg: format!("unparseable date {value:?} (expected YYYY-MM-DD)"),
            })?;
            Ok(DayIndex::from_date(date))
        }
    }
}

/// Parse a populations file. Planting columns may hold ISO dates or 1-based
/// integer day indices (index 1 = `opts.epoch_index_one`); the two columns
/// are auto-detected independently. Every entity validation failure carries
/// the offending line number.
pub fn parse_populations(
    reader: impl Read,
    opts: &PopulationCsvOptions,
) -> Result<Vec<SeedPopulation>> {
    let mut csv_reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = csv_reader.headers()?.clone();
    let map = &opts.column_map;
    let id_col = resolve_column(&headers, "id", map)?;
    let site_col = resolve_column(&headers, "site", map)?;
    let early_col = resolve_column(&headers, "early_plant", map)?;
    let late_col = resolve_column(&headers, "late_plant", map)?;
    let gdu_col = resolve_column(&headers, "required_gdu", map)?;
    let qty_col = resolve_column(&headers, "quantity", map)?;

    let rows: Vec<csv::StringRecord> =
        csv_reader.records().collect::<std::result::Result<_, _>>()?;
    if rows.is_empty() {
        return Err(Error::NoRows);
    }
    let early_mode = detect_plant_mode(&rows, early_col, "early_plant")?;
    let late_mode = detect_plant_mode(&rows, late_col, "late_plant")?;

    let mut out = Vec::with_capacity(rows.len());
    for record in &rows {
        let line = record_line(record);
        let field = |col: usize| {
            record.get(col).ok_or_else(|| Error::Parse {
                line,
                msg: "row has too few fields".into(),
            })
        };
        let id = field(id_col)?.to_string();
        let site: u32 = field(site_col)?.parse().map_err(|_| Error::Parse {
            line,
            msg: format!("unparseable site id {:?}", field(site_col).unwrap_or("")),
        })?;
        let early = parse_plant_day(field(early_col)?, early_mode, opts, line)?;
        let late = parse_plant_day(field(late_col)?, late_mode, opts, line)?;
        let gdu_str = field(gdu_col)?;
        let required_gdu: f64 = gdu_str.parse().map_err(|_| Error::Parse {
            line,
            msg: format!("unparseable required GDU {gdu_str:?}"),
        })?;
        let qty_str = field(qty_col)?;
        let quantity: i64 = qty_str.parse().map_err(|_| Error::Parse {
            line,
            msg: format!("quantity must be an integer (got {qty_str:?})"),
        })?;
        let pop = SeedPopulation::new(id, SiteId(site), early, late, required_gdu, quantity)
            .map_err(|e| Error::Parse {
                line,
                msg: e.to_string(),
            })?;
        out.push(pop);
    }
    Ok(out)
}

/// Write per-site GDU series back out in the canonical `site,date,gdu` shape.
pub fn write_gdu_history(series: &[DailyGduSeries], writer: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["site", "date", "gdu"])?;
    for s in series {
        for (off, gdu) in s.values().iter().enumerate() {
            let date = DayIndex(s.start_day().0 + off as i64).to_date()?;
            w.write_record(&[
                s.site().to_string(),
                date.format("%Y-%m-%d").to_string(),
                gdu.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Write populations with ISO planting dates.
pub fn write_populations(populations: &[SeedPopulation], writer: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "id",
        "site",
        "early_plant",
        "late_plant",
        "required_gdu",
        "quantity",
    ])?;
    for p in populations {
        w.write_record(&[
            p.id.clone(),
            p.site.to_string(),
            p.earliest_plant.to_date()?.format("%Y-%m-%d").to_string(),
            p.latest_plant.to_date()?.format("%Y-%m-%d").to_string(),
            p.required_gdu.to_string(),
            p.harvest_quantity.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Knobs for the synthetic generator. Window widths are inclusive day
/// counts; windows land inside calendar year 2020 so the standard 730-day
/// scenario horizon always covers them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub population_count: usize,
    pub quantity_mean: f64,
    pub quantity_sd: f64,
    pub gdu_seasonal_mean: f64,
    pub gdu_seasonal_amplitude: f64,
    pub gdu_noise_sd: f64,
    pub plant_window_days: (u32, u32),
    pub required_gdu_range: (f64, f64),
    pub rng_seed: u64,
}

impl SyntheticSpec {
    /// Capacity-limited scheduling shape: many mid-size populations.
    pub fn case1_defaults(population_count: usize, rng_seed: u64) -> Self {
        SyntheticSpec {
            population_count,
            quantity_mean: 250.0,
            quantity_sd: 100.0,
            gdu_seasonal_mean: 12.0,
            gdu_seasonal_amplitude: 9.0,
            gdu_noise_sd: 1.5,
            plant_window_days: (7, 30),
            required_gdu_range: (250.0, 900.0),
            rng_seed,
        }
    }

    /// Capacity-minimization shape: fewer, larger populations.
    pub fn case2_defaults(population_count: usize, rng_seed: u64) -> Self {
        SyntheticSpec {
            quantity_mean: 350.0,
            quantity_sd: 150.0,
            ..SyntheticSpec::case1_defaults(population_count, rng_seed)
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.population_count == 0 {
            return bad("population_count must be at least 1".into());
        }
        if !(self.quantity_mean.is_finite() && self.quantity_sd.is_finite())
            || self.quantity_sd < 0.0
        {
            return bad(format!(
                "quantity distribution N({}, {}) invalid",
                self.quantity_mean, self.quantity_sd
            ));
        }
        if !(self.gdu_seasonal_mean.is_finite()
            && self.gdu_seasonal_amplitude.is_finite()
            && self.gdu_noise_sd.is_finite())
            || self.gdu_seasonal_amplitude < 0.0
            || self.gdu_noise_sd < 0.0
        {
            return bad("GDU curve parameters must be finite, amplitude and noise sd non-negative".into());
        }
        let (wlo, whi) = self.plant_window_days;
        if wlo < 1 || wlo > whi || whi as i64 > 365 {
            return bad(format!("plant window width range ({wlo}, {whi}) invalid"));
        }
        let (rlo, rhi) = self.required_gdu_range;
        if !(rlo.is_finite() && rhi.is_finite()) || rlo < 0.0 || rlo > rhi {
            return bad(format!("required GDU range ({rlo}, {rhi}) invalid"));
        }
        Ok(())
    }
}

/// Start of the synthetic history: 2009-01-01.
pub const SYNTHETIC_HISTORY_START: DayIndex = DayIndex(-4017);
/// Inclusive day count of 2009-01-01 through 2019-12-31.
pub const SYNTHETIC_HISTORY_DAYS: usize = 4017;

/// Seasonal mean GDU for a day, before noise. Sinusoid with a one-year
/// period peaking in mid-July (day 196 of the planning calendar).
fn seasonal_gdu(spec: &SyntheticSpec, day: i64) -> f64 {
    let phase = 2.0 * std::f64::consts::PI * ((day - 105) as f64) / 365.25;
    spec.gdu_seasonal_mean + spec.gdu_seasonal_amplitude * phase.sin()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticInstance {
    pub history: DailyGduSeries,
    pub populations: Vec<SeedPopulation>,
}

/// Deterministic synthetic instance: an 11-year daily GDU history for site 0
/// plus `population_count` populations with windows inside 2020.
pub fn generate_synthetic_instance(spec: &SyntheticSpec) -> Result<SyntheticInstance> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);

    let noise = if spec.gdu_noise_sd > 0.0 {
        Some(Normal::new(0.0, spec.gdu_noise_sd).expect("validated sd"))
    } else {
        None
    };
    let mut values = Vec::with_capacity(SYNTHETIC_HISTORY_DAYS);
    for off in 0..SYNTHETIC_HISTORY_DAYS {
        let day = SYNTHETIC_HISTORY_START.0 + off as i64;
        let eps = noise.as_ref().map_or(0.0, |n| n.sample(&mut rng));
        values.push((seasonal_gdu(spec, day) + eps).max(0.0));
    }
    let history = DailyGduSeries::new(SiteId(0), SYNTHETIC_HISTORY_START, values)?;

    let quantity = if spec.quantity_sd > 0.0 {
        Some(Normal::new(spec.quantity_mean, spec.quantity_sd).expect("validated sd"))
    } else {
        None
    };
    let (wlo, whi) = spec.plant_window_days;
    let (rlo, rhi) = spec.required_gdu_range;
    let mut populations = Vec::with_capacity(spec.population_count);
    for i in 0..spec.population_count {
        let width = rng.random_range(wlo..=whi) as i64;
        let earliest = rng.random_range(0..=(365 - width));
        let required = if rlo < rhi {
            rng.random_range(rlo..=rhi)
        } else {
            rlo
        };
        let q = quantity
            .as_ref()
            .map_or(spec.quantity_mean, |n| n.sample(&mut rng))
            .round() as i64;
        populations.push(SeedPopulation::new(
            format!("p{i:04}"),
            SiteId(0),
            DayIndex(earliest),
            DayIndex(earliest + width - 1),
            required,
            q.max(1),
        )?);
    }
    Ok(SyntheticInstance {
        history,
        populations,
    })
}
