//! Hourly renewable-generation and grid-price signals: CSV ingestion,
//! synthesis, unit conversion and level discretization.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::domain::ExogenousObservation;
use crate::error::{Error, Result};

/// Unit of an [`HourlySeries`]. Files carry the first two; the SOC-point
/// units are produced by [`HourlySeries::to_soc_units`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SeriesUnit {
    KilowattHours,
    EurPerKilowattHour,
    SocPoints,
    EurPerSocPoint,
}

/// A non-negative value per (day, hour) over a contiguous run of days.
#[derive(Debug, Clone, PartialEq)]
pub struct HourlySeries {
    unit: SeriesUnit,
    values: Vec<f64>, // day-major, 24 per day
}

impl HourlySeries {
    pub fn from_values(unit: SeriesUnit, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() || !values.len().is_multiple_of(24) {
            return Err(Error::domain(format!(
                "hourly series length must be a nonzero multiple of 24, got {}",
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::domain(format!(
                "series values must be finite and >= 0, got {v}"
            )));
        }
        Ok(HourlySeries { unit, values })
    }

    pub fn unit(&self) -> SeriesUnit {
        self.unit
    }

    pub fn days(&self) -> usize {
        self.values.len() / 24
    }

    pub fn value(&self, day: usize, hour: usize) -> f64 {
        self.values[day * 24 + hour]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Converts kWh to SOC points or euro/kWh to euro/SOC-point using the
    /// common battery capacity. Series already in SOC units pass through.
    pub fn to_soc_units(&self, battery_capacity_kwh: f64) -> Result<HourlySeries> {
        if !battery_capacity_kwh.is_finite() || battery_capacity_kwh <= 0.0 {
            return Err(Error::domain(format!(
                "battery capacity must be > 0 kWh, got {battery_capacity_kwh}"
            )));
        }
        let (unit, f): (SeriesUnit, fn(f64, f64) -> f64) = match self.unit {
            SeriesUnit::KilowattHours => (SeriesUnit::SocPoints, kwh_to_points),
            SeriesUnit::EurPerKilowattHour => {
                (SeriesUnit::EurPerSocPoint, eur_per_kwh_to_eur_per_point)
            }
            u => (u, |v, _| v),
        };
        Ok(HourlySeries {
            unit,
            values: self
                .values
                .iter()
                .map(|&v| f(v, battery_capacity_kwh))
                .collect(),
        })
    }

    /// Pointwise sum of two series with identical unit and length.
    pub fn add(&self, other: &HourlySeries) -> Result<HourlySeries> {
        if self.unit != other.unit || self.values.len() != other.values.len() {
            return Err(Error::domain(
                "cannot add series with different units or lengths".to_string(),
            ));
        }
        Ok(HourlySeries {
            unit: self.unit,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }
}

/// Energy in kWh expressed in SOC points of the common battery.
pub fn kwh_to_points(kwh: f64, battery_capacity_kwh: f64) -> f64 {
    kwh / battery_capacity_kwh * 100.0
}

/// Price per kWh expressed per SOC point of the common battery.
pub fn eur_per_kwh_to_eur_per_point(eur_per_kwh: f64, battery_capacity_kwh: f64) -> f64 {
    eur_per_kwh * battery_capacity_kwh / 100.0
}

#[derive(Debug, Deserialize)]
struct CsvRow {
    day: i64,
    hour: f64,
    value: f64,
}

/// Loads an hourly or half-hourly `day,hour,value` CSV file.
///
/// Half-hourly inputs (rows at hour x.0 and x.5) are averaged pairwise into
/// hourly values. Days must be 0-based and contiguous, with every hour of
/// every day covered.
pub fn load_hourly_series(path: &Path, unit: SeriesUnit) -> Result<HourlySeries> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::parse(1, format!("cannot open {}: {e}", path.display())))?;

    let headers = reader
        .headers()
        .map_err(|e| Error::parse(1, e.to_string()))?
        .clone();
    let expect = ["day", "hour", "value"];
    if headers.iter().map(str::trim).ne(expect) {
        return Err(Error::parse(
            1,
            format!("expected header day,hour,value, got {headers:?}"),
        ));
    }

    // (day, half-hour slot 0..47) -> value; row numbers are 1-based with the
    // header as row 1.
    let mut slots: std::collections::HashMap<(usize, usize), f64> =
        std::collections::HashMap::new();
    let mut max_day = 0usize;
    let mut any_half = false;
    let mut row_no = 1usize;
    for record in reader.deserialize::<CsvRow>() {
        row_no += 1;
        let row = record.map_err(|e| Error::parse(row_no, e.to_string()))?;
        if row.day < 0 {
            return Err(Error::parse(
                row_no,
                format!("day must be >= 0, got {}", row.day),
            ));
        }
        if !(0.0..24.0).contains(&row.hour) || (row.hour * 2.0).fract() != 0.0 {
            return Err(Error::parse(
                row_no,
                format!(
                    "hour must be in [0,24) at 0.5 granularity, got {}",
                    row.hour
                ),
            ));
        }
        if !row.value.is_finite() || row.value < 0.0 {
            return Err(Error::parse(
                row_no,
                format!("value must be finite and >= 0, got {}", row.value),
            ));
        }
        let day = row.day as usize;
        let half = (row.hour * 2.0) as usize;
        if half % 2 == 1 {
            any_half = true;
        }
        if slots.insert((day, half), row.value).is_some() {
            return Err(Error::parse(
                row_no,
                format!("duplicate entry for day {day} hour {}", row.hour),
            ));
        }
        max_day = max_day.max(day);
    }
    if slots.is_empty() {
        return Err(Error::parse(1, "file contains no data rows".to_string()));
    }

    let last_row = row_no;
    let mut values = Vec::with_capacity((max_day + 1) * 24);
    for day in 0..=max_day {
        for hour in 0..24 {
            let on_hour = slots.get(&(day, hour * 2));
            let on_half = slots.get(&(day, hour * 2 + 1));
            let v = match (on_hour, on_half, any_half) {
                (Some(a), Some(b), _) => (a + b) / 2.0,
                (Some(a), None, false) => *a,
                _ => {
                    return Err(Error::parse(
                        last_row,
                        format!("missing value for day {day} hour {hour}"),
                    ))
                }
            };
            values.push(v);
        }
    }
    HourlySeries::from_values(unit, values)
}

/// Divides every value by the number of turbines behind the measurement,
/// turning fleet-level generation data into a per-turbine signal.
pub fn normalize_wind(series: &HourlySeries, turbine_count: u32) -> Result<HourlySeries> {
    if turbine_count == 0 {
        return Err(Error::domain("turbine count must be > 0".to_string()));
    }
    HourlySeries::from_values(
        series.unit(),
        series
            .values()
            .iter()
            .map(|v| v / turbine_count as f64)
            .collect(),
    )
}

/// Distributes one average day of panel output (`annual_kwh / 365`) over 24
/// hourly buckets proportionally to a normal density centered on
/// `peak_hour`, renormalized so the buckets sum exactly to the daily total.
pub fn solar_profile(annual_kwh: f64, peak_hour: f64, sigma: f64) -> Result<[f64; 24]> {
    if !sigma.is_finite() || sigma <= 0.0 {
        return Err(Error::domain(format!(
            "solar sigma must be > 0, got {sigma}"
        )));
    }
    if !annual_kwh.is_finite() || annual_kwh < 0.0 {
        return Err(Error::domain(format!(
            "annual generation must be >= 0, got {annual_kwh}"
        )));
    }
    let daily = annual_kwh / 365.0;
    let mut weights = [0.0f64; 24];
    for (h, w) in weights.iter_mut().enumerate() {
        let z = (h as f64 + 0.5 - peak_hour) / sigma;
        *w = (-0.5 * z * z).exp();
    }
    let total: f64 = weights.iter().sum();
    let mut out = [0.0f64; 24];
    for (o, w) in out.iter_mut().zip(weights) {
        *o = daily * w / total;
    }
    Ok(out)
}

/// Discretizer for one exogenous signal: quantile cut-points plus a
/// representative (in-bucket mean) value per level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelCodec {
    thresholds: Vec<f64>,
    level_values: Vec<f64>,
}

impl LevelCodec {
    pub fn level_count(&self) -> usize {
        self.level_values.len()
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn level_values(&self) -> &[f64] {
        &self.level_values
    }

    /// Level index for a value; a value exactly at a threshold goes to the
    /// higher level, and out-of-range values clamp to the extreme levels.
    pub fn level_of(&self, value: f64) -> usize {
        self.thresholds.iter().filter(|t| value >= **t).count()
    }

    /// Representative value of a level.
    pub fn value_of(&self, level: usize) -> f64 {
        self.level_values[level]
    }
}

/// Linear-interpolation quantile of sorted data at probability `p`.
fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if lo + 1 < n {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    } else {
        sorted[n - 1]
    }
}

/// Fits a [`LevelCodec`] with equal-probability levels: thresholds at the
/// `i/level_count` quantiles, representative values the in-bucket means.
pub fn fit_levels(series: &HourlySeries, level_count: usize) -> Result<LevelCodec> {
    fit_levels_from_values(series.values(), level_count)
}

pub fn fit_levels_from_values(values: &[f64], level_count: usize) -> Result<LevelCodec> {
    if level_count < 2 {
        return Err(Error::domain(format!(
            "level count must be >= 2, got {level_count}"
        )));
    }
    if values.is_empty() {
        return Err(Error::domain(
            "cannot fit levels to an empty series".to_string(),
        ));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let thresholds: Vec<f64> = (1..level_count)
        .map(|i| quantile_sorted(&sorted, i as f64 / level_count as f64))
        .collect();
    if thresholds.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::domain(
            "degenerate levels: quantile thresholds are not strictly increasing".to_string(),
        ));
    }

    let mut sums = vec![0.0f64; level_count];
    let mut counts = vec![0usize; level_count];
    for &v in values {
        let lvl = thresholds.iter().filter(|t| v >= **t).count();
        sums[lvl] += v;
        counts[lvl] += 1;
    }
    if counts.contains(&0) {
        return Err(Error::domain(
            "degenerate levels: a level bucket is empty".to_string(),
        ));
    }
    let level_values = sums
        .iter()
        .zip(&counts)
        .map(|(s, &c)| s / c as f64)
        .collect();
    Ok(LevelCodec {
        thresholds,
        level_values,
    })
}

/// Buckets raw renewable (kWh) and price (euro/kWh) readings at one hour
/// into the observation the controller sees. Both codecs must have been
/// fitted on values already converted to SOC-point units.
pub fn encode_observation(
    codec_r: &LevelCodec,
    codec_p: &LevelCodec,
    r_kwh: f64,
    p_eur_kwh: f64,
    battery_capacity_kwh: f64,
) -> ExogenousObservation {
    let r_raw = kwh_to_points(r_kwh, battery_capacity_kwh);
    let p_raw = eur_per_kwh_to_eur_per_point(p_eur_kwh, battery_capacity_kwh);
    let r_level = codec_r.level_of(r_raw);
    let p_level = codec_p.level_of(p_raw);
    ExogenousObservation {
        r_level: r_level as u8,
        p_level: p_level as u8,
        r_points: codec_r.value_of(r_level),
        p_eur_per_point: codec_p.value_of(p_level),
    }
}

// Synthetic generators sized for a small station-side installation, so the
// renewable amount stays commensurate with a handful of charging vehicles.

/// Hourly kWh from a small on-site wind generator: AR(1) gusts around a
/// ~1 kWh/h mean, truncated at zero.
pub fn synthetic_wind(days: usize, seed: u64) -> Result<HourlySeries> {
    if days == 0 {
        return Err(Error::domain(
            "synthetic series needs days >= 1".to_string(),
        ));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.4359).unwrap(); // stationary sd ~ 1.0 at phi = 0.9
    let mut x = 0.0f64;
    let mut values = Vec::with_capacity(days * 24);
    for _ in 0..days * 24 {
        x = 0.9 * x + noise.sample(&mut rng);
        values.push((1.0 + 0.8 * x).max(0.0));
    }
    HourlySeries::from_values(SeriesUnit::KilowattHours, values)
}

/// Hourly grid price in euro/kWh: a double-peaked (morning/evening) daily
/// shape plus AR(1) noise, floored at 0.03.
pub fn synthetic_price(days: usize, seed: u64) -> Result<HourlySeries> {
    if days == 0 {
        return Err(Error::domain(
            "synthetic series needs days >= 1".to_string(),
        ));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.012).unwrap();
    let mut x = 0.0f64;
    let mut values = Vec::with_capacity(days * 24);
    for t in 0..days * 24 {
        let h = (t % 24) as f64;
        let morning = 0.085 * (-0.5 * ((h - 8.5) / 2.0_f64).powi(2)).exp();
        let evening = 0.125 * (-0.5 * ((h - 19.0) / 2.5_f64).powi(2)).exp();
        x = 0.85 * x + noise.sample(&mut rng);
        values.push((0.065 + morning + evening + x).max(0.03));
    }
    HourlySeries::from_values(SeriesUnit::EurPerKilowattHour, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::io::Write;

    fn write_csv(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f.flush().unwrap();
        f
    }

    fn full_day_rows(half_hourly: bool) -> String {
        let mut s = String::from("day,hour,value\n");
        for h in 0..24 {
            if half_hourly {
                s.push_str(&format!("0,{h},10.0\n0,{h}.5,20.0\n"));
            } else {
                s.push_str(&format!("0,{h},{}\n", h as f64));
            }
        }
        s
    }

    #[test]
    fn half_hourly_rows_average_pairwise() {
        let f = write_csv(&full_day_rows(true));
        let s = load_hourly_series(f.path(), SeriesUnit::EurPerKilowattHour).unwrap();
        assert_eq!(s.days(), 1);
        for h in 0..24 {
            assert_eq!(s.value(0, h), 15.0);
        }
    }

    #[test]
    fn hourly_rows_load_verbatim() {
        let f = write_csv(&full_day_rows(false));
        let s = load_hourly_series(f.path(), SeriesUnit::KilowattHours).unwrap();
        assert_eq!(s.days(), 1);
        assert_eq!(s.value(0, 7), 7.0);
    }

    #[test]
    fn empty_file_is_a_parse_error() {
        let f = write_csv("day,hour,value\n");
        let err = load_hourly_series(f.path(), SeriesUnit::KilowattHours).unwrap_err();
        assert!(matches!(err, Error::Parse { .. }), "{err}");
    }

    #[test]
    fn missing_hour_is_a_parse_error() {
        let mut rows = String::from("day,hour,value\n");
        for h in 0..23 {
            rows.push_str(&format!("0,{h},1.0\n"));
        }
        let f = write_csv(&rows);
        let err = load_hourly_series(f.path(), SeriesUnit::KilowattHours).unwrap_err();
        match err {
            Error::Parse { message, .. } => assert!(message.contains("hour 23"), "{message}"),
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn negative_value_names_its_row() {
        let f = write_csv("day,hour,value\n0,0,5.0\n0,1,-2.0\n");
        match load_hourly_series(f.path(), SeriesUnit::KilowattHours).unwrap_err() {
            Error::Parse { row, .. } => assert_eq!(row, 3),
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn normalize_wind_divides_by_count() {
        let s = HourlySeries::from_values(SeriesUnit::KilowattHours, vec![4058.0; 24]).unwrap();
        let n = normalize_wind(&s, 4058).unwrap();
        assert_eq!(n.value(0, 0), 1.0);
        let id = normalize_wind(&s, 1).unwrap();
        assert_eq!(id, s);
        let z = HourlySeries::from_values(SeriesUnit::KilowattHours, vec![0.0; 24]).unwrap();
        assert_eq!(normalize_wind(&z, 7).unwrap().value(0, 3), 0.0);
        assert!(normalize_wind(&s, 0).is_err());
    }

    #[test]
    fn solar_profile_sums_to_daily_total() {
        let p = solar_profile(1000.0, 13.5, 3.0).unwrap();
        let total: f64 = p.iter().sum();
        assert_relative_eq!(total, 1000.0 / 365.0, max_relative = 1e-9);
        assert!(p.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn solar_profile_peaks_in_the_bucket_containing_the_mean() {
        let p = solar_profile(1000.0, 13.5, 3.0).unwrap();
        let argmax = p
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert_eq!(argmax, 13);
    }

    #[test]
    fn solar_profile_zero_energy_is_all_zero() {
        let p = solar_profile(0.0, 13.5, 3.0).unwrap();
        assert!(p.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn solar_profile_rejects_bad_sigma() {
        assert!(solar_profile(1000.0, 13.5, 0.0).is_err());
        assert!(solar_profile(1000.0, 13.5, -1.0).is_err());
    }

    #[test]
    fn solar_profile_is_unimodal() {
        let p = solar_profile(500.0, 10.0, 2.0).unwrap();
        let peak = p
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        for w in p[..=peak].windows(2) {
            assert!(w[0] <= w[1]);
        }
        for w in p[peak..].windows(2) {
            assert!(w[0] >= w[1]);
        }
    }

    #[test]
    fn fit_levels_median_split() {
        let c = fit_levels_from_values(&[1.0, 1.0, 9.0, 9.0], 2).unwrap();
        assert_eq!(c.thresholds(), &[5.0]);
        assert_eq!(c.level_values(), &[1.0, 9.0]);
    }

    #[test]
    fn fit_levels_in_bucket_means() {
        let c = fit_levels_from_values(&[2.0, 4.0, 6.0, 8.0], 2).unwrap();
        assert_eq!(c.level_values(), &[3.0, 7.0]);
    }

    #[test]
    fn fit_levels_rejects_constant_series() {
        assert!(fit_levels_from_values(&[0.0; 24], 2).is_err());
    }

    #[test]
    fn threshold_ties_go_to_the_higher_level() {
        let c = fit_levels_from_values(&[1.0, 1.0, 9.0, 9.0], 2).unwrap();
        assert_eq!(c.level_of(5.0), 1);
        assert_eq!(c.level_of(4.999), 0);
        assert_eq!(c.level_of(0.0), 0);
        assert_eq!(c.level_of(100.0), 1);
    }

    #[test]
    fn encode_observation_converts_units() {
        // kWh equal to the battery capacity is 100 SOC points, which lands
        // above a threshold fitted at 50 points.
        let codec_r = fit_levels_from_values(&[10.0, 20.0, 80.0, 90.0], 2).unwrap();
        let codec_p = fit_levels_from_values(&[0.01, 0.02, 0.03, 0.04], 2).unwrap();
        let obs = encode_observation(&codec_r, &codec_p, 24.0, 0.0, 24.0);
        assert_eq!(obs.r_level, 1);
        assert_eq!(obs.p_level, 0);
        assert_eq!(obs.r_points, 85.0);
        let zero = encode_observation(&codec_r, &codec_p, 0.0, 0.0, 24.0);
        assert_eq!(zero.r_level, 0);
    }

    #[test]
    fn synthetic_generators_are_seed_deterministic() {
        let a = synthetic_wind(3, 7).unwrap();
        let b = synthetic_wind(3, 7).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, synthetic_wind(3, 8).unwrap());
        let p = synthetic_price(3, 7).unwrap();
        assert_eq!(p.days(), 3);
        assert!(p.values().iter().all(|v| *v >= 0.015));
    }
}
