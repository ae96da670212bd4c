//! CSV formats for lakes, drivers, observations and simulated fields, and
//! validated ingestion of external data.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use chrono::NaiveDate;

use crate::error::{MtlError, Result};
use crate::lakesim::{DriverSeries, LakeAttributes, Observation, ObservationSet, TemperatureField};
use crate::metafeatures::LakeBundle;

pub const LAKES_HEADER: [&str; 5] = ["lake_id", "max_depth_m", "surface_area_m2", "clarity_1perm", "latitude"];
pub const DRIVERS_HEADER: [&str; 9] = [
    "lake_id",
    "date",
    "shortwave_wm2",
    "longwave_wm2",
    "airtemp_c",
    "relhum_pct",
    "wind_ms",
    "rain_mday",
    "snow_mday",
];
pub const OBSERVATIONS_HEADER: [&str; 4] = ["lake_id", "date", "depth_m", "temp_c"];
pub const FIELD_HEADER: [&str; 3] = ["depth_m", "date", "temp_c"];

/// Minimum number of qualifying profiles for a source lake.
pub const MIN_SOURCE_PROFILES: usize = 50;

const DATE_FMT: &str = "%Y-%m-%d";
/// Row errors listed in a rejection message before truncating.
const MAX_LISTED: usize = 20;

pub fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    Ok(csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(path)?)
}

/// Shortest round-trip decimal form.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

pub fn write_lakes(path: &Path, lakes: &[&LakeAttributes]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(LAKES_HEADER)?;
    for l in lakes {
        w.write_record([
            l.lake_id.as_str().to_string(),
            fmt_f64(l.max_depth),
            fmt_f64(l.surface_area),
            fmt_f64(l.clarity),
            fmt_f64(l.latitude),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_drivers(path: &Path, series: &[(&str, &DriverSeries)]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(DRIVERS_HEADER)?;
    for (id, d) in series {
        for i in 0..d.len() {
            w.write_record([
                id.to_string(),
                d.date(i).format(DATE_FMT).to_string(),
                fmt_f64(d.shortwave[i]),
                fmt_f64(d.longwave[i]),
                fmt_f64(d.air_temp[i]),
                fmt_f64(d.rel_humidity[i]),
                fmt_f64(d.wind_speed[i]),
                fmt_f64(d.rain[i]),
                fmt_f64(d.snow[i]),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_observations(path: &Path, sets: &[(&str, &ObservationSet)]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(OBSERVATIONS_HEADER)?;
    for (id, obs) in sets {
        for r in obs.records() {
            w.write_record([id.to_string(), r.date.format(DATE_FMT).to_string(), fmt_f64(r.depth), fmt_f64(r.temp)])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Long-format field CSV, depth-major.
pub fn write_field(path: &Path, field: &TemperatureField) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(FIELD_HEADER)?;
    for (k, depth) in field.depths().iter().enumerate() {
        let row = field.at_depth(k);
        for (day, t) in row.iter().enumerate() {
            w.write_record([fmt_f64(*depth), field.date(day).format(DATE_FMT).to_string(), fmt_f64(*t)])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn file_label(path: &Path) -> String {
    path.display().to_string()
}

fn open(path: &Path, header: &[&str]) -> Result<csv::Reader<std::fs::File>> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let got: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if got != header {
        return Err(MtlError::Schema {
            file: file_label(path),
            detail: format!("header mismatch: expected {}, got {}", header.join(","), got.join(",")),
        });
    }
    Ok(r)
}

/// Collects per-row problems so a rejection can list every offending row.
struct RowErrors {
    file: String,
    rows: Vec<(usize, String)>,
}

impl RowErrors {
    fn new(path: &Path) -> Self {
        RowErrors { file: file_label(path), rows: Vec::new() }
    }

    fn push(&mut self, row: usize, msg: impl Into<String>) {
        self.rows.push((row, msg.into()));
    }

    fn finish(self) -> Result<()> {
        if self.rows.is_empty() {
            return Ok(());
        }
        let listed: Vec<String> = self.rows.iter().take(MAX_LISTED).map(|(r, m)| format!("row {r}: {m}")).collect();
        let more = if self.rows.len() > MAX_LISTED { format!("; and {} more", self.rows.len() - MAX_LISTED) } else { String::new() };
        Err(MtlError::Schema {
            file: self.file,
            detail: format!("{} invalid rows: {}{more}", self.rows.len(), listed.join("; ")),
        })
    }
}

fn parse_f64(s: &str, col: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.trim().parse().map_err(|_| format!("{col} {s:?} is not a number"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{col} is not finite"))
    }
}

fn parse_date(s: &str) -> std::result::Result<NaiveDate, String> {
    NaiveDate::parse_from_str(s.trim(), DATE_FMT).map_err(|_| format!("date {s:?} is not ISO-8601 (YYYY-MM-DD)"))
}

/// Data rows are numbered from 2, the header being row 1.
fn records(r: &mut csv::Reader<std::fs::File>) -> impl Iterator<Item = (usize, std::result::Result<csv::StringRecord, csv::Error>)> + '_ {
    r.records().enumerate().map(|(i, rec)| (i + 2, rec))
}

pub fn read_lakes(path: &Path) -> Result<Vec<LakeAttributes>> {
    let mut r = open(path, &LAKES_HEADER)?;
    let mut errs = RowErrors::new(path);
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (row, rec) in records(&mut r) {
        let rec = rec?;
        let parsed = (|| {
            let num = |i: usize| parse_f64(&rec[i], LAKES_HEADER[i]);
            let lake = LakeAttributes::new(rec[0].to_string(), num(1)?, num(2)?, num(3)?, num(4)?).map_err(|e| e.to_string())?;
            if !seen.insert(lake.lake_id.clone()) {
                return Err(format!("duplicate lake_id {}", lake.lake_id));
            }
            Ok(lake)
        })();
        match parsed {
            Ok(l) => out.push(l),
            Err(m) => errs.push(row, m),
        }
    }
    errs.finish()?;
    Ok(out)
}

pub fn read_drivers(path: &Path) -> Result<BTreeMap<String, DriverSeries>> {
    let mut r = open(path, &DRIVERS_HEADER)?;
    let mut errs = RowErrors::new(path);
    let mut out: BTreeMap<String, DriverSeries> = BTreeMap::new();
    for (row, rec) in records(&mut r) {
        let rec = rec?;
        let parsed = (|| {
            let date = parse_date(&rec[1])?;
            let mut v = [0.0; 7];
            for (i, slot) in v.iter_mut().enumerate() {
                *slot = parse_f64(&rec[i + 2], DRIVERS_HEADER[i + 2])?;
            }
            for (i, name) in [(0, "shortwave_wm2"), (1, "longwave_wm2"), (4, "wind_ms"), (5, "rain_mday"), (6, "snow_mday")] {
                if v[i] < 0.0 {
                    return Err(format!("{name} = {} is negative", v[i]));
                }
            }
            if !(0.0..=100.0).contains(&v[3]) {
                return Err(format!("relhum_pct = {} outside [0, 100]", v[3]));
            }
            Ok((date, v))
        })();
        let (date, v) = match parsed {
            Ok(x) => x,
            Err(m) => {
                errs.push(row, m);
                continue;
            }
        };
        let series = out.entry(rec[0].to_string()).or_insert_with(|| DriverSeries::zeros(date, 0));
        if series.date(series.len()) != date {
            errs.push(row, format!("date {date} does not follow the previous day for lake {}", &rec[0]));
            continue;
        }
        series.shortwave.push(v[0]);
        series.longwave.push(v[1]);
        series.air_temp.push(v[2]);
        series.rel_humidity.push(v[3]);
        series.wind_speed.push(v[4]);
        series.rain.push(v[5]);
        series.snow.push(v[6]);
    }
    errs.finish()?;
    Ok(out)
}

pub fn read_observations(path: &Path) -> Result<BTreeMap<String, Vec<(usize, Observation)>>> {
    let mut r = open(path, &OBSERVATIONS_HEADER)?;
    let mut errs = RowErrors::new(path);
    let mut out: BTreeMap<String, Vec<(usize, Observation)>> = BTreeMap::new();
    for (row, rec) in records(&mut r) {
        let rec = rec?;
        let parsed = (|| {
            let date = parse_date(&rec[1])?;
            let depth = parse_f64(&rec[2], "depth_m")?;
            let temp = parse_f64(&rec[3], "temp_c")?;
            if depth < 0.0 {
                return Err(format!("depth_m = {depth} is negative"));
            }
            if !(-5.0..=45.0).contains(&temp) {
                return Err(format!("temp_c = {temp} outside [-5, 45]"));
            }
            Ok(Observation { date, depth, temp })
        })();
        match parsed {
            Ok(o) => out.entry(rec[0].to_string()).or_default().push((row, o)),
            Err(m) => errs.push(row, m),
        }
    }
    errs.finish()?;
    Ok(out)
}

pub fn read_field(path: &Path) -> Result<TemperatureField> {
    let mut r = open(path, &FIELD_HEADER)?;
    let mut depths: Vec<f64> = Vec::new();
    let mut temps = Vec::new();
    let mut start: Option<NaiveDate> = None;
    let mut n_dates = 0usize;
    let mut errs = RowErrors::new(path);
    for (row, rec) in records(&mut r) {
        let rec = rec?;
        let parsed = (|| Ok::<_, String>((parse_f64(&rec[0], "depth_m")?, parse_date(&rec[1])?, parse_f64(&rec[2], "temp_c")?)))();
        let (depth, date, temp) = match parsed {
            Ok(x) => x,
            Err(m) => {
                errs.push(row, m);
                continue;
            }
        };
        if depths.last() != Some(&depth) {
            depths.push(depth);
        }
        let s = *start.get_or_insert(date);
        let day = (date - s).num_days();
        if depths.len() == 1 {
            n_dates += 1;
        }
        let k = depths.len() - 1;
        if day != (temps.len() - k * n_dates) as i64 {
            errs.push(row, "rows are not depth-major with consecutive dates");
            continue;
        }
        temps.push(temp);
    }
    errs.finish()?;
    let start = start.ok_or_else(|| MtlError::Schema { file: file_label(path), detail: "empty field".into() })?;
    TemperatureField::new(depths, start, n_dates, temps)
        .map_err(|e| MtlError::Schema { file: file_label(path), detail: e.to_string() })
}

/// Write the three ingest files for `bundles` into `dir`.
pub fn export_bundles(dir: &Path, bundles: &[LakeBundle]) -> Result<()> {
    let lakes: Vec<&LakeAttributes> = bundles.iter().map(|b| &b.attributes).collect();
    write_lakes(&dir.join("lakes.csv"), &lakes)?;
    let drivers: Vec<(&str, &DriverSeries)> = bundles.iter().map(|b| (b.attributes.lake_id.as_str(), &b.drivers)).collect();
    write_drivers(&dir.join("drivers.csv"), &drivers)?;
    let obs: Vec<(&str, &ObservationSet)> =
        bundles.iter().map(|b| (b.attributes.lake_id.as_str(), &b.observations)).collect();
    write_observations(&dir.join("observations.csv"), &obs)
}

/// Read and cross-validate lakes, drivers and observations into bundles
/// (without PB0 fields), in the order of the lakes file.
pub fn ingest(lakes: &Path, drivers: &Path, observations: &Path) -> Result<Vec<LakeBundle>> {
    let lake_list = read_lakes(lakes)?;
    let mut driver_map = read_drivers(drivers)?;
    let mut obs_map = read_observations(observations)?;
    let known: HashSet<&str> = lake_list.iter().map(|l| l.lake_id.as_str()).collect();
    if let Some(id) = driver_map.keys().find(|k| !known.contains(k.as_str())) {
        return Err(MtlError::Schema { file: file_label(drivers), detail: format!("unknown lake_id {id}") });
    }
    let mut errs = RowErrors::new(observations);
    for (id, rows) in &obs_map {
        if !known.contains(id.as_str()) {
            errs.push(rows[0].0, format!("unknown lake_id {id}"));
        }
    }
    errs.finish()?;
    let mut out = Vec::with_capacity(lake_list.len());
    let mut errs = RowErrors::new(observations);
    for lake in lake_list {
        let id = lake.lake_id.as_str().to_string();
        let series = driver_map.remove(&id).ok_or_else(|| MtlError::Schema {
            file: file_label(drivers),
            detail: format!("no drivers for lake_id {id}"),
        })?;
        series.validate().map_err(|e| MtlError::Schema { file: file_label(drivers), detail: e.to_string() })?;
        let rows = obs_map.remove(&id).unwrap_or_default();
        let mut seen = HashSet::new();
        let mut records = Vec::with_capacity(rows.len());
        for (row, o) in rows {
            if o.depth > lake.max_depth + 1e-9 {
                errs.push(row, format!("depth_m = {} exceeds max depth {} of {id}", o.depth, lake.max_depth));
            } else if series.day_index(o.date).is_none() {
                errs.push(row, format!("date {} outside the driver record of {id}", o.date));
            } else if !seen.insert((o.date, o.depth.to_bits())) {
                errs.push(row, format!("duplicate observation for {id} on {} at {} m", o.date, o.depth));
            } else {
                records.push(o);
            }
        }
        let observations = ObservationSet::new(records)?;
        out.push(LakeBundle { attributes: lake, drivers: series, pb0_field: None, observations });
    }
    errs.finish()?;
    Ok(out)
}

/// Measurements a sampling date needs to count as a profile: one per 2 m of
/// maximum depth, capped at 5.
pub fn profile_threshold(max_depth: f64) -> usize {
    ((max_depth / 2.0).ceil() as usize).clamp(1, 5)
}

/// Number of sampling dates that qualify as full profiles.
pub fn qualifying_profiles(obs: &ObservationSet, max_depth: f64) -> usize {
    let need = profile_threshold(max_depth);
    let mut count = 0;
    let recs = obs.records();
    let mut i = 0;
    while i < recs.len() {
        let mut j = i;
        while j < recs.len() && recs[j].date == recs[i].date {
            j += 1;
        }
        if j - i >= need {
            count += 1;
        }
        i = j;
    }
    count
}

pub fn source_eligible(bundle: &LakeBundle) -> bool {
    qualifying_profiles(&bundle.observations, bundle.attributes.max_depth) >= MIN_SOURCE_PROFILES
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lakesim::{synth_drivers, synth_population, PopulationConfig};
    use chrono::Duration;
    use std::io::Write;

    fn bundle_with_profiles(id: &str, n_dates: usize, per_date: usize) -> LakeBundle {
        let lake = LakeAttributes::new(id, 12.0, 1e6, 0.5, 45.0).unwrap();
        let drivers = synth_drivers(&lake, 365, 1).unwrap();
        let mut recs = Vec::new();
        for d in 0..n_dates {
            for k in 0..per_date {
                recs.push(Observation { date: drivers.start + Duration::days(d as i64 * 3), depth: k as f64, temp: 10.0 + k as f64 * 0.25 });
            }
        }
        LakeBundle { attributes: lake, drivers, pb0_field: None, observations: ObservationSet::new(recs).unwrap() }
    }

    #[test]
    fn eligibility_needs_fifty_profiles() {
        assert!(!source_eligible(&bundle_with_profiles("a", 49, 6)));
        assert!(source_eligible(&bundle_with_profiles("b", 50, 6)));
        // 12 m lake needs min(6, 5) = 5 measurements per date
        assert!(!source_eligible(&bundle_with_profiles("c", 80, 4)));
        assert_eq!(profile_threshold(3.0), 2);
        assert_eq!(profile_threshold(0.4), 1);
        assert_eq!(profile_threshold(40.0), 5);
    }

    #[test]
    fn export_ingest_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let lakes = synth_population(3, 4, &PopulationConfig::default()).unwrap();
        let bundles: Vec<LakeBundle> = lakes
            .into_iter()
            .enumerate()
            .map(|(i, lake)| {
                let drivers = synth_drivers(&lake, 400, 4).unwrap();
                let observations = if i == 1 {
                    ObservationSet::empty()
                } else {
                    ObservationSet::new(vec![
                        Observation { date: drivers.date(100), depth: 0.0, temp: 1.0 / 3.0 },
                        Observation { date: drivers.date(100), depth: 1.5, temp: 7.123456789012345 },
                    ])
                    .unwrap()
                };
                LakeBundle { attributes: lake, drivers, pb0_field: None, observations }
            })
            .collect();
        export_bundles(dir.path(), &bundles).unwrap();
        let back = ingest(&dir.path().join("lakes.csv"), &dir.path().join("drivers.csv"), &dir.path().join("observations.csv")).unwrap();
        assert_eq!(back, bundles);
    }

    #[test]
    fn field_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let start = NaiveDate::from_ymd_opt(2011, 2, 3).unwrap();
        let temps: Vec<f64> = (0..12).map(|i| i as f64 / 7.0).collect();
        let field = TemperatureField::new(vec![0.0, 0.5, 1.0], start, 4, temps).unwrap();
        let p = dir.path().join("f.csv");
        write_field(&p, &field).unwrap();
        assert_eq!(read_field(&p).unwrap(), field);
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("depth_m,date,temp_c\n0,2011-02-03,0\n"));
    }

    #[test]
    fn header_and_row_errors_are_reported() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("lakes.csv");
        std::fs::write(&p, "lake_id,max_depth,surface_area_m2,clarity_1perm,latitude\n").unwrap();
        let err = read_lakes(&p).unwrap_err();
        assert!(matches!(err, MtlError::Schema { .. }), "{err}");
        let mut f = std::fs::File::create(&p).unwrap();
        writeln!(f, "lake_id,max_depth_m,surface_area_m2,clarity_1perm,latitude").unwrap();
        writeln!(f, "a,10,1e6,0.5,45").unwrap();
        writeln!(f, "b,-1,1e6,0.5,45").unwrap();
        writeln!(f, "c,10,1e6,0.5,45").unwrap();
        writeln!(f, "d,10,1e6,0.5,80").unwrap();
        drop(f);
        let msg = read_lakes(&p).unwrap_err().to_string();
        assert!(msg.contains("row 3") && msg.contains("row 5") && !msg.contains("row 4"), "{msg}");
    }

    #[test]
    fn bad_dates_and_gaps_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("drivers.csv");
        let h = DRIVERS_HEADER.join(",");
        std::fs::write(&p, format!("{h}\na,2010-01-01,1,1,1,50,1,0,0\na,2010-01-03,1,1,1,50,1,0,0\na,01/04/2010,1,1,1,50,1,0,0\n")).unwrap();
        let msg = read_drivers(&p).unwrap_err().to_string();
        assert!(msg.contains("row 3") && msg.contains("row 4"), "{msg}");
    }

    #[test]
    fn empty_observations_make_every_lake_target_only() {
        let dir = tempfile::tempdir().unwrap();
        let mut bundles = vec![bundle_with_profiles("a", 60, 6), bundle_with_profiles("b", 60, 6)];
        for b in &mut bundles {
            b.observations = ObservationSet::empty();
        }
        export_bundles(dir.path(), &bundles).unwrap();
        let back = ingest(&dir.path().join("lakes.csv"), &dir.path().join("drivers.csv"), &dir.path().join("observations.csv")).unwrap();
        assert!(back.iter().all(|b| !source_eligible(b)));
    }
}
