use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use crate::domain::{Day, Forecast, HorizonKind, Ifp, IfpKind, Source, Timestamp, TournamentLog};
use crate::error::{Error, Result};
use crate::tsmodels::{Frequency, Series};

pub const IFPS_HEADER: [&str; 10] = [
    "ifp_id",
    "title",
    "kind",
    "options",
    "open_date",
    "close_date",
    "resolved_option",
    "series_ref",
    "thresholds",
    "horizon_kind",
];
pub const FORECASTS_HEADER: [&str; 5] = ["ifp_id", "source", "date", "ordinal", "probs"];
pub const CONDITIONS_HEADER: [&str; 2] = ["user_id", "condition"];
pub const SERIES_HEADER: [&str; 3] = ["series_id", "date", "value"];

pub const IFPS_FILE: &str = "ifps.csv";
pub const FORECASTS_FILE: &str = "forecasts.csv";
pub const CONDITIONS_FILE: &str = "conditions.csv";
pub const SERIES_FILE: &str = "series.csv";

const LIST_SEP: char = '|';

fn join_f64(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("|")
}

fn split_f64(field: &str, what: &str) -> Result<Vec<f64>> {
    field
        .split(LIST_SEP)
        .map(|v| v.trim().parse::<f64>().map_err(|_| Error::Import(format!("bad {what} value {v:?}"))))
        .collect()
}

fn check_header(rdr: &mut csv::Reader<impl Read>, expected: &[&str]) -> Result<()> {
    let got: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if got != expected {
        return Err(Error::Import(format!("expected header {:?}, found {:?}", expected.join(","), got.join(","))));
    }
    Ok(())
}

fn at_line(line: u64, e: Error) -> Error {
    match e {
        Error::Import(m) => Error::Import(format!("line {line}: {m}")),
        other => Error::Import(format!("line {line}: {other}")),
    }
}

pub fn write_ifps<'a>(w: impl Write, ifps: impl IntoIterator<Item = &'a Ifp>) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(IFPS_HEADER)?;
    for ifp in ifps {
        if let Some(bad) = ifp.options.iter().find(|o| o.contains(LIST_SEP)) {
            return Err(Error::InvalidIfp { id: ifp.id.clone(), reason: format!("option label {bad:?} contains '|'") });
        }
        wtr.write_record([
            ifp.id.clone(),
            ifp.title.clone(),
            ifp.kind.to_string(),
            ifp.options.join("|"),
            ifp.open_date.to_string(),
            ifp.close_date.to_string(),
            ifp.resolved_option.map(|o| o.to_string()).unwrap_or_default(),
            ifp.series_ref.clone().unwrap_or_default(),
            ifp.thresholds.as_deref().map(join_f64).unwrap_or_default(),
            ifp.horizon_kind.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_ifps(r: impl Read) -> Result<Vec<Ifp>> {
    let mut rdr = csv::Reader::from_reader(r);
    check_header(&mut rdr, &IFPS_HEADER)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let field = |i: usize| rec.get(i).unwrap_or("").trim();
        let parse = || -> Result<Ifp> {
            let opt = |s: &str| (!s.is_empty()).then(|| s.to_string());
            let ifp = Ifp {
                id: field(0).to_string(),
                title: field(1).to_string(),
                kind: field(2).parse::<IfpKind>()?,
                options: field(3).split(LIST_SEP).map(|s| s.to_string()).collect(),
                open_date: field(4).parse::<Day>()?,
                close_date: field(5).parse::<Day>()?,
                resolved_option: match field(6) {
                    "" => None,
                    s => Some(s.parse().map_err(|_| Error::Import(format!("bad resolved_option {s:?}")))?),
                },
                series_ref: opt(field(7)),
                thresholds: match field(8) {
                    "" => None,
                    s => Some(split_f64(s, "threshold")?),
                },
                horizon_kind: field(9).parse::<HorizonKind>()?,
            };
            ifp.validate()?;
            Ok(ifp)
        };
        out.push(parse().map_err(|e| at_line(line, e))?);
    }
    Ok(out)
}

pub fn write_forecasts<'a>(w: impl Write, forecasts: impl IntoIterator<Item = &'a Forecast>) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(FORECASTS_HEADER)?;
    for f in forecasts {
        wtr.write_record([
            f.ifp_id.clone(),
            f.source.to_string(),
            f.timestamp.day.to_string(),
            f.timestamp.ordinal.to_string(),
            join_f64(&f.probs),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_forecasts(r: impl Read) -> Result<Vec<Forecast>> {
    let mut rdr = csv::Reader::from_reader(r);
    check_header(&mut rdr, &FORECASTS_HEADER)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let field = |i: usize| rec.get(i).unwrap_or("").trim();
        let parse = || -> Result<Forecast> {
            Ok(Forecast {
                ifp_id: field(0).to_string(),
                source: field(1).parse::<Source>()?,
                timestamp: Timestamp::new(
                    field(2).parse::<Day>()?,
                    field(3).parse().map_err(|_| Error::Import(format!("bad ordinal {:?}", field(3))))?,
                ),
                probs: split_f64(field(4), "probability")?,
            })
        };
        out.push(parse().map_err(|e| at_line(line, e))?);
    }
    Ok(out)
}

pub fn write_conditions(w: impl Write, conditions: &BTreeMap<String, String>) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(CONDITIONS_HEADER)?;
    for (user, tag) in conditions {
        wtr.write_record([user, tag])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_conditions(r: impl Read) -> Result<BTreeMap<String, String>> {
    let mut rdr = csv::Reader::from_reader(r);
    check_header(&mut rdr, &CONDITIONS_HEADER)?;
    let mut out = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        out.insert(rec.get(0).unwrap_or("").trim().to_string(), rec.get(1).unwrap_or("").trim().to_string());
    }
    Ok(out)
}

pub fn write_series<'a>(w: impl Write, series: impl IntoIterator<Item = &'a Series>) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(SERIES_HEADER)?;
    for s in series {
        for (day, v) in s.observations() {
            wtr.write_record([s.id.clone(), day.to_string(), v.to_string()])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

/// Reads series grouped by id. The frequency is inferred from the typical
/// gap between observations and irregular points are carried forward onto
/// that grid.
pub fn read_series(r: impl Read) -> Result<Vec<Series>> {
    let mut rdr = csv::Reader::from_reader(r);
    check_header(&mut rdr, &SERIES_HEADER)?;
    let mut raw: BTreeMap<String, Vec<(Day, f64)>> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let day = rec.get(1).unwrap_or("").parse::<Day>().map_err(|e| at_line(line, e))?;
        let value: f64 = rec
            .get(2)
            .unwrap_or("")
            .trim()
            .parse()
            .map_err(|_| at_line(line, Error::Import("bad series value".into())))?;
        raw.entry(rec.get(0).unwrap_or("").trim().to_string()).or_default().push((day, value));
    }
    raw.into_iter()
        .map(|(id, mut obs)| {
            obs.sort_by_key(|(d, _)| *d);
            let mut gaps: Vec<i32> = obs.windows(2).map(|w| w[1].0.since(w[0].0)).collect();
            gaps.sort_unstable();
            let frequency = match gaps.get(gaps.len() / 2) {
                Some(g) if *g >= 28 => Frequency::Monthly,
                Some(g) if *g >= 7 => Frequency::Weekly,
                _ => Frequency::Daily,
            };
            Series::resample(id, frequency, obs)
        })
        .collect()
}

fn create(dir: &Path, name: &str) -> Result<(PathBuf, File)> {
    let path = dir.join(name);
    let file = File::create(&path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    Ok((path, file))
}

pub(crate) fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// Writes `ifps.csv`, `forecasts.csv` and `conditions.csv` into `dir`.
pub fn export_log(log: &TournamentLog, dir: &Path) -> Result<Vec<PathBuf>> {
    let (p1, f) = create(dir, IFPS_FILE)?;
    write_ifps(f, log.ifps())?;
    let (p2, f) = create(dir, FORECASTS_FILE)?;
    write_forecasts(f, log.forecasts())?;
    let (p3, f) = create(dir, CONDITIONS_FILE)?;
    write_conditions(f, log.conditions())?;
    Ok(vec![p1, p2, p3])
}

/// Builds a log from canonical files. Probabilities are kept exactly as
/// written, so a log exported and imported again compares equal.
pub fn read_log(ifps: impl Read, forecasts: impl Read, conditions: Option<impl Read>) -> Result<TournamentLog> {
    let mut b = TournamentLog::builder();
    for ifp in read_ifps(ifps)? {
        b.ifp(ifp)?;
    }
    for f in read_forecasts(forecasts)? {
        b.forecast_verbatim(f)?;
    }
    if let Some(c) = conditions {
        for (user, tag) in read_conditions(c)? {
            b.condition(user, tag);
        }
    }
    Ok(b.build())
}

/// Reads the canonical files written by [`export_log`]; `conditions.csv`
/// is optional.
pub fn import_log(dir: &Path) -> Result<TournamentLog> {
    let cond = dir.join(CONDITIONS_FILE);
    let conditions = if cond.exists() { Some(open(&cond)?) } else { None };
    read_log(open(&dir.join(IFPS_FILE))?, open(&dir.join(FORECASTS_FILE))?, conditions)
}
