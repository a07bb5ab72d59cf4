use std::collections::BTreeMap;
use std::io::{Read, Write};

use chrono::{NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::domain::{validate_forecast, Day, Forecast, Ifp, Source, Timestamp, TournamentLog};
use crate::error::{Error, Result};

/// Default ceiling on the share of rejected rows.
pub const DEFAULT_MAX_REJECT_RATE: f64 = 0.01;

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbabilityScale {
    #[default]
    Unit,
    Percent,
}

/// Maps the columns of an external long-format forecast export (one row
/// per forecast option) onto canonical fields.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IngestMapping {
    pub ifp_id: String,
    pub user_id: String,
    /// Column holding an option label or a zero-based option index.
    pub option: String,
    pub probability: String,
    pub timestamp: String,
    #[serde(default)]
    pub condition: Option<String>,
    /// chrono format; date-only formats are accepted.
    #[serde(default = "default_date_format")]
    pub date_format: String,
    #[serde(default)]
    pub scale: ProbabilityScale,
    /// Source kind given to every row: "human", "machine" or "slot".
    #[serde(default = "default_source_kind")]
    pub source_kind: String,
}

fn default_date_format() -> String {
    "%Y-%m-%d".into()
}

fn default_source_kind() -> String {
    "human".into()
}

impl IngestMapping {
    /// Mapping for a file whose headers already use the canonical names.
    pub fn canonical_long() -> Self {
        IngestMapping {
            ifp_id: "ifp_id".into(),
            user_id: "user_id".into(),
            option: "option".into(),
            probability: "probability".into(),
            timestamp: "timestamp".into(),
            condition: None,
            date_format: default_date_format(),
            scale: ProbabilityScale::Unit,
            source_kind: default_source_kind(),
        }
    }

    fn source(&self, id: &str) -> Result<Source> {
        format!("{}:{id}", self.source_kind).parse()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Reject {
    /// 1-based line number in the input file.
    pub line: u64,
    pub ifp_id: String,
    pub user_id: String,
    pub reason: String,
}

#[derive(Clone, Debug)]
pub struct Ingested {
    pub log: TournamentLog,
    pub rows: usize,
    pub rejects: Vec<Reject>,
}

impl Ingested {
    pub fn reject_rate(&self) -> f64 {
        if self.rows == 0 {
            0.0
        } else {
            self.rejects.len() as f64 / self.rows as f64
        }
    }

    /// Fails when the share of rejected rows exceeds `max_rate`.
    pub fn check(&self, max_rate: f64) -> Result<()> {
        if self.reject_rate() > max_rate {
            return Err(Error::TooManyRejects { rejected: self.rejects.len(), rows: self.rows, limit: max_rate });
        }
        Ok(())
    }
}

struct Row {
    line: u64,
    option: usize,
    prob: f64,
}

struct Submission {
    ifp_id: String,
    user: String,
    at: NaiveDateTime,
    rows: Vec<Row>,
}

fn parse_time(s: &str, fmt: &str) -> Option<NaiveDateTime> {
    let s = s.trim();
    NaiveDateTime::parse_from_str(s, fmt)
        .ok()
        .or_else(|| NaiveDate::parse_from_str(s, fmt).ok().map(|d| d.and_hms_opt(0, 0, 0).unwrap()))
}

fn resolve_option(ifp: &Ifp, value: &str) -> std::result::Result<usize, String> {
    let value = value.trim();
    let by_label = ifp.options.iter().position(|o| o == value);
    let by_index = value.parse::<usize>().ok().filter(|i| *i < ifp.n_options());
    match (by_label, by_index) {
        (Some(a), Some(b)) if a != b => Err(format!("ambiguous option {value:?}")),
        (Some(a), _) | (None, Some(a)) => Ok(a),
        (None, None) => Err(format!("unresolvable option {value:?}")),
    }
}

/// Reads an external forecast export against known IFPs. Rows are grouped
/// into submissions by (IFP, user, timestamp) and each submission is
/// validated as one probability vector; every row of a failing submission
/// is rejected with a reason. A binary submission may give a single option,
/// the other taking the complement; otherwise missing options count as 0.
pub fn ingest(forecasts: impl Read, ifps: Vec<Ifp>, mapping: &IngestMapping) -> Result<Ingested> {
    mapping.source("x")?;
    let mut rdr = csv::Reader::from_reader(forecasts);
    let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Import(format!("missing column {name:?}")))
    };
    let (c_ifp, c_user, c_opt, c_prob, c_time) = (
        col(&mapping.ifp_id)?,
        col(&mapping.user_id)?,
        col(&mapping.option)?,
        col(&mapping.probability)?,
        col(&mapping.timestamp)?,
    );
    let c_cond = mapping.condition.as_deref().map(col).transpose()?;

    let mut b = TournamentLog::builder();
    let known: BTreeMap<String, Ifp> = ifps.into_iter().map(|i| (i.id.clone(), i)).collect();
    for ifp in known.values() {
        b.ifp(ifp.clone())?;
    }

    let mut rows = 0;
    let mut rejects = Vec::new();
    let mut subs: BTreeMap<(String, String, NaiveDateTime), Submission> = BTreeMap::new();
    let mut first_seen: Vec<(String, String, NaiveDateTime)> = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        rows += 1;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let get = |i: usize| rec.get(i).unwrap_or("").trim();
        let (ifp_id, user) = (get(c_ifp).to_string(), get(c_user).to_string());
        let mut reject = |reason: String| {
            rejects.push(Reject { line, ifp_id: ifp_id.clone(), user_id: user.clone(), reason });
        };
        if user.is_empty() {
            reject("missing user id".into());
            continue;
        }
        let Some(ifp) = known.get(&ifp_id) else {
            reject("unknown ifp".into());
            continue;
        };
        let option = match resolve_option(ifp, get(c_opt)) {
            Ok(o) => o,
            Err(m) => {
                reject(m);
                continue;
            }
        };
        let Some(raw) = get(c_prob).parse::<f64>().ok().filter(|p| p.is_finite()) else {
            reject(format!("bad probability {:?}", get(c_prob)));
            continue;
        };
        let prob = match mapping.scale {
            ProbabilityScale::Unit => raw,
            ProbabilityScale::Percent => raw / 100.0,
        };
        let Some(at) = parse_time(get(c_time), &mapping.date_format) else {
            reject(format!("bad timestamp {:?}", get(c_time)));
            continue;
        };
        if let Some(c) = c_cond {
            let tag = get(c);
            if !tag.is_empty() {
                b.condition(user.clone(), tag);
            }
        }
        let key = (ifp_id.clone(), user.clone(), at);
        let sub = subs.entry(key.clone()).or_insert_with(|| {
            first_seen.push(key);
            Submission { ifp_id: ifp_id.clone(), user: user.clone(), at, rows: Vec::new() }
        });
        sub.rows.push(Row { line, option, prob });
    }

    // Ordinals rank same-day submissions of one user on one IFP by time, then file order.
    let mut order: Vec<&Submission> = first_seen.iter().map(|k| &subs[k]).collect();
    order.sort_by(|a, b| (&a.ifp_id, &a.user, a.at).cmp(&(&b.ifp_id, &b.user, b.at)));
    let mut accepted: Vec<(u64, Forecast)> = Vec::new();
    let mut ordinals: BTreeMap<(&str, &str, Day), u32> = BTreeMap::new();
    for sub in order {
        let ifp = &known[&sub.ifp_id];
        let fail = |rejects: &mut Vec<Reject>, reason: String| {
            for r in &sub.rows {
                rejects.push(Reject { line: r.line, ifp_id: sub.ifp_id.clone(), user_id: sub.user.clone(), reason: reason.clone() });
            }
        };
        let mut probs = vec![0.0; ifp.n_options()];
        let mut seen = vec![false; ifp.n_options()];
        let mut dup = false;
        for r in &sub.rows {
            dup |= std::mem::replace(&mut seen[r.option], true);
            probs[r.option] = r.prob;
        }
        if dup {
            fail(&mut rejects, "duplicate option in submission".into());
            continue;
        }
        if ifp.n_options() == 2 && sub.rows.len() == 1 {
            let o = sub.rows[0].option;
            probs[1 - o] = 1.0 - probs[o];
        }
        let day = Day::from_date(sub.at.date());
        if !ifp.is_active(day) {
            fail(&mut rejects, format!("outside active window ({day})"));
            continue;
        }
        let probs = match validate_forecast(&probs, ifp.n_options()) {
            Ok(p) => p,
            Err(Error::SumDeviation { sum }) => {
                fail(&mut rejects, format!("sum deviation: probabilities sum to {sum}"));
                continue;
            }
            Err(e) => {
                fail(&mut rejects, e.to_string());
                continue;
            }
        };
        let ord = ordinals.entry((&sub.ifp_id, &sub.user, day)).or_insert(0);
        let timestamp = Timestamp::new(day, *ord);
        *ord += 1;
        let line = sub.rows[0].line;
        accepted.push((line, Forecast { ifp_id: sub.ifp_id.clone(), source: mapping.source(&sub.user)?, probs, timestamp }));
    }
    accepted.sort_by_key(|(line, f)| (f.timestamp, *line));
    for (_, f) in accepted {
        b.forecast_verbatim(f)?;
    }
    rejects.sort_by_key(|r| r.line);
    Ok(Ingested { log: b.build(), rows, rejects })
}

pub fn write_rejects(w: impl Write, rejects: &[Reject]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["line", "ifp_id", "user_id", "reason"])?;
    for r in rejects {
        wtr.write_record([r.line.to_string(), r.ifp_id.clone(), r.user_id.clone(), r.reason.clone()])?;
    }
    wtr.flush()?;
    Ok(())
}
