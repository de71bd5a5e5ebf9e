//! File formats.
//!
//! - Network: line-oriented text. `transfer_penalty`, `walk_speed` and `stop`
//!   lines, then one `line <id>` block per line holding `stops`, `ride`,
//!   `meters`, `headway` and `service` entries and closed by `end`. `#` starts
//!   a comment.
//! - Trips: headerless CSV, one route per record: `day, day_type, demand_id`
//!   followed by six fields per leg (`line_id, board_stop, board_time,
//!   alight_stop, alight_time, distance_m`).
//! - Demand: headerless CSV `demand_id, origin, destination, depart_time`
//!   with an optional fifth `round_trip` field (`1`/`0`/`true`/`false`).
//! - Targets: TOML, one `[[characteristic]]` table per term.
//! - Trace: CSV with header `iteration,error,acceptance_rate,temperature`.
//!
//! Times are integer seconds since midnight. Floats are written in Rust's
//! shortest round-trip form, so write-then-read is lossless.

use std::fmt::Write as _;
use std::io::{Read, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::line_of;
use crate::eval::{MismatchReport, MixRow, OnlineRow};
use crate::metrics::{
    Binning, Characteristic, GaussianComponent, Histogram, MismatchSpec, MismatchTerm,
    TargetDistribution, TargetKind,
};
use crate::model::{DayType, Leg, ODTriple, Route, RouteSource, Stop};
use crate::planner::{LineSpec, TransitNetwork};
use crate::sampler::Checkpoint;
use crate::{Error, Result};

fn parse_err(source: &str, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        source_name: source.to_string(),
        line,
        message: message.into(),
    }
}

pub fn write_network(net: &TransitNetwork) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "transfer_penalty {}", net.transfer_penalty);
    let _ = writeln!(out, "walk_speed {}", net.walk_speed);
    for s in net.stops() {
        let _ = write!(out, "stop {} {} {}", s.id, s.lat, s.lon);
        if let Some(name) = &s.name {
            let _ = write!(out, " {name}");
        }
        out.push('\n');
    }
    let join = |v: &mut dyn Iterator<Item = String>| v.collect::<Vec<_>>().join(" ");
    for line in net.lines() {
        let spec = net.line_spec(line);
        let _ = writeln!(out, "line {}", spec.id);
        let _ = writeln!(out, "  stops {}", spec.stops.join(" "));
        let _ = writeln!(
            out,
            "  ride {}",
            join(&mut spec.ride_secs.iter().map(|x| x.to_string()))
        );
        let _ = writeln!(
            out,
            "  meters {}",
            join(&mut spec.meters.iter().map(|x| x.to_string()))
        );
        let _ = writeln!(out, "  headway {}", spec.headway);
        let _ = writeln!(
            out,
            "  service {} {}",
            spec.first_departure, spec.last_departure
        );
        out.push_str("end\n");
    }
    out
}

fn num<T: std::str::FromStr>(source: &str, line: usize, what: &str, s: &str) -> Result<T> {
    s.parse()
        .map_err(|_| parse_err(source, line, format!("bad {what} `{s}`")))
}

pub fn parse_network(text: &str, source: &str) -> Result<TransitNetwork> {
    let mut penalty = TransitNetwork::DEFAULT_TRANSFER_PENALTY;
    let mut walk = TransitNetwork::DEFAULT_WALK_SPEED;
    let mut stops = Vec::new();
    let mut lines = Vec::new();
    let mut open: Option<(usize, LineSpec, [bool; 5])> = None;
    for (i, raw) in text.lines().enumerate() {
        let n = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut words = content.split_whitespace();
        let key = words.next().unwrap_or_default();
        let rest: Vec<&str> = words.collect();
        if let Some((_, spec, seen)) = open.as_mut() {
            let slot = match key {
                "stops" => {
                    spec.stops = rest.iter().map(|s| s.to_string()).collect();
                    0
                }
                "ride" => {
                    spec.ride_secs = rest
                        .iter()
                        .map(|s| num(source, n, "ride time", s))
                        .collect::<Result<_>>()?;
                    1
                }
                "meters" => {
                    spec.meters = rest
                        .iter()
                        .map(|s| num(source, n, "distance", s))
                        .collect::<Result<_>>()?;
                    2
                }
                "headway" => {
                    let [h] = rest[..] else {
                        return Err(parse_err(source, n, "`headway` takes one value"));
                    };
                    spec.headway = num(source, n, "headway", h)?;
                    3
                }
                "service" => {
                    let [a, b] = rest[..] else {
                        return Err(parse_err(
                            source,
                            n,
                            "`service` takes first and last departure",
                        ));
                    };
                    spec.first_departure = num(source, n, "departure", a)?;
                    spec.last_departure = num(source, n, "departure", b)?;
                    4
                }
                "end" => {
                    let (start, spec, seen) = open.take().expect("inside a block");
                    if let Some(missing) = seen.iter().position(|s| !s) {
                        let names = ["stops", "ride", "meters", "headway", "service"];
                        return Err(parse_err(
                            source,
                            start,
                            format!("line `{}` lacks `{}`", spec.id, names[missing]),
                        ));
                    }
                    lines.push((start, spec));
                    continue;
                }
                other => {
                    return Err(parse_err(
                        source,
                        n,
                        format!("unexpected `{other}` inside a line block"),
                    ))
                }
            };
            seen[slot] = true;
            continue;
        }
        match key {
            "transfer_penalty" => {
                let [v] = rest[..] else {
                    return Err(parse_err(source, n, "`transfer_penalty` takes one value"));
                };
                penalty = num(source, n, "transfer penalty", v)?;
            }
            "walk_speed" => {
                let [v] = rest[..] else {
                    return Err(parse_err(source, n, "`walk_speed` takes one value"));
                };
                walk = num(source, n, "walk speed", v)?;
            }
            "stop" => {
                if rest.len() < 3 {
                    return Err(parse_err(source, n, "`stop` needs id, lat and lon"));
                }
                let lat: f64 = num(source, n, "latitude", rest[1])?;
                let lon: f64 = num(source, n, "longitude", rest[2])?;
                let mut stop = Stop::new(rest[0], lat, lon)
                    .map_err(|e| parse_err(source, n, e.to_string()))?;
                if rest.len() > 3 {
                    stop = stop.with_name(rest[3..].join(" "));
                }
                stops.push(stop);
            }
            "line" => {
                let [id] = rest[..] else {
                    return Err(parse_err(source, n, "`line` takes one id"));
                };
                open = Some((
                    n,
                    LineSpec {
                        id: id.to_string(),
                        stops: Vec::new(),
                        ride_secs: Vec::new(),
                        meters: Vec::new(),
                        headway: 0,
                        first_departure: 0,
                        last_departure: 0,
                    },
                    [false; 5],
                ));
            }
            other => return Err(parse_err(source, n, format!("unknown key `{other}`"))),
        }
    }
    if let Some((start, spec, _)) = open {
        return Err(parse_err(
            source,
            start,
            format!("line `{}` is not closed by `end`", spec.id),
        ));
    }
    let first_line = lines.first().map_or(0, |(n, _)| *n);
    TransitNetwork::new(
        stops,
        lines.into_iter().map(|(_, s)| s).collect(),
        penalty,
        walk,
    )
    .map_err(|e| parse_err(source, first_line, e.to_string()))
}

/// One route of a trips file.
#[derive(Debug, Clone, PartialEq)]
pub struct TripRecord {
    pub day: u32,
    pub day_type: DayType,
    pub demand_id: Arc<str>,
    pub route: Route,
}

fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .has_headers(false)
        .flexible(true)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w)
}

fn csv_reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(r)
}

pub fn write_trips<W: Write>(w: W, records: &[TripRecord]) -> Result<()> {
    let mut out = csv_writer(w);
    let mut row: Vec<String> = Vec::new();
    for r in records {
        row.clear();
        row.push(r.day.to_string());
        row.push(r.day_type.to_string());
        row.push(r.demand_id.to_string());
        for l in &r.route.legs {
            row.push(l.line_id.to_string());
            row.push(l.board_stop.id.to_string());
            row.push(l.board_time.to_string());
            row.push(l.alight_stop.id.to_string());
            row.push(l.alight_time.to_string());
            row.push(l.distance_m.to_string());
        }
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a trips file; stops are resolved against `net`.
pub fn read_trips<R: Read>(r: R, net: &TransitNetwork, source: &str) -> Result<Vec<TripRecord>> {
    let mut out = Vec::new();
    for rec in csv_reader(r).records() {
        let rec = rec?;
        let n = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() < 9 || (rec.len() - 3) % 6 != 0 {
            return Err(parse_err(
                source,
                n,
                format!("{} fields; expected 3 plus 6 per leg", rec.len()),
            ));
        }
        let stop = |id: &str| {
            net.stop(id)
                .cloned()
                .ok_or_else(|| parse_err(source, n, format!("unknown stop `{id}`")))
        };
        let mut legs = Vec::with_capacity((rec.len() - 3) / 6);
        for g in (3..rec.len()).step_by(6) {
            legs.push(Leg {
                line_id: rec[g].into(),
                board_stop: stop(&rec[g + 1])?,
                board_time: num(source, n, "time", &rec[g + 2])?,
                alight_stop: stop(&rec[g + 3])?,
                alight_time: num(source, n, "time", &rec[g + 4])?,
                distance_m: num(source, n, "distance", &rec[g + 5])?,
            });
        }
        out.push(TripRecord {
            day: num(source, n, "day", &rec[0])?,
            day_type: rec[1]
                .parse()
                .map_err(|e: Error| parse_err(source, n, e.to_string()))?,
            demand_id: rec[2].into(),
            route: Route::new(legs, RouteSource::History),
        });
    }
    Ok(out)
}

pub fn write_demand<W: Write>(w: W, triples: &[ODTriple]) -> Result<()> {
    let mut out = csv_writer(w);
    for t in triples {
        out.write_record([
            &*t.demand_id,
            &*t.origin.id,
            &*t.destination.id,
            &t.depart_time.to_string(),
            if t.round_trip { "1" } else { "0" },
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_demand<R: Read>(r: R, net: &TransitNetwork, source: &str) -> Result<Vec<ODTriple>> {
    let mut out = Vec::new();
    for rec in csv_reader(r).records() {
        let rec = rec?;
        let n = rec.position().map_or(0, |p| p.line() as usize);
        if !(4..=5).contains(&rec.len()) {
            return Err(parse_err(
                source,
                n,
                format!("{} fields; expected 4 or 5", rec.len()),
            ));
        }
        let stop = |id: &str| {
            net.stop(id)
                .cloned()
                .ok_or_else(|| parse_err(source, n, format!("unknown stop `{id}`")))
        };
        let origin = stop(&rec[1])?;
        let destination = stop(&rec[2])?;
        let round_trip = match rec.get(4) {
            None | Some("") => origin.id == destination.id,
            Some("1" | "true") => true,
            Some("0" | "false") => false,
            Some(other) => {
                return Err(parse_err(
                    source,
                    n,
                    format!("bad round-trip flag `{other}`"),
                ))
            }
        };
        let t = ODTriple {
            demand_id: rec[0].into(),
            origin,
            destination,
            depart_time: num(source, n, "departure time", &rec[3])?,
            round_trip,
        };
        t.validate()
            .map_err(|e| parse_err(source, n, e.to_string()))?;
        out.push(t);
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TargetsFile {
    characteristic: Vec<TargetEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TargetEntry {
    tag: Characteristic,
    #[serde(default = "one")]
    weight: f64,
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    edges: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    masses: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    components: Option<Vec<GaussianComponent>>,
}

fn one() -> f64 {
    1.0
}

/// Parses a targets spec. Bin edges default to the characteristic's
/// standard binning; empirical entries need both `edges` and `masses`.
pub fn parse_targets(text: &str, source: &str) -> Result<MismatchSpec> {
    let file: TargetsFile = toml::from_str(text).map_err(|e| {
        let line = e.span().map_or(0, |s| line_of(text, s.start));
        parse_err(source, line, e.message())
    })?;
    let mut terms = Vec::with_capacity(file.characteristic.len());
    for (i, e) in file.characteristic.into_iter().enumerate() {
        let field = |name: &str| format!("characteristic[{i}].{name}");
        let need = |v: Option<f64>, name: &str| {
            v.ok_or_else(|| Error::config(field(name), format!("required for kind `{}`", e.kind)))
        };
        let binning = match &e.edges {
            Some(edges) => Binning::new(edges.clone())?,
            None => e.tag.default_binning(),
        };
        let target = match e.kind.as_str() {
            "empirical" => {
                let masses = e.masses.clone().ok_or_else(|| {
                    Error::config(field("masses"), "required for kind `empirical`")
                })?;
                if e.edges.is_none() {
                    return Err(Error::config(
                        field("edges"),
                        "required for kind `empirical`",
                    ));
                }
                TargetDistribution::empirical(Histogram::from_masses(&binning, masses, 0)?)?
            }
            "beta" => {
                TargetDistribution::beta(&binning, need(e.alpha, "alpha")?, need(e.beta, "beta")?)?
            }
            "poisson" => TargetDistribution::poisson(&binning, need(e.lambda, "lambda")?)?,
            "gaussian_mixture" => TargetDistribution::gaussian_mixture(
                &binning,
                e.components.clone().ok_or_else(|| {
                    Error::config(field("components"), "required for kind `gaussian_mixture`")
                })?,
            )?,
            other => {
                return Err(Error::config(
                    field("kind"),
                    format!("`{other}` is not one of empirical, beta, poisson, gaussian_mixture"),
                ))
            }
        };
        terms.push(MismatchTerm {
            characteristic: e.tag,
            target,
            weight: e.weight,
        });
    }
    MismatchSpec::new(terms)
}

pub fn write_targets(spec: &MismatchSpec) -> String {
    let entries = spec
        .terms()
        .iter()
        .map(|t| {
            let mut e = TargetEntry {
                tag: t.characteristic,
                weight: t.weight,
                kind: String::new(),
                edges: Some(t.target.binning().edges().to_vec()),
                masses: None,
                alpha: None,
                beta: None,
                lambda: None,
                components: None,
            };
            match t.target.kind() {
                TargetKind::Empirical => {
                    e.kind = "empirical".into();
                    e.masses = Some(t.target.masses().to_vec());
                }
                TargetKind::Beta { alpha, beta } => {
                    e.kind = "beta".into();
                    e.alpha = Some(*alpha);
                    e.beta = Some(*beta);
                }
                TargetKind::Poisson { lambda } => {
                    e.kind = "poisson".into();
                    e.lambda = Some(*lambda);
                }
                TargetKind::GaussianMixture(c) => {
                    e.kind = "gaussian_mixture".into();
                    e.components = Some(c.clone());
                }
            }
            e
        })
        .collect();
    toml::to_string(&TargetsFile {
        characteristic: entries,
    })
    .expect("targets serialize")
}

pub fn write_trace<W: Write>(w: W, checkpoints: &[Checkpoint]) -> Result<()> {
    let mut out = csv_writer(w);
    out.write_record(["iteration", "error", "acceptance_rate", "temperature"])?;
    for c in checkpoints {
        out.write_record([
            c.iteration.to_string(),
            c.error.to_string(),
            c.acceptance_rate.to_string(),
            c.temperature.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// `day, day_type, prior_days, demands, unassigned, error@<iteration>..., final_error`
/// where the checkpoint columns hold best-so-far error.
pub fn write_online_table<W: Write>(w: W, rows: &[OnlineRow]) -> Result<()> {
    let mut out = csv_writer(w);
    let its: Vec<u64> = rows
        .first()
        .map(|r| r.checkpoints.iter().map(|c| c.iteration).collect())
        .unwrap_or_default();
    let mut header: Vec<String> = ["day", "day_type", "prior_days", "demands", "unassigned"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend(its.iter().map(|i| format!("error@{i}")));
    header.push("final_error".into());
    out.write_record(&header)?;
    for r in rows {
        let mut row = vec![
            r.day.to_string(),
            r.day_type.to_string(),
            r.prior_days.to_string(),
            r.demands.to_string(),
            r.unassigned.to_string(),
        ];
        row.extend(r.checkpoints.iter().map(|c| c.best_error.to_string()));
        row.push(r.final_error.to_string());
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_mix_table<W: Write>(w: W, rows: &[MixRow]) -> Result<()> {
    let mut out = csv_writer(w);
    out.write_record([
        "day",
        "day_type",
        "matched_prior",
        "pooled_prior",
        "matched_error",
        "pooled_error",
    ])?;
    for r in rows {
        out.write_record([
            r.day.to_string(),
            r.day_type.to_string(),
            r.matched_prior.to_string(),
            r.pooled_prior.to_string(),
            r.matched_error.to_string(),
            r.pooled_error.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Plot-ready histogram series: `characteristic, lo, hi, observed, simulated`.
pub fn write_report_histograms<W: Write>(w: W, report: &MismatchReport) -> Result<()> {
    let mut out = csv_writer(w);
    out.write_record(["characteristic", "lo", "hi", "observed", "simulated"])?;
    for c in &report.characteristics {
        for (i, (o, s)) in c.observed.iter().zip(&c.simulated).enumerate() {
            out.write_record([
                c.characteristic.tag().to_string(),
                c.edges[i].to_string(),
                c.edges[i + 1].to_string(),
                o.to_string(),
                s.to_string(),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Per-characteristic summary: `characteristic, l1, observed_mean, simulated_mean, mean_gap`.
pub fn write_report_summary<W: Write>(w: W, report: &MismatchReport) -> Result<()> {
    let mut out = csv_writer(w);
    out.write_record([
        "characteristic",
        "l1",
        "observed_mean",
        "simulated_mean",
        "mean_gap",
    ])?;
    for c in &report.characteristics {
        out.write_record([
            c.characteristic.tag().to_string(),
            c.l1.to_string(),
            c.observed_mean.to_string(),
            c.simulated_mean.to_string(),
            c.mean_gap.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::GridConfig;

    fn net() -> TransitNetwork {
        GridConfig {
            rows: 3,
            cols: 3,
            ..GridConfig::default()
        }
        .build(4)
        .unwrap()
    }

    #[test]
    fn network_round_trip() {
        let n = net();
        let text = write_network(&n);
        let back = parse_network(&text, "net.txt").unwrap();
        assert_eq!(n, back);
        assert_eq!(write_network(&back), text);
    }

    #[test]
    fn network_errors_name_the_line() {
        let text = "transfer_penalty 300\nstop a 48.69 6.18\nstop b 48.70 6.18\nline L\n  stops a b\n  ride 60\n  bogus 1\nend\n";
        match parse_network(text, "n.txt").unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 7),
            e => panic!("{e}"),
        }
        let unclosed = "stop a 48.69 6.18\nline L\n  stops a\n";
        assert!(matches!(
            parse_network(unclosed, "n"),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn demand_round_trip_and_flags() {
        let n = net();
        let text = "q1,S0000,S0101,28800\nq2,S0000,S0000,30000\nq3,S0000,S0000,30000,1\n# note\nq4,S0000,S0202,100,0\n";
        let d = read_demand(text.as_bytes(), &n, "d.csv").unwrap();
        assert_eq!(d.len(), 4);
        assert!(!d[0].round_trip && d[1].round_trip && d[2].round_trip && !d[3].round_trip);
        let mut buf = Vec::new();
        write_demand(&mut buf, &d).unwrap();
        assert_eq!(read_demand(&buf[..], &n, "d.csv").unwrap(), d);
        assert!(read_demand("q,S0000,S0000,10,0\n".as_bytes(), &n, "d").is_err());
        assert!(read_demand("q,S0000,ZZ,10\n".as_bytes(), &n, "d").is_err());
    }

    #[test]
    fn trips_round_trip() {
        let n = net();
        let t = ODTriple {
            demand_id: "x".into(),
            origin: n.stop("S0000").unwrap().clone(),
            destination: n.stop("S0202").unwrap().clone(),
            depart_time: 30_000,
            round_trip: false,
        };
        let routes = crate::planner::k_top_routes(&n, &t, 3).unwrap();
        let records: Vec<TripRecord> = routes
            .into_iter()
            .map(|r| TripRecord {
                day: 3,
                day_type: DayType::Weekend,
                demand_id: "x".into(),
                route: r.with_source(RouteSource::History),
            })
            .collect();
        let mut buf = Vec::new();
        write_trips(&mut buf, &records).unwrap();
        assert!(!buf.contains(&b'\r'));
        assert_eq!(read_trips(&buf[..], &n, "t.csv").unwrap(), records);
    }

    #[test]
    fn targets_round_trip() {
        let text = r#"
[[characteristic]]
tag = "angle_ratio"
kind = "beta"
alpha = 0.26
beta = 0.24

[[characteristic]]
tag = "transfer_time"
weight = 0.5
kind = "gaussian_mixture"
components = [{ weight = 0.7, mean = 300.0, stddev = 120.0 }, { weight = 0.3, mean = 900.0, stddev = 300.0 }]

[[characteristic]]
tag = "full_time"
kind = "empirical"
edges = [0.0, 600.0, 1200.0]
masses = [0.25, 0.75]
"#;
        let spec = parse_targets(text, "t.toml").unwrap();
        assert_eq!(spec.terms().len(), 3);
        let again = parse_targets(&write_targets(&spec), "t.toml").unwrap();
        assert_eq!(spec, again);
        let bad = "[[characteristic]]\ntag = \"full_time\"\nkind = \"beta\"\nalpha = 1.0\n";
        match parse_targets(bad, "t").unwrap_err() {
            Error::Config { field, .. } => assert_eq!(field, "characteristic[0].beta"),
            e => panic!("{e}"),
        }
    }
}
