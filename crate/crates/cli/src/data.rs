//! On-disk layout of a generated data set:
//!
//! ```text
//! <dir>/network.txt
//! <dir>/config.toml
//! <dir>/days/day_XX_<type>.csv
//! <dir>/demand/day_XX.csv
//! ```

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use tripmix::eval::{Collection, DayRecord};
use tripmix::formats::{
    parse_network, read_demand, read_trips, write_demand, write_network, write_trips, TripRecord,
};
use tripmix::model::DayType;
use tripmix::planner::TransitNetwork;
use tripmix::synth::{SynthCollection, SynthConfig};

pub fn day_file(day: u32, day_type: DayType) -> String {
    format!("day_{day:02}_{day_type}.csv")
}

pub fn demand_file(day: u32) -> String {
    format!("day_{day:02}.csv")
}

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut w = create(path)?;
    w.write_all(text.as_bytes())?;
    w.flush()?;
    Ok(())
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

pub fn load_network(path: &Path) -> Result<TransitNetwork> {
    let text = read_text(path)?;
    Ok(parse_network(&text, &path.display().to_string())?)
}

pub fn save(dir: &Path, config: &SynthConfig, synth: &SynthCollection) -> Result<()> {
    write_text(&dir.join("network.txt"), &write_network(&synth.network))?;
    write_text(&dir.join("config.toml"), &config.to_toml_string())?;
    for d in &synth.days {
        let records: Vec<TripRecord> = d
            .triples
            .iter()
            .zip(&d.observed)
            .map(|(t, r)| TripRecord {
                day: d.day,
                day_type: d.day_type,
                demand_id: t.demand_id.clone(),
                route: r.clone(),
            })
            .collect();
        let mut w = create(&dir.join("days").join(day_file(d.day, d.day_type)))?;
        write_trips(&mut w, &records)?;
        w.flush()?;
        let mut w = create(&dir.join("demand").join(demand_file(d.day)))?;
        write_demand(&mut w, &d.triples)?;
        w.flush()?;
    }
    Ok(())
}

/// Trips files under `path` (a file, or every `.csv` in a directory, sorted).
pub fn trip_files(path: &Path) -> Result<Vec<PathBuf>> {
    if path.is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut files: Vec<PathBuf> = fs::read_dir(path)
        .with_context(|| format!("listing {}", path.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    Ok(files)
}

pub fn read_trip_file(path: &Path, net: &TransitNetwork) -> Result<Vec<TripRecord>> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(read_trips(
        BufReader::new(f),
        net,
        &path.display().to_string(),
    )?)
}

/// Loads a data directory written by `synth` as an evaluation collection.
pub fn load_collection(dir: &Path) -> Result<Collection> {
    let network = Arc::new(load_network(&dir.join("network.txt"))?);
    let mut days = Vec::new();
    for path in trip_files(&dir.join("days"))? {
        let records = read_trip_file(&path, &network)?;
        let Some(first) = records.first() else {
            bail!("{} holds no trips", path.display());
        };
        let (day, day_type) = (first.day, first.day_type);
        if records
            .iter()
            .any(|r| r.day != day || r.day_type != day_type)
        {
            bail!("{} mixes several days", path.display());
        }
        let demand_path = dir.join("demand").join(demand_file(day));
        let f = File::open(&demand_path)
            .with_context(|| format!("opening {}", demand_path.display()))?;
        let triples = read_demand(
            BufReader::new(f),
            &network,
            &demand_path.display().to_string(),
        )?;
        if triples.len() != records.len()
            || triples
                .iter()
                .zip(&records)
                .any(|(t, r)| t.demand_id != r.demand_id)
        {
            bail!(
                "{} and {} do not list the same demands",
                path.display(),
                demand_path.display()
            );
        }
        days.push(DayRecord {
            day,
            day_type,
            triples,
            observed: records.into_iter().map(|r| r.route).collect(),
        });
    }
    if days.is_empty() {
        bail!("no day files under {}", dir.join("days").display());
    }
    days.sort_by_key(|d| d.day);
    Ok(Collection::new(network, days)?)
}
