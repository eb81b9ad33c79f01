//! On-disk layout of an experiment directory.
//!
//! ```text
//! config.toml          resolved configuration
//! instance.json        the instance that was run
//! trace_NNNN.csv       one row per round (bandit) or episode (mdp)
//! epochs_NNNN.csv      one row per (epoch, class) with T_m, gamma, chosen
//! coverage.csv         run_id, covered
//! summary.json         aggregates, recomputable from the files above
//! ```

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::bandit::{EpochRecord, RunTrace};
use crate::error::{Error, Result};
use crate::mdp::MdpRunTrace;

pub const CONFIG_FILE: &str = "config.toml";
pub const INSTANCE_FILE: &str = "instance.json";
pub const COVERAGE_FILE: &str = "coverage.csv";
pub const SUMMARY_FILE: &str = "summary.json";

pub fn trace_path(dir: &Path, run_id: usize) -> PathBuf {
    dir.join(format!("trace_{run_id:04}.csv"))
}

pub fn epochs_path(dir: &Path, run_id: usize) -> PathBuf {
    dir.join(format!("epochs_{run_id:04}.csv"))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BanditRow {
    pub run_id: usize,
    pub epoch: usize,
    pub round: usize,
    pub selected_class: usize,
    pub action: usize,
    pub reward: f64,
    pub instant_regret: f64,
    pub cum_regret: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MdpRow {
    pub run_id: usize,
    pub epoch: usize,
    pub episode: usize,
    pub selected_class: usize,
    pub episode_value: f64,
    pub optimal_value: f64,
    pub instant_regret: f64,
    pub cum_regret: f64,
}

/// `T_m` and `gamma` are empty in the first epoch, which has no past data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRow {
    pub run_id: usize,
    pub epoch: usize,
    pub m: usize,
    #[serde(rename = "T_m")]
    pub t_m: Option<f64>,
    pub gamma: Option<f64>,
    pub chosen: u8,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageRow {
    pub run_id: usize,
    /// Empty when no round used a class containing the truth.
    pub covered: Option<bool>,
}

pub fn write_csv<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    for row in rows {
        w.serialize(row).map_err(|e| Error::parse(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::parse(path, e))?;
    r.deserialize().map(|row| row.map_err(|e| Error::parse(path, e))).collect()
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::parse(path, e))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path, e))
}

pub fn bandit_rows(run_id: usize, trace: &RunTrace) -> impl Iterator<Item = BanditRow> + '_ {
    trace.rounds.iter().map(move |r| BanditRow {
        run_id,
        epoch: r.epoch,
        round: r.round,
        selected_class: r.selected_class,
        action: r.action,
        reward: r.reward,
        instant_regret: r.instant_regret,
        cum_regret: r.cum_regret,
    })
}

pub fn mdp_rows(run_id: usize, trace: &MdpRunTrace) -> impl Iterator<Item = MdpRow> + '_ {
    trace.episodes.iter().map(move |e| MdpRow {
        run_id,
        epoch: e.epoch,
        episode: e.episode,
        selected_class: e.selected_class,
        episode_value: e.episode_value,
        optimal_value: e.optimal_value,
        instant_regret: e.instant_regret,
        cum_regret: e.cum_regret,
    })
}

/// One row per class per epoch.
pub fn epoch_rows(run_id: usize, num_classes: usize, epochs: &[EpochRecord]) -> Vec<EpochRow> {
    let mut rows = Vec::with_capacity(epochs.len() * num_classes);
    for e in epochs {
        for m in 1..=num_classes {
            rows.push(EpochRow {
                run_id,
                epoch: e.epoch,
                m,
                t_m: e.statistics.get(m - 1).copied(),
                gamma: e.threshold,
                chosen: u8::from(e.selected == m),
            });
        }
    }
    rows
}

/// Serialise `f64` fields that may be infinite: finite values as numbers,
/// `±inf` as the strings `"inf"` / `"-inf"`, NaN as `null`.
pub mod serde_inf {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Number(f64),
        Text(String),
        Null(()),
    }

    pub fn serialize<S: Serializer>(value: &f64, s: S) -> Result<S::Ok, S::Error> {
        if value.is_finite() {
            s.serialize_f64(*value)
        } else if value.is_nan() {
            s.serialize_none()
        } else if *value > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Option::<Repr>::deserialize(d)? {
            Some(Repr::Number(x)) => Ok(x),
            Some(Repr::Text(t)) => match t.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                other => Err(serde::de::Error::custom(format!("expected a number or \"inf\", got {other:?}"))),
            },
            Some(Repr::Null(())) | None => Ok(f64::NAN),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Debug, PartialEq, Serialize, Deserialize)]
    struct Holder {
        #[serde(with = "serde_inf")]
        x: f64,
    }

    #[test]
    fn infinite_values_round_trip() {
        for x in [1.5, f64::INFINITY, f64::NEG_INFINITY, 0.0] {
            let json = serde_json::to_string(&Holder { x }).unwrap();
            assert_eq!(serde_json::from_str::<Holder>(&json).unwrap(), Holder { x });
        }
        assert_eq!(serde_json::to_string(&Holder { x: f64::INFINITY }).unwrap(), r#"{"x":"inf"}"#);
        assert!(serde_json::from_str::<Holder>(r#"{"x":null}"#).unwrap().x.is_nan());
    }

    #[test]
    fn epoch_rows_mark_the_choice() {
        let epochs = vec![
            EpochRecord {
                epoch: 1,
                start: 0,
                length: 2,
                confidence: 0.05,
                selected: 2,
                statistics: vec![],
                threshold: None,
            },
            EpochRecord {
                epoch: 2,
                start: 2,
                length: 4,
                confidence: 0.025,
                selected: 1,
                statistics: vec![0.1, 0.05],
                threshold: Some(0.3),
            },
        ];
        let rows = epoch_rows(7, 2, &epochs);
        assert_eq!(rows.len(), 4);
        assert_eq!(rows.iter().map(|r| r.chosen).collect::<Vec<_>>(), vec![0, 1, 1, 0]);
        assert_eq!(rows[0].t_m, None);
        assert_eq!(rows[3].t_m, Some(0.05));
    }

    #[test]
    fn csv_floats_round_trip_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        let rows = vec![EpochRow {
            run_id: 0,
            epoch: 3,
            m: 1,
            t_m: Some(0.1 + 0.2),
            gamma: None,
            chosen: 1,
        }];
        write_csv(&path, rows.clone()).unwrap();
        assert_eq!(read_csv::<EpochRow>(&path).unwrap(), rows);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("run_id,epoch,m,T_m,gamma,chosen\n"));
    }
}
