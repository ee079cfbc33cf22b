use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::bound::regret_bound;
use super::trace::{PosteriorSnapshot, RegretTrace};
use super::ExperimentResult;
use crate::binning::ScheduleKind;

pub const CSV_HEADER: [&str; 8] = [
    "run_id",
    "t",
    "K_t",
    "action_json",
    "reward",
    "inst_regret",
    "disc_regret",
    "cum_regret",
];

/// One parsed CSV line.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct CsvRow {
    pub run_id: String,
    pub t: u64,
    #[serde(rename = "K_t")]
    pub bins: usize,
    pub action_json: String,
    pub reward: f64,
    pub inst_regret: f64,
    pub disc_regret: f64,
    pub cum_regret: f64,
}

impl CsvRow {
    pub fn action(&self) -> Result<Vec<(f64, f64)>> {
        Ok(serde_json::from_str(&self.action_json)?)
    }
}

/// Seventeen significant digits, enough to recover any `f64` exactly.
fn fmt_real<S: Scalar>(x: S) -> String {
    format!("{:.16e}", x.as_f64())
}

pub fn write_trace_csv<'a, S: Scalar, W: Write>(
    traces: impl IntoIterator<Item = &'a RegretTrace<S>>,
    writer: W,
) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record(CSV_HEADER)?;
    for trace in traces {
        for row in &trace.rows {
            let pairs: Vec<(f64, f64)> = row
                .action
                .intervals()
                .iter()
                .map(|&(a, b)| (a.as_f64(), b.as_f64()))
                .collect();
            out.write_record([
                trace.run_id.clone(),
                row.t.to_string(),
                row.bins.to_string(),
                serde_json::to_string(&pairs)?,
                fmt_real(row.reward),
                fmt_real(row.inst_regret),
                fmt_real(row.disc_regret),
                fmt_real(row.cum_regret),
            ])?;
        }
    }
    out.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(())
}

pub fn read_trace_csv<R: Read>(reader: R) -> Result<Vec<CsvRow>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.iter().ne(CSV_HEADER) {
        return Err(Error::Config(format!("unexpected CSV header {header:?}")));
    }
    rdr.deserialize()
        .map(|r| r.map_err(Error::from))
        .collect()
}

/// Cumulative-regret statistics across replications at one round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub t: u64,
    pub mean: f64,
    pub variance: f64,
    pub q025: f64,
    pub q975: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmSummary {
    pub label: String,
    pub policy: String,
    pub schedule: String,
    pub replications: usize,
    pub final_mean: f64,
    pub final_variance: f64,
    /// Bound evaluated per replication; only under cube-root refinement.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub regret_bound: Option<Vec<f64>>,
    pub discretisation_violations: usize,
    pub checkpoints: Vec<Checkpoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub name: String,
    pub seed: u64,
    pub horizon: u64,
    pub optimal_action: Vec<(f64, f64)>,
    pub optimal_reward: f64,
    pub arms: Vec<ArmSummary>,
}

/// Type-7 empirical quantile of sorted data.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var)
}

fn checkpoint(t: u64, mut values: Vec<f64>) -> Checkpoint {
    let (mean, variance) = mean_var(&values);
    values.sort_by(f64::total_cmp);
    Checkpoint {
        t,
        mean,
        variance,
        q025: quantile_sorted(&values, 0.025),
        q975: quantile_sorted(&values, 0.975),
    }
}

/// Aggregates every round of every arm. Slack for the discretisation check
/// is the quadrature tolerance.
pub fn summarize<S: Scalar>(result: &ExperimentResult<S>) -> ExperimentSummary {
    let cfg = &result.config;
    let slack = cfg.quadrature_tol() * S::lit(4.0);
    let arms = result
        .arms
        .iter()
        .map(|arm| {
            let horizon = cfg.horizon as usize;
            let checkpoints: Vec<Checkpoint> = (0..horizon)
                .map(|i| {
                    let values = arm
                        .traces
                        .iter()
                        .map(|tr| tr.rows[i].cum_regret.as_f64())
                        .collect();
                    checkpoint(i as u64 + 1, values)
                })
                .collect();
            let last = checkpoints.last().expect("horizon >= 1");
            let bound = (arm.arm.schedule.kind == ScheduleKind::Cuberoot).then(|| {
                arm.traces
                    .iter()
                    .map(|tr| {
                        let p = tr.bound_params(
                            arm.arm.policy.prior.lambda_max,
                            cfg.cost,
                            cfg.sensors,
                        );
                        regret_bound(&p).as_f64()
                    })
                    .collect()
            });
            ArmSummary {
                label: arm.arm.label.clone(),
                policy: arm.arm.policy.kind.name().to_string(),
                schedule: arm.arm.schedule.kind.name().to_string(),
                replications: arm.traces.len(),
                final_mean: last.mean,
                final_variance: last.variance,
                regret_bound: bound,
                discretisation_violations: arm
                    .traces
                    .iter()
                    .map(|tr| tr.discretisation_violations(cfg.cost, cfg.sensors, slack).len())
                    .sum(),
                checkpoints,
            }
        })
        .collect();
    ExperimentSummary {
        name: cfg.name.clone(),
        seed: cfg.seed,
        horizon: cfg.horizon,
        optimal_action: result
            .optimal_action
            .intervals()
            .iter()
            .map(|&(a, b)| (a.as_f64(), b.as_f64()))
            .collect(),
        optimal_reward: result.optimal_reward.as_f64(),
        arms,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputPaths {
    pub trace_csv: PathBuf,
    pub summary_json: PathBuf,
    pub posterior_json: PathBuf,
}

impl OutputPaths {
    pub fn in_dir(dir: &Path, name: &str) -> Self {
        Self {
            trace_csv: dir.join(format!("{name}_trace.csv")),
            summary_json: dir.join(format!("{name}_summary.json")),
            posterior_json: dir.join(format!("{name}_posterior.json")),
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes the trace CSV, the summary JSON and the posterior snapshots into
/// `dir`, creating it if needed.
pub fn emit_traces<S: Scalar>(result: &ExperimentResult<S>, dir: &Path) -> Result<OutputPaths> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let paths = OutputPaths::in_dir(dir, &result.config.name);

    let mut w = create(&paths.trace_csv)?;
    write_trace_csv(result.traces(), &mut w)?;
    w.flush().map_err(|e| Error::io(&paths.trace_csv, e))?;

    write_json(&paths.summary_json, &summarize(result))?;
    let snaps: Vec<&PosteriorSnapshot<S>> =
        result.arms.iter().filter_map(|a| a.snapshot.as_ref()).collect();
    write_json(&paths.posterior_json, &snaps)?;
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::binning::Action;
    use crate::harness::TraceRow;

    fn trace(id: &str, n: u64) -> RegretTrace<f64> {
        let mut cum = 0.0;
        let rows = (1..=n)
            .map(|t| {
                let inst = 1.0 / (t as f64 * 3.0);
                cum += inst;
                TraceRow {
                    t,
                    bins: 4,
                    action: Action::new(vec![(0.25, 0.5)]).unwrap(),
                    events: 2,
                    reward: 0.1 + 1.0 / 7.0,
                    inst_regret: inst,
                    disc_regret: inst / 3.0,
                    cum_regret: cum,
                }
            })
            .collect();
        RegretTrace {
            run_id: id.into(),
            arm: "a".into(),
            replication: 0,
            rows,
        }
    }

    #[test]
    fn empty_set_gives_header_only() {
        let mut buf = Vec::new();
        write_trace_csv::<f64, _>(std::iter::empty(), &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "run_id,t,K_t,action_json,reward,inst_regret,disc_regret,cum_regret\n"
        );
    }

    #[test]
    fn rows_and_exact_round_trip() {
        let traces = [trace("x/0", 3), trace("x/1", 3)];
        let mut buf = Vec::new();
        write_trace_csv(&traces, &mut buf).unwrap();
        let rows = read_trace_csv(buf.as_slice()).unwrap();
        assert_eq!(rows.len(), 6);
        for (row, want) in rows.iter().zip(traces.iter().flat_map(|t| &t.rows)) {
            assert_eq!(row.reward.to_bits(), want.reward.to_bits());
            assert_eq!(row.cum_regret.to_bits(), want.cum_regret.to_bits());
            assert_eq!(row.action().unwrap(), vec![(0.25, 0.5)]);
        }
        for id in ["x/0", "x/1"] {
            let cum: Vec<f64> = rows.iter().filter(|r| r.run_id == id).map(|r| r.cum_regret).collect();
            assert!(cum.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn quantiles_interpolate() {
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile_sorted(&xs, 0.0), 1.0);
        assert_eq!(quantile_sorted(&xs, 0.5), 3.0);
        assert!((quantile_sorted(&xs, 0.975) - 4.9).abs() < 1e-12);
        let c = checkpoint(1, vec![3.0, 1.0]);
        assert_eq!((c.mean, c.variance), (2.0, 2.0));
    }

    #[test]
    fn bad_header_rejected() {
        let text = "a,b\n1,2\n";
        assert!(read_trace_csv(text.as_bytes()).is_err());
    }
}
