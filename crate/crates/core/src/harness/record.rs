//! Per-episode training records and their CSV form.
//!
//! Column order is fixed:
//!
//! | column | meaning |
//! |---|---|
//! | `agent` | `dqn`, `double`, `dueling` or `ppo` |
//! | `episode` | zero-based episode index |
//! | `total_reward` | sum of step rewards |
//! | `mean_loss` | mean minibatch loss (PPO: actor + critic) |
//! | `steps` | environment steps taken |
//! | `impact_velocity` | `|zdot - zdot_w|` at contact, empty if no contact |
//! | `landed` | `1` if the episode ended in contact |
//! | `epsilon` | exploration rate (value agents) |
//! | `actor_loss`, `critic_loss` | PPO update-phase means |
//! | `aborted` | `1` if a state clamp or numerical fault ended the episode |
//!
//! Missing values are empty fields.

use std::io::{Read, Write};

use crate::env::Termination;

use super::HarnessError;

pub const TRAIN_LOG_COLUMNS: [&str; 11] = [
    "agent",
    "episode",
    "total_reward",
    "mean_loss",
    "steps",
    "impact_velocity",
    "landed",
    "epsilon",
    "actor_loss",
    "critic_loss",
    "aborted",
];

#[derive(Debug, Clone, PartialEq)]
pub struct TrainRecord {
    pub episode: usize,
    pub total_reward: f64,
    pub mean_loss: Option<f64>,
    pub actor_loss: Option<f64>,
    pub critic_loss: Option<f64>,
    pub steps: usize,
    pub impact_velocity: Option<f64>,
    pub landed: bool,
    pub aborted: bool,
    pub epsilon: Option<f64>,
}

impl TrainRecord {
    pub fn new(episode: usize) -> Self {
        Self {
            episode,
            total_reward: 0.0,
            mean_loss: None,
            actor_loss: None,
            critic_loss: None,
            steps: 0,
            impact_velocity: None,
            landed: false,
            aborted: false,
            epsilon: None,
        }
    }

    pub fn finish(&mut self, termination: Option<Termination>, impact_velocity: Option<f64>) {
        self.landed = termination == Some(Termination::Contact);
        self.aborted = termination == Some(Termination::Aborted);
        self.impact_velocity = impact_velocity;
    }

    /// Contact time in seconds for a landed episode.
    pub fn time_to_land(&self, dt: f64) -> Option<f64> {
        self.landed.then_some(self.steps as f64 * dt)
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn flag(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

pub fn write_train_log<W: Write>(
    out: W,
    agent: &str,
    records: &[TrainRecord],
) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRAIN_LOG_COLUMNS)?;
    for r in records {
        w.write_record([
            agent.to_string(),
            r.episode.to_string(),
            r.total_reward.to_string(),
            opt(r.mean_loss),
            r.steps.to_string(),
            opt(r.impact_velocity),
            flag(r.landed).to_string(),
            opt(r.epsilon),
            opt(r.actor_loss),
            opt(r.critic_loss),
            flag(r.aborted).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// A parsed training log.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainLog {
    pub agent: String,
    pub records: Vec<TrainRecord>,
}

/// Reads a training log. Columns may appear in any order; every column of
/// [`TRAIN_LOG_COLUMNS`] must be present.
pub fn read_train_log<R: Read>(input: R) -> Result<TrainLog, HarnessError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(input);
    let headers = rdr.headers()?.clone();
    let mut idx = [0usize; TRAIN_LOG_COLUMNS.len()];
    for (slot, name) in idx.iter_mut().zip(TRAIN_LOG_COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| HarnessError::MissingColumn(name.to_string()))?;
    }
    let [c_agent, c_ep, c_rew, c_loss, c_steps, c_imp, c_landed, c_eps, c_al, c_cl, c_abort] = idx;

    let mut agent: Option<String> = None;
    let mut records = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = row + 2;
        let field = |c: usize| rec.get(c).unwrap_or("");
        let bad = |c: usize| HarnessError::BadField {
            line,
            column: TRAIN_LOG_COLUMNS[idx.iter().position(|&i| i == c).unwrap_or(0)].to_string(),
            value: field(c).to_string(),
        };
        let num = |c: usize| field(c).parse::<f64>().map_err(|_| bad(c));
        let opt_num = |c: usize| -> Result<Option<f64>, HarnessError> {
            if field(c).is_empty() {
                Ok(None)
            } else {
                num(c).map(Some)
            }
        };
        let int = |c: usize| field(c).parse::<usize>().map_err(|_| bad(c));
        let boolean = |c: usize| match field(c) {
            "0" => Ok(false),
            "1" => Ok(true),
            _ => Err(bad(c)),
        };

        let name = field(c_agent);
        match &agent {
            None => agent = Some(name.to_string()),
            Some(a) if a != name => {
                return Err(HarnessError::BadField {
                    line,
                    column: "agent".into(),
                    value: name.to_string(),
                })
            }
            _ => {}
        }
        records.push(TrainRecord {
            episode: int(c_ep)?,
            total_reward: num(c_rew)?,
            mean_loss: opt_num(c_loss)?,
            steps: int(c_steps)?,
            impact_velocity: opt_num(c_imp)?,
            landed: boolean(c_landed)?,
            epsilon: opt_num(c_eps)?,
            actor_loss: opt_num(c_al)?,
            critic_loss: opt_num(c_cl)?,
            aborted: boolean(c_abort)?,
        });
    }
    Ok(TrainLog {
        agent: agent.unwrap_or_default(),
        records,
    })
}
