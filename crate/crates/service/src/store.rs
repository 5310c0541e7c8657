//! In-memory models and scenarios with optional append-only JSON-lines log.

use std::collections::{BTreeMap, HashMap};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use cgm_core::json::{model_from_value, model_value};
use cgm_core::{Cgm, ObjectiveSpec};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}: {message}")]
    Corrupt { path: PathBuf, line: usize, message: String },
}

#[derive(Clone, Debug)]
pub struct ModelRecord {
    pub id: String,
    pub model: Arc<Cgm>,
    pub created_at: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ScenarioRecord {
    pub id: String,
    pub model_id: String,
    pub assertions: BTreeMap<String, bool>,
    pub objectives: Vec<ObjectiveSpec>,
    pub created_at: String,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
enum Event {
    Model { id: String, created_at: String, model: serde_json::Value },
    Scenario { scenario: ScenarioRecord },
}

#[derive(Default)]
pub struct Store {
    pub models: HashMap<String, ModelRecord>,
    pub scenarios: HashMap<String, ScenarioRecord>,
    log: Option<(PathBuf, File)>,
}

impl Store {
    /// Replays the log at `path` if it exists and appends to it from then on.
    pub fn open(path: &Path) -> Result<Self, StoreError> {
        let io = |source| StoreError::Io { path: path.to_path_buf(), source };
        let mut store = Store::default();
        if path.exists() {
            let reader = BufReader::new(File::open(path).map_err(io)?);
            for (i, line) in reader.lines().enumerate() {
                let line = line.map_err(io)?;
                if line.trim().is_empty() {
                    continue;
                }
                let corrupt = |message: String| StoreError::Corrupt { path: path.to_path_buf(), line: i + 1, message };
                match serde_json::from_str::<Event>(&line).map_err(|e| corrupt(e.to_string()))? {
                    Event::Model { id, created_at, model } => {
                        let m = model_from_value(model).map_err(|e| corrupt(e.to_string()))?;
                        store.models.insert(id.clone(), ModelRecord { id, model: Arc::new(m), created_at });
                    }
                    Event::Scenario { scenario } => {
                        store.scenarios.insert(scenario.id.clone(), scenario);
                    }
                }
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(path).map_err(io)?;
        store.log = Some((path.to_path_buf(), file));
        Ok(store)
    }

    fn append(&mut self, event: &Event) -> Result<(), StoreError> {
        if let Some((path, file)) = &mut self.log {
            let line = serde_json::to_string(event).expect("serializable");
            writeln!(file, "{line}").map_err(|source| StoreError::Io { path: path.clone(), source })?;
        }
        Ok(())
    }

    pub fn add_model(&mut self, model: Cgm) -> Result<ModelRecord, StoreError> {
        let rec = ModelRecord { id: new_id(), model: Arc::new(model), created_at: now() };
        self.append(&Event::Model { id: rec.id.clone(), created_at: rec.created_at.clone(), model: model_value(&rec.model) })?;
        self.models.insert(rec.id.clone(), rec.clone());
        Ok(rec)
    }

    /// Inserts or replaces a scenario.
    pub fn put_scenario(&mut self, scenario: ScenarioRecord) -> Result<(), StoreError> {
        self.append(&Event::Scenario { scenario: scenario.clone() })?;
        self.scenarios.insert(scenario.id.clone(), scenario);
        Ok(())
    }
}

pub fn new_id() -> String {
    uuid::Uuid::new_v4().simple().to_string()
}

pub fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}
