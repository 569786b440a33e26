use serde::Serialize;
use serde_json::Value;

#[derive(Debug, Serialize)]
pub struct StageResult {
    pub stage: String,
    pub residual: f64,
    pub tol: f64,
    pub pass: bool,
}

/// Everything a command prints. `pass` holds iff every stage passes.
#[derive(Debug, Serialize)]
pub struct RunReport {
    pub command: Vec<String>,
    pub stages: Vec<StageResult>,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(rename = "timingMs", skip_serializing_if = "Option::is_none")]
    pub timing_ms: Option<f64>,
    pub result: Value,
}

/// Stage residuals collected while a command runs.
#[derive(Debug, Default)]
pub struct Stages(pub Vec<StageResult>);

impl Stages {
    pub fn push(&mut self, stage: &str, residual: f64, tol: f64) {
        self.0.push(StageResult {
            stage: stage.to_string(),
            residual,
            tol,
            pass: residual <= tol,
        });
    }

    /// Records a yes/no condition as residual 0 or 1 against tolerance 0.
    pub fn flag(&mut self, stage: &str, ok: bool) {
        self.push(stage, if ok { 0.0 } else { 1.0 }, 0.0);
    }
}
