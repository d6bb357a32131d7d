//! The run manifest: everything needed to trace and reproduce a run.

use serde::Serialize;
use serde_json::Value;

use surrofit::diagnostics::DiagnosticsReport;
use surrofit::linalg::CostBreakdown;
use surrofit::population::OracleAccuracy;

/// One population quantity and how it was computed.
#[derive(Clone, Debug, Serialize)]
pub struct OracleRecord {
    pub quantity: String,
    pub method: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quad_order: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cells: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub std_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl OracleRecord {
    pub fn from_accuracy(quantity: impl Into<String>, accuracy: &OracleAccuracy) -> Self {
        match accuracy {
            OracleAccuracy::Quadrature { order, cells } => OracleRecord {
                quantity: quantity.into(),
                method: "quadrature".into(),
                quad_order: Some(*order),
                cells: Some(*cells),
                samples: None,
                std_error: None,
                seed: None,
            },
            OracleAccuracy::MonteCarlo {
                samples,
                std_error,
                seed,
            } => OracleRecord {
                quantity: quantity.into(),
                method: "monte-carlo".into(),
                quad_order: None,
                cells: None,
                samples: Some(*samples),
                std_error: Some(*std_error),
                seed: Some(*seed),
            },
        }
    }
}

/// Full provenance of one experiment run. Reruns of the same config write
/// byte-identical CSVs; the manifest differs only in wall-clock time.
#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub config_hash: String,
    /// The effective (resolved, defaulted, overridden) config.
    pub config: Value,
    pub master_seed: u64,
    /// Seed of every replication, indexed by [grid point][replicate].
    pub per_replication_seeds: Vec<Vec<u64>>,
    pub oracle_records: Vec<OracleRecord>,
    pub cost: CostBreakdown,
    pub wall_clock_seconds: f64,
    /// CSV files written, in write order.
    pub outputs: Vec<String>,
    pub warnings: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<Vec<DiagnosticsReport>>,
}

/// FNV-1a over the canonical config text; stable across runs and builds.
pub fn config_hash(canonical: &str) -> String {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in canonical.as_bytes() {
        hash ^= u64::from(*byte);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("fnv1a64:{hash:016x}")
}
