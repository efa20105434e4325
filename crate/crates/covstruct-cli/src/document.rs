//! Result-document plumbing: every command emits one JSON document with a
//! stable schema version, the resolved arguments, a dataset fingerprint
//! where one was read, and the payload.
//!
//! Documents are serialized through `serde_json::Value`, whose maps keep
//! sorted keys; re-parsing and re-serializing an emitted document yields
//! the same bytes.  The timing field is the one part outside that
//! contract.

use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const SCHEMA_VERSION: &str = "1";

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub path: String,
    pub rows: usize,
    pub cols: usize,
    pub sha256: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ResultDocument {
    pub schema_version: String,
    pub command: String,
    pub args: Value,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub dataset: Option<DatasetInfo>,
    pub result: Value,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub timing: Option<Timing>,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Timing {
    pub seconds: f64,
}

impl ResultDocument {
    pub fn new(command: &str, args: Value, dataset: Option<DatasetInfo>, result: Value) -> Self {
        ResultDocument {
            schema_version: SCHEMA_VERSION.to_string(),
            command: command.to_string(),
            args,
            dataset,
            result,
            timing: None,
        }
    }

    /// Pretty JSON with sorted keys throughout.
    pub fn render(&self) -> String {
        let value = serde_json::to_value(self).expect("document serializes");
        let mut text = serde_json::to_string_pretty(&value).expect("value serializes");
        text.push('\n');
        text
    }
}
