//! JSON rendering at a fixed number of significant digits, and exit codes.

use cfe_core::numeric::round_significant;
use cfe_core::CfeError;
use serde::Serialize;
use serde_json::Value;

use crate::api::ApiError;

pub const SIGNIFICANT_DIGITS: i32 = 6;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, clap::ValueEnum)]
pub enum Precision {
    /// Six significant digits.
    #[default]
    #[value(name = "6")]
    Significant,
    /// Shortest round-trip representation.
    Full,
}

fn round_value(value: &mut Value) {
    match value {
        Value::Number(n) if n.is_f64() => {
            if let Some(x) = n.as_f64() {
                if let Some(rounded) = serde_json::Number::from_f64(round_significant(x, SIGNIFICANT_DIGITS)) {
                    *n = rounded;
                }
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_value),
        Value::Object(map) => map.values_mut().for_each(round_value),
        _ => {}
    }
}

/// Pretty JSON with a trailing newline.
pub fn render<T: Serialize>(value: &T, precision: Precision) -> String {
    let mut json = serde_json::to_value(value).expect("reports serialize to JSON");
    if precision == Precision::Significant {
        round_value(&mut json);
    }
    let mut text = serde_json::to_string_pretty(&json).expect("JSON values serialize");
    text.push('\n');
    text
}

pub const EXIT_OK: u8 = 0;
pub const EXIT_VALIDATION: u8 = 2;
pub const EXIT_INFEASIBLE: u8 = 3;
pub const EXIT_NON_CONVERGENCE: u8 = 4;

pub fn exit_code(error: &ApiError) -> u8 {
    match error {
        ApiError::Fields(_) => EXIT_VALIDATION,
        ApiError::Core(e) => core_exit_code(e),
    }
}

pub fn core_exit_code(error: &CfeError) -> u8 {
    match error {
        CfeError::Infeasible { .. } => EXIT_INFEASIBLE,
        CfeError::NonConvergence(_) | CfeError::NonFinite(_) => EXIT_NON_CONVERGENCE,
        CfeError::Io { .. } | CfeError::Parse { .. } | CfeError::Validation(_) | CfeError::Correlation { .. } => {
            EXIT_VALIDATION
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounds_floats_only() {
        let v = serde_json::json!({"w": [0.93333333333, 1.0], "n": 3, "c": 700.000491});
        let text = render(&v, Precision::Significant);
        let back: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(back["w"][0], 0.933333);
        assert_eq!(back["c"], 700.0);
        assert_eq!(back["n"], 3);
        assert!(render(&v, Precision::Full).contains("0.93333333333"));
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&ApiError::Fields(vec![])), EXIT_VALIDATION);
        let infeasible = CfeError::Infeasible {
            load: 0,
            target: 1.0,
            measure: "empirical quantile",
            max_attainable: 0.9,
        };
        assert_eq!(core_exit_code(&infeasible), EXIT_INFEASIBLE);
        assert_eq!(core_exit_code(&CfeError::NonConvergence("x".into())), EXIT_NON_CONVERGENCE);
    }
}
