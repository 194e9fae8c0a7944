//! Timed command scripts: JSON lines of UI requests with an `at_ms` offset
//! from the moment the client is verified.
//!
//! ```text
//! {"at_ms":0,"type":"digital","line":1,"value":1}
//! {"at_ms":0,"type":"digital","line":0,"value":1}
//! {"at_ms":1000,"type":"digital","line":1,"value":0}
//! ```

use std::time::Duration;

use serde::Deserialize;

use super::{Station, SubmitError, UiRequest};
use crate::protocol::Message;

#[derive(Debug, Clone, PartialEq)]
pub struct ScriptEntry {
    pub at: Duration,
    pub command: Message,
}

#[derive(Debug, thiserror::Error)]
pub enum ScriptError {
    #[error("script line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("script line {line}: entries must be in time order")]
    OutOfOrder { line: usize },
    #[error("script entry at {at:?} rejected: {source}")]
    Rejected { at: Duration, source: SubmitError },
}

#[derive(Deserialize)]
struct Line {
    at_ms: u64,
    #[serde(flatten)]
    request: serde_json::Value,
}

pub fn parse_script(text: &str) -> Result<Vec<ScriptEntry>, ScriptError> {
    let mut out: Vec<ScriptEntry> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let raw = raw.trim();
        if raw.is_empty() || raw.starts_with('#') {
            continue;
        }
        let err = |reason: String| ScriptError::Parse { line, reason };
        let parsed: Line = serde_json::from_str(raw).map_err(|e| err(e.to_string()))?;
        let request: UiRequest = serde_json::from_value(parsed.request).map_err(|e| err(e.to_string()))?;
        let command = request
            .to_command()
            .map_err(|e| err(e.to_string()))?
            .ok_or_else(|| err("only digital and pwm commands can be scripted".into()))?;
        command.validate().map_err(|e| err(e.to_string()))?;
        let at = Duration::from_millis(parsed.at_ms);
        if out.last().is_some_and(|prev| prev.at > at) {
            return Err(ScriptError::OutOfOrder { line });
        }
        out.push(ScriptEntry { at, command });
    }
    Ok(out)
}

/// Waits for a verified client, then submits each entry at its offset.
pub async fn run_script(station: &Station, entries: &[ScriptEntry]) -> Result<(), ScriptError> {
    station.wait_verified().await;
    let clock = station.clock();
    let t0 = clock.now();
    for e in entries {
        clock.sleep_until(t0 + e.at).await;
        station
            .submit_command(e.command.clone())
            .await
            .map_err(|source| ScriptError::Rejected { at: e.at, source })?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_commands_in_order() {
        let text = "# drive\n\
            {\"at_ms\":0,\"type\":\"digital\",\"line\":0,\"value\":1}\n\
            \n\
            {\"at_ms\":250,\"type\":\"pwm\",\"values\":[1,2,3,4]}\n";
        let entries = parse_script(text).unwrap();
        assert_eq!(
            entries,
            [
                ScriptEntry {
                    at: Duration::ZERO,
                    command: Message::CmdDigital { line: 0, value: true }
                },
                ScriptEntry {
                    at: Duration::from_millis(250),
                    command: Message::CmdPwm {
                        strengths: [1, 2, 3, 4]
                    }
                },
            ]
        );
    }

    #[test]
    fn rejects_bad_scripts() {
        for (text, line) in [
            ("{\"type\":\"digital\",\"line\":0,\"value\":1}", 1),
            ("{\"at_ms\":0,\"type\":\"latency_test\"}", 1),
            ("{\"at_ms\":0,\"type\":\"pwm\",\"values\":[1001,0,0,0]}", 1),
            ("\n{\"at_ms\":5,\"type\":\"digital\",\"line\":0,\"value\":3}", 2),
        ] {
            match parse_script(text) {
                Err(ScriptError::Parse { line: l, .. }) => assert_eq!(l, line, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
        let backwards = "{\"at_ms\":5,\"type\":\"digital\",\"line\":0,\"value\":1}\n\
                         {\"at_ms\":4,\"type\":\"digital\",\"line\":0,\"value\":0}";
        assert!(matches!(
            parse_script(backwards),
            Err(ScriptError::OutOfOrder { line: 2 })
        ));
    }
}
