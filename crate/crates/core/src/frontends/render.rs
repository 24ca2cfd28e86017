use std::fmt;
use std::str::FromStr;

use serde_json::{json, Value};
use thiserror::Error;

use super::ModuleResults;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum OutputFormat {
    #[default]
    Plain,
    Xml,
    Json,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("unknown format {0}")]
pub struct ParseFormatError(pub String);

impl FromStr for OutputFormat {
    type Err = ParseFormatError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "plain" => Ok(OutputFormat::Plain),
            "xml" => Ok(OutputFormat::Xml),
            "json" => Ok(OutputFormat::Json),
            _ => Err(ParseFormatError(s.to_string())),
        }
    }
}

impl fmt::Display for OutputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutputFormat::Plain => "plain",
            OutputFormat::Xml => "xml",
            OutputFormat::Json => "json",
        })
    }
}

/// Output lines, without terminators.
pub fn render(results: &ModuleResults, format: OutputFormat) -> Vec<String> {
    match format {
        OutputFormat::Plain => results
            .entities
            .iter()
            .map(|e| format!("{} : {}", e.name, e.shown))
            .collect(),
        OutputFormat::Xml => xml(results),
        OutputFormat::Json => {
            let doc = json!({
                "analysis": results.analysis,
                "module": results.module,
                "results": results.entities.iter().map(|e| json!({
                    "name": e.name.to_string(),
                    "value": e.value,
                    "shown": e.shown,
                })).collect::<Vec<Value>>(),
            });
            serde_json::to_string_pretty(&doc)
                .expect("json value serializes")
                .lines()
                .map(str::to_string)
                .collect()
        }
    }
}

fn xml(results: &ModuleResults) -> Vec<String> {
    let mut out = vec![
        r#"<?xml version="1.0" encoding="UTF-8"?>"#.to_string(),
        format!(
            r#"<analysisresult analysis="{}" module="{}">"#,
            escape(&results.analysis),
            escape(&results.module)
        ),
    ];
    for e in &results.entities {
        out.push(format!(
            r#"  <entity name="{}" value="{}">{}</entity>"#,
            escape(&e.name.to_string()),
            escape(&e.value.to_string()),
            escape(&e.shown)
        ));
    }
    out.push("</analysisresult>".to_string());
    out
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}
