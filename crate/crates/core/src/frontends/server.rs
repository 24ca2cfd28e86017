use std::io::{self, BufRead, BufReader, Write};
use std::net::TcpListener;

use super::{render, Engine, OutputFormat};

/// One protocol line.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Request {
    GetAnalysis,
    AnalyzeModule {
        analysis: String,
        module: String,
        format: OutputFormat,
    },
    AnalyzeEntity {
        analysis: String,
        module: String,
        entity: String,
        format: OutputFormat,
    },
    StopServer,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Response {
    Ok(Vec<String>),
    Error(String),
}

impl Response {
    /// Framed wire form: `ok <n>` and n payload lines, or one `error` line.
    pub fn to_wire(&self) -> String {
        match self {
            Response::Ok(lines) => {
                let mut s = format!("ok {}\n", lines.len());
                for l in lines {
                    s.push_str(l);
                    s.push('\n');
                }
                s
            }
            Response::Error(msg) => format!("error {}\n", msg.replace('\n', " ")),
        }
    }
}

impl Request {
    pub fn parse(line: &str) -> Result<Request, String> {
        let tokens: Vec<&str> = line.split_whitespace().collect();
        let Some((&cmd, args)) = tokens.split_first() else {
            return Err("empty request".to_string());
        };
        let format = |t: Option<&&str>| -> Result<OutputFormat, String> {
            t.map_or(Ok(OutputFormat::Plain), |f| f.parse().map_err(|e| format!("{e}")))
        };
        match cmd {
            "GetAnalysis" if args.is_empty() => Ok(Request::GetAnalysis),
            "GetAnalysis" => Err("GetAnalysis takes no arguments".to_string()),
            "StopServer" if args.is_empty() => Ok(Request::StopServer),
            "StopServer" => Err("StopServer takes no arguments".to_string()),
            "AnalyzeModule" if (2..=3).contains(&args.len()) => Ok(Request::AnalyzeModule {
                analysis: args[0].to_string(),
                module: args[1].to_string(),
                format: format(args.get(2))?,
            }),
            "AnalyzeModule" => Err("usage: AnalyzeModule <analysis> <module> [format]".to_string()),
            "AnalyzeEntity" if (3..=4).contains(&args.len()) => Ok(Request::AnalyzeEntity {
                analysis: args[0].to_string(),
                module: args[1].to_string(),
                entity: args[2].to_string(),
                format: format(args.get(3))?,
            }),
            "AnalyzeEntity" => {
                Err("usage: AnalyzeEntity <analysis> <module> <entity> [format]".to_string())
            }
            _ => Err("unknown command".to_string()),
        }
    }
}

/// Executes one request line. The flag is true when the server should stop.
pub fn handle_request(engine: &Engine, line: &str) -> (Response, bool) {
    let req = match Request::parse(line) {
        Ok(r) => r,
        Err(e) => return (Response::Error(format!("parse: {e}")), false),
    };
    let result = match req {
        Request::GetAnalysis => Ok(engine.registry().names().map(str::to_string).collect()),
        Request::StopServer => return (Response::Ok(Vec::new()), true),
        Request::AnalyzeModule {
            analysis,
            module,
            format,
        } => engine
            .module_results(&analysis, &module)
            .map(|r| render(&r, format)),
        Request::AnalyzeEntity {
            analysis,
            module,
            entity,
            format,
        } => engine
            .entity_result(&analysis, &module, &entity)
            .map(|r| render(&r, format)),
    };
    match result {
        Ok(lines) => (Response::Ok(lines), false),
        Err(e) => (Response::Error(e.to_string()), false),
    }
}

/// Serves one client until it disconnects or stops the server. Returns
/// true on StopServer.
pub fn serve_connection(engine: &Engine, input: impl BufRead, mut output: impl Write) -> io::Result<bool> {
    for line in input.lines() {
        let line = line?;
        let (resp, stop) = handle_request(engine, line.trim_end_matches('\r'));
        output.write_all(resp.to_wire().as_bytes())?;
        output.flush()?;
        if stop {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Accepts clients one after another until one sends StopServer.
pub fn serve(engine: &Engine, listener: TcpListener) -> io::Result<()> {
    for stream in listener.incoming() {
        let stream = stream?;
        let peer = stream.peer_addr().ok();
        log::info!("client connected: {peer:?}");
        let reader = BufReader::new(stream.try_clone()?);
        match serve_connection(engine, reader, stream) {
            Ok(true) => return Ok(()),
            Ok(false) => log::info!("client disconnected: {peer:?}"),
            Err(e) => log::warn!("connection {peer:?} failed: {e}"),
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_commands() {
        assert_eq!(Request::parse("GetAnalysis"), Ok(Request::GetAnalysis));
        assert_eq!(
            Request::parse("AnalyzeModule Total Demo"),
            Ok(Request::AnalyzeModule {
                analysis: "Total".into(),
                module: "Demo".into(),
                format: OutputFormat::Plain
            })
        );
        assert_eq!(
            Request::parse("AnalyzeEntity Deterministic Demo coin xml"),
            Ok(Request::AnalyzeEntity {
                analysis: "Deterministic".into(),
                module: "Demo".into(),
                entity: "coin".into(),
                format: OutputFormat::Xml
            })
        );
        assert_eq!(Request::parse("Frobnicate X"), Err("unknown command".into()));
        assert_eq!(Request::parse("AnalyzeModule Total Demo yaml"), Err("unknown format yaml".into()));
        assert!(Request::parse("   ").is_err());
        assert!(Request::parse("AnalyzeModule Total").is_err());
    }

    #[test]
    fn framing() {
        assert_eq!(Response::Ok(vec!["a".into(), "b".into()]).to_wire(), "ok 2\na\nb\n");
        assert_eq!(Response::Ok(vec![]).to_wire(), "ok 0\n");
        assert_eq!(Response::Error("x\ny".into()).to_wire(), "error x y\n");
    }
}
