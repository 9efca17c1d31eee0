//! Subprocess adapter for an external SPICE engine.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netlist::{serialize, Netlist, NodeId};

/// Environment variable holding an engine command template, e.g.
/// `ngspice -b {netlist}`.
pub const ENGINE_ENV: &str = "SPICEPILOT_ENGINE";

const EXCERPT_CHARS: usize = 400;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    /// Whitespace-separated argv; `{netlist}` is replaced by the netlist path.
    pub command: String,
    #[serde(with = "secs", default = "default_timeout")]
    pub timeout: Duration,
}

fn default_timeout() -> Duration {
    Duration::from_secs(30)
}

mod secs {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let v = f64::deserialize(d)?;
        Duration::try_from_secs_f64(v).map_err(serde::de::Error::custom)
    }
}

impl EngineConfig {
    pub fn new(command: impl Into<String>) -> Self {
        EngineConfig {
            command: command.into(),
            timeout: default_timeout(),
        }
    }

    /// The configuration named by [`ENGINE_ENV`], if set and non-empty.
    pub fn from_env() -> Option<Self> {
        std::env::var(ENGINE_ENV)
            .ok()
            .filter(|c| !c.trim().is_empty())
            .map(EngineConfig::new)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineRun {
    pub exit_code: i32,
    pub netlist_path: PathBuf,
    pub stdout_path: PathBuf,
    pub stderr_path: PathBuf,
    /// Present when stdout contained a recognizable node-voltage table.
    pub node_voltages: Option<BTreeMap<NodeId, f64>>,
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("external engine unavailable: {0}")]
    EngineUnavailable(String),
    #[error("external engine exceeded {0:?}")]
    EngineTimeout(Duration),
    #[error("external engine exited with code {code}: {stderr}")]
    EngineNonzeroExit { code: i32, stderr: String },
    #[error("engine workdir I/O failed: {0}")]
    Io(#[from] io::Error),
}

fn excerpt(text: &str) -> String {
    text.chars().take(EXCERPT_CHARS).collect()
}

/// Writes `circuit.sp` into `workdir`, runs the configured command there and
/// captures `stdout.txt` and `stderr.txt` beside it.
pub fn external_engine_run(
    netlist: &Netlist,
    config: &EngineConfig,
    workdir: &Path,
) -> Result<EngineRun, EngineError> {
    fs::create_dir_all(workdir)?;
    let netlist_path = workdir.join("circuit.sp");
    let stdout_path = workdir.join("stdout.txt");
    let stderr_path = workdir.join("stderr.txt");
    fs::write(&netlist_path, serialize(netlist))?;

    let path_text = netlist_path.to_string_lossy();
    let argv: Vec<String> = config
        .command
        .split_whitespace()
        .map(|t| t.replace("{netlist}", &path_text))
        .collect();
    let Some((program, args)) = argv.split_first() else {
        return Err(EngineError::EngineUnavailable("empty engine command".into()));
    };

    let spawned = Command::new(program)
        .args(args)
        .current_dir(workdir)
        .stdin(Stdio::null())
        .stdout(File::create(&stdout_path)?)
        .stderr(File::create(&stderr_path)?)
        .spawn();
    let mut child = match spawned {
        Ok(child) => child,
        Err(e) if matches!(e.kind(), io::ErrorKind::NotFound | io::ErrorKind::PermissionDenied) => {
            return Err(EngineError::EngineUnavailable(format!("{program}: {e}")))
        }
        Err(e) => return Err(EngineError::Io(e)),
    };

    let started = Instant::now();
    let status = loop {
        if let Some(status) = child.try_wait()? {
            break status;
        }
        if started.elapsed() >= config.timeout {
            let _ = child.kill();
            let _ = child.wait();
            return Err(EngineError::EngineTimeout(config.timeout));
        }
        thread::sleep(Duration::from_millis(5));
    };

    let code = status.code().unwrap_or(-1);
    if code != 0 {
        let stderr = fs::read_to_string(&stderr_path).unwrap_or_default();
        return Err(EngineError::EngineNonzeroExit {
            code,
            stderr: excerpt(&stderr),
        });
    }
    let stdout = fs::read_to_string(&stdout_path).unwrap_or_default();
    Ok(EngineRun {
        exit_code: code,
        netlist_path,
        stdout_path,
        stderr_path,
        node_voltages: parse_node_table(&stdout),
    })
}

fn strip_probe(token: &str) -> Option<&str> {
    let lower = token.get(..2)?;
    if lower.eq_ignore_ascii_case("v(") && token.ends_with(')') {
        Some(&token[2..token.len() - 1])
    } else {
        None
    }
}

/// Extracts node voltages from engine output. Recognizes `v(node) value`,
/// `v(node) = value` and bare `node value` rows under a `Node ... Voltage`
/// header.
pub fn parse_node_table(text: &str) -> Option<BTreeMap<NodeId, f64>> {
    let mut out = BTreeMap::new();
    let mut in_table = false;
    for line in text.lines() {
        let tokens: Vec<&str> = line
            .split_whitespace()
            .filter(|t| *t != "=")
            .collect();
        let lower = line.to_ascii_lowercase();
        if lower.contains("node") && lower.contains("voltage") {
            in_table = true;
            continue;
        }
        if tokens.len() != 2 {
            if tokens.is_empty() {
                in_table = false;
            }
            continue;
        }
        let Ok(value) = tokens[1].parse::<f64>() else {
            continue;
        };
        let name = match strip_probe(tokens[0]) {
            Some(name) => name,
            None if in_table => tokens[0],
            None => continue,
        };
        out.insert(NodeId::new(name), value);
    }
    (!out.is_empty()).then_some(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::parse_netlist;

    #[test]
    fn table_formats() {
        let text = "\tNode                                  Voltage\n\t----                                  -------\n\tmid                              5.000000e+00\n\tv(top)   1.000000e+01\n\nv(out) = 1.5\nnoise 3\n";
        let table = parse_node_table(text).unwrap();
        assert_eq!(table[&NodeId::new("mid")], 5.0);
        assert_eq!(table[&NodeId::new("top")], 10.0);
        assert_eq!(table[&NodeId::new("out")], 1.5);
        assert!(!table.contains_key(&NodeId::new("noise")));
        assert!(parse_node_table("nothing here").is_none());
    }

    #[test]
    fn missing_engine_is_unavailable() {
        let dir = tempfile::tempdir().unwrap();
        let n = parse_netlist("t\nR1 a 0 1k\nV1 a 0 1\n.op\n.end").unwrap();
        let cfg = EngineConfig::new("definitely-not-a-spice-engine-xyz {netlist}");
        let err = external_engine_run(&n, &cfg, dir.path()).unwrap_err();
        assert!(matches!(err, EngineError::EngineUnavailable(_)), "{err}");
        assert!(dir.path().join("circuit.sp").exists());
    }

    /// Runs the body through `sh` so the script file itself is never exec'd.
    fn script(dir: &Path, name: &str, body: &str) -> String {
        let path = dir.join(name);
        fs::write(&path, format!("{body}\n")).unwrap();
        format!("sh {} {{netlist}}", path.display())
    }

    #[cfg(unix)]
    #[test]
    fn fake_engine_contracts() {
        let dir = tempfile::tempdir().unwrap();
        let n = parse_netlist("t\nR1 a 0 1k\nV1 a 0 1\n.op\n.end").unwrap();

        let ok = EngineConfig::new(script(dir.path(), "ok.sh", "test -f \"$1\" && echo 'v(a) = 1.0'"));
        let run = external_engine_run(&n, &ok, &dir.path().join("ok")).unwrap();
        assert_eq!(run.exit_code, 0);
        assert_eq!(run.node_voltages.unwrap()[&NodeId::new("a")], 1.0);
        assert!(fs::read_to_string(run.netlist_path).unwrap().ends_with(".end\n"));

        let failing = EngineConfig::new(script(dir.path(), "fail.sh", "echo boom >&2; exit 3"));
        match external_engine_run(&n, &failing, &dir.path().join("fail")) {
            Err(EngineError::EngineNonzeroExit { code, stderr }) => {
                assert_eq!(code, 3);
                assert!(stderr.contains("boom"));
            }
            other => panic!("{other:?}"),
        }

        let slow = EngineConfig {
            command: script(dir.path(), "slow.sh", "sleep 5"),
            timeout: Duration::from_millis(100),
        };
        assert!(matches!(
            external_engine_run(&n, &slow, &dir.path().join("slow")),
            Err(EngineError::EngineTimeout(_))
        ));
    }
}
