//! TOML configuration for benchmark runs.
//!
//! Relative paths resolve against the config file's directory. API keys are
//! never read from the file, only from the environment variable it names.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use serde::Deserialize;
use spicepilot_core::harness::LiveConfig;
use spicepilot_core::sim::SimOptions;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProviderBlock {
    pub endpoint: String,
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub api_key_env: String,
    pub concurrency: usize,
    pub timeout: u64,
    pub max_retries: u32,
    pub backoff_ms: u64,
    pub min_interval_ms: u64,
}

impl Default for ProviderBlock {
    fn default() -> Self {
        let live = LiveConfig::default();
        ProviderBlock {
            endpoint: live.endpoint,
            model: live.model,
            temperature: live.temperature,
            max_tokens: live.max_tokens,
            api_key_env: "OPENAI_API_KEY".to_string(),
            concurrency: 1,
            timeout: live.timeout.as_secs(),
            max_retries: live.max_retries,
            backoff_ms: live.backoff.as_millis() as u64,
            min_interval_ms: 0,
        }
    }
}

impl ProviderBlock {
    pub fn live_config(&self) -> LiveConfig {
        LiveConfig {
            endpoint: self.endpoint.clone(),
            model: self.model.clone(),
            temperature: self.temperature,
            max_tokens: self.max_tokens,
            timeout: Duration::from_secs(self.timeout),
            max_retries: self.max_retries,
            backoff: Duration::from_millis(self.backoff_ms),
            min_interval: Duration::from_millis(self.min_interval_ms),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchBlock {
    pub n_attempts: u32,
    pub max_iters: u32,
    pub ks: Vec<u64>,
}

impl Default for BenchBlock {
    fn default() -> Self {
        BenchBlock {
            n_attempts: 5,
            max_iters: 3,
            ks: vec![1, 5],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(default)]
pub struct SimBlock {
    #[serde(flatten)]
    pub options: SimOptions,
    /// External engine command template with a `{netlist}` placeholder.
    pub engine: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsBlock {
    pub suite: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
    pub runs: Option<PathBuf>,
    pub replay: Option<PathBuf>,
    /// Pilot prompt JSON; the built-in guideline set when absent.
    pub prompt: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CliConfig {
    pub provider: ProviderBlock,
    pub bench: BenchBlock,
    pub sim: SimBlock,
    pub paths: PathsBlock,
}

fn find_secret(value: &toml::Value, at: &str) -> Option<String> {
    match value {
        toml::Value::Table(table) => table.iter().find_map(|(k, v)| {
            let path = if at.is_empty() { k.clone() } else { format!("{at}.{k}") };
            let key = k.to_ascii_lowercase();
            if key == "api_key" || key == "apikey" || key == "key" || key == "token" {
                Some(path)
            } else {
                find_secret(v, &path)
            }
        }),
        _ => None,
    }
}

impl CliConfig {
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let raw: toml::Value = toml::from_str(text).context("malformed config")?;
        if let Some(key) = find_secret(&raw, "") {
            bail!("config sets `{key}`; API keys must come from the environment variable named by provider.api_key_env");
        }
        let mut config: CliConfig = toml::from_str(text).context("invalid config")?;
        config.sim.options.validate()?;
        if config.bench.n_attempts == 0 || config.bench.max_iters == 0 {
            bail!("bench.n_attempts and bench.max_iters must be at least 1");
        }
        let paths = &mut config.paths;
        for p in [
            &mut paths.suite,
            &mut paths.dataset,
            &mut paths.runs,
            &mut paths.replay,
            &mut paths.prompt,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base).with_context(|| format!("config {}", path.display()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paths_resolve_against_config_dir() {
        let c = CliConfig::parse(
            "[paths]\nsuite = \"tasks.json\"\nreplay = \"/abs/replay\"\n[sim]\nreltol = 1e-5\n",
            Path::new("/etc/sp"),
        )
        .unwrap();
        assert_eq!(c.paths.suite.unwrap(), Path::new("/etc/sp/tasks.json"));
        assert_eq!(c.paths.replay.unwrap(), Path::new("/abs/replay"));
        assert_eq!(c.sim.options.reltol, 1e-5);
        assert_eq!(c.bench.ks, [1, 5]);
    }

    #[test]
    fn api_key_rejected() {
        let err = CliConfig::parse("[provider]\napi_key = \"sk-123\"\n", Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("provider.api_key"));
        assert!(CliConfig::parse("[provider]\napi_key_env = \"MY_KEY\"\n", Path::new(".")).is_ok());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(CliConfig::parse("[bench]\nattempts = 3\n", Path::new(".")).is_err());
        assert!(CliConfig::parse("[bench]\nn_attempts = 0\n", Path::new(".")).is_err());
    }
}
