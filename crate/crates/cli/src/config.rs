//! The TOML file the CLI reads its model, sandbox and tool settings from.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use anyhow::{anyhow, Context, Result};
use serde::Deserialize;
use xmaster_core::agent::{Agent, AgentConfig};
use xmaster_core::eval::{default_judges, Judge, JudgeConfig};
use xmaster_core::llm_gateway::{default_providers, Gateway, ProviderConfig};
use xmaster_core::sandbox::{default_sandboxes, Sandbox, SandboxConfig};
use xmaster_core::workflow::WorkflowConfig;
use xmaster_tools::search::SearchProviderConfig;
use xmaster_tools::{Mode, ToolConfig};

pub const CONFIG_ENV: &str = "XMASTER_CONFIG";
pub const DEFAULT_CONFIG_FILE: &str = "xmaster.toml";
pub const JUDGE_KEY_ENV: &str = "JUDGE_API_KEY";

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CliConfig {
    pub model: Option<ProviderConfig>,
    /// Judge model; defaults to `model` authenticated with `JUDGE_API_KEY`.
    pub judge_model: Option<ProviderConfig>,
    pub judge_prompt: Option<String>,
    pub sandbox: Option<SandboxConfig>,
    pub agent: AgentConfig,
    pub workflow: WorkflowConfig,
    pub tools: ToolsSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToolsSection {
    pub search_provider: String,
    pub search_base_url: Option<String>,
    pub search_api_key_env: String,
    pub search_timeout_secs: u64,
    pub relevance: String,
    pub extractors: Vec<String>,
    pub fetch_timeout_secs: u64,
    pub respect_robots: bool,
    pub user_agent: Option<String>,
    pub ar5iv_base: String,
    pub arxiv_base: String,
    pub cache_dir: Option<PathBuf>,
}

impl Default for ToolsSection {
    fn default() -> Self {
        let tools = ToolConfig::default();
        let search = SearchProviderConfig::default();
        Self {
            search_provider: tools.search_provider,
            search_base_url: None,
            search_api_key_env: search.api_key_env,
            search_timeout_secs: search.timeout.as_secs(),
            relevance: tools.relevance,
            extractors: tools.extractors,
            fetch_timeout_secs: tools.fetch.timeout.as_secs(),
            respect_robots: tools.fetch.respect_robots,
            user_agent: None,
            ar5iv_base: tools.ar5iv_base,
            arxiv_base: tools.arxiv_base,
            cache_dir: None,
        }
    }
}

impl CliConfig {
    /// `explicit`, else `$XMASTER_CONFIG`, else `./xmaster.toml` if present,
    /// else defaults.
    pub fn load(explicit: Option<&Path>) -> Result<Self> {
        let path = match explicit {
            Some(p) => Some(p.to_path_buf()),
            None => match std::env::var_os(CONFIG_ENV) {
                Some(p) => Some(PathBuf::from(p)),
                None => Some(PathBuf::from(DEFAULT_CONFIG_FILE)).filter(|p| p.exists()),
            },
        };
        match path {
            Some(p) => Self::from_file(&p),
            None => Ok(Self::default()),
        }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let raw = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg: Self = toml::from_str(&raw).with_context(|| format!("parsing {}", path.display()))?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        Ok(cfg)
    }

    /// Relative script and cache paths are taken relative to the config file.
    fn resolve_paths(&mut self, base: &Path) {
        for model in [&mut self.model, &mut self.judge_model].into_iter().flatten() {
            if let Some(script) = &mut model.script {
                if script.is_relative() {
                    *script = base.join(&*script);
                }
            }
        }
        if let Some(dir) = &mut self.tools.cache_dir {
            if dir.is_relative() {
                *dir = base.join(&*dir);
            }
        }
    }

    pub fn gateway(&self) -> Result<Gateway> {
        let model = self
            .model
            .as_ref()
            .ok_or_else(|| anyhow!("no [model] section configured; pass --config or set {CONFIG_ENV}"))?;
        build_gateway(model)
    }

    pub fn judge_gateway(&self) -> Result<Gateway> {
        match &self.judge_model {
            Some(m) => build_gateway(m),
            None => {
                let mut m = self
                    .model
                    .clone()
                    .ok_or_else(|| anyhow!("the model judge needs a [judge_model] or [model] section"))?;
                if let Some(http) = &mut m.http {
                    if std::env::var_os(JUDGE_KEY_ENV).is_some() {
                        http.api_key_env = JUDGE_KEY_ENV.to_string();
                    }
                }
                build_gateway(&m)
            }
        }
    }

    pub fn sandbox(&self) -> Result<Arc<dyn Sandbox>> {
        let cfg = self.sandbox.clone().unwrap_or_else(|| {
            tracing::warn!("no [sandbox] configured; code blocks will not be executed");
            SandboxConfig {
                kind: "disabled".into(),
                stdio: None,
            }
        });
        Ok(default_sandboxes().build(&cfg.kind, &cfg)?)
    }

    pub fn agent(&self) -> Result<Agent> {
        Ok(Agent::new(self.gateway()?, self.sandbox()?, self.agent.clone())?)
    }

    /// The tool-using agent and, sharing its gateway, the same model without
    /// guidance or tools.
    pub fn agent_and_baseline(&self) -> Result<(Agent, Agent)> {
        let gw = self.gateway()?;
        let sandbox = self.sandbox()?;
        let agent = Agent::new(gw.clone(), sandbox.clone(), self.agent.clone())?;
        let baseline = Agent::new(gw, sandbox, self.agent.clone().without_tools())?;
        Ok((agent, baseline))
    }

    pub fn judge(&self, kind: &str) -> Result<Arc<dyn Judge>> {
        let gateway = match kind {
            "model" => Some(self.judge_gateway()?),
            _ => None,
        };
        let cfg = JudgeConfig {
            kind: kind.to_string(),
            gateway,
            prompt: self.judge_prompt.clone(),
        };
        Ok(default_judges().build(kind, &cfg)?)
    }

    pub fn tool_config(&self, mode: Mode) -> Result<ToolConfig> {
        let t = &self.tools;
        let defaults = ToolConfig::default();
        let gateway = match t.relevance.as_str() {
            "model" => Some(self.gateway()?),
            _ => None,
        };
        let mut fetch = defaults.fetch.clone();
        fetch.timeout = Duration::from_secs(t.fetch_timeout_secs);
        fetch.respect_robots = t.respect_robots;
        if let Some(ua) = &t.user_agent {
            fetch.user_agent = ua.clone();
        }
        Ok(ToolConfig {
            mode,
            search_provider: t.search_provider.clone(),
            search: SearchProviderConfig {
                base_url: t.search_base_url.clone(),
                api_key_env: t.search_api_key_env.clone(),
                timeout: Duration::from_secs(t.search_timeout_secs),
                ..SearchProviderConfig::default()
            },
            relevance: t.relevance.clone(),
            gateway,
            extractors: t.extractors.clone(),
            fetch,
            ar5iv_base: t.ar5iv_base.clone(),
            arxiv_base: t.arxiv_base.clone(),
            cache_dir: t.cache_dir.clone(),
        })
    }
}

fn build_gateway(model: &ProviderConfig) -> Result<Gateway> {
    let provider = default_providers().build(&model.kind, model)?;
    let mut gw = Gateway::new(provider);
    if let Some(n) = model.max_in_flight {
        gw = gw.with_max_in_flight(n);
    }
    Ok(gw)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_all_defaults() {
        let cfg: CliConfig = toml::from_str("").unwrap();
        assert!(cfg.model.is_none());
        assert_eq!(cfg.agent, AgentConfig::default());
        assert_eq!(cfg.workflow, WorkflowConfig::default());
        assert_eq!(cfg.tools.search_provider, "serper");
        assert!(cfg.tools.respect_robots);
    }

    #[test]
    fn sections_parse() {
        let cfg: CliConfig = toml::from_str(
            r#"
            [model]
            kind = "openai"
            max_in_flight = 8
            [model.http]
            endpoint = "http://localhost:8000/v1"
            model = "served-model"

            [sandbox]
            kind = "stdio"
            [sandbox.stdio]
            command = "python3"
            args = ["-m", "executor"]

            [agent]
            max_interactions = 7
            [agent.gen_params]
            temperature = 0.6
            stop_sequences = ["</code>"]

            [workflow]
            n_parallel = 3

            [tools]
            search_provider = "serpapi"
            respect_robots = false
            "#,
        )
        .unwrap();
        let model = cfg.model.as_ref().unwrap();
        assert_eq!(model.kind, "openai");
        assert_eq!(model.http.as_ref().unwrap().api_key_env, "LLM_API_KEY");
        assert_eq!(cfg.sandbox.as_ref().unwrap().stdio.as_ref().unwrap().args, ["-m", "executor"]);
        assert_eq!(cfg.agent.max_interactions, 7);
        assert_eq!(cfg.agent.answer_marker, AgentConfig::default().answer_marker);
        assert_eq!(cfg.workflow.n_parallel, 3);
        assert!(cfg.workflow.scatter);
        let tools = cfg.tool_config(Mode::Live).unwrap();
        assert_eq!(tools.search_provider, "serpapi");
        assert!(!tools.fetch.respect_robots);
    }

    #[test]
    fn tools_need_the_code_stop() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("s.json"), r#"[{"output": "x"}]"#).unwrap();
        let raw = "[model]\nkind = \"scripted\"\nscript = \"s.json\"\n[agent.gen_params]\ntemperature = 0.0\n";
        std::fs::write(dir.path().join("x.toml"), raw).unwrap();
        let cfg = CliConfig::from_file(&dir.path().join("x.toml")).unwrap();
        let err = cfg.agent().unwrap_err().to_string();
        assert!(err.contains("</code>"), "{err}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<CliConfig>("[modle]\nkind = \"x\"").is_err());
    }

    #[test]
    fn missing_model_is_reported() {
        let err = CliConfig::default().gateway().unwrap_err().to_string();
        assert!(err.contains("[model]"), "{err}");
    }

    #[test]
    fn script_path_is_relative_to_the_file() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("x.toml"), "[model]\nkind = \"scripted\"\nscript = \"s.json\"\n").unwrap();
        let cfg = CliConfig::from_file(&dir.path().join("x.toml")).unwrap();
        assert_eq!(cfg.model.unwrap().script.unwrap(), dir.path().join("s.json"));
    }
}
