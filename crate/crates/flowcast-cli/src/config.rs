//! Run configuration: a sectioned TOML file with per-command flag overrides.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Deserialize;

use flowcast::event_catalog::{EventType, FilterRules};
use flowcast::features::FeatureSet;
use flowcast::llm_gateway::{GatewayConfig, GatewayMode, RetryPolicy};
use flowcast::models::{GbdtParams, RfParams};
use flowcast::popularity::SelectionConfig;
use flowcast::rolling::{GridSpec, ModelSpec};
use flowcast::synth::SynthConfig;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    #[serde(default)]
    pub paths: PathsConfig,
    #[serde(default)]
    pub gateway: GatewaySection,
    #[serde(default)]
    pub selection: SelectionSection,
    #[serde(default)]
    pub filter: FilterSection,
    #[serde(default)]
    pub structure: StructureSection,
    #[serde(default)]
    pub features: FeaturesSection,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub rolling: RollingSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub synth: SynthSection,
    #[serde(default)]
    pub explain: ExplainSection,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let body = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        let cfg: RunConfig =
            toml::from_str(&body).map_err(|e| format!("config {}: {e}", path.display()))?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsConfig {
    pub events_raw: PathBuf,
    pub events: PathBuf,
    pub posts: PathBuf,
    pub relevance: PathBuf,
    pub popularity: PathBuf,
    pub flows: PathBuf,
    pub weather: PathBuf,
    pub holidays: PathBuf,
    pub features_dir: PathBuf,
    pub reports_dir: PathBuf,
    pub model: PathBuf,
}

impl Default for PathsConfig {
    fn default() -> Self {
        Self {
            events_raw: "data/events_raw.jsonl".into(),
            events: "data/events.json".into(),
            posts: "data/posts.jsonl".into(),
            relevance: "data/relevance.csv".into(),
            popularity: "data/popularity.csv".into(),
            flows: "data/flows.csv".into(),
            weather: "data/weather.csv".into(),
            holidays: "data/holidays.csv".into(),
            features_dir: "data".into(),
            reports_dir: "reports".into(),
            model: "reports/model.json".into(),
        }
    }
}

impl PathsConfig {
    pub fn features_file(&self, set: FeatureSet) -> PathBuf {
        self.features_dir.join(format!("features_{}.csv", set.name()))
    }

    /// Resolve every relative path against the config file's directory.
    pub fn resolve_relative_to(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&p);
            }
        };
        fix(&mut self.events_raw);
        fix(&mut self.events);
        fix(&mut self.posts);
        fix(&mut self.relevance);
        fix(&mut self.popularity);
        fix(&mut self.flows);
        fix(&mut self.weather);
        fix(&mut self.holidays);
        fix(&mut self.features_dir);
        fix(&mut self.reports_dir);
        fix(&mut self.model);
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GatewaySection {
    pub mode: String,
    pub endpoint_url: String,
    pub model_name: String,
    pub temperature: f64,
    pub max_in_flight: usize,
    pub retry_max_attempts: u32,
    pub retry_base_backoff_ms: u64,
    pub api_key_env: String,
}

impl Default for GatewaySection {
    fn default() -> Self {
        let d = GatewayConfig::default();
        Self {
            mode: "mock".into(),
            endpoint_url: d.endpoint_url,
            model_name: d.model_name,
            temperature: d.temperature,
            max_in_flight: d.max_in_flight,
            retry_max_attempts: d.retry.max_attempts,
            retry_base_backoff_ms: d.retry.base_backoff.as_millis() as u64,
            api_key_env: d.api_key_env,
        }
    }
}

impl GatewaySection {
    pub fn to_gateway_config(&self) -> Result<GatewayConfig, String> {
        let mode = match self.mode.as_str() {
            "mock" => GatewayMode::Mock,
            "remote" => GatewayMode::Remote,
            other => return Err(format!("gateway.mode must be mock or remote, got {other:?}")),
        };
        Ok(GatewayConfig {
            endpoint_url: self.endpoint_url.clone(),
            model_name: self.model_name.clone(),
            temperature: self.temperature,
            max_in_flight: self.max_in_flight,
            retry: RetryPolicy {
                max_attempts: self.retry_max_attempts,
                base_backoff: Duration::from_millis(self.retry_base_backoff_ms),
            },
            mode,
            api_key_env: self.api_key_env.clone(),
        })
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SelectionSection {
    pub top_g: usize,
    pub temporal_threshold_days: i64,
}

impl Default for SelectionSection {
    fn default() -> Self {
        let d = SelectionConfig::default();
        Self { top_g: d.top_g, temporal_threshold_days: d.temporal_threshold_days }
    }
}

impl SelectionSection {
    pub fn to_selection_config(&self) -> SelectionConfig {
        SelectionConfig {
            top_g: self.top_g,
            temporal_threshold_days: self.temporal_threshold_days,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FilterSection {
    pub allowed_types: Vec<String>,
    pub max_sessions: usize,
    pub venue_whitelist: Vec<String>,
}

impl Default for FilterSection {
    fn default() -> Self {
        Self {
            allowed_types: vec!["concert".into(), "exhibition".into(), "sports".into(), "fireworks".into()],
            max_sessions: 30,
            venue_whitelist: vec![],
        }
    }
}

impl FilterSection {
    pub fn to_filter_rules(&self) -> Result<FilterRules, String> {
        let mut allowed = BTreeSet::new();
        for name in &self.allowed_types {
            let ty = EventType::parse(name)
                .ok_or_else(|| format!("filter.allowed_types: unknown event type {name:?}"))?;
            allowed.insert(ty);
        }
        if self.max_sessions < 1 {
            return Err("filter.max_sessions must be >= 1".into());
        }
        Ok(FilterRules {
            allowed_types: allowed,
            max_sessions: self.max_sessions,
            venue_whitelist: self.venue_whitelist.iter().cloned().collect(),
        })
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StructureSection {
    pub token_budget: usize,
    pub language: String,
}

impl Default for StructureSection {
    fn default() -> Self {
        Self { token_budget: 120, language: "Chinese".into() }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeaturesSection {
    pub set: String,
    pub wma_window: usize,
    pub segment: String,
    /// Optional explicit range (ISO dates); defaults to the flow coverage
    /// minus the history needed by the trend feature.
    pub start_date: Option<chrono::NaiveDate>,
    pub end_date: Option<chrono::NaiveDate>,
}

impl Default for FeaturesSection {
    fn default() -> Self {
        Self {
            set: "FS5".into(),
            wma_window: 10,
            segment: "all".into(),
            start_date: None,
            end_date: None,
        }
    }
}

impl FeaturesSection {
    pub fn feature_set(&self) -> Result<FeatureSet, String> {
        FeatureSet::parse(&self.set)
            .ok_or_else(|| format!("features.set must be FS1..FS5, got {:?}", self.set))
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub kind: String,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub n_estimators: usize,
    pub weight_decay: f64,
    pub min_samples_leaf: usize,
    pub n_trees: usize,
    pub mtry: usize,
    pub bootstrap: bool,
    pub p: usize,
    pub d: usize,
    pub q: usize,
}

impl Default for ModelSection {
    fn default() -> Self {
        let g = GbdtParams::default();
        let rf = RfParams::default();
        Self {
            kind: "gbdt".into(),
            learning_rate: g.learning_rate,
            max_depth: g.max_depth,
            n_estimators: g.n_estimators,
            weight_decay: g.weight_decay,
            min_samples_leaf: g.min_samples_leaf,
            n_trees: rf.n_trees,
            mtry: 0,
            bootstrap: rf.bootstrap,
            p: 1,
            d: 0,
            q: 0,
        }
    }
}

impl ModelSection {
    pub fn gbdt_params(&self, seed: u64) -> GbdtParams {
        GbdtParams {
            learning_rate: self.learning_rate,
            max_depth: self.max_depth,
            n_estimators: self.n_estimators,
            weight_decay: self.weight_decay,
            min_samples_leaf: self.min_samples_leaf,
            random_seed: seed,
        }
    }

    pub fn to_model_spec(&self, seed: u64) -> Result<ModelSpec, String> {
        match self.kind.as_str() {
            "gbdt" => Ok(ModelSpec::Gbdt(self.gbdt_params(seed))),
            "linear" => Ok(ModelSpec::Linear { weight_decay: self.weight_decay }),
            "rf" => Ok(ModelSpec::RandomForest {
                params: RfParams {
                    n_trees: self.n_trees,
                    max_depth: self.max_depth,
                    min_samples_leaf: self.min_samples_leaf,
                    mtry: if self.mtry == 0 { None } else { Some(self.mtry) },
                    bootstrap: self.bootstrap,
                    seed,
                },
                weight_decay: self.weight_decay,
            }),
            "arima" => Ok(ModelSpec::Arima { p: self.p, d: self.d, q: self.q }),
            other => Err(format!("model.kind must be gbdt, linear, rf, or arima; got {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RollingSection {
    pub first_origin: usize,
    pub horizon: usize,
}

impl Default for RollingSection {
    fn default() -> Self {
        Self { first_origin: 365, horizon: 1 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub learning_rates: Vec<f64>,
    pub max_depths: Vec<usize>,
    pub n_estimators: Vec<usize>,
    pub weight_decays: Vec<f64>,
    /// Origin used by the grid search (one-day horizon).
    pub first_origin: Option<usize>,
}

impl Default for GridSection {
    fn default() -> Self {
        let d = GridSpec::default();
        Self {
            learning_rates: d.learning_rates,
            max_depths: d.max_depths,
            n_estimators: d.n_estimators,
            weight_decays: d.weight_decays,
            first_origin: None,
        }
    }
}

impl GridSection {
    pub fn to_grid_spec(&self) -> GridSpec {
        GridSpec {
            learning_rates: self.learning_rates.clone(),
            max_depths: self.max_depths.clone(),
            n_estimators: self.n_estimators.clone(),
            weight_decays: self.weight_decays.clone(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthSection {
    pub n_days: usize,
    pub start_date: Option<chrono::NaiveDate>,
    pub noise_sigma: Option<f64>,
}

impl Default for SynthSection {
    fn default() -> Self {
        Self { n_days: SynthConfig::default().n_days, start_date: None, noise_sigma: None }
    }
}

impl SynthSection {
    pub fn to_synth_config(&self, seed: u64) -> SynthConfig {
        let mut cfg = SynthConfig { n_days: self.n_days, seed, ..Default::default() };
        if let Some(start) = self.start_date {
            cfg.start_date = start;
        }
        if let Some(sigma) = self.noise_sigma {
            cfg.noise_sigma = sigma;
        }
        cfg
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExplainSection {
    pub top_k: usize,
    pub permutation: bool,
    pub permutation_repeats: usize,
}

impl Default for ExplainSection {
    fn default() -> Self {
        Self { top_k: 10, permutation: false, permutation_repeats: 5 }
    }
}
