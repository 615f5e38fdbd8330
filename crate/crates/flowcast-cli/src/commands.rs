//! Command implementations: each fronts one module operation chain and
//! writes its outputs atomically.

use std::collections::BTreeMap;

use chrono::{Duration, NaiveDate, NaiveDateTime};
use rayon::prelude::*;

use flowcast::attribution::{
    export_summary, permutation_importance, tree_shap, ImportanceMetric,
};
use flowcast::event_catalog::{classify, filter_events, structure_sessions, summarize_description, Event};
use flowcast::features::{assemble, AssemblyInputs, FeatureMatrix, FeatureSet};
use flowcast::io;
use flowcast::llm_gateway::{relevance_check, LlmGateway};
use flowcast::popularity::{compute_metrics, PopularityMetrics, Post};
use flowcast::rolling::{
    ablation as run_ablation, grid_search, run_rolling, ModelSpec, RollingConfig,
};
use flowcast::synth::{generate, CorpusPaths};

use crate::config::RunConfig;
use crate::CliError;

pub fn synth(config: &RunConfig, days: Option<usize>) -> Result<(), CliError> {
    let mut synth_cfg = config.synth.to_synth_config(config.seed);
    if let Some(days) = days {
        synth_cfg.n_days = days;
    }
    let corpus = generate(&synth_cfg).map_err(CliError::domain)?;
    let paths = CorpusPaths {
        events: config.paths.events.clone(),
        posts: config.paths.posts.clone(),
        relevance: config.paths.relevance.clone(),
        flows: config.paths.flows.clone(),
        weather: config.paths.weather.clone(),
        holidays: config.paths.holidays.clone(),
        ground_truth: config.paths.reports_dir.join("ground_truth.json"),
    };
    corpus.write(&paths)?;
    println!(
        "synth: {} days, {} events, {} posts -> {}",
        synth_cfg.n_days,
        corpus.events.len(),
        corpus.posts.len(),
        config.paths.flows.parent().unwrap_or(std::path::Path::new(".")).display()
    );
    Ok(())
}

fn build_gateway(config: &RunConfig) -> Result<LlmGateway, CliError> {
    let gateway_config = config.gateway.to_gateway_config().map_err(CliError::Config)?;
    LlmGateway::new(gateway_config).map_err(|e| CliError::Config(e.to_string()))
}

fn confirm_remote(config: &RunConfig, yes: bool, calls: usize, what: &str) -> Result<(), CliError> {
    if config.gateway.mode != "remote" {
        return Ok(());
    }
    eprintln!(
        "remote gateway: about {calls} requests to {} ({what})",
        config.gateway.endpoint_url
    );
    if !yes {
        return Err(CliError::Config(
            "remote requests need confirmation; rerun with --yes to proceed".into(),
        ));
    }
    Ok(())
}

pub fn structure(config: &RunConfig, yes: bool) -> Result<(), CliError> {
    let raw_events = io::read_raw_events(&config.paths.events_raw)?;
    confirm_remote(config, yes, raw_events.len() * 3, "3 per raw event")?;
    let gateway = build_gateway(config)?;
    let rules = config.filter.to_filter_rules().map_err(CliError::Config)?;
    let structured: Vec<Event> = raw_events
        .par_iter()
        .map(|raw| -> Result<Event, CliError> {
            let sessions = structure_sessions(raw, &gateway).map_err(CliError::domain)?;
            let summary = summarize_description(
                &raw.raw_description,
                &gateway,
                config.structure.token_budget,
                &config.structure.language,
            )
            .map_err(CliError::domain)?;
            let event_type = classify(&raw.title, &summary, &gateway).map_err(CliError::domain)?;
            Ok(Event {
                event_id: raw.event_id.clone(),
                title: raw.title.clone(),
                event_type,
                summary,
                venue: raw.venue_text.clone(),
                sessions,
                source: Some(raw.source),
            })
        })
        .collect::<Result<_, _>>()?;
    let kept = filter_events(&structured, &rules);
    io::write_events(&config.paths.events, &kept)?;
    println!("structure: {} raw -> {} structured -> {} kept", raw_events.len(), structured.len(), kept.len());
    Ok(())
}

pub fn relevance(config: &RunConfig, yes: bool) -> Result<(), CliError> {
    let events = io::read_events(&config.paths.events)?;
    let posts = io::read_posts(&config.paths.posts)?;
    confirm_remote(config, yes, events.len() * posts.len(), "one per event-post pair")?;
    let gateway = build_gateway(config)?;
    let records: Vec<io::RelevanceRecord> = events
        .par_iter()
        .map(|event| -> Result<Vec<io::RelevanceRecord>, CliError> {
            posts
                .iter()
                .map(|post| {
                    let related =
                        relevance_check(event, post, &gateway).map_err(CliError::domain)?;
                    Ok(io::RelevanceRecord {
                        event_id: event.event_id.clone(),
                        post_id: post.post_id.clone(),
                        related: related as u8,
                    })
                })
                .collect()
        })
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .flatten()
        .collect();
    let related = records.iter().filter(|r| r.related == 1).count();
    io::write_relevance(&config.paths.relevance, &records)?;
    println!("relevance: {} pairs, {} related", records.len(), related);
    Ok(())
}

fn derive_metrics(
    config: &RunConfig,
    cutoff: Option<NaiveDateTime>,
) -> Result<Vec<PopularityMetrics>, CliError> {
    let events = io::read_events(&config.paths.events)?;
    let posts = io::read_posts(&config.paths.posts)?;
    let relevance = io::read_relevance(&config.paths.relevance)?;
    let selection = config.selection.to_selection_config();
    let post_by_id: BTreeMap<&str, &Post> =
        posts.iter().map(|p| (p.post_id.as_str(), p)).collect();
    let mut metrics = Vec::with_capacity(events.len());
    for event in &events {
        let related: Vec<Post> = relevance
            .iter()
            .filter(|r| r.related == 1 && r.event_id == event.event_id)
            .filter_map(|r| post_by_id.get(r.post_id.as_str()).map(|&p| p.clone()))
            .collect();
        let m = compute_metrics(event, &related, &selection, cutoff).map_err(CliError::domain)?;
        metrics.push(m);
    }
    Ok(metrics)
}

pub fn popularity(config: &RunConfig, cutoff: Option<NaiveDateTime>) -> Result<(), CliError> {
    let metrics = derive_metrics(config, cutoff)?;
    io::write_popularity(&config.paths.popularity, &metrics)?;
    println!("popularity: {} events -> {}", metrics.len(), config.paths.popularity.display());
    Ok(())
}

/// Shared input loading for features / ablation.
struct FeatureInputs {
    flows: BTreeMap<NaiveDate, f64>,
    weather: BTreeMap<NaiveDate, flowcast::features::WeatherRecord>,
    calendar: flowcast::features::CalendarContext,
    events: Vec<Event>,
    metrics: Vec<PopularityMetrics>,
}

fn load_feature_inputs(config: &RunConfig, segment: &str) -> Result<FeatureInputs, CliError> {
    let flows = io::read_flows(&config.paths.flows, Some(segment))?;
    let weather = io::read_weather(&config.paths.weather)?;
    let calendar = io::read_holidays(&config.paths.holidays)?;
    let events = io::read_events(&config.paths.events)?;
    // popularity.csv is an optional intermediate; derive the metrics from
    // posts + relevance when it has not been materialized yet.
    let metrics = if config.paths.popularity.exists() {
        io::read_popularity(&config.paths.popularity)?
    } else {
        log::info!(
            "{} not found; deriving popularity metrics in memory",
            config.paths.popularity.display()
        );
        derive_metrics(config, None)?
    };
    Ok(FeatureInputs { flows, weather, calendar, events, metrics })
}

fn feature_range(
    config: &RunConfig,
    flows: &BTreeMap<NaiveDate, f64>,
) -> Result<(NaiveDate, NaiveDate), CliError> {
    let first = *flows.keys().next().ok_or_else(|| CliError::Config("flows are empty".into()))?;
    let last = *flows.keys().last().unwrap();
    let start = config
        .features
        .start_date
        .unwrap_or(first + Duration::days(config.features.wma_window as i64 + 1));
    let end = config.features.end_date.unwrap_or(last);
    Ok((start, end))
}

fn assemble_set(
    config: &RunConfig,
    inputs: &FeatureInputs,
    set: FeatureSet,
) -> Result<FeatureMatrix, CliError> {
    let range = feature_range(config, &inputs.flows)?;
    assemble(
        range,
        &AssemblyInputs {
            flows: &inputs.flows,
            weather: &inputs.weather,
            calendar: &inputs.calendar,
            events: &inputs.events,
            metrics: &inputs.metrics,
        },
        set,
        config.features.wma_window,
    )
    .map_err(CliError::domain)
}

pub fn features(config: &RunConfig, set: Option<String>, all: bool) -> Result<(), CliError> {
    let inputs = load_feature_inputs(config, &config.features.segment)?;
    let sets: Vec<FeatureSet> = if all {
        FeatureSet::ALL.to_vec()
    } else {
        vec![resolve_set(config, set)?]
    };
    for fs in sets {
        let matrix = assemble_set(config, &inputs, fs)?;
        let path = config.paths.features_file(fs);
        io::write_feature_matrix(&path, &matrix)?;
        println!(
            "features: {} -> {} ({} days x {} columns)",
            fs.name(),
            path.display(),
            matrix.n_rows(),
            matrix.n_cols()
        );
    }
    Ok(())
}

fn resolve_set(config: &RunConfig, flag: Option<String>) -> Result<FeatureSet, CliError> {
    match flag {
        Some(name) => FeatureSet::parse(&name)
            .ok_or_else(|| CliError::Config(format!("unknown feature set {name:?}"))),
        None => config.features.feature_set().map_err(CliError::Config),
    }
}

pub fn train(config: &RunConfig, set: Option<String>) -> Result<(), CliError> {
    let fs = resolve_set(config, set)?;
    let matrix = io::read_feature_matrix(&config.paths.features_file(fs), fs)?;
    let spec = config.model.to_model_spec(config.seed).map_err(CliError::Config)?;
    let saved = match &spec {
        ModelSpec::Gbdt(params) => {
            let w = flowcast::models::sample_weights(matrix.target.len(), params.weight_decay);
            let model =
                flowcast::models::fit_gbdt_weighted(&matrix.values, &matrix.target, &w, params)
                    .map_err(CliError::domain)?;
            io::SavedModel::Gbdt(model)
        }
        ModelSpec::Linear { weight_decay } => {
            let w = flowcast::models::sample_weights(matrix.target.len(), *weight_decay);
            let model = flowcast::models::fit_linear(&matrix.values, &matrix.target, &w)
                .map_err(CliError::domain)?;
            io::SavedModel::Linear(model)
        }
        ModelSpec::RandomForest { params, weight_decay } => {
            let w = flowcast::models::sample_weights(matrix.target.len(), *weight_decay);
            let model = flowcast::models::fit_rf(&matrix.values, &matrix.target, &w, params)
                .map_err(CliError::domain)?;
            io::SavedModel::Rf(model)
        }
        ModelSpec::Arima { p, d, q } => {
            let model = flowcast::models::fit_arima(&matrix.target, *p, *d, *q)
                .map_err(CliError::domain)?;
            io::SavedModel::Arima(model)
        }
    };
    io::write_model(&config.paths.model, &saved)?;
    println!("train: {} on {} -> {}", config.model.kind, fs.name(), config.paths.model.display());
    Ok(())
}

pub fn rolling(
    config: &RunConfig,
    set: Option<String>,
    horizon: Option<usize>,
    segment: Option<String>,
    json: bool,
) -> Result<(), CliError> {
    let horizon = horizon.unwrap_or(config.rolling.horizon);
    if !(1..=7).contains(&horizon) {
        return Err(CliError::Config(format!(
            "horizon {horizon} outside the allowed range 1..7"
        )));
    }
    let fs = resolve_set(config, set)?;
    let matrix = match segment {
        // A non-default segment needs reassembly from that segment's flows.
        Some(seg) if seg != config.features.segment => {
            let inputs = load_feature_inputs(config, &seg)?;
            assemble_set(config, &inputs, fs)?
        }
        _ => io::read_feature_matrix(&config.paths.features_file(fs), fs)?,
    };
    let spec = config.model.to_model_spec(config.seed).map_err(CliError::Config)?;
    let cfg = RollingConfig { first_origin: config.rolling.first_origin, horizon };
    let report = run_rolling(&matrix, &spec, &cfg).map_err(CliError::domain)?;
    let file = io::RollingReportFile { model: spec, report };
    let path = config.paths.reports_dir.join("rolling_report.json");
    io::write_rolling_report(&path, &file)?;
    if json {
        println!("{}", serde_json::to_string_pretty(&file).expect("report serializes"));
    } else {
        println!(
            "rolling: {} horizon {} -> R2 {:.4}, MAE {:.2} over {} days ({})",
            fs.name(),
            horizon,
            file.report.r2,
            file.report.mae,
            file.report.days.len(),
            path.display()
        );
    }
    Ok(())
}

pub fn gridsearch(
    config: &RunConfig,
    first_origin: Option<usize>,
    json: bool,
) -> Result<(), CliError> {
    let fs = config.features.feature_set().map_err(CliError::Config)?;
    let matrix = io::read_feature_matrix(&config.paths.features_file(fs), fs)?;
    let grid = config.grid.to_grid_spec();
    let base = config.model.gbdt_params(config.seed);
    let origin = first_origin
        .or(config.grid.first_origin)
        .unwrap_or(config.rolling.first_origin);
    let result = grid_search(&matrix, &base, origin, &grid).map_err(CliError::domain)?;
    let path = config.paths.reports_dir.join("grid_results.csv");
    io::write_grid_results(&path, &result.rows)?;
    if json {
        println!("{}", serde_json::to_string_pretty(&result).expect("grid serializes"));
    } else {
        let b = &result.best;
        println!(
            "gridsearch: {} combinations -> best lr {}, depth {}, {} trees, decay {} ({})",
            result.rows.len(),
            b.learning_rate,
            b.max_depth,
            b.n_estimators,
            b.weight_decay,
            path.display()
        );
    }
    Ok(())
}

pub fn ablation(config: &RunConfig, horizon: Option<usize>, json: bool) -> Result<(), CliError> {
    let horizon = horizon.unwrap_or(config.rolling.horizon);
    if !(1..=7).contains(&horizon) {
        return Err(CliError::Config(format!(
            "horizon {horizon} outside the allowed range 1..7"
        )));
    }
    let inputs = load_feature_inputs(config, &config.features.segment)?;
    let matrices: Vec<FeatureMatrix> = FeatureSet::ALL
        .iter()
        .map(|&fs| assemble_set(config, &inputs, fs))
        .collect::<Result<_, _>>()?;
    let spec = config.model.to_model_spec(config.seed).map_err(CliError::Config)?;
    let cfg = RollingConfig { first_origin: config.rolling.first_origin, horizon };
    let rows = run_ablation(&matrices, &spec, &cfg).map_err(CliError::domain)?;
    let path = config.paths.reports_dir.join("ablation.csv");
    io::write_ablation(&path, &rows)?;
    if json {
        println!("{}", serde_json::to_string_pretty(&rows).expect("rows serialize"));
    } else {
        for row in &rows {
            println!("ablation: {} R2 {:.4} MAE {:.2}", row.feature_set.name(), row.r2, row.mae);
        }
        println!("ablation: -> {}", path.display());
    }
    Ok(())
}

pub fn explain(
    config: &RunConfig,
    top_k: Option<usize>,
    permutation: bool,
    json: bool,
) -> Result<(), CliError> {
    let fs = config.features.feature_set().map_err(CliError::Config)?;
    let matrix = io::read_feature_matrix(&config.paths.features_file(fs), fs)?;
    let saved = io::read_model(&config.paths.model)?;
    let io::SavedModel::Gbdt(model) = saved else {
        return Err(CliError::Domain(
            "attribution needs the boosted-tree model; linear and ARIMA baselines expose coefficients instead".into(),
        ));
    };
    let shap = tree_shap(&model, &matrix.values, &matrix.columns).map_err(CliError::domain)?;
    let top_k = top_k.unwrap_or(config.explain.top_k);
    let (report, points) = export_summary(&shap, &matrix.values, top_k).map_err(CliError::domain)?;
    io::write_shap_values(
        &config.paths.reports_dir.join("shap_values.csv"),
        &shap,
        Some(&matrix.dates),
    )?;
    io::write_importance(&config.paths.reports_dir.join("importance.json"), &report)?;
    io::write_summary_points(&config.paths.reports_dir.join("summary_points.csv"), &points)?;
    if permutation || config.explain.permutation {
        let perm = permutation_importance(
            &model,
            &matrix.values,
            &matrix.target,
            &matrix.columns,
            ImportanceMetric::Mse,
            config.explain.permutation_repeats,
            config.seed,
        )
        .map_err(CliError::domain)?;
        io::write_importance(
            &config.paths.reports_dir.join("importance_permutation.json"),
            &perm,
        )?;
    }
    if json {
        println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    } else {
        for (i, fi) in report.top(top_k).iter().enumerate() {
            println!("explain: #{:<2} {:<28} {:.2}", i + 1, fi.feature, fi.score);
        }
        println!("explain: -> {}", config.paths.reports_dir.join("importance.json").display());
    }
    Ok(())
}

