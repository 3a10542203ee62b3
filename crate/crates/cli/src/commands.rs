use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use ambihedge::domain::{AmbiguityProfile, RespondentId};
use ambihedge::econometrics::{attenuation_monte_carlo, correlation_matrix, fit_mnl, fit_probit, RegressionSpec};
use ambihedge::elicitation::{read_transcripts, write_transcripts, IntervalPanel};
use ambihedge::estimate::{recover_population, write_results_table};
use ambihedge::pipeline::synthetic::generate_study;
use ambihedge::pipeline::{
    build_analysis, descriptive_table, duration_correlation, mnl_frame, read_attitudes, read_covariates,
    read_history, read_measurements, regression_frame, regression_spec, render_correlation_table,
    render_descriptive_table, render_duration_table, render_regression_table, variable_frame, write_covariates,
    write_history, write_measurements, AnalysisRow, MnlCategory, Occupation, OutcomeKind, RegressionTable,
    SampleFilter, StudyInputs, BINARY_REGRESSORS, REGRESSORS,
};
use ambihedge::simulate::{sample_population, simulate_panel};
use ambihedge_service::{SeedSource, SessionStore};
use anyhow::Context;
use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::manifest::Manifest;

pub const TRANSCRIPTS: &str = "transcripts.jsonl";
pub const TRUTH: &str = "truth.csv";
pub const HISTORY: &str = "history.csv";
pub const COVARIATES: &str = "covariates.csv";
pub const MEASUREMENTS: &str = "measurements.csv";
pub const ESTIMATES: &str = "estimates.csv";

/// Known structural parameters of a simulated respondent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct TruthRow {
    respondent: RespondentId,
    aversion: f64,
    sensitivity: f64,
    error_sd: f64,
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn open(path: &Path) -> anyhow::Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?))
}

fn write_text(path: &Path, text: &str, manifest: &mut Manifest) -> anyhow::Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    manifest.output(path)
}

fn finish(manifest: &Manifest, out: &Path) -> anyhow::Result<()> {
    let path = manifest.write(out)?;
    for o in &manifest.outputs {
        println!("wrote {}", o.path.display());
    }
    println!("wrote {}", path.display());
    Ok(())
}

pub fn simulate(cfg: Config) -> anyhow::Result<()> {
    let (cfg, seeds) = cfg.seeded();
    let mut manifest = Manifest::new("simulate", &cfg, seeds);
    let out = cfg.out.clone();

    let agents = sample_population(&cfg.population)?;
    let transcripts = simulate_panel(&agents, cfg.population.waves, cfg.simulation.depth, seeds.panel)?;
    let path = out.join(TRANSCRIPTS);
    write_transcripts(create(&path)?, &transcripts)?;
    manifest.output(&path)?;

    let path = out.join(TRUTH);
    {
        let mut w = csv::Writer::from_writer(create(&path)?);
        for a in &agents {
            w.serialize(TruthRow {
                respondent: a.id.clone(),
                aversion: a.profile.aversion,
                sensitivity: a.profile.sensitivity,
                error_sd: a.profile.error_sd,
            })?;
        }
        w.flush()?;
    }
    manifest.output(&path)?;

    let study = generate_study(&agents, &cfg.study, seeds.study);
    let path = out.join(HISTORY);
    write_history(create(&path)?, &study.history)?;
    manifest.output(&path)?;
    let path = out.join(COVARIATES);
    write_covariates(create(&path)?, &study.covariates)?;
    manifest.output(&path)?;
    let path = out.join(MEASUREMENTS);
    write_measurements(create(&path)?, &study.measurements)?;
    manifest.output(&path)?;
    finish(&manifest, &out)
}

fn read_truth(path: &Path) -> anyhow::Result<BTreeMap<RespondentId, AmbiguityProfile<f64>>> {
    let mut r = csv::Reader::from_reader(open(path)?);
    r.deserialize::<TruthRow>()
        .map(|row| {
            let row = row?;
            Ok((row.respondent, AmbiguityProfile::new(row.aversion, row.sensitivity, row.error_sd)))
        })
        .collect()
}

pub fn estimate(cfg: Config, transcripts: Option<PathBuf>, truth: Option<PathBuf>) -> anyhow::Result<()> {
    let (cfg, seeds) = cfg.seeded();
    cfg.estimation.validate()?;
    let mut manifest = Manifest::new("estimate", &cfg, seeds);
    let out = cfg.out.clone();

    let tpath = transcripts.unwrap_or_else(|| out.join(TRANSCRIPTS));
    let panel = IntervalPanel::from_transcripts(&read_transcripts(open(&tpath)?)?);
    manifest.input(&tpath)?;
    let truth_path = truth.or_else(|| Some(out.join(TRUTH)).filter(|p| p.exists()));
    let truths = match &truth_path {
        Some(p) => {
            manifest.input(p)?;
            Some(read_truth(p)?)
        }
        None => None,
    };

    let recovery = recover_population(&panel, &cfg.estimation, truths.as_ref());
    let path = out.join(ESTIMATES);
    write_results_table(create(&path)?, &recovery.results)?;
    manifest.output(&path)?;
    let failed = recovery.results.values().filter(|r| r.is_err()).count();
    println!("estimated {} respondents, {failed} failed", recovery.results.len());
    if let Some(s) = recovery.summary {
        println!(
            "recovery over {}: MAE aversion {:.4}, sensitivity {:.4}, error sd {:.4}",
            s.compared, s.mae_aversion, s.mae_sensitivity, s.mae_error_sd
        );
        let path = out.join("recovery.json");
        write_text(&path, &serde_json::to_string_pretty(&s)?, &mut manifest)?;
    }
    finish(&manifest, &out)
}

fn load_study(dir: &Path, manifest: &mut Manifest) -> anyhow::Result<StudyInputs> {
    let p = |name: &str| dir.join(name);
    let inputs = StudyInputs {
        history: read_history(open(&p(HISTORY))?)?,
        covariates: read_covariates(open(&p(COVARIATES))?)?,
        measurements: read_measurements(open(&p(MEASUREMENTS))?)?,
        attitudes: read_attitudes(open(&p(ESTIMATES))?)?,
    };
    for name in [HISTORY, COVARIATES, MEASUREMENTS, ESTIMATES] {
        manifest.input(&p(name))?;
    }
    Ok(inputs)
}

fn analysis_rows(cfg: &Config, data: Option<PathBuf>, manifest: &mut Manifest) -> anyhow::Result<Vec<AnalysisRow>> {
    let dir = data.unwrap_or_else(|| cfg.out.clone());
    let inputs = load_study(&dir, manifest)?;
    Ok(build_analysis(&inputs, &cfg.analysis)?)
}

pub fn analyze(cfg: Config, data: Option<PathBuf>) -> anyhow::Result<()> {
    let (cfg, seeds) = cfg.seeded();
    let mut manifest = Manifest::new("analyze", &cfg, seeds);
    let out = cfg.out.clone();
    let filters = SampleFilter::parse_list(&cfg.filters)?;
    let rows = analysis_rows(&cfg, data, &mut manifest)?;

    let path = out.join("analysis.jsonl");
    {
        let mut w = create(&path)?;
        for r in &rows {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
    }
    manifest.output(&path)?;

    let mut ames = RegressionTable::new(&REGRESSORS);
    let mut coefficients = RegressionTable::new(&REGRESSORS);
    for outcome in OutcomeKind::ALL {
        let fit = regression_frame(&rows, &filters, outcome)
            .map_err(anyhow::Error::from)
            .and_then(|frame| Ok(fit_probit(&regression_spec(outcome), &frame)?));
        match fit {
            Ok(fit) => {
                ames.push_ames(outcome.as_str(), &fit);
                if matches!(outcome, OutcomeKind::SelfEmployed | OutcomeKind::Incorporated) {
                    coefficients.push_coefficients(outcome.as_str(), &fit);
                }
            }
            Err(e) => manifest.skip(format!("{outcome}: {e}")),
        }
    }
    write_text(&out.join("ames.tsv"), &render_regression_table(&ames), &mut manifest)?;
    write_text(&out.join("coefficients.tsv"), &render_regression_table(&coefficients), &mut manifest)?;

    let spec = RegressionSpec::new("category", &REGRESSORS).with_binary(&BINARY_REGRESSORS);
    let mnl = mnl_frame(&rows)
        .map_err(anyhow::Error::from)
        .and_then(|frame| Ok(fit_mnl(&spec, &frame, MnlCategory::Employee.code())?));
    match mnl {
        Ok(fit) => {
            let titles = [
                (MnlCategory::Manager.code(), "manager"),
                (MnlCategory::SelfEmployed.code(), "self-employed"),
                (MnlCategory::Incorporated.code(), "incorporated"),
            ];
            let mut table = RegressionTable::new(&REGRESSORS);
            table.push_mnl(&titles, &fit)?;
            write_text(&out.join("mnl.tsv"), &render_regression_table(&table), &mut manifest)?;
        }
        Err(e) => manifest.skip(format!("multinomial model: {e}")),
    }
    if !filters.is_empty() {
        println!("filters: {}", filters.iter().map(|f| f.as_str()).collect::<Vec<_>>().join(","));
    }
    finish(&manifest, &out)
}

pub fn tables(cfg: Config, data: Option<PathBuf>) -> anyhow::Result<()> {
    let (cfg, seeds) = cfg.seeded();
    let mut manifest = Manifest::new("tables", &cfg, seeds);
    let out = cfg.out.clone();
    let rows = analysis_rows(&cfg, data, &mut manifest)?;

    write_text(&out.join("descriptive.tsv"), &render_descriptive_table(&descriptive_table(&rows)), &mut manifest)?;
    let frame = variable_frame(&rows)?;
    let m = correlation_matrix(&frame, &REGRESSORS)?;
    write_text(&out.join("correlations.tsv"), &render_correlation_table(&m), &mut manifest)?;

    let mut durations = Vec::new();
    for kind in [Occupation::SelfEmployed, Occupation::Incorporated] {
        match duration_correlation(&rows, kind) {
            Ok(d) => durations.push(d),
            Err(e) => manifest.skip(format!("{} durations: {e}", kind.label())),
        }
    }
    if !durations.is_empty() {
        write_text(&out.join("durations.tsv"), &render_duration_table(&durations), &mut manifest)?;
    }
    finish(&manifest, &out)
}

pub fn attenuation(cfg: Config) -> anyhow::Result<()> {
    let (cfg, seeds) = cfg.seeded();
    let mut manifest = Manifest::new("attenuation", &cfg, seeds);
    let out = cfg.out.clone();
    let points = attenuation_monte_carlo(&cfg.attenuation)?;
    let mut text = String::from("noise_sd\tmean_ame\tmc_se\tfits\tfailures\n");
    for p in &points {
        text.push_str(&format!("{}\t{:.6}\t{:.6}\t{}\t{}\n", p.noise_sd, p.mean_ame, p.mc_se, p.fits, p.failures));
    }
    print!("{text}");
    write_text(&out.join("attenuation.tsv"), &text, &mut manifest)?;
    finish(&manifest, &out)
}

pub fn elicit_serve(cfg: Config, deterministic: bool) -> anyhow::Result<()> {
    let (cfg, seeds) = cfg.seeded();
    let log = if cfg.service.log.is_absolute() { cfg.service.log.clone() } else { cfg.out.join(&cfg.service.log) };
    let source = if deterministic { SeedSource::deterministic(seeds.master) } else { SeedSource::Entropy };
    let store = SessionStore::open(&log, source).with_context(|| format!("replaying {}", log.display()))?;
    let mut manifest = Manifest::new("elicit-serve", &cfg, seeds);
    if log.exists() {
        manifest.input(&log)?;
    }
    manifest.write(&cfg.out)?;
    println!("{} session(s) replayed from {}", store.len(), log.display());
    println!("listening on http://{}", cfg.service.addr);
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(ambihedge_service::serve(cfg.service.addr, Arc::new(store)))?;
    Ok(())
}
