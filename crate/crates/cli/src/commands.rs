use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};
use log::{info, warn};

use aogqa::aog::model::Aog;
use aogqa::metrics::{evaluate, EvalReport};
use aogqa::qa::{run_learning_loop_observed, AnswerSource, EventLog, Learner, LearnerConfig};
use aogqa::world::archive::{load_world, read_manifest, write_world};
use aogqa::world::{generate_world, Answer, Oracle, Question, World};
use aogqa_service::{Client, CreateSession, Mode, Service};

use crate::config::{Layout, RunConfig};
use crate::report::{rows, write_csv, write_plots, CurvePoint};

/// `--config`, or the config stored in the output directory.
pub fn resolve_config(config: Option<&Path>, layout: &Layout) -> Result<RunConfig> {
    match config {
        Some(p) => RunConfig::load(p),
        None if layout.config().exists() => RunConfig::load(&layout.config()),
        None => bail!("no config: pass --config or run init first"),
    }
}

fn world_of(layout: &Layout, seed: Option<u64>) -> Result<World> {
    let dir = layout.world();
    if !dir.join("manifest.json").exists() {
        bail!("missing world in {}: run init first", dir.display());
    }
    let manifest = read_manifest(&dir)?;
    if let Some(s) = seed {
        if s != manifest.config.seed {
            bail!(
                "world in {} has seed {}, not {s}; rerun init",
                dir.display(),
                manifest.config.seed
            );
        }
    }
    Ok(load_world(&dir)?)
}

pub fn init(config: Option<&Path>, seed: Option<u64>, out: &Path) -> Result<World> {
    let layout = Layout::new(out);
    let mut cfg = match config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = seed {
        cfg.world.seed = s;
    }
    cfg.validate()?;
    fs::create_dir_all(out)?;
    let world = generate_world(&cfg.world)?;
    let m = write_world(&world, &layout.world())?;
    cfg.save(&layout.config())?;
    info!(
        "wrote {} scenes in {} archives to {}",
        m.scene_count,
        m.archives.len(),
        layout.world().display()
    );
    Ok(world)
}

pub struct RunOptions {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub iterations: Option<usize>,
    pub oracle_error: Option<f64>,
    pub live: Option<String>,
    pub out: PathBuf,
}

fn probe_scenes(world: &World, stride: usize) -> Vec<usize> {
    world.heldout.iter().step_by(stride).copied().collect()
}

/// Answers from a recorded transcript, checking each question against it.
struct Replay {
    answers: std::vec::IntoIter<(Question, Answer)>,
}

impl AnswerSource for Replay {
    fn answer(&mut self, q: &Question) -> aogqa::Result<Answer> {
        match self.answers.next() {
            Some((asked, a)) if &asked == q => Ok(a),
            Some((asked, _)) => Err(aogqa::Error::AnswerMismatch(format!(
                "transcript has {} where {} was asked",
                asked.code(),
                q.code()
            ))),
            None => Err(aogqa::Error::AnswerUnavailable(
                "transcript exhausted".into(),
            )),
        }
    }
}

fn learn(
    world: Arc<World>,
    cfg: LearnerConfig,
    src: &mut dyn AnswerSource,
    probe: &[usize],
) -> Result<(Learner, Vec<CurvePoint>)> {
    let mut curve = Vec::new();
    let mut failure = None;
    let observe = &mut |l: &Learner| {
        // No probe point until every category has a pose to parse with.
        if failure.is_some() || l.aog.categories.iter().any(|c| c.poses.is_empty()) {
            return;
        }
        match evaluate(&l.aog, &world, probe, &l.config().inference) {
            Ok(r) => {
                info!(
                    "storyline {}: cost {:.1}, probe APP {:.3}, AER {:.3}",
                    l.storylines_run(),
                    l.ledger.cost,
                    r.app,
                    r.aer
                );
                curve.push(CurvePoint {
                    storyline: l.storylines_run() - 1,
                    app: r.app,
                    aer: r.aer,
                });
            }
            Err(e) => failure = Some(e),
        }
    };
    let learner = run_learning_loop_observed(world.clone(), cfg, src, observe)?;
    if let Some(e) = failure {
        return Err(e.into());
    }
    Ok((learner, curve))
}

pub fn run(opts: &RunOptions) -> Result<Learner> {
    let layout = Layout::new(&opts.out);
    let cfg = resolve_config(opts.config.as_deref(), &layout)?;
    let world = Arc::new(world_of(&layout, opts.seed)?);
    let mut learner_cfg = cfg.learner.clone();
    if let Some(n) = opts.iterations {
        learner_cfg.iterations = n;
    }
    let epsilon = opts.oracle_error.unwrap_or(world.config.oracle_error);
    let probe = probe_scenes(&world, cfg.probe.stride);
    let (learner, curve) = match &opts.live {
        None => {
            let mut oracle = Oracle::new(world.clone(), epsilon);
            learn(world.clone(), learner_cfg, &mut oracle, &probe)?
        }
        Some(url) => {
            let client = Client::new(url);
            let req = CreateSession {
                mode: Mode::Live,
                config: Some(learner_cfg.clone()),
                iterations: None,
                oracle_error: None,
            };
            let s = client
                .create_session(&req)
                .context("creating a live session")?;
            info!(
                "live session {} at {url}; answer its questions to proceed",
                s.id
            );
            client.wait(s.id, Duration::from_millis(500))?;
            let transcript = client.transcript(s.id)?;
            let remote = client.events(s.id)?;
            let mut replay = Replay {
                answers: transcript
                    .into_iter()
                    .map(|t| (t.question, t.answer))
                    .collect::<Vec<_>>()
                    .into_iter(),
            };
            let (learner, curve) = learn(world.clone(), learner_cfg, &mut replay, &probe)?;
            if learner.log.to_jsonl()? != remote {
                bail!(
                    "local replay of session {} diverged from the service event log",
                    s.id
                );
            }
            (learner, curve)
        }
    };
    fs::write(layout.events(), learner.log.to_jsonl()?)?;
    fs::write(
        layout.ledger(),
        serde_json::to_string_pretty(&learner.ledger)?,
    )?;
    fs::write(layout.aog(), learner.aog.to_json()?)?;
    fs::write(layout.curve(), serde_json::to_string_pretty(&curve)?)?;
    info!(
        "{} storylines, cost {:.1}",
        learner.storylines_run(),
        learner.ledger.cost
    );
    Ok(learner)
}

pub fn eval(
    config: Option<&Path>,
    seed: Option<u64>,
    out: &Path,
    generator: bool,
) -> Result<EvalReport> {
    let layout = Layout::new(out);
    let cfg = resolve_config(config, &layout)?;
    let world = world_of(&layout, seed)?;
    let aog = if generator {
        world.generator_aog()?
    } else {
        let path = layout.aog();
        let text = fs::read_to_string(&path)
            .with_context(|| format!("reading {}: run first", path.display()))?;
        Aog::from_json(&text)?
    };
    let report = evaluate(&aog, &world, &world.heldout, &cfg.learner.inference)?;
    fs::write(layout.eval(), serde_json::to_string_pretty(&report)?)?;
    let mut w = csv::Writer::from_path(layout.eval_csv())?;
    w.write_record(["part", "rate"])?;
    for (name, rate) in &report.part_rates {
        w.write_record([name.as_str(), &rate.to_string()])?;
    }
    w.write_record(["APP", &report.app.to_string()])?;
    w.write_record(["AER", &report.aer.to_string()])?;
    w.write_record(["localization_error", &report.localization_error.to_string()])?;
    w.flush()?;
    Ok(report)
}

pub fn report(out: &Path) -> Result<usize> {
    let layout = Layout::new(out);
    let text = fs::read_to_string(layout.events())
        .with_context(|| format!("reading {}: run first", layout.events().display()))?;
    let log = EventLog::from_jsonl(&text)?;
    let curve: Vec<CurvePoint> = match fs::read_to_string(layout.curve()) {
        Ok(t) => serde_json::from_str(&t)?,
        Err(e) => {
            warn!("no probe curve ({e}); APP and AER columns stay empty");
            Vec::new()
        }
    };
    let rows = rows(&log, &curve);
    if let Ok(t) = fs::read_to_string(layout.ledger()) {
        let ledger: aogqa::qa::RiskLedger = serde_json::from_str(&t)?;
        if ledger.records.len() != rows.len() {
            return Err(anyhow!(
                "{} storylines in the log but {} ledger records",
                rows.len(),
                ledger.records.len()
            ));
        }
    }
    write_csv(&rows, &layout.report_csv())?;
    let plots = write_plots(&rows, out)?;
    info!("{} rows, plots {plots:?}", rows.len());
    Ok(rows.len())
}

pub fn serve(config: Option<&Path>, seed: Option<u64>, out: &Path, addr: SocketAddr) -> Result<()> {
    let layout = Layout::new(out);
    let world = match world_of(&layout, seed) {
        Ok(w) => w,
        Err(_) => {
            let cfg = resolve_config(config, &layout).unwrap_or_default();
            generate_world(&cfg.world)?
        }
    };
    let (bound, handle) = aogqa_service::spawn(Service::new(Arc::new(world)), addr)?;
    info!("serving on http://{bound}");
    println!("http://{bound}");
    handle
        .join()
        .map_err(|_| anyhow!("server thread panicked"))??;
    Ok(())
}
