use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::json;

use crate::config::{parse_assignment, ConfigFile, Format, Preset};
use crate::error::{CliError, Result};
use crate::summary::{retained, summarize, Summary};
use erasim::dynamics::RateMatrix;
use erasim::engine::{parse_script, run_trials, validate_schedule, write_csv, write_jsonl, Primitive, Schedule};
use erasim::params::RamanKind;
use erasim::reproduce::{find, registry, Context, Report};
use erasim::rng::derive_seed;
use erasim::state::Partition;
use erasim::{PhysicsParams, StateBin};

/// Run flags as given on the command line, before merging with a config file.
#[derive(Debug, Default, Clone)]
pub struct RunFlags {
    pub config: Option<PathBuf>,
    pub script: Option<PathBuf>,
    pub trials: Option<u64>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub preset: Option<Preset>,
    pub set: Vec<String>,
    pub strict: bool,
}

/// A fully resolved run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub script: PathBuf,
    pub n_trials: u64,
    pub master_seed: u64,
    pub out: PathBuf,
    pub format: Format,
    pub preset: Option<RamanKind>,
    pub overrides: Vec<(String, String)>,
    pub strict: bool,
}

impl RunFlags {
    pub fn resolve(&self) -> Result<RunConfig> {
        let cfg = match &self.config {
            Some(path) => ConfigFile::load(path)?,
            None => ConfigFile::default(),
        };
        let mut overrides = cfg.overrides()?;
        for raw in &self.set {
            overrides.push(parse_assignment(raw)?);
        }
        let missing = |what: &str| CliError::Args(format!("--{what} is required (no default)"));
        let n_trials = self.trials.or(cfg.trials).ok_or_else(|| missing("trials"))?;
        if n_trials == 0 {
            return Err(CliError::Args("--trials must be at least 1".into()));
        }
        Ok(RunConfig {
            script: self.script.clone().or(cfg.script).ok_or_else(|| missing("script"))?,
            n_trials,
            master_seed: self.seed.or(cfg.seed).ok_or_else(|| missing("seed"))?,
            out: self.out.clone().or(cfg.out).ok_or_else(|| missing("out"))?,
            format: self.format.or(cfg.format).unwrap_or(Format::Csv),
            preset: self.preset.or(cfg.preset).map(RamanKind::from),
            overrides,
            strict: self.strict,
        })
    }
}

pub fn params_with(overrides: &[(String, String)]) -> Result<PhysicsParams> {
    Ok(PhysicsParams::default().with_overrides(overrides.iter().map(|(k, v)| (k.as_str(), v.as_str())))?)
}

/// Point every Raman pulse and composite detection at one scheme.
pub fn apply_preset(schedule: &Schedule, kind: RamanKind) -> Result<Schedule> {
    let steps = schedule
        .steps()
        .iter()
        .cloned()
        .map(|mut p| {
            match &mut p {
                Primitive::Raman { scheme, .. } | Primitive::CompositeDetect { scheme, .. } => *scheme = kind,
                _ => {}
            }
            p
        })
        .collect();
    Schedule::new(steps).map_err(|e| CliError::Validation(e.to_string()))
}

fn read_script(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CliError::Args(format!("{}: {e}", path.display())))
}

fn compile(text: &str, path: &Path, preset: Option<RamanKind>) -> Result<Schedule> {
    let schedule = parse_script(text).map_err(|source| CliError::Parse { path: path.display().to_string(), source })?;
    match preset {
        Some(kind) => apply_preset(&schedule, kind),
        None => Ok(schedule),
    }
}

struct Outcome {
    summary: Summary,
    retained: Option<f64>,
}

fn execute(
    schedule: &Schedule,
    params: &PhysicsParams,
    cfg: &RunConfig,
    seed: u64,
    records_path: Option<&Path>,
) -> Result<Outcome> {
    let warnings = validate_schedule(schedule, params);
    for w in &warnings {
        eprintln!("warning: step {}: {}", w.step + 1, w.message);
    }
    if cfg.strict && !warnings.is_empty() {
        return Err(CliError::Validation(format!("{} warning(s) under --strict", warnings.len())));
    }
    let records = run_trials(schedule, cfg.n_trials, seed, params)?;
    if let Some(path) = records_path {
        let file = fs::File::create(path).map_err(|e| CliError::io(&path.display().to_string(), e))?;
        let out = std::io::BufWriter::new(file);
        match cfg.format {
            Format::Csv => write_csv(&records, out)?,
            Format::Jsonl => write_jsonl(&records, out)?,
        }
    }
    Ok(Outcome {
        retained: retained(&records),
        summary: summarize(&records, schedule, params, seed, cfg.n_trials, warnings),
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Runtime(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(&path.display().to_string(), e))
}

fn unix_now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

/// Wall-clock facts live here, so every other output is reproducible.
fn write_meta(out: &Path, started: f64, clock: Instant) -> Result<()> {
    let meta = json!({
        "started_unix_s": started,
        "finished_unix_s": unix_now(),
        "elapsed_s": clock.elapsed().as_secs_f64(),
        "erasim_version": env!("CARGO_PKG_VERSION"),
        "argv": std::env::args().collect::<Vec<_>>(),
    });
    write_json(&out.join("meta.json"), &meta)
}

fn prepare_out(out: &Path) -> Result<()> {
    fs::create_dir_all(out).map_err(|e| CliError::io(&out.display().to_string(), e))
}

pub fn run(flags: &RunFlags) -> Result<()> {
    let (started, clock) = (unix_now(), Instant::now());
    let cfg = flags.resolve()?;
    let params = params_with(&cfg.overrides)?;
    let schedule = compile(&read_script(&cfg.script)?, &cfg.script, cfg.preset)?;
    prepare_out(&cfg.out)?;
    let records = cfg.out.join(format!("records.{}", cfg.format.extension()));
    let outcome = execute(&schedule, &params, &cfg, cfg.master_seed, Some(&records))?;
    write_json(&cfg.out.join("summary.json"), &outcome.summary)?;
    write_meta(&cfg.out, started, clock)?;
    let s = &outcome.summary;
    println!(
        "{} records -> {}; flagged {}; f_E {}",
        s.n_records,
        cfg.out.display(),
        show(s.flagged_fraction.value, s.flagged_fraction.sigma),
        s.excised_fidelity.map_or("n/a".into(), |e| show(e.value, e.sigma)),
    );
    Ok(())
}

fn show(value: Option<f64>, sigma: f64) -> String {
    value.map_or("n/a".into(), |v| format!("{v:.5} ± {sigma:.5}"))
}

/// Key prefix that substitutes `{NAME}` in the script instead of a parameter.
const SCRIPT_KEY: &str = "script.";

pub fn sweep(flags: &RunFlags, key: &str, values: &[String]) -> Result<()> {
    let (started, clock) = (unix_now(), Instant::now());
    let values: Vec<&str> = values.iter().map(|v| v.trim()).filter(|v| !v.is_empty()).collect();
    if values.is_empty() {
        return Err(CliError::Args("sweep needs at least one value".into()));
    }
    let cfg = flags.resolve()?;
    let text = read_script(&cfg.script)?;
    let placeholder = key.strip_prefix(SCRIPT_KEY).map(|name| format!("{{{name}}}"));
    match &placeholder {
        Some(p) if !text.contains(p.as_str()) => {
            return Err(CliError::Args(format!("script has no `{p}` placeholder")));
        }
        None => {
            PhysicsParams::default().get_dotted(key)?;
        }
        _ => {}
    }
    prepare_out(&cfg.out)?;

    let mut table = String::from(
        "value,seed,n_records,flagged_fraction,retained_fraction,fidelity,f_E,f_E_sigma,p_E,p_E_sigma,model_eps01,model_eps10\n",
    );
    let mut summaries = Vec::new();
    for (i, value) in values.iter().enumerate() {
        let seed = derive_seed(cfg.master_seed, i as u64);
        let (script, overrides) = match &placeholder {
            Some(p) => (text.replace(p.as_str(), value), cfg.overrides.clone()),
            None => {
                let mut o = cfg.overrides.clone();
                o.push((key.to_string(), value.to_string()));
                (text.clone(), o)
            }
        };
        let params = params_with(&overrides)?;
        let schedule = compile(&script, &cfg.script, cfg.preset)?;
        let outcome = execute(&schedule, &params, &cfg, seed, None)?;
        let s = &outcome.summary;
        let cell = |x: Option<f64>| x.map_or(String::new(), |v| format!("{v:.6e}"));
        let est = |e: Option<crate::summary::Estimate>| match e {
            Some(e) => format!("{},{:.6e}", cell(e.value), e.sigma),
            None => ",".into(),
        };
        table.push_str(&format!(
            "{value},{seed},{},{},{},{},{},{},{:.6e},{:.6e}\n",
            s.n_records,
            cell(s.flagged_fraction.value),
            cell(outcome.retained),
            cell(s.fidelity.and_then(|e| e.value)),
            est(s.excised_fidelity),
            est(s.excised_purity),
            s.model_eps01,
            s.model_eps10,
        ));
        summaries.push(json!({ "value": value, "summary": outcome.summary }));
    }
    let sweep_path = cfg.out.join("sweep.csv");
    fs::write(&sweep_path, table).map_err(|e| CliError::io(&sweep_path.display().to_string(), e))?;
    write_json(&cfg.out.join("summary.json"), &json!({ "key": key, "points": summaries }))?;
    write_meta(&cfg.out, started, clock)?;
    println!("{} sweep points -> {}", values.len(), sweep_path.display());
    Ok(())
}

pub fn reproduce(
    target: Option<&str>,
    list: bool,
    seed: Option<u64>,
    set: &[String],
    json_out: Option<&Path>,
) -> Result<()> {
    if list {
        for t in registry() {
            println!("{:>2}  {:<22} {}", t.criterion, t.id, t.title);
        }
        return Ok(());
    }
    let overrides = set.iter().map(|s| parse_assignment(s)).collect::<Result<Vec<_>>>()?;
    let mut ctx = Context { params: params_with(&overrides)?, ..Context::default() };
    if let Some(seed) = seed {
        ctx.seed = seed;
    }
    let targets = match target {
        None | Some("all") => registry().iter().collect(),
        Some(id) => vec![find(id)?],
    };
    let mut reports: Vec<Report> = Vec::new();
    let mut stdout = std::io::stdout().lock();
    for t in targets {
        let report = t.run(&ctx)?;
        write!(stdout, "{report}").map_err(|e| CliError::io("stdout", e))?;
        reports.push(report);
    }
    if let Some(path) = json_out {
        write_json(path, &reports)?;
    }
    match reports.iter().filter(|r| !r.passed()).count() {
        0 => Ok(()),
        n => Err(CliError::ReproduceFailed(n)),
    }
}

#[derive(Serialize)]
struct CatalogEntry {
    bin: StateBin,
    index: usize,
    description: &'static str,
    preparation_class: erasim::PartitionClass,
    qubit_class: erasim::PartitionClass,
    occupied: bool,
    ground_rotational: bool,
    cycling_manifold: bool,
}

pub fn catalog() -> Result<()> {
    let (prep, qubit) = (Partition::preparation(), Partition::qubit());
    let entries: Vec<CatalogEntry> = StateBin::ALL
        .iter()
        .map(|&bin| CatalogEntry {
            bin,
            index: bin.index(),
            description: bin.description(),
            preparation_class: prep.class_of(bin),
            qubit_class: qubit.class_of(bin),
            occupied: bin.is_occupied(),
            ground_rotational: bin.in_ground_rotational(),
            cycling_manifold: bin.in_cycling_manifold(),
        })
        .collect();
    print_json(&entries)
}

pub fn rates(set: &[String]) -> Result<()> {
    let overrides = set.iter().map(|s| parse_assignment(s)).collect::<Result<Vec<_>>>()?;
    let params = params_with(&overrides)?;
    let table: Vec<_> = RateMatrix::from_params(&params)
        .catalog_rates()
        .into_iter()
        .map(|(from, to, rate)| json!({ "from": from, "to": to, "rate_per_s": rate }))
        .collect();
    print_json(&json!({ "params_digest": params.digest(), "rates": table }))
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Runtime(e.to_string()))?;
    println!("{text}");
    Ok(())
}
