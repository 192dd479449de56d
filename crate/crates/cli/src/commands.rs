use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;

use annealtrack::adiabatic::{self, HamiltonianPair};
use annealtrack::assoc::build_cost_matrix;
use annealtrack::builders::{biased_krooks_ising, krooks_ising, mtda_ising, SiteLabels};
use annealtrack::gumbel::{fit_report, run_minima};
use annealtrack::jpda::{recursion_step, RecursionOptions, TrackRecord};
use annealtrack::qubo::{brute_force_solve, IsingModel, ProblemFile};
use annealtrack::sampler::{derive_seed, energy_histogram, run, AnnealParams};
use annealtrack::tracking::ScenarioConfig;
use annealtrack::Error;

use crate::output::{csv_float, tag, OutDir};
use crate::{BuildKind, Cli, Command, GumbelArgs, SampleArgs, SpectrumArgs, SweepArgs, TrackArgs};

/// Largest problem for which `sample` computes an exact reference energy.
const REFERENCE_LIMIT: usize = 20;

#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// 2 usage, 3 guard or size, 4 numeric accuracy, 1 anything else.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<UsageError>().is_some() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e {
                Error::Argument(_) | Error::DegenerateData(_) | Error::Infeasible => 2,
                Error::SizeLimit { .. } | Error::Degenerate { .. } | Error::EmptyPosterior => 3,
                Error::Accuracy { .. } => 4,
                Error::Io(_) | Error::Json(_) => 1,
            };
        }
    }
    1
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| UsageError(format!("cannot read {}: {e}", path.display())).into())
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| UsageError(format!("cannot parse {}: {e}", path.display())).into())
}

fn load_model(path: &Path) -> Result<IsingModel> {
    let file: ProblemFile = read_json(path)?;
    Ok(file.to_ising()?)
}

pub fn dispatch(cli: &Cli) -> Result<()> {
    let out = OutDir::create(&cli.out)?;
    match &cli.command {
        Command::Build(kind) => build(kind, &out),
        Command::Sample(a) => sample(a, cli.seed, &out),
        Command::Track(a) => track(a, cli.seed, &out),
        Command::Spectrum(a) => spectrum(a, &out),
        Command::Sweep(a) => sweep(a, &out),
        Command::Gumbel(a) => gumbel(a, cli.seed, &out),
    }
}

fn build(kind: &BuildKind, out: &OutDir) -> Result<()> {
    let (name, file) = match *kind {
        BuildKind::Krooks { k } => {
            let mut f = ProblemFile::from_ising(&krooks_ising(k)?);
            f.labels = Some(SiteLabels::new(k, k).to_block());
            (format!("krooks_k{k}.json"), f)
        }
        BuildKind::BiasedKrooks { k, gamma0, m } => {
            let mut f = ProblemFile::from_ising(&biased_krooks_ising(k, gamma0, m)?);
            f.labels = Some(SiteLabels::new(k, k).to_block());
            (format!("biased_krooks_k{k}_m{m}.json"), f)
        }
        BuildKind::Mtda { ref scenario, scan, penalty } => {
            let cfg: ScenarioConfig = read_json(scenario)?;
            if scan == 0 {
                return Err(UsageError("--scan starts at 1".into()).into());
            }
            let sc = cfg.generate(scan)?;
            let preds = sc.truth_anchored_predictions(scan)?;
            let cost = build_cost_matrix(&preds, &sc.scans[scan - 1], &sc.params)?;
            out.write(&format!("cost_scan{scan}.csv"), cost.to_csv().as_bytes())?;
            let mut f = ProblemFile::from_ising(&mtda_ising(&cost, penalty.c, penalty.ctilde)?);
            f.labels = Some(SiteLabels::new(cost.n_targets() + 1, cost.n_meas() + 1).to_block());
            (format!("mtda_scan{scan}.json"), f)
        }
    };
    let path = out.write_json(&name, &file)?;
    println!("{}", path.display());
    Ok(())
}

fn histogram_csv(h: &[(f64, f64)]) -> String {
    let mut s = String::from("energy,fraction\n");
    for (e, f) in h {
        let _ = writeln!(s, "{},{}", csv_float(*e), csv_float(*f));
    }
    s
}

fn sample(a: &SampleArgs, seed: u64, out: &OutDir) -> Result<()> {
    let model = load_model(&a.problem)?;
    if a.runs == 0 {
        return Err(UsageError("--runs must be positive".into()).into());
    }
    let reference = if model.n() <= REFERENCE_LIMIT { Some(brute_force_solve(&model.to_qubo())?.energy) } else { None };
    let mut rows: Vec<(f64, usize, u64, f64, Vec<f64>)> = Vec::new();
    for (ti, &t) in a.anneal_time_us.iter().enumerate() {
        let mut energies = Vec::new();
        for r in 0..a.runs {
            let run_seed = derive_seed(seed, (ti * a.runs + r) as u64);
            let p = AnnealParams::new(a.sampler.backend.into(), a.sampler.shots, t, run_seed)?;
            let result = run(&model, &p)?;
            out.write_json(&format!("run_t{}_r{r:03}.json", tag(t)), &result.to_record())?;
            energies.extend(result.shots.iter().map(|s| s.energy));
            rows.push((t, r, run_seed, result.e_hat0(), result.shots.iter().map(|s| s.energy).collect()));
        }
        out.write(&format!("histogram_t{}.csv", tag(t)), histogram_csv(&energy_histogram(&energies)?).as_bytes())?;
    }
    let e0 = reference.unwrap_or_else(|| rows.iter().map(|r| r.3).fold(f64::INFINITY, f64::min));
    let mut summary = String::from("t_f_us,run,seed,e_hat0,reference_e0,ground_fraction\n");
    for (t, r, s, e_hat0, energies) in &rows {
        let hits = energies.iter().filter(|e| (*e - e0).abs() <= 1e-9).count();
        let _ = writeln!(
            summary,
            "{t},{r},{s},{},{},{}",
            csv_float(*e_hat0),
            csv_float(e0),
            csv_float(hits as f64 / energies.len() as f64)
        );
    }
    let path = out.write("sample_summary.csv", summary.as_bytes())?;
    println!("{}", path.display());
    Ok(())
}

fn track(a: &TrackArgs, seed: u64, out: &OutDir) -> Result<()> {
    let cfg: ScenarioConfig = read_json(&a.scenario)?;
    let sc = cfg.generate(a.scans)?;
    let opts = RecursionOptions { c: a.penalty.c, c_tilde: a.penalty.ctilde, top_k: a.top_k, enumerate_feasible: a.enumerate_feasible };
    let mut states = sc.initial_estimates();
    let mut lines = String::new();
    for scan in &sc.scans {
        let p = AnnealParams::new(a.sampler.backend.into(), a.sampler.shots, a.anneal_time_us, derive_seed(seed, scan.k as u64))?;
        let (updated, diag) = recursion_step(&states, scan, &sc.params, &p, &opts)
            .with_context(|| format!("scan {}", scan.k))?;
        out.write(&format!("cost_scan{}.csv", scan.k), diag.cost.to_csv().as_bytes())?;
        lines.push_str(&serde_json::to_string(&TrackRecord::new(scan, &updated, &diag))?);
        lines.push('\n');
        states = updated;
    }
    let path = out.write("track.jsonl", lines.as_bytes())?;
    println!("{}", path.display());
    Ok(())
}

fn spectrum(a: &SpectrumArgs, out: &OutDir) -> Result<()> {
    let pair = HamiltonianPair::new(&load_model(&a.problem)?)?;
    let grid = adiabatic::uniform_grid(a.points);
    let trace = adiabatic::spectrum(&pair, &grid, a.levels)?;
    let path = out.write("spectrum.csv", trace.to_csv().as_bytes())?;
    println!("{}", path.display());
    if let Some(t_f) = a.anneal_time_us {
        let steps = a.steps.unwrap_or_else(|| adiabatic::recommended_steps(&pair, t_f));
        let traj = adiabatic::evolve(&pair, t_f, steps, a.levels, a.points.max(2))?;
        let path = out.write("trajectory.csv", traj.to_csv().as_bytes())?;
        println!("{}", path.display());
    }
    Ok(())
}

fn sweep(a: &SweepArgs, out: &OutDir) -> Result<()> {
    let pair = HamiltonianPair::new(&load_model(&a.problem)?)?;
    let times = if a.anneal_time_us.is_empty() {
        adiabatic::log_spaced(a.t_min, a.t_max, a.count)?
    } else {
        a.anneal_time_us.clone()
    };
    let rows = adiabatic::sweep(&pair, &times, &adiabatic::uniform_grid(a.points))?;
    let path = out.write("sweep.csv", adiabatic::sweep_csv(&rows).as_bytes())?;
    println!("{}", path.display());
    Ok(())
}

/// One number per line, taken from the last comma-separated field; a header line is skipped.
fn parse_minima(path: &Path) -> Result<Vec<f64>> {
    let text = read_text(path)?;
    let mut values = Vec::new();
    for (i, line) in text.lines().map(str::trim).filter(|l| !l.is_empty()).enumerate() {
        let field = line.rsplit(',').next().unwrap_or(line).trim();
        match field.parse::<f64>() {
            Ok(v) => values.push(v),
            Err(_) if i == 0 => {}
            Err(_) => return Err(UsageError(format!("bad number {field:?} in {}", path.display())).into()),
        }
    }
    Ok(values)
}

fn gumbel(a: &GumbelArgs, seed: u64, out: &OutDir) -> Result<()> {
    let minima = match (&a.minima, &a.problem) {
        (Some(path), _) => parse_minima(path)?,
        (None, Some(problem)) => {
            let model = load_model(problem)?;
            if a.runs == 0 {
                return Err(UsageError("--runs must be positive".into()).into());
            }
            let runs = (0..a.runs)
                .map(|r| {
                    let p = AnnealParams::new(a.sampler.backend.into(), a.sampler.shots, a.anneal_time_us, derive_seed(seed, r as u64))?;
                    run(&model, &p)
                })
                .collect::<annealtrack::Result<Vec<_>>>()?;
            let minima = run_minima(&runs)?;
            let mut csv = String::from("run,e_hat0\n");
            for (r, m) in minima.iter().enumerate() {
                let _ = writeln!(csv, "{r},{}", csv_float(*m));
            }
            out.write("minima.csv", csv.as_bytes())?;
            minima
        }
        (None, None) => return Err(UsageError("give --problem or --minima".into()).into()),
    };
    let path = out.write_json("gumbel_fit.json", &fit_report(&minima)?)?;
    println!("{}", path.display());
    Ok(())
}
