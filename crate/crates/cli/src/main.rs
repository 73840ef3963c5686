//! `sfwr`: design burst plans, simulate cables, characterize, locate faults
//! and rerun the reproduction studies.

mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use sfwr::experiments::{repro, REPRO_IDS};
use sfwr::fault_analysis::{
    characterize_reference, locate_constant_gamma, locate_generic, GenericOptions, PropagationTable,
};
use sfwr::frf_estimator::estimate_acquisition;
use sfwr::io::{
    frf_estimate_csv, location_curve_csv, parse_propagation_csv, propagation_csv, read_signal, to_toml,
    write_signal_bin, write_signal_csv,
};
use sfwr::line_model::Line;
use sfwr::waveform::design_plan;
use sfwr::SfwrError;

use crate::config::{check_in_range, tolerances, DesignSection, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "sfwr", version, about = "Stepped-frequency waveform reflectometry toolkit")]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Noise seed, overriding the one in the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Print a JSON summary on stdout.
    #[arg(long, global = true)]
    json: bool,
    /// Tolerance file for `repro` (defaults to the bundled one).
    #[arg(long, global = true)]
    tolerances: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Design a burst plan for a diagnostic range and write plan.toml.
    Design(DesignArgs),
    /// Simulate an acquisition for the configured scenario.
    Simulate(SimulateArgs),
    /// Estimate α(ω), β(ω) from an open-ended reference cable acquisition.
    Characterize(CharacterizeArgs),
    /// Locate the dominant reflector in an acquisition.
    Locate(LocateArgs),
    /// Rerun a reproduction study and check it against the tolerances.
    Repro(ReproArgs),
}

#[derive(Args, Debug)]
struct DesignArgs {
    /// Shortest distance to diagnose (m).
    #[arg(long)]
    lmin: Option<f64>,
    /// Longest distance to diagnose (m).
    #[arg(long)]
    lmax: Option<f64>,
    /// Phase-velocity estimate (m/s).
    #[arg(long)]
    vp: Option<f64>,
    /// Target relative location error.
    #[arg(long)]
    ur: Option<f64>,
    /// Largest expected reflection phase (rad).
    #[arg(long)]
    phi_gamma_max: Option<f64>,
    /// Sample rate (Hz).
    #[arg(long)]
    fs: Option<f64>,
    /// Frequency step (Hz).
    #[arg(long, conflicts_with = "count")]
    step: Option<f64>,
    /// Number of frequencies.
    #[arg(long)]
    count: Option<usize>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SignalFormat {
    Csv,
    Bin,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long, value_enum, default_value = "csv")]
    format: SignalFormat,
}

#[derive(Args, Debug)]
struct CharacterizeArgs {
    /// Acquisition at the cable input (CSV or .bin).
    #[arg(long)]
    signal: PathBuf,
    /// Reference cable length (m).
    #[arg(long)]
    length: f64,
}

#[derive(Args, Debug)]
struct LocateArgs {
    /// Acquisition at the cable input (CSV or .bin).
    #[arg(long)]
    signal: PathBuf,
    /// Propagation table from `characterize`; the configured line model is
    /// used when absent.
    #[arg(long)]
    propagation: Option<PathBuf>,
    /// Jointly solve for a frequency-independent reflection coefficient.
    #[arg(long)]
    const_gamma: bool,
    /// Frequency for the generic estimate (Hz); defaults to the highest.
    #[arg(long, conflicts_with = "const_gamma")]
    f_sel: Option<f64>,
}

#[derive(Args, Debug)]
struct ReproArgs {
    /// Study id, or `all`.
    id: String,
}

/// Failed tolerance checks, as opposed to usage or runtime errors.
#[derive(Debug)]
struct ChecksFailed;

impl std::fmt::Display for ChecksFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("one or more checks failed")
    }
}

impl std::error::Error for ChecksFailed {}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<ChecksFailed>() => {
            eprintln!("sfwr: {e}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("sfwr: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = RunConfig::load(cli.config.as_deref())?;
    match &cli.command {
        Command::Design(a) => design(cli, &cfg, a),
        Command::Simulate(a) => simulate(cli, &cfg, a),
        Command::Characterize(a) => characterize(cli, &cfg, a),
        Command::Locate(a) => locate(cli, &cfg, a),
        Command::Repro(a) => run_repro(cli, &cfg, &a.id),
    }
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

fn print_json(value: &serde_json::Value) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn design(cli: &Cli, cfg: &RunConfig, a: &DesignArgs) -> Result<()> {
    let flags = DesignSection {
        l_min: a.lmin,
        l_max: a.lmax,
        vp: a.vp,
        ur: a.ur,
        phi_gamma_max: a.phi_gamma_max,
        sample_rate_hz: a.fs,
        step_hz: a.step,
        count: a.count,
    };
    let mut section = cfg.design.overlay(&flags);
    if a.count.is_some() {
        section.step_hz = None;
    } else if a.step.is_some() {
        section.count = None;
    }
    let d = design_plan(&section.request()?)?;
    let p = d.plan;
    let path = write(&cli.out, "plan.toml", &to_toml(&p)?)?;
    if cli.json {
        print_json(&json!({
            "plan": p,
            "tau_s": p.tau(),
            "period_s": p.period(),
            "f_last_hz": p.f_last(),
            "f_max_required_hz": d.f_max_required_hz,
            "plan_file": path,
        }))?;
    } else {
        println!("tau        {:.1} ns ({} samples)", p.tau() * 1e9, p.burst_samples);
        println!("T          {:.1} ns ({} samples)", p.period() * 1e9, p.period_samples);
        println!("f0         {:.6} MHz", p.f0_hz / 1e6);
        println!("step       {:.6} MHz", p.step_hz / 1e6);
        println!("N          {}", p.n_freqs);
        println!("f_last     {:.6} MHz", p.f_last() / 1e6);
        println!("f_max req  {:.6} MHz", d.f_max_required_hz / 1e6);
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn simulate(cli: &Cli, cfg: &RunConfig, a: &SimulateArgs) -> Result<()> {
    let lab = cfg.lab(cli.seed)?;
    let scenario = cfg.scenario();
    check_in_range(&lab, &scenario)?;
    let sim = lab.simulate(&scenario)?;
    let fs = lab.plan.sample_rate_hz;
    fs::create_dir_all(&cli.out).with_context(|| format!("creating {}", cli.out.display()))?;
    let (tx, rx) = match a.format {
        SignalFormat::Csv => {
            let (tx, rx) = (cli.out.join("transmitted.csv"), cli.out.join("received.csv"));
            write_signal_csv(&tx, &sim.transmitted, fs)?;
            write_signal_csv(&rx, &sim.acquisition, fs)?;
            (tx, rx)
        }
        SignalFormat::Bin => {
            let (tx, rx) = (cli.out.join("transmitted.bin"), cli.out.join("received.bin"));
            write_signal_bin(&tx, &sim.transmitted, fs)?;
            write_signal_bin(&rx, &sim.acquisition, fs)?;
            (tx, rx)
        }
    };
    let plan_file = write(&cli.out, "plan.toml", &to_toml(&lab.plan)?)?;
    let reflected_rms = (sim.reflected.iter().map(|v| v * v).sum::<f64>() / sim.reflected.len() as f64).sqrt();
    if cli.json {
        print_json(&json!({
            "scenario": scenario,
            "samples": sim.acquisition.len(),
            "segments": lab.plan.n_freqs,
            "fft_len": sim.fft_len,
            "wrap_fraction": sim.wrap_fraction,
            "reflected_rms": reflected_rms,
            "transmitted": tx,
            "received": rx,
            "plan_file": plan_file,
        }))?;
    } else {
        println!(
            "{} samples, {} segments, FFT length {}, wrap fraction {:.2e}",
            sim.acquisition.len(),
            lab.plan.n_freqs,
            sim.fft_len,
            sim.wrap_fraction
        );
        println!("wrote {} and {}", tx.display(), rx.display());
    }
    Ok(())
}

fn load_acquisition(path: &Path, plan_fs: f64) -> Result<Vec<f64>> {
    let sig = read_signal(path).with_context(|| format!("reading {}", path.display()))?;
    if (sig.sample_rate_hz - plan_fs).abs() > 1e-9 * plan_fs {
        bail!(
            "{} is sampled at {} Hz but the plan expects {} Hz",
            path.display(),
            sig.sample_rate_hz,
            plan_fs
        );
    }
    Ok(sig.samples)
}

fn characterize(cli: &Cli, cfg: &RunConfig, a: &CharacterizeArgs) -> Result<()> {
    let lab = cfg.lab(cli.seed)?;
    let acq = load_acquisition(&a.signal, lab.plan.sample_rate_hz)?;
    let est = estimate_acquisition(&acq, &lab.plan, &lab.estimator_config())?;
    let table = characterize_reference(&est, a.length)?;
    let path = write(&cli.out, "propagation.csv", &propagation_csv(&table))?;
    let frf_path = write(&cli.out, "frf.csv", &frf_estimate_csv(&est))?;
    // deviation from the configured line model, useful on simulated data
    let (mut da, mut db): (f64, f64) = (0.0, 0.0);
    for e in &table.entries {
        let s = lab.profile.propagation(e.omega);
        da = da.max((e.alpha / s.alpha() - 1.0).abs());
        db = db.max((e.beta / s.beta() - 1.0).abs());
    }
    if cli.json {
        print_json(&json!({
            "frequencies": table.entries.len(),
            "reference_length_m": a.length,
            "model_alpha_rel_max": da,
            "model_beta_rel_max": db,
            "propagation": path,
            "frf": frf_path,
        }))?;
    } else {
        println!("{} frequencies", table.entries.len());
        println!("max |alpha/model - 1| {:.4}%", da * 100.0);
        println!("max |beta/model - 1|  {:.4}%", db * 100.0);
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn locate(cli: &Cli, cfg: &RunConfig, a: &LocateArgs) -> Result<()> {
    let lab = cfg.lab(cli.seed)?;
    let acq = load_acquisition(&a.signal, lab.plan.sample_rate_hz)?;
    let est = estimate_acquisition(&acq, &lab.plan, &lab.estimator_config())?;
    let prop = match &a.propagation {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            parse_propagation_csv(&text)?
        }
        None => PropagationTable::from_line(&lab.profile, &lab.plan.omegas()),
    };
    let (report, curve_path) = if a.const_gamma {
        (locate_constant_gamma(&est, &prop)?, None)
    } else {
        let opts = GenericOptions {
            omega_sel: a.f_sel.map(|f| std::f64::consts::TAU * f),
            ..GenericOptions::default()
        };
        let loc = match locate_generic(&est, &prop, &opts) {
            Err(SfwrError::MissingFrequency { omega }) if a.f_sel.is_some() => {
                bail!("{} Hz is not on the plan grid", omega / std::f64::consts::TAU)
            }
            other => other?,
        };
        let p = write(&cli.out, "location_curve.csv", &location_curve_csv(&loc.curve))?;
        (loc.report, Some(p))
    };
    let text = serde_json::to_string_pretty(&report)?;
    let report_path = write(&cli.out, "report.json", &format!("{text}\n"))?;
    if cli.json {
        println!("{text}");
    } else {
        println!("position   {:.4} m", report.position_m);
        if let Some(b) = report.position_error_bound_rel {
            println!("bound      {:.3}%", b * 100.0);
        }
        if let Some(ph) = report.gamma_phase_deg {
            println!("phase      {ph:.3} deg");
        }
        if !report.flags.is_empty() {
            println!("flags      {}", report.flags.join(", "));
        }
        println!("wrote {}", report_path.display());
        if let Some(p) = curve_path {
            println!("wrote {}", p.display());
        }
    }
    Ok(())
}

fn run_repro(cli: &Cli, cfg: &RunConfig, id: &str) -> Result<()> {
    let lab = cfg.lab(cli.seed)?;
    let tol = tolerances(cli.tolerances.as_deref())?;
    let ids: Vec<&str> = if id == "all" { REPRO_IDS.to_vec() } else { vec![id] };
    let mut reports = Vec::new();
    for id in ids {
        let r = repro(id, &lab, &tol)?;
        for art in &r.artifacts {
            let p = write(&cli.out, &art.file_name, &art.contents)?;
            if !cli.json {
                println!("wrote {}", p.display());
            }
        }
        if !cli.json {
            print!("{}", r.render());
        }
        reports.push(r);
    }
    let passed = reports.iter().all(|r| r.passed());
    if cli.json {
        let summary: Vec<_> = reports
            .iter()
            .map(|r| {
                json!({
                    "id": r.id,
                    "passed": r.passed(),
                    "columns": r.columns,
                    "rows": r.rows,
                    "checks": r.checks,
                })
            })
            .collect();
        print_json(&json!({ "passed": passed, "studies": summary }))?;
    }
    if passed {
        Ok(())
    } else {
        Err(ChecksFailed.into())
    }
}
