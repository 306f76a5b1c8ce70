//! `nonherm`: configuration-driven runs over the nonherm library.
//!
//! Exit codes: 0 success, 2 configuration error, 3 domain error,
//! 4 numerical refusal.

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use config::RunConfig;
use nonherm::dynamics::{
    conservation_audit, default_rate_dt, evolve, rate_audit, AuditReport, RateReport,
    SymmetryOperator,
};
use nonherm::grid::parity_matrix;
use nonherm::hamiltonian::{biorthogonal_eig, conjugation_closure_residual, resolution_residual};
use nonherm::invariants::{integrate_invariant, invariant_audit, InvariantAuditReport};
use nonherm::klein::verify_group;
use nonherm::linalg::{fro_norm, inner, C64};
use nonherm::symmetry::{classify, Relation, SymmetryReport};
use nonherm::{Error, Result};

#[derive(Parser)]
#[command(name = "nonherm", version, about = "Non-Hermitian Hamiltonian toolbox")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Path to the JSON run configuration
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config's "outputs")
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Re-run the invariant integration at half the step and report the
    /// drift ratio
    #[arg(long, global = true)]
    halve_step: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Classify the Hamiltonian against the eight symmetry codes
    Classify,
    /// Biorthogonal eigendecomposition and spectral residuals
    Spectrum,
    /// Evolve an initial state and audit conservation laws and rates
    Evolve,
    /// Verify the superoperator group algebra on the configured grid
    GroupCheck,
    /// Integrate a dynamical invariant and audit its pairings
    Invariant,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(code) => ExitCode::from(code),
    }
}

fn run(cli: &Cli) -> std::result::Result<(), u8> {
    let config_path = cli.config.as_ref().ok_or_else(|| {
        eprintln!("error: --config <path> is required");
        2u8
    })?;
    let text = std::fs::read_to_string(config_path).map_err(|e| {
        eprintln!("error: cannot read {}: {e}", config_path.display());
        2u8
    })?;
    let config: RunConfig = serde_json::from_str(&text).map_err(|e| {
        eprintln!("error: invalid configuration: {e}");
        2u8
    })?;
    let out_dir = cli
        .out
        .clone()
        .or_else(|| config.outputs.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&out_dir).map_err(|e| {
        eprintln!("error: cannot create {}: {e}", out_dir.display());
        2u8
    })?;

    let result = match cli.command {
        Command::Classify => cmd_classify(&config, &out_dir),
        Command::Spectrum => cmd_spectrum(&config, &out_dir),
        Command::Evolve => cmd_evolve(&config, &out_dir),
        Command::GroupCheck => cmd_group_check(&config, &out_dir),
        Command::Invariant => cmd_invariant(&config, &out_dir, cli.halve_step),
    };
    result.map_err(|e| {
        eprintln!("error: {e}");
        exit_code(&e)
    })
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidArgument(_) | Error::Input(_) => 2,
        Error::Domain(_) | Error::Unsupported(_) | Error::Precondition(_) => 3,
        Error::NearExceptional { .. }
        | Error::Degeneracy(_)
        | Error::Range(_)
        | Error::Lapack { .. } => 4,
    }
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    let path = dir.join(name);
    let mut body = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Input(format!("serialization failed: {e}")))?;
    body.push('\n');
    std::fs::write(&path, body)
        .map_err(|e| Error::Input(format!("cannot write {}: {e}", path.display())))
}

fn write_csv(dir: &Path, name: &str, header: &str, rows: &[Vec<f64>]) -> Result<()> {
    let path = dir.join(name);
    let mut body = String::from(header);
    body.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
        body.push_str(&cells.join(","));
        body.push('\n');
    }
    std::fs::write(&path, body)
        .map_err(|e| Error::Input(format!("cannot write {}: {e}", path.display())))
}

#[derive(Serialize)]
struct ClassifySummary {
    report: SymmetryReport,
    held: Vec<&'static str>,
}

fn cmd_classify(config: &RunConfig, out: &Path) -> Result<()> {
    let (h, grid) = config.hamiltonian()?;
    let report = classify(&h, &grid, config.tolerance)?;
    let held = report.held_codes().iter().map(|c| c.roman()).collect();
    let summary = ClassifySummary { report, held };
    write_json(out, "classify.json", &summary)?;
    println!("held codes: {:?}", summary.held);
    Ok(())
}

#[derive(Serialize)]
struct SpectrumSummary {
    eigenvalues: Vec<[f64; 2]>,
    eigvec_condition: f64,
    left_from_inverse: bool,
    biorthonormality_residual: f64,
    resolution_residual: f64,
    conjugation_closure: f64,
    conjugation_closed: bool,
}

fn cmd_spectrum(config: &RunConfig, out: &Path) -> Result<()> {
    let (h, _) = config.hamiltonian()?;
    let sys = biorthogonal_eig(&h, config.tolerance)?;
    let closure = conjugation_closure_residual(sys.eigenvalues());
    let summary = SpectrumSummary {
        eigenvalues: sys.eigenvalues().iter().map(|z| [z.re, z.im]).collect(),
        eigvec_condition: sys.eigvec_condition(),
        left_from_inverse: sys.left_from_inverse(),
        biorthonormality_residual: sys.biorthonormality_residual(),
        resolution_residual: resolution_residual(&sys, &h),
        conjugation_closure: closure,
        conjugation_closed: closure < 1e-8,
    };
    write_json(out, "spectrum.json", &summary)?;
    let rows: Vec<Vec<f64>> = sys
        .eigenvalues()
        .iter()
        .enumerate()
        .map(|(j, z)| vec![j as f64, z.re, z.im])
        .collect();
    write_csv(out, "spectrum.csv", "index,re,im", &rows)?;
    println!(
        "{} eigenvalues, biorthonormality residual {:.3e}",
        sys.dim(),
        summary.biorthonormality_residual
    );
    Ok(())
}

#[derive(Serialize)]
struct EvolveSummary {
    samples: usize,
    final_norm: f64,
    pseudo_audit: Option<AuditReport>,
    commute_audit: Option<AuditReport>,
    rate_audit: RateReport,
}

fn cmd_evolve(config: &RunConfig, out: &Path) -> Result<()> {
    let (h, grid) = config.hamiltonian()?;
    let pi = parity_matrix(&grid)?;
    let psi0 = config.initial_state(&grid)?;
    let times = config.sample_times()?;
    let traj = evolve(&h, &psi0, &times, true)?;

    let scale = (pi.fro_norm() * h.fro_norm()).max(f64::MIN_POSITIVE);
    let pseudo_res =
        fro_norm(&(pi.matrix().dot(h.matrix()) - h.adjoint().matrix().dot(pi.matrix()))) / scale;
    let commute_res =
        fro_norm(&(pi.matrix().dot(h.matrix()) - h.matrix().dot(pi.matrix()))) / scale;
    let pseudo_audit = if pseudo_res <= config.tolerance {
        Some(conservation_audit(
            &h,
            &SymmetryOperator::Linear(pi.clone()),
            Relation::Pseudo,
            &traj,
            config.tolerance,
        )?)
    } else {
        None
    };
    let commute_audit = if commute_res <= config.tolerance {
        Some(conservation_audit(
            &h,
            &SymmetryOperator::Linear(pi.clone()),
            Relation::Commute,
            &traj,
            config.tolerance,
        )?)
    } else {
        None
    };
    let rate = rate_audit(&h, &pi, &psi0, default_rate_dt(&h))?;

    // CSV: parity expectation is taken on the normalized state, the
    // scaled columns carry ⟨Π⟩(t)·N(t), and the margin column is
    // N(t) − |⟨Π⟩(0)| (Π has unit spectral radius).
    let mut rows = Vec::with_capacity(traj.len());
    let p0 = {
        let s = traj.state(0);
        inner(s, &pi.apply(s))
    };
    for k in 0..traj.len() {
        let s = traj.state(k);
        let nrm = traj.norm(k);
        let raw = inner(s, &pi.apply(s));
        let ssq = nonherm::linalg::vec_norm(s).powi(2);
        let p = raw / ssq; // normalized ⟨Π⟩(t)
        rows.push(vec![
            times[k],
            nrm,
            p.re,
            p.im,
            p.re * nrm,
            p.im * nrm,
            nrm - p0.norm(),
        ]);
    }
    write_csv(
        out,
        "evolve.csv",
        "t,norm,re_parity,im_parity,re_parity_scaled,im_parity_scaled,bound_margin",
        &rows,
    )?;

    let summary = EvolveSummary {
        samples: traj.len(),
        final_norm: traj.norm(traj.len() - 1),
        pseudo_audit,
        commute_audit,
        rate_audit: rate,
    };
    write_json(out, "evolve.json", &summary)?;
    println!("evolved {} samples, final norm {:.6e}", summary.samples, summary.final_norm);
    Ok(())
}

fn cmd_group_check(config: &RunConfig, out: &Path) -> Result<()> {
    let grid = config.grid()?;
    let report = verify_group(&grid)?;
    write_json(out, "group_check.json", &report)?;
    if !report.passed {
        return Err(Error::Domain("superoperator group verification failed".into()));
    }
    println!("group algebra verified on n = {}", report.n);
    Ok(())
}

#[derive(Serialize)]
struct InvariantSummary {
    audit: InvariantAuditReport,
    halved: Option<InvariantAuditReport>,
    convergence_ratio: Option<f64>,
}

fn cmd_invariant(config: &RunConfig, out: &Path, halve_step: bool) -> Result<()> {
    let (schedule, inv) = config.schedule()?;
    let i0 = inv.initial_operator(&schedule)?;
    let times = config.sample_times()?;
    let psi0: nonherm::CVec = {
        let mut v = ndarray::Array1::from_elem(schedule.dim(), C64::new(0.0, 0.0));
        v[0] = C64::new(1.0, 0.0);
        v
    };
    let variant = inv.variant.to_variant();
    let track = integrate_invariant(&schedule, &i0, &times, variant, inv.step)?;
    let audit = invariant_audit(&schedule, &track, &psi0)?;
    let (halved, convergence_ratio) = if halve_step {
        let fine =
            integrate_invariant(&schedule, &i0, &times, variant, Some(track.step() / 2.0))?;
        let fine_audit = invariant_audit(&schedule, &fine, &psi0)?;
        let ratio = audit.asserted_drift / fine_audit.asserted_drift.max(f64::MIN_POSITIVE);
        (Some(fine_audit), Some(ratio))
    } else {
        (None, None)
    };
    let summary = InvariantSummary { audit, halved, convergence_ratio };
    write_json(out, "invariant.json", &summary)?;
    println!(
        "{} pairing drift {:.3e}{}",
        summary.audit.asserted_pairing,
        summary.audit.asserted_drift,
        summary
            .convergence_ratio
            .map(|r| format!(", halving ratio {r:.2}"))
            .unwrap_or_default()
    );
    Ok(())
}
