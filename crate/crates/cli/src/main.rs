//! Batch front-end: parse a run config, invoke the library, emit CSV/JSON
//! reports and figure data.
//!
//! Exit codes: 0 success, 1 input error, 2 numerical failure (gap/pairing
//! errors), 3 bound violation detected in `--verify` mode. Every error also
//! prints a machine-readable JSON diagnostic on stderr.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use kamrange::bounds;
use kamrange::commutant::classify;
use kamrange::grid::{EpsGrid, TimeGrid};
use kamrange::kam::{conjugation_residual, eternal_deviation, kam_expand};
use kamrange::kato::{kato_ledger, kato_unitary, lipschitz_constants, perturbed_spectral};
use kamrange::matrix::{operator_norm, CMatrix, HermitianMatrix, MatrixJson, C64};
use kamrange::models::{ModelInstance, ModelSpec};
use kamrange::report;
use kamrange::spectral::{spectral_decompose, spectral_decompose_default};
use kamrange::wandering::{wandering_norm, wandering_sweep, SweepOptions};
use kamrange::KamError;

#[derive(Parser, Debug)]
#[command(
    name = "kamrange",
    version,
    about = "Certified KAM/Schrieffer-Wolff block diagonalization and wandering-range estimates"
)]
struct Cli {
    /// Run configuration JSON; explicit flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for reports.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// RNG seed for built-in random models.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Turn bound comparisons into hard failures (exit 3).
    #[arg(long, global = true)]
    verify: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Args, Debug, Clone, Default)]
struct SourceArgs {
    /// Built-in model name (harmonic_oscillator, josephson_line,
    /// josephson_circle, random_gapped).
    #[arg(long)]
    model: Option<String>,
    /// Model spec JSON file {"model": ..., "params": {...}, "N": n}.
    #[arg(long)]
    model_file: Option<PathBuf>,
    /// Truncation / dimension for --model.
    #[arg(long)]
    n: Option<usize>,
    /// Model parameter override, repeatable: --param e_j=0.05
    #[arg(long = "param", value_name = "KEY=VALUE")]
    params: Vec<String>,
    /// Hamiltonian matrix JSON (alternative to --model).
    #[arg(long)]
    matrix: Option<PathBuf>,
    /// Perturbation matrix JSON.
    #[arg(long)]
    perturbation: Option<PathBuf>,
    /// Symmetry matrix JSON.
    #[arg(long)]
    symmetry: Option<PathBuf>,
    /// Pick a named symmetry from the model instead.
    #[arg(long)]
    symmetry_name: Option<String>,
    /// Eigenvalue clustering tolerance override.
    #[arg(long)]
    cluster_tol: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Certified constants and the f_alpha comparison table.
    Constants {
        /// Points of the f_alpha table.
        #[arg(long)]
        points: Option<usize>,
    },
    /// Spectral decomposition and symmetry classification.
    Analyze {
        #[command(flatten)]
        source: SourceArgs,
    },
    /// KAM expansion ledger and conjugation residual sweep.
    Kam {
        #[command(flatten)]
        source: SourceArgs,
        /// Truncation order.
        #[arg(long)]
        smax: Option<usize>,
        /// Epsilon grid start:stop:points[:log].
        #[arg(long)]
        eps: Option<String>,
        /// Also dump the full B_s, K_s, V_hat_s matrices into the JSON.
        #[arg(long)]
        dump_matrices: bool,
    },
    /// Wandering-range sweep with bound comparisons and scaling fit.
    Wander {
        #[command(flatten)]
        source: SourceArgs,
        #[arg(long)]
        eps: Option<String>,
        /// Total time-grid points per epsilon.
        #[arg(long)]
        tpoints: Option<usize>,
        /// Fixed horizon override (default max(200/eta, 20/(eps v))).
        #[arg(long)]
        horizon: Option<f64>,
        /// Also measure the state wandering on an eigenvector of this
        /// cluster (delta_state column).
        #[arg(long)]
        state_cluster: Option<usize>,
    },
    /// Perturbed-projection ledger and Lipschitz constants.
    Kato {
        #[command(flatten)]
        source: SourceArgs,
        #[arg(long)]
        eps: Option<String>,
    },
    /// Canned end-to-end runs reproducing the acceptance checks.
    Demo {},
}

/// The config-file mirror of the flags. Flags win.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct FileConfig {
    command: Option<String>,
    model: Option<ModelSpec>,
    matrix: Option<PathBuf>,
    perturbation: Option<PathBuf>,
    symmetry: Option<PathBuf>,
    symmetry_name: Option<String>,
    eps: Option<String>,
    t_points: Option<usize>,
    horizon: Option<f64>,
    s_max: Option<usize>,
    points: Option<usize>,
    cluster_tol: Option<f64>,
    out: Option<PathBuf>,
    seed: Option<u64>,
    verify: Option<bool>,
}

#[derive(Debug)]
enum CliError {
    Input(String),
    Kam(KamError),
    BoundViolation(String),
}

impl From<KamError> for CliError {
    fn from(e: KamError) -> Self {
        CliError::Kam(e)
    }
}

impl CliError {
    fn input(msg: impl Into<String>) -> Self {
        CliError::Input(msg.into())
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 1,
            CliError::Kam(e) => {
                if e.is_numerical() {
                    2
                } else {
                    1
                }
            }
            CliError::BoundViolation(_) => 3,
        }
    }

    fn kind(&self) -> String {
        match self {
            CliError::Input(_) => "input".into(),
            CliError::Kam(e) => e.kind().into(),
            CliError::BoundViolation(_) => "bound_violation".into(),
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Input(m) => m.clone(),
            CliError::Kam(e) => e.to_string(),
            CliError::BoundViolation(m) => m.clone(),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let diag = serde_json::json!({
                "error": { "kind": e.kind(), "message": e.message() }
            });
            eprintln!("{diag}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let config = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::input(format!("cannot read config {path:?}: {e}")))?;
            serde_json::from_str::<FileConfig>(&text)
                .map_err(|e| CliError::input(format!("bad config {path:?}: {e}")))?
        }
        None => FileConfig::default(),
    };
    let out_dir = cli
        .out
        .clone()
        .or_else(|| config.out.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&out_dir)
        .map_err(|e| CliError::input(format!("cannot create output dir {out_dir:?}: {e}")))?;
    let verify = cli.verify || config.verify.unwrap_or(false);
    let seed = cli.seed.or(config.seed);

    let command = match cli.command {
        Some(c) => c,
        None => command_from_config(&config)?,
    };

    match command {
        Command::Constants { points } => {
            let points = points.or(config.points).unwrap_or(1001);
            cmd_constants(&out_dir, points)
        }
        Command::Analyze { source } => {
            let inst = load_instance(&source, &config, seed)?;
            cmd_analyze(&out_dir, &inst, &source, &config)
        }
        Command::Kam {
            source,
            smax,
            eps,
            dump_matrices,
        } => {
            let inst = load_instance(&source, &config, seed)?;
            let smax = smax
                .or(config.s_max)
                .unwrap_or(kamrange::kam::DEFAULT_S_MAX);
            let eps = eps.or_else(|| config.eps.clone());
            cmd_kam(
                &out_dir,
                &inst,
                &source,
                &config,
                smax,
                eps,
                dump_matrices,
                verify,
            )
        }
        Command::Wander {
            source,
            eps,
            tpoints,
            horizon,
            state_cluster,
        } => {
            let inst = load_instance(&source, &config, seed)?;
            let eps = eps.or_else(|| config.eps.clone());
            let tpoints = tpoints.or(config.t_points).unwrap_or(4096);
            let horizon = horizon.or(config.horizon);
            cmd_wander(
                &out_dir,
                &inst,
                &source,
                &config,
                eps,
                tpoints,
                horizon,
                state_cluster,
                verify,
            )
        }
        Command::Kato { source, eps } => {
            let inst = load_instance(&source, &config, seed)?;
            let eps = eps.or_else(|| config.eps.clone());
            cmd_kato(&out_dir, &inst, &source, &config, eps, verify)
        }
        Command::Demo {} => cmd_demo(&out_dir, seed.unwrap_or(42)),
    }
}

fn command_from_config(config: &FileConfig) -> CliResult<Command> {
    let name = config
        .command
        .as_deref()
        .ok_or_else(|| CliError::input("no subcommand given and config has no \"command\""))?;
    let source = SourceArgs::default();
    Ok(match name {
        "constants" => Command::Constants { points: None },
        "analyze" => Command::Analyze { source },
        "kam" => Command::Kam {
            source,
            smax: None,
            eps: None,
            dump_matrices: false,
        },
        "wander" => Command::Wander {
            source,
            eps: None,
            tpoints: None,
            horizon: None,
            state_cluster: None,
        },
        "kato" => Command::Kato { source, eps: None },
        "demo" => Command::Demo {},
        other => {
            return Err(CliError::input(format!(
                "unknown command {other:?} in config"
            )))
        }
    })
}

/// Resolve the (H, V, symmetries) source: built-in model or matrix files.
fn load_instance(
    source: &SourceArgs,
    config: &FileConfig,
    seed: Option<u64>,
) -> CliResult<ModelInstance> {
    if let Some(path) = &source.model_file {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::input(format!("cannot read model file {path:?}: {e}")))?;
        let spec: ModelSpec = serde_json::from_str(&text)
            .map_err(|e| CliError::input(format!("bad model spec {path:?}: {e}")))?;
        return Ok(spec.build()?);
    }
    if let Some(name) = &source.model {
        let mut params = serde_json::Map::new();
        for kv in &source.params {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| CliError::input(format!("--param needs KEY=VALUE, got {kv:?}")))?;
            let value: f64 = v
                .parse()
                .map_err(|_| CliError::input(format!("--param {k}: bad number {v:?}")))?;
            params.insert(k.to_string(), serde_json::json!(value));
        }
        if let Some(seed) = seed {
            params
                .entry("seed".to_string())
                .or_insert(serde_json::json!(seed));
        }
        let spec = ModelSpec {
            model: name.clone(),
            params: serde_json::Value::Object(params),
            n: source.n.unwrap_or(16),
        };
        return Ok(spec.build()?);
    }
    if let Some(spec) = &config.model {
        return Ok(spec.build()?);
    }
    let h_path = source
        .matrix
        .clone()
        .or_else(|| config.matrix.clone())
        .ok_or_else(|| CliError::input("need --model, --model-file or --matrix"))?;
    let h = read_matrix(&h_path)?;
    let dim = h.dim();
    let v = match source
        .perturbation
        .clone()
        .or_else(|| config.perturbation.clone())
    {
        Some(p) => read_matrix(&p)?,
        None => HermitianMatrix::from_real_diagonal(&vec![0.0; dim]),
    };
    if v.dim() != dim {
        return Err(KamError::DimensionMismatch {
            expected: dim,
            got: v.dim(),
        }
        .into());
    }
    let mut symmetries = Vec::new();
    if let Some(s_path) = source.symmetry.clone().or_else(|| config.symmetry.clone()) {
        let s = read_matrix(&s_path)?;
        symmetries.push(kamrange::models::NamedSymmetry {
            name: s_path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "symmetry".into()),
            matrix: s.into_matrix(),
            fragile_candidate: false,
        });
    }
    Ok(ModelInstance {
        name: "files".into(),
        h,
        v,
        epsilon: 1.0,
        symmetries,
        eta_declared: f64::NAN,
        applicability: None,
        metadata: Default::default(),
    })
}

fn read_matrix(path: &Path) -> CliResult<HermitianMatrix> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("cannot read matrix {path:?}: {e}")))?;
    let json: MatrixJson = serde_json::from_str(&text)
        .map_err(|e| CliError::input(format!("bad matrix JSON {path:?}: {e}")))?;
    Ok(HermitianMatrix::from_json(&json)?)
}

fn write_text(dir: &Path, name: &str, text: &str) -> CliResult<()> {
    let path = dir.join(name);
    std::fs::write(&path, text)
        .map_err(|e| CliError::input(format!("cannot write {path:?}: {e}")))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn cluster_tol_for(source: &SourceArgs, config: &FileConfig, h: &HermitianMatrix) -> f64 {
    source
        .cluster_tol
        .or(config.cluster_tol)
        .unwrap_or_else(|| kamrange::spectral::default_cluster_tol(h))
}

fn eps_grid_or(spec: Option<String>, default: &str) -> CliResult<EpsGrid> {
    let text = spec.unwrap_or_else(|| default.to_string());
    EpsGrid::parse(&text).map_err(CliError::from)
}

fn cmd_constants(out_dir: &Path, points: usize) -> CliResult<()> {
    let constants = bounds::solve_alpha(1e-15);
    let json = report::constants_json(&constants);
    write_text(out_dir, "constants.json", &json)?;
    let rows = bounds::f_alpha_table(points)?;
    write_text(out_dir, "f_alpha.csv", &report::f_alpha_csv(&rows))?;
    println!("{json}");
    Ok(())
}

#[derive(Serialize)]
struct SpectralJson {
    dim: usize,
    gap: f64,
    clusters: Vec<ClusterJson>,
}

#[derive(Serialize)]
struct ClusterJson {
    value: f64,
    rank: usize,
}

#[derive(Serialize)]
struct ClassificationJson {
    name: String,
    checks: std::collections::BTreeMap<String, f64>,
    verdicts: VerdictsJson,
}

#[derive(Serialize)]
struct VerdictsJson {
    is_symmetry: bool,
    is_robust: Option<bool>,
    is_completely_robust: bool,
}

fn cmd_analyze(
    out_dir: &Path,
    inst: &ModelInstance,
    source: &SourceArgs,
    config: &FileConfig,
) -> CliResult<()> {
    let tol = cluster_tol_for(source, config, &inst.h);
    let s = spectral_decompose(&inst.h, tol)?;
    let spectral = SpectralJson {
        dim: s.source_dim(),
        gap: s.gap(),
        clusters: s
            .clusters()
            .iter()
            .map(|c| ClusterJson {
                value: c.value,
                rank: c.rank,
            })
            .collect(),
    };
    write_text(
        out_dir,
        "spectral.json",
        &serde_json::to_string_pretty(&spectral).expect("serializable"),
    )?;

    // refinement from the perturbation when one is available
    let refinement = if operator_norm(inst.v.matrix()) > 0.0 {
        let mut found = None;
        for probe in [1e-3, 1e-4, 1e-5] {
            match perturbed_spectral(&inst.h, &inst.v, probe, tol) {
                Ok(ps) => {
                    found = Some(ps.p0_refinement);
                    break;
                }
                Err(KamError::CrossingSuspected { .. }) => continue,
                Err(e) => return Err(e.into()),
            }
        }
        found
    } else {
        None
    };

    let mut reports = Vec::new();
    for sym in &inst.symmetries {
        let c = classify(&sym.matrix, &s, refinement.as_deref(), None)?;
        reports.push(ClassificationJson {
            name: sym.name.clone(),
            checks: c.residuals.clone(),
            verdicts: VerdictsJson {
                is_symmetry: c.is_symmetry,
                is_robust: c.is_robust,
                is_completely_robust: c.is_completely_robust,
            },
        });
    }
    write_text(
        out_dir,
        "classification.json",
        &serde_json::to_string_pretty(&reports).expect("serializable"),
    )?;
    println!(
        "dim {} -> {} clusters, eta = {:.6e}",
        s.source_dim(),
        s.num_clusters(),
        s.gap()
    );
    Ok(())
}

#[derive(Serialize)]
struct KamSummaryJson {
    s_max: usize,
    eta: f64,
    v_norm: f64,
    eps_threshold: f64,
    residual_slope: Option<f64>,
    certificates_ok: bool,
    in_regime_bounds_ok: bool,
    orders: Vec<kamrange::kam::OrderNorms>,
    #[serde(skip_serializing_if = "Option::is_none")]
    matrices: Option<KamMatricesJson>,
}

#[derive(Serialize)]
struct KamMatricesJson {
    b: Vec<MatrixJson>,
    k: Vec<MatrixJson>,
    vhat: Vec<MatrixJson>,
}

#[allow(clippy::too_many_arguments)]
fn cmd_kam(
    out_dir: &Path,
    inst: &ModelInstance,
    source: &SourceArgs,
    config: &FileConfig,
    smax: usize,
    eps: Option<String>,
    dump_matrices: bool,
    verify: bool,
) -> CliResult<()> {
    let tol = cluster_tol_for(source, config, &inst.h);
    let s = spectral_decompose(&inst.h, tol)?;
    let exp = kam_expand(&s, &inst.v, smax)?;
    write_text(out_dir, "kam_ledger.csv", &report::kam_ledger_csv(&exp))?;

    let bs = exp.bound_set;
    let default_spec = if bs.eps_threshold.is_finite() {
        format!(
            "{}:{}:4:log",
            bs.eps_threshold / 16.0,
            bs.eps_threshold / 2.0
        )
    } else {
        "1e-3:1e-1:4:log".to_string()
    };
    let grid = eps_grid_or(eps, &default_spec)?;
    let eps_values = grid.values();
    let mut rows = Vec::new();
    let mut bounds_ok = true;
    for &eps in &eps_values {
        let asm = exp.assemble(eps)?;
        let residual = conjugation_residual(&inst.h, &inst.v, &asm);
        rows.push((eps, residual));
        if !asm.beyond_threshold {
            let vals = bs.evaluate(1.0, s.num_clusters(), eps);
            let k_norm = operator_norm(&asm.k);
            let vhat_norm = operator_norm(&asm.vhat);
            let w_dev = operator_norm(&asm.w_minus_i);
            let ok = k_norm <= vals.k_norm.unwrap_or(f64::INFINITY) * (1.0 + 1e-9)
                && vhat_norm <= vals.vhat_norm.unwrap_or(f64::INFINITY) * (1.0 + 1e-9)
                && w_dev <= vals.w_minus_i_exp.unwrap_or(f64::INFINITY) * (1.0 + 1e-9);
            bounds_ok &= ok;
        }
    }
    write_text(out_dir, "kam_residuals.csv", &report::residual_csv(&rows))?;

    let certificates_ok = exp
        .norms
        .iter()
        .all(|r| r.b_norm <= r.b_certificate * (1.0 + 1e-9));
    let eps_col: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let res_col: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let slope = kamrange::wandering::scaling_fit(&eps_col, &res_col)
        .ok()
        .map(|f| f.gamma);
    let matrices = dump_matrices.then(|| KamMatricesJson {
        b: exp.b.iter().map(MatrixJson::from_matrix).collect(),
        k: exp.k.iter().map(MatrixJson::from_matrix).collect(),
        vhat: exp.vhat.iter().map(MatrixJson::from_matrix).collect(),
    });
    let summary = KamSummaryJson {
        s_max: smax,
        eta: s.gap(),
        v_norm: bs.v,
        eps_threshold: bs.eps_threshold,
        residual_slope: slope,
        certificates_ok,
        in_regime_bounds_ok: bounds_ok,
        orders: exp.norms.clone(),
        matrices,
    };
    write_text(
        out_dir,
        "kam_summary.json",
        &serde_json::to_string_pretty(&summary).expect("serializable"),
    )?;
    if let Some(slope) = slope {
        println!(
            "residual slope {slope:.3} (truncation order {smax} predicts {})",
            smax + 1
        );
    }
    if verify && !(certificates_ok && bounds_ok) {
        return Err(CliError::BoundViolation(format!(
            "KAM verification failed: certificates_ok = {certificates_ok}, in_regime_bounds_ok = {bounds_ok}"
        )));
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_wander(
    out_dir: &Path,
    inst: &ModelInstance,
    source: &SourceArgs,
    config: &FileConfig,
    eps: Option<String>,
    tpoints: usize,
    horizon: Option<f64>,
    state_cluster: Option<usize>,
    verify: bool,
) -> CliResult<()> {
    let sym = pick_symmetry(inst, source, config)?;
    let grid = eps_grid_or(eps, "1e-3:1e-1:7:log")?;
    let psi = match state_cluster {
        None => None,
        Some(k) => {
            let tol = cluster_tol_for(source, config, &inst.h);
            let s = spectral_decompose(&inst.h, tol)?;
            if k >= s.num_clusters() {
                return Err(CliError::input(format!(
                    "--state-cluster {k} out of range ({} clusters)",
                    s.num_clusters()
                )));
            }
            Some(s.basis().column(s.clusters()[k].columns.start).into_owned())
        }
    };
    let report = wandering_sweep(
        &inst.h,
        &inst.v,
        &sym.1,
        psi.as_ref(),
        &grid.values(),
        SweepOptions {
            t_points: tpoints,
            horizon,
        },
    )?;
    write_text(out_dir, "wandering.csv", &report::wandering_csv(&report))?;
    write_text(
        out_dir,
        "wandering.json",
        &serde_json::to_string_pretty(&report).expect("serializable"),
    )?;
    if let Some(fit) = &report.fit {
        println!(
            "symmetry {:?}: fitted gamma = {:.3} +- {:.3}",
            sym.0,
            fit.gamma,
            2.0 * fit.gamma_stderr
        );
    }
    if verify {
        let violations: Vec<f64> = report
            .points
            .iter()
            .filter(|p| p.in_regime && !p.pass)
            .map(|p| p.eps)
            .collect();
        if !violations.is_empty() {
            return Err(CliError::BoundViolation(format!(
                "wandering bound violated in regime at eps = {violations:?}"
            )));
        }
    }
    Ok(())
}

fn pick_symmetry(
    inst: &ModelInstance,
    source: &SourceArgs,
    config: &FileConfig,
) -> CliResult<(String, CMatrix)> {
    let wanted = source
        .symmetry_name
        .clone()
        .or_else(|| config.symmetry_name.clone());
    if let Some(name) = wanted {
        let sym = inst
            .symmetries
            .iter()
            .find(|s| s.name == name)
            .ok_or_else(|| {
                CliError::input(format!(
                    "no symmetry named {name:?}; available: {:?}",
                    inst.symmetries.iter().map(|s| &s.name).collect::<Vec<_>>()
                ))
            })?;
        return Ok((sym.name.clone(), sym.matrix.clone()));
    }
    let sym = inst
        .symmetries
        .iter()
        .find(|s| !s.fragile_candidate)
        .or_else(|| inst.symmetries.first())
        .ok_or_else(|| CliError::input("instance has no symmetries; pass --symmetry FILE"))?;
    Ok((sym.name.clone(), sym.matrix.clone()))
}

#[derive(Serialize)]
struct KatoSummaryJson {
    clusters: Vec<KatoClusterJson>,
    all_flat: bool,
    max_unitarity_residual: f64,
}

#[derive(Serialize)]
struct KatoClusterJson {
    cluster: usize,
    c_k: f64,
    spread: f64,
    flat: bool,
}

fn cmd_kato(
    out_dir: &Path,
    inst: &ModelInstance,
    source: &SourceArgs,
    config: &FileConfig,
    eps: Option<String>,
    verify: bool,
) -> CliResult<()> {
    let tol = cluster_tol_for(source, config, &inst.h);
    let grid = eps_grid_or(eps, "1e-4:1e-2:5:log")?;
    let eps_values = grid.values();
    let rows = kato_ledger(&inst.h, &inst.v, &eps_values, tol)?;
    write_text(out_dir, "kato_ledger.csv", &report::kato_ledger_csv(&rows))?;
    let estimates = lipschitz_constants(&inst.h, &inst.v, &eps_values, tol)?;
    write_text(out_dir, "lipschitz.csv", &report::lipschitz_csv(&estimates))?;
    let mut max_unit = 0.0f64;
    for &eps in &eps_values {
        let ps = perturbed_spectral(&inst.h, &inst.v, eps, tol)?;
        let ku = kato_unitary(&ps)?;
        max_unit = max_unit.max(ku.unitarity_residual);
    }
    let summary = KatoSummaryJson {
        clusters: estimates
            .iter()
            .map(|e| KatoClusterJson {
                cluster: e.cluster,
                c_k: e.c_k,
                spread: e.spread,
                flat: e.flat,
            })
            .collect(),
        all_flat: estimates.iter().all(|e| e.flat),
        max_unitarity_residual: max_unit,
    };
    write_text(
        out_dir,
        "kato_summary.json",
        &serde_json::to_string_pretty(&summary).expect("serializable"),
    )?;
    for e in &estimates {
        println!(
            "cluster {}: c_k = {:.6e} (spread {:.3}, {})",
            e.cluster,
            e.c_k,
            e.spread,
            if e.flat { "flat" } else { "growing" }
        );
    }
    if verify && !(summary.all_flat && max_unit <= 1e-9) {
        return Err(CliError::BoundViolation(format!(
            "Kato verification failed: all_flat = {}, max unitarity residual = {max_unit:.3e}",
            summary.all_flat
        )));
    }
    Ok(())
}

/// Canned end-to-end demos; every check is a hard assertion (exit 3).
fn cmd_demo(out_dir: &Path, seed: u64) -> CliResult<()> {
    let mut failures = Vec::new();
    let mut check = |name: &str, ok: bool, detail: String| {
        println!(
            "demo check {name}: {} ({detail})",
            if ok { "PASS" } else { "FAIL" }
        );
        if !ok {
            failures.push(name.to_string());
        }
    };
    let consts = bounds::constants();

    // constants + figure data
    cmd_constants(out_dir, 1001)?;
    check(
        "constants_band",
        consts.alpha > 4.79 && consts.alpha < 4.80 && consts.beta < 15.3 && consts.rho < 34.8,
        format!("alpha = {:.6}", consts.alpha),
    );
    let conv = bounds::convolution_inequality_check(12)?;
    check(
        "catalan_convolution",
        conv.holds,
        format!("min slack {}", conv.min_slack),
    );

    // harmonic oscillator: parity projector is an exact symmetry, the
    // momentum perturbation moves it
    let ho = kamrange::models::harmonic_oscillator(16)?;
    let s_ho = spectral_decompose_default(&ho.h)?;
    let parity_proj = &ho.symmetries[0].matrix;
    let cls = classify(parity_proj, &s_ho, None, None)?;
    check(
        "harmonic_parity_symmetry",
        cls.is_symmetry && cls.is_completely_robust,
        format!("residuals {:?}", cls.residuals),
    );

    // three-level dichotomy
    let h3 = HermitianMatrix::from_real_diagonal(&[0.0, 0.0, 1.0]);
    let mut v3 = CMatrix::zeros(3, 3);
    v3[(0, 1)] = C64::new(1.0, 0.0);
    v3[(1, 0)] = C64::new(1.0, 0.0);
    let v3 = HermitianMatrix::new(v3)?;
    let s_frag = HermitianMatrix::from_real_diagonal(&[1.0, -1.0, 0.0]);
    let mut worst_floor = f64::INFINITY;
    for &eps in &[1e-3, 1e-2, 1e-1] {
        let horizon = kamrange::wandering::default_horizon(1.0, eps, 1.0);
        let grid = TimeGrid::mixed(horizon, 2048, 2048);
        let h_eps = HermitianMatrix::symmetrize(h3.matrix() + v3.matrix().scale(eps))?;
        let delta = wandering_norm(&h_eps, s_frag.matrix(), &grid)?;
        worst_floor = worst_floor.min(delta);
    }
    check(
        "fragile_floor",
        worst_floor > 0.5,
        format!("min delta_norm = {worst_floor:.3}"),
    );

    // random gapped instance: full certified pipeline
    let inst = kamrange::models::random_gapped(8, &[1, 2, 2, 3], 1.0, seed)?;
    let s = spectral_decompose_default(&inst.h)?;
    let exp = kam_expand(&s, &inst.v, 4)?;
    write_text(
        out_dir,
        "demo_kam_ledger.csv",
        &report::kam_ledger_csv(&exp),
    )?;
    let certs_ok = exp
        .norms
        .iter()
        .all(|r| r.b_norm <= r.b_certificate * (1.0 + 1e-9));
    check(
        "kam_certificates",
        certs_ok,
        format!("S_max = {}", exp.s_max),
    );

    let bs = exp.bound_set;
    let eps0 = bs.eps_threshold / 2.0;
    let eps_list: Vec<f64> = (0..4).map(|j| eps0 / 2f64.powi(j)).collect();
    let mut rows = Vec::new();
    for &eps in &eps_list {
        let asm = exp.assemble(eps)?;
        rows.push((eps, conjugation_residual(&inst.h, &inst.v, &asm)));
    }
    write_text(
        out_dir,
        "demo_kam_residuals.csv",
        &report::residual_csv(&rows),
    )?;
    let eps_col: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let res_col: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let slope = kamrange::wandering::scaling_fit(&eps_col, &res_col)
        .map(|f| f.gamma)
        .unwrap_or(f64::NAN);
    check(
        "residual_slope",
        (slope - 5.0).abs() <= 0.3,
        format!("slope {slope:.3} vs 5 +- 0.3"),
    );

    let asm = exp.assemble(eps0)?;
    let grid = TimeGrid::golden(200.0 / s.gap(), 2048);
    let dev = eternal_deviation(&inst.h, &inst.v, eps0, &asm.vhat, &grid)?;
    let eternal_bound = 0.5 * consts.beta * bs.v / s.gap() * eps0;
    check(
        "eternal_bound",
        dev <= eternal_bound,
        format!("{dev:.3e} <= {eternal_bound:.3e}"),
    );

    let p0 = &inst.symmetries[0].matrix;
    let h_eps = HermitianMatrix::symmetrize(inst.h.matrix() + inst.v.matrix().scale(eps0))?;
    let delta = wandering_norm(&h_eps, p0, &grid)?;
    let wb = consts.beta * bs.v / s.gap() * eps0;
    check(
        "bicommutant_wandering",
        delta <= wb,
        format!("{delta:.3e} <= {wb:.3e}"),
    );

    let w_dev = operator_norm(&asm.w_minus_i);
    let vals = bs.evaluate(1.0, s.num_clusters(), eps0);
    check(
        "w_minus_i_chain",
        w_dev <= vals.w_minus_i_exp.unwrap_or(f64::NAN)
            && vals.w_minus_i_exp.unwrap_or(f64::NAN) <= vals.w_minus_i_linear * (1.0 + 1e-12),
        format!(
            "{w_dev:.3e} <= {:?} <= {:.3e}",
            vals.w_minus_i_exp, vals.w_minus_i_linear
        ),
    );

    // Josephson circle pipeline (in regime)
    let jj = kamrange::models::josephson_circle(65, 1.0, 0.002, 0.05, 0.3)?;
    check(
        "josephson_in_regime",
        jj.applicability == Some(true),
        "N = 65, E_C = 1, E_L = 0.002, E_J = 0.05".to_string(),
    );
    let s_jj = spectral_decompose_default(&jj.h)?;
    let v_norm = jj.v.operator_norm();
    let eps_jj = (s_jj.gap() / (2.0 * v_norm * consts.rho)).min(1.0);
    let exp_jj = kam_expand(&s_jj, &jj.v, 6)?;
    let asm_jj = exp_jj.assemble(eps_jj)?;
    let grid_jj = TimeGrid::golden(200.0 / s_jj.gap(), 2048);
    let dev_jj = eternal_deviation(&jj.h, &jj.v, eps_jj, &asm_jj.vhat, &grid_jj)?;
    let bound_jj = 0.5 * consts.beta * v_norm / s_jj.gap() * eps_jj;
    check(
        "josephson_eternal",
        dev_jj <= bound_jj,
        format!("{dev_jj:.3e} <= {bound_jj:.3e}"),
    );

    if failures.is_empty() {
        println!("demo complete: all checks passed");
        Ok(())
    } else {
        Err(CliError::BoundViolation(format!(
            "demo checks failed: {failures:?}"
        )))
    }
}
