//! Command-line front end: `validate`, `solve`, `verify` and `example`.

use crate::fock::{enumerate_basis, BosonParams, BosonSpace, Projection};
use crate::hamiltonians::{build_hamiltonian, spin_flip, total_spin_squared};
use crate::linalg::{CsrMatrix, LinearOperator};
use crate::model::{example_model, validate, ExampleKind, ExampleParams, ModelError, ModelSpec};
use crate::spectra::{
    electronic_expectation, lowest_eigenpairs_with, spin_from_s2, truncation_sweep, Method, Observable, DENSE_CUTOFF,
};
use crate::verify::{check_uniqueness_of, run_all, VerifyConfig, SCHEMA_VERSION};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "klm", version, about = "Kondo lattice with phonons: exact diagonalization and ground-state checks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Check the structural conditions of a model file.
    Validate { model: PathBuf },
    /// Ground state, gap, spin and correlators; optional truncation sweep.
    Solve {
        model: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Run every applicable check and write report.json / report.csv.
    Verify {
        model: PathBuf,
        #[command(flatten)]
        run: RunArgs,
        /// Skip the grid-based cone positivity suite.
        #[arg(long)]
        no_cone_suite: bool,
        /// Append a uniqueness check on a degenerate toy operator.
        #[arg(long, hide = true)]
        inject_degenerate: bool,
    },
    /// Print a worked-example model as JSON.
    #[command(allow_negative_numbers = true)]
    Example {
        #[arg(value_enum)]
        kind: KindArg,
        #[arg(long, default_value_t = 2)]
        size: usize,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        #[arg(long, default_value_t = 1.0)]
        j: f64,
        #[arg(long, default_value_t = 1.0)]
        u: f64,
        #[arg(long, default_value_t = 0.0)]
        g: f64,
        #[arg(long, default_value_t = 1.0)]
        omega0: f64,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum KindArg {
    Example1,
    Example2,
    Example3,
    Star,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BosonKind {
    Number,
    Grid,
}

#[derive(Args, Debug, Clone)]
pub struct RunArgs {
    #[arg(long, value_enum, default_value_t = BosonKind::Number)]
    pub bosons: BosonKind,
    #[arg(long, default_value_t = 6)]
    pub nmax: usize,
    #[arg(long, default_value_t = 32)]
    pub grid_points: usize,
    #[arg(long, default_value_t = 7.0)]
    pub grid_extent: f64,
    /// Number of eigenpairs.
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, default_value_t = crate::spectra::DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long)]
    pub no_cache: bool,
    /// Comma-separated increasing n_max list for a truncation sweep.
    #[arg(long, value_delimiter = ',')]
    pub nmax_sweep: Vec<usize>,
}

/// Everything that determines an output, recorded verbatim.
#[derive(Clone, Debug, Serialize)]
pub struct RunConfig {
    pub bosons: BosonParams,
    pub k: usize,
    pub tol: f64,
    pub seed: u64,
    pub n_samples: usize,
    pub grid_points: usize,
    pub grid_extent: f64,
    pub nmax_sweep: Vec<usize>,
}

impl RunConfig {
    pub fn from_args(a: &RunArgs) -> Result<Self, String> {
        if !(a.tol > 0.0) || !(a.grid_extent > 0.0) {
            return Err("tolerances and grid extent must be strictly positive".into());
        }
        if a.k == 0 || a.nmax == 0 || a.samples == 0 {
            return Err("--k, --nmax and --samples must be positive".into());
        }
        let bosons = match a.bosons {
            BosonKind::Number => BosonParams::Number { n_max: a.nmax },
            BosonKind::Grid => BosonParams::Grid {
                n_points: a.grid_points,
                extent: a.grid_extent,
            },
        };
        Ok(RunConfig {
            bosons,
            k: a.k,
            tol: a.tol,
            seed: a.seed,
            n_samples: a.samples,
            grid_points: a.grid_points,
            grid_extent: a.grid_extent,
            nmax_sweep: a.nmax_sweep.clone(),
        })
    }
}

pub fn run_cli(cli: Cli) -> i32 {
    match cli.command {
        Command::Validate { model } => cmd_validate(&model),
        Command::Solve { model, run } => with_config(&run, |cfg| cmd_solve(&model, cfg, &run.out, run.no_cache)),
        Command::Verify {
            model,
            run,
            no_cone_suite,
            inject_degenerate,
        } => with_config(&run, |cfg| cmd_verify(&model, cfg, &run.out, run.no_cache, !no_cone_suite, inject_degenerate)),
        Command::Example {
            kind,
            size,
            t,
            j,
            u,
            g,
            omega0,
        } => {
            let kind = match kind {
                KindArg::Example1 => ExampleKind::Example1,
                KindArg::Example2 => ExampleKind::Example2,
                KindArg::Example3 => ExampleKind::Example3,
                KindArg::Star => ExampleKind::Star,
            };
            match example_model(kind, size, ExampleParams { t, j, u, g, omega0 }) {
                Ok(spec) => {
                    println!("{}", spec.to_json());
                    EXIT_OK
                }
                Err(e) => {
                    eprintln!("{e}");
                    EXIT_INPUT
                }
            }
        }
    }
}

fn with_config(run: &RunArgs, f: impl FnOnce(&RunConfig) -> i32) -> i32 {
    match RunConfig::from_args(run) {
        Ok(cfg) => f(&cfg),
        Err(e) => {
            eprintln!("invalid configuration: {e}");
            EXIT_INPUT
        }
    }
}

/// Reads and parses a model file; the error is already reported.
fn load(path: &Path) -> Result<ModelSpec, i32> {
    let text = fs::read_to_string(path).map_err(|e| {
        eprintln!("FileNotFound: {}: {e}", path.display());
        EXIT_INPUT
    })?;
    ModelSpec::from_json(&text).map_err(|e| {
        eprintln!("ParseError: {e}");
        EXIT_INPUT
    })
}

pub fn cmd_validate(path: &Path) -> i32 {
    let spec = match load(path) {
        Ok(s) => s,
        Err(code) => return code,
    };
    match validate(&spec) {
        Ok(m) => {
            println!("valid: |Λ|={} |Ω|={} coupling {:?}", m.n_lambda(), m.n_omega(), m.coupling_class);
            EXIT_OK
        }
        Err(ModelError::ConditionViolation(vs)) => {
            for v in vs {
                println!("{v}");
            }
            EXIT_FAIL
        }
        Err(e) => {
            println!("{e}");
            EXIT_FAIL
        }
    }
}

fn cache_key(command: &str, spec: &ModelSpec, cfg: &impl Serialize) -> String {
    let mut h = Sha256::new();
    h.update(command.as_bytes());
    h.update([0]);
    h.update(spec.to_canonical_json().as_bytes());
    h.update([0]);
    h.update(serde_json::to_string(cfg).expect("config serializes").as_bytes());
    hex::encode(h.finalize())
}

/// Output files keyed by name; cached as one JSON object.
type Outputs = BTreeMap<String, String>;

fn cached_or(out: &Path, key: &str, no_cache: bool, compute: impl FnOnce() -> Result<Outputs, String>) -> Result<Outputs, String> {
    let path = out.join("cache").join(format!("{key}.json"));
    if !no_cache {
        if let Ok(text) = fs::read_to_string(&path) {
            if let Ok(o) = serde_json::from_str::<Outputs>(&text) {
                return Ok(o);
            }
        }
    }
    let o = compute()?;
    if !no_cache {
        fs::create_dir_all(path.parent().expect("cache dir")).map_err(|e| e.to_string())?;
        fs::write(&path, serde_json::to_string(&o).expect("outputs serialize")).map_err(|e| e.to_string())?;
    }
    Ok(o)
}

fn write_outputs(out: &Path, o: &Outputs) -> Result<(), String> {
    fs::create_dir_all(out).map_err(|e| e.to_string())?;
    for (name, body) in o {
        fs::write(out.join(name), body).map_err(|e| format!("{}: {e}", out.join(name).display()))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct SpectrumFile<'a> {
    schema_version: u32,
    model_digest: String,
    config: &'a RunConfig,
    dimension: usize,
    method: Method,
    #[serde(rename = "E0")]
    e0: f64,
    gap: Option<f64>,
    eigenvalues: Vec<f64>,
    residuals: Vec<f64>,
    #[serde(rename = "S")]
    s: f64,
    s2: f64,
    /// `⟨s⁺_i s⁻_j⟩` by site pair.
    correlators: BTreeMap<String, f64>,
}

fn solve_outputs(spec: &ModelSpec, cfg: &RunConfig) -> Result<Outputs, String> {
    let model = validate(spec).map_err(|e| e.to_string())?;
    let basis = enumerate_basis(&model, Projection::P0).map_err(|e| e.to_string())?;
    let bosons = BosonSpace::from_model(&model, cfg.bosons).map_err(|e| e.to_string())?;
    let h = build_hamiltonian(&model, &basis, &bosons).map_err(|e| e.to_string())?;
    let method = if h.dim() <= DENSE_CUTOFF { Method::Dense } else { Method::Iterative };
    let res = lowest_eigenpairs_with(&h, cfg.k.min(h.dim()), cfg.tol, method, cfg.seed).map_err(|e| e.to_string())?;
    let psi = res.ground_state();
    let bd = bosons.dim();
    let s2 = electronic_expectation(&total_spin_squared(&basis), psi, bd).re;
    let n = model.n_sites();
    let correlator_ops = correlator_observables(&basis, n, model.n_lambda());
    let correlators = correlator_ops
        .iter()
        .map(|o| (o.name.clone(), electronic_expectation(&o.matrix, psi, bd).re))
        .collect();
    let file = SpectrumFile {
        schema_version: SCHEMA_VERSION,
        model_digest: spec.digest(),
        config: cfg,
        dimension: h.dim(),
        method: res.method,
        e0: res.ground_energy(),
        gap: res.gap,
        eigenvalues: res.eigenvalues.clone(),
        residuals: res.residuals.clone(),
        s: spin_from_s2(s2),
        s2,
        correlators,
    };
    let mut o = Outputs::new();
    o.insert("spectrum.json".into(), serde_json::to_string_pretty(&file).expect("serializes") + "\n");
    if !cfg.nmax_sweep.is_empty() {
        let table = truncation_sweep(&model, &cfg.nmax_sweep, &correlator_ops, cfg.tol).map_err(|e| e.to_string())?;
        o.insert("sweep.csv".into(), format!("# schema_version={SCHEMA_VERSION}\n{}", table.to_csv()));
    }
    Ok(o)
}

/// All site pairs for small lattices, conduction pairs otherwise.
fn correlator_observables(basis: &crate::fock::ElectronBasis, n_sites: usize, n_lambda: usize) -> Vec<Observable> {
    let span = if n_sites <= 8 { n_sites } else { n_lambda };
    let mut out = Vec::new();
    for i in 0..span {
        for j in 0..span {
            let m: CsrMatrix = spin_flip(basis, i, j);
            out.push(Observable {
                name: format!("s+s-[{i},{j}]"),
                matrix: m,
            });
        }
    }
    out
}

pub fn cmd_solve(path: &Path, cfg: &RunConfig, out: &Path, no_cache: bool) -> i32 {
    let spec = match load(path) {
        Ok(s) => s,
        Err(code) => return code,
    };
    let key = cache_key("solve", &spec, cfg);
    match cached_or(out, &key, no_cache, || solve_outputs(&spec, cfg)).and_then(|o| write_outputs(out, &o)) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("solve failed: {e}");
            EXIT_FAIL
        }
    }
}

pub fn cmd_verify(path: &Path, cfg: &RunConfig, out: &Path, no_cache: bool, cone_suite: bool, inject_degenerate: bool) -> i32 {
    let spec = match load(path) {
        Ok(s) => s,
        Err(code) => return code,
    };
    let vcfg = VerifyConfig {
        bosons: cfg.bosons,
        eig_tol: cfg.tol,
        seed: cfg.seed,
        n_samples: cfg.n_samples,
        grid_points: cfg.grid_points,
        grid_extent: cfg.grid_extent,
        cone_suite,
        ..VerifyConfig::default()
    };
    let key = cache_key(if inject_degenerate { "verify+degenerate" } else { "verify" }, &spec, &vcfg);
    let result = cached_or(out, &key, no_cache, || {
        let mut report = run_all(&spec, &vcfg);
        if inject_degenerate {
            let toy = CsrMatrix::from_diagonal(&[1.0, 1.0, 2.0].map(|x| crate::linalg::C64::new(x, 0.0)));
            report.checks.push(check_uniqueness_of("injected_degenerate_toy", &toy, vcfg.eig_tol));
        }
        let mut o = Outputs::new();
        o.insert("report.json".into(), report.to_json() + "\n");
        o.insert("report.csv".into(), report.to_csv());
        Ok(o)
    });
    let outputs = match result.and_then(|o| write_outputs(out, &o).map(|_| o)) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("verify failed: {e}");
            return EXIT_FAIL;
        }
    };
    let report: serde_json::Value = serde_json::from_str(&outputs["report.json"]).expect("report is JSON");
    let mut failed = false;
    for c in report["checks"].as_array().into_iter().flatten() {
        let status = c["status"].as_str().unwrap_or("fail");
        println!("{:<28} {}", c["name"].as_str().unwrap_or("?"), status);
        failed |= status == "fail";
    }
    if failed {
        EXIT_FAIL
    } else {
        EXIT_OK
    }
}
