//! `tsketch` command-line interface.
//!
//! Every subcommand prints one JSON object to stdout. Diagnostics go to
//! stderr. Exit codes: 0 success, 1 I/O failure, 2 usage or invalid input,
//! 3 analytic-gate domain error.

mod inputs;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};
use tsketch::oracle::{alpha_exact, exact_taylor_tensors, frobenius_profile};
use tsketch::persistence::encoded_len;
use tsketch::stability::{fit_alpha, probe};
use tsketch::{
    load_sketch, precompute, retrain_oracle, save_sketch, select_parameters, sketch,
    sketch_eval_terms, Aggregator, Circuit, Complex64, DeletionSet, DirectionSource, Jet,
    MeasuredSketch, PersistError, Seed,
};

use inputs::{
    complex_json, complex_list, load_circuit, load_measurement, load_training, load_vector,
    parse_grid, write_json,
};

#[derive(Debug)]
pub enum CliError {
    Lib(tsketch::Error),
    Io { path: PathBuf, source: io::Error },
    Usage(String),
}

impl From<tsketch::Error> for CliError {
    fn from(e: tsketch::Error) -> Self {
        CliError::Lib(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Lib(e) if e.is_domain() => 3,
            CliError::Lib(tsketch::Error::Persist(PersistError::Io { .. }))
            | CliError::Io { .. } => 1,
            _ => 2,
        }
    }

    fn kind(&self) -> &'static str {
        match self.exit_code() {
            1 => "io",
            3 => "domain",
            _ => "usage",
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Lib(e) => e.to_string(),
            CliError::Io { path, source } => format!("{}: {source}", path.display()),
            CliError::Usage(m) => m.clone(),
        }
    }
}

type CliResult = Result<Value, CliError>;

#[derive(Parser)]
#[command(
    name = "tsketch",
    version,
    about = "Local Taylor sketches of arithmetic circuits and sketch-based data deletion"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sketch a trainer at the zero downweight vector and save it.
    Precompute {
        #[arg(long)]
        trainer: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        s: usize,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        seed: Seed,
        #[arg(long)]
        out: PathBuf,
        /// Store the direction matrix instead of the seed.
        #[arg(long)]
        explicit: bool,
    },
    /// Predict a measurement after deleting training examples.
    Predict {
        #[arg(long)]
        sketch: PathBuf,
        #[arg(long)]
        measure: PathBuf,
        /// One-based indices, comma separated.
        #[arg(long, default_value = "")]
        delete: String,
        /// Median-of-means block count.
        #[arg(long, required_unless_present = "mean")]
        m: Option<usize>,
        /// Plain average over all directions instead of median-of-means.
        #[arg(long, conflicts_with = "m")]
        mean: bool,
        #[arg(long, default_value_t = 1.0)]
        downweight: f64,
    },
    /// Sketch parameters for a target error and failure probability.
    Params {
        #[arg(long)]
        epsilon: f64,
        #[arg(long)]
        delta: f64,
    },
    /// Sketch an arbitrary circuit at a base point and save it.
    SketchFn {
        #[arg(long)]
        circuit: PathBuf,
        #[arg(long)]
        base: PathBuf,
        #[arg(long)]
        s: usize,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        seed: Seed,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        explicit: bool,
    },
    /// Evaluate a saved sketch at a point.
    Eval {
        #[arg(long)]
        sketch: PathBuf,
        #[arg(long)]
        point: PathBuf,
        /// Median-of-means block count.
        #[arg(long, required_unless_present = "mean")]
        m: Option<usize>,
        /// Plain average over all directions instead of median-of-means.
        #[arg(long, conflicts_with = "m")]
        mean: bool,
    },
    /// Probe per-order Taylor norms of measurement ∘ trainer at zero.
    Stability {
        #[arg(long)]
        trainer: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        measure: PathBuf,
        #[arg(long)]
        rmax: usize,
        #[arg(long, default_value_t = 8)]
        trials: usize,
        #[arg(long)]
        seed: Seed,
        #[arg(long)]
        out: PathBuf,
        /// Also report the fitted stability value at this radius.
        #[arg(long)]
        gamma: Option<f64>,
    },
    /// Exact derivative tensors of a small circuit.
    Oracle {
        #[arg(long)]
        circuit: PathBuf,
        #[arg(long)]
        base: PathBuf,
        #[arg(long)]
        s: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        gamma: Option<f64>,
    },
    /// Measurement after actually retraining with the deletion applied.
    Retrain {
        #[arg(long)]
        trainer: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        measure: PathBuf,
        #[arg(long, default_value = "")]
        delete: String,
        #[arg(long, default_value_t = 1.0)]
        downweight: f64,
    },
    /// Retrained measurement and Taylor partial sums along z · 1_D.
    Sweep {
        #[arg(long)]
        trainer: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        measure: PathBuf,
        #[arg(long, default_value = "")]
        delete: String,
        #[arg(long, default_value = "0:1:0.1")]
        grid: String,
        #[arg(long)]
        out: PathBuf,
        /// Highest Taylor order reported.
        #[arg(long, default_value_t = 3)]
        s: usize,
        /// Add a sketch-prediction column using this many directions.
        #[arg(long, requires_all = ["seed", "m"])]
        k: Option<usize>,
        #[arg(long)]
        seed: Option<Seed>,
        #[arg(long)]
        m: Option<usize>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(value) => {
            emit(&serde_json::to_string_pretty(&value).expect("JSON values serialize"));
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {}", e.message());
            let body = json!({ "error": { "kind": e.kind(), "message": e.message() } });
            emit(&body.to_string());
            ExitCode::from(e.exit_code())
        }
    }
}

// A closed stdout (e.g. piped into `head`) is not an error.
fn emit(text: &str) {
    let mut out = io::stdout().lock();
    let _ = writeln!(out, "{text}").and_then(|_| out.flush());
}

// clap guarantees `--m` unless `--mean` was given.
fn aggregator(m: Option<usize>) -> Aggregator {
    match m {
        Some(blocks) => Aggregator::MedianOfMeans { blocks },
        None => Aggregator::Mean,
    }
}

fn run(command: Command) -> CliResult {
    match command {
        Command::Precompute {
            trainer,
            data,
            s,
            k,
            seed,
            out,
            explicit,
        } => {
            let t = load_training(&trainer, &data)?;
            let mut sk = precompute(&t.circuit, s, k, seed)?;
            if explicit {
                sk = to_explicit(&sk)?;
            }
            save(&sk, &out)
        }
        Command::SketchFn {
            circuit,
            base,
            s,
            k,
            seed,
            out,
            explicit,
        } => {
            let f = load_circuit(&circuit)?;
            let xstar = load_vector(&base)?;
            let mut sk = sketch(&xstar, &f, s, k, seed)?;
            if explicit {
                sk = to_explicit(&sk)?;
            }
            save(&sk, &out)
        }
        Command::Predict {
            sketch,
            measure,
            delete,
            m,
            mean,
            downweight,
        } => {
            let sk = load_sketch(&sketch)?;
            let phi = load_measurement(&measure, sk.p(), None)?;
            let d = DeletionSet::parse(&delete, sk.n())?;
            let measured = MeasuredSketch::new(&sk, &phi)?;
            let pred = measured.predict(&d, aggregator(m), downweight)?;
            Ok(json!({
                "prediction": pred.re(),
                "nu": complex_json(pred.nu),
                "imag_abs": pred.imag_abs(),
                "terms": complex_list(&pred.terms),
                "delete": d.indices(),
                "downweight": downweight,
                "aggregator": if mean { "mean" } else { "median_of_means" },
                "m": m,
                "k": sk.k(),
                "s": sk.s(),
            }))
        }
        Command::Params { epsilon, delta } => {
            let p = select_parameters(epsilon, delta)?;
            Ok(serde_json::to_value(p).expect("parameters serialize"))
        }
        Command::Eval {
            sketch,
            point,
            m,
            mean,
        } => {
            let sk = load_sketch(&sketch)?;
            let x = load_vector(&point)?;
            let est = sketch_eval_terms(&sk, &x, aggregator(m))?;
            let terms: Vec<Value> = est.terms.iter().map(|t| complex_list(t)).collect();
            Ok(json!({
                "value": complex_list(&est.total),
                "terms": terms,
                "aggregator": if mean { "mean" } else { "median_of_means" },
                "m": m,
            }))
        }
        Command::Stability {
            trainer,
            data,
            measure,
            rmax,
            trials,
            seed,
            out,
            gamma,
        } => {
            let t = load_training(&trainer, &data)?;
            let phi = load_measurement(&measure, t.circuit.num_outputs(), Some(t.config.model))?;
            let f = Circuit::compose(&phi, &t.circuit)?;
            let profile = probe(&f, rmax, trials, seed)?;
            let file = File::create(&out).map_err(|source| CliError::Io {
                path: out.clone(),
                source,
            })?;
            profile.write_csv(BufWriter::new(file))?;
            let orders: Vec<Value> = (1..=rmax)
                .map(|r| {
                    json!({
                        "r": r,
                        "rms": profile.rms(r),
                        "rms_std_err": profile.rms_std_err(r),
                    })
                })
                .collect();
            let mut result = json!({
                "out": out,
                "n": profile.n,
                "r_max": rmax,
                "trials": trials,
                "seed": seed.to_hex(),
                "orders": orders,
            });
            if let Some(g) = gamma {
                check_gamma(g)?;
                result["alpha"] = serde_json::to_value(fit_alpha(&profile, g)).expect("serializes");
                result["gamma"] = json!(g);
            }
            Ok(result)
        }
        Command::Oracle {
            circuit,
            base,
            s,
            out,
            gamma,
        } => {
            let f = load_circuit(&circuit)?;
            let xstar = load_vector(&base)?;
            let t = exact_taylor_tensors(&f, &xstar, s)?;
            let frob = frobenius_profile(&t);
            let tensors: Vec<Value> = (0..=s)
                .map(|r| {
                    let mut shape = vec![t.p];
                    shape.extend(std::iter::repeat_n(t.n, r));
                    json!({ "r": r, "shape": shape, "entries": complex_list(t.tensor(r)) })
                })
                .collect();
            write_json(
                &out,
                &json!({
                    "n": t.n,
                    "p": t.p,
                    "s": t.s,
                    "complete": t.complete,
                    "frobenius": frob,
                    "tensors": tensors,
                }),
            )?;
            let mut result = json!({
                "out": out,
                "n": t.n,
                "p": t.p,
                "s": s,
                "complete": t.complete,
                "frobenius": frob,
            });
            if let Some(g) = gamma {
                check_gamma(g)?;
                result["alpha"] = serde_json::to_value(alpha_exact(&t, g)).expect("serializes");
                result["gamma"] = json!(g);
            }
            Ok(result)
        }
        Command::Retrain {
            trainer,
            data,
            measure,
            delete,
            downweight,
        } => {
            let t = load_training(&trainer, &data)?;
            let phi = load_measurement(&measure, t.circuit.num_outputs(), Some(t.config.model))?;
            let d = DeletionSet::parse(&delete, t.data.len())?;
            check_downweight(downweight)?;
            let theta = retrain_oracle(&t.circuit, &d.downweights(downweight))?;
            let value = phi.eval_scalar(&theta)?[0];
            Ok(json!({
                "measurement": value.re,
                "value": complex_json(value),
                "parameters": theta.iter().map(|c| c.re).collect::<Vec<_>>(),
                "delete": d.indices(),
                "downweight": downweight,
            }))
        }
        Command::Sweep {
            trainer,
            data,
            measure,
            delete,
            grid,
            out,
            s,
            k,
            seed,
            m,
        } => {
            let grid = parse_grid(&grid).map_err(CliError::Usage)?;
            if let Some(&bad) = grid.iter().find(|z| !(0.0..=1.0 + 1e-12).contains(*z)) {
                return Err(CliError::Usage(format!("grid point {bad} outside [0, 1]")));
            }
            let t = load_training(&trainer, &data)?;
            let phi = load_measurement(&measure, t.circuit.num_outputs(), Some(t.config.model))?;
            let d = DeletionSet::parse(&delete, t.data.len())?;
            sweep(&t.circuit, &phi, &d, &grid, s, k.zip(seed).zip(m), &out)
        }
    }
}

fn check_gamma(g: f64) -> Result<(), CliError> {
    if g >= 0.0 && g.is_finite() {
        Ok(())
    } else {
        Err(CliError::Usage(format!(
            "gamma must be finite and non-negative, got {g}"
        )))
    }
}

fn check_downweight(z: f64) -> Result<(), CliError> {
    if (0.0..=1.0).contains(&z) {
        Ok(())
    } else {
        Err(CliError::Usage(format!(
            "downweight must lie in [0, 1], got {z}"
        )))
    }
}

fn to_explicit(sk: &tsketch::SketchData) -> Result<tsketch::SketchData, CliError> {
    let dirs: DirectionSource = sk.directions().to_explicit();
    Ok(tsketch::SketchData::new(
        sk.base_point().to_vec(),
        dirs,
        sk.taylor().to_vec(),
        sk.p(),
        sk.s(),
    )?)
}

fn save(sk: &tsketch::SketchData, out: &PathBuf) -> CliResult {
    save_sketch(sk, out)?;
    let mode = match sk.directions() {
        DirectionSource::Explicit { .. } => "explicit",
        DirectionSource::Seeded { .. } => "seeded",
    };
    Ok(json!({
        "out": out,
        "n": sk.n(),
        "p": sk.p(),
        "s": sk.s(),
        "k": sk.k(),
        "mode": mode,
        "seed": sk.directions().seed().map(Seed::to_hex),
        "bytes": encoded_len(sk),
        "value_at_base": complex_list(sk.value_at_base()),
    }))
}

/// CSV columns: `z, retrain, taylor_1..taylor_s[, sketch]`. The Taylor
/// columns are partial sums of the exact expansion of
/// `z -> φ(A(z · 1_D))` at `z = 0`.
fn sweep(
    a: &Circuit,
    phi: &Circuit,
    d: &DeletionSet,
    grid: &[f64],
    s: usize,
    sketch_args: Option<((usize, Seed), usize)>,
    out: &PathBuf,
) -> CliResult {
    let f = Circuit::compose(phi, a)?;
    let n = a.num_inputs();
    let indicator = d.downweights(1.0);
    let inputs: Vec<Jet> = indicator
        .iter()
        .map(|&v| Jet::variable(s, Complex64::new(0.0, 0.0), v))
        .collect();
    let line = f.eval_jets(s, &inputs)?[0].clone();

    let measured_sketch = match sketch_args {
        Some(((k, seed), _)) => Some(precompute(a, s, k, seed)?),
        None => None,
    };
    let measured = match &measured_sketch {
        Some(sk) => Some(MeasuredSketch::new(sk, phi)?),
        None => None,
    };

    let io = |source: io::Error| CliError::Io {
        path: out.clone(),
        source,
    };
    let file = File::create(out).map_err(io)?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let mut header = vec!["z".to_string(), "retrain".to_string()];
    header.extend((1..=s).map(|r| format!("taylor_{r}")));
    if measured.is_some() {
        header.push("sketch".into());
    }
    let csv_err = |e: csv::Error| CliError::Usage(format!("{}: {e}", out.display()));
    w.write_record(&header).map_err(csv_err)?;

    let mut rows = Vec::with_capacity(grid.len());
    for &z in grid {
        let z = z.min(1.0);
        let retrain = f.eval_scalar(&d.downweights(z))?[0].re;
        let mut partial = line.coeff(0);
        let mut zr = Complex64::new(1.0, 0.0);
        let mut taylor = Vec::with_capacity(s);
        for r in 1..=s {
            zr *= z;
            partial += line.coeff(r) * zr;
            taylor.push(partial.re);
        }
        let mut record = vec![z.to_string(), retrain.to_string()];
        record.extend(taylor.iter().map(f64::to_string));
        let mut row = json!({ "z": z, "retrain": retrain, "taylor": taylor });
        if let (Some(ms), Some((_, m))) = (&measured, sketch_args) {
            let pred = ms.predict(d, Aggregator::MedianOfMeans { blocks: m }, z)?;
            record.push(pred.re().to_string());
            row["sketch"] = json!(pred.re());
        }
        w.write_record(&record).map_err(csv_err)?;
        rows.push(row);
    }
    w.flush().map_err(io)?;
    Ok(json!({
        "out": out,
        "n": n,
        "delete": d.indices(),
        "s": s,
        "points": rows,
    }))
}
