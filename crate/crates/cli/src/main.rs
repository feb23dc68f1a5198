use std::fs;
use std::io::{self, BufRead, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use reweigh_core::dem::{parse_dem, serialize_dem, DecodingGraph, DetectorErrorModel};
use reweigh_core::harness::{
    estimate_threshold, load_model, parse_arms, run_experiment, sweep, write_sweep_csv, Arm,
    CodeSource, ExperimentConfig, HarnessError, PreparedArms, SweepAxis,
};
use reweigh_core::matcher::{predict_observables, Decoder};
use reweigh_core::sampler::{bits_to_hex, Sampler, Shot};
use reweigh_core::surfgen::{apply_mismatch, MismatchSpec, SurfaceCodeSpec};

#[derive(Parser)]
#[command(
    name = "reweigh",
    version,
    about = "Decoding-graph re-weighting for matching decoders"
)]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Emit a detector error model.
    Gen {
        #[command(flatten)]
        model: ModelArgs,
        /// Apply a mismatch: `random:N` or `worst-case:N`.
        #[arg(long)]
        mismatch: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write `model.dem` here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Emit a shot dump.
    Sample {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 1000)]
        shots: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write `shots.txt` here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Decode a shot dump and report predictions.
    Decode {
        #[command(flatten)]
        model: ModelArgs,
        /// Shot dump; reads stdin when absent.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Write `decoded.txt` here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one experiment and print its metrics CSV.
    Bench {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Run an experiment per value of one axis.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// One of p, d, n, t_trace.
        #[arg(long)]
        axis: String,
        /// Comma-separated axis values.
        #[arg(long)]
        values: String,
    },
    /// Train the NN re-weighter and save its params.
    TrainNn {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Estimate per-arm threshold crossings.
    Threshold {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value = "3,5")]
        distances: String,
        #[arg(long, default_value = "0.02,0.03,0.04")]
        ps: String,
    },
}

#[derive(Args)]
struct ModelArgs {
    /// Load the model from a DEM file instead of generating one.
    #[arg(long)]
    dem: Option<PathBuf>,
    #[arg(long, short = 'd', default_value_t = 3)]
    distance: usize,
    /// Rounds (default: distance).
    #[arg(long)]
    rounds: Option<usize>,
    #[arg(long, short = 'p', default_value_t = 0.01)]
    p: f64,
    /// Measurement error rate (default: p).
    #[arg(long)]
    p_meas: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    y_bias: f64,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated arms, e.g. `oracle,aligned`.
    #[arg(long)]
    arms: Option<String>,
}

/// Errors from bad input map to exit code 2, everything else to 3.
enum Failure {
    Config(anyhow::Error),
    Runtime(anyhow::Error),
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        if e.is_config() {
            Failure::Config(e.into())
        } else {
            Failure::Runtime(e.into())
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

fn config_err(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Config(e.into())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(3);
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("config error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}

impl ModelArgs {
    fn load(&self) -> Result<DetectorErrorModel, Failure> {
        if let Some(path) = &self.dem {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))
                .map_err(config_err)?;
            return parse_dem(&text).map_err(config_err);
        }
        let spec = SurfaceCodeSpec {
            rounds: self.rounds.unwrap_or(self.distance),
            p_meas: self.p_meas.unwrap_or(self.p),
            y_bias: self.y_bias,
            ..SurfaceCodeSpec::new(self.distance, self.p)
        };
        Ok(load_model(&CodeSource::Surface(spec))?)
    }
}

impl RunArgs {
    fn config(&self) -> Result<ExperimentConfig, Failure> {
        let mut cfg = ExperimentConfig::load(&self.config).map_err(config_err)?;
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(arms) = &self.arms {
            cfg.arms =
                parse_arms(arms).ok_or_else(|| config_err(anyhow!("invalid arm list '{arms}'")))?;
        }
        if let Some(out) = &self.out {
            cfg.out_dir = Some(out.clone());
        }
        Ok(cfg)
    }
}

fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> Result<Vec<T>, Failure> {
    text.split(',')
        .map(|v| v.trim().parse::<T>())
        .collect::<Result<Vec<T>, _>>()
        .map_err(|_| config_err(anyhow!("invalid {what} list '{text}'")))
}

/// Writes to `dir/name` when a directory is given, stdout otherwise.
fn sink(dir: Option<&Path>, name: &str) -> Result<Box<dyn Write>, Failure> {
    Ok(match dir {
        Some(d) => {
            fs::create_dir_all(d)?;
            Box::new(BufWriter::new(fs::File::create(d.join(name))?))
        }
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Gen {
            model,
            mismatch,
            seed,
            out,
        } => {
            let mut m = model.load()?;
            if let Some(spec) = mismatch {
                let (kind, n) = spec.split_once(':').ok_or_else(|| {
                    config_err(anyhow!("mismatch must look like random:N or worst-case:N"))
                })?;
                let n: f64 = n
                    .parse()
                    .map_err(|_| config_err(anyhow!("invalid strength '{n}'")))?;
                let spec = match kind {
                    "random" => MismatchSpec::random(n, seed),
                    "worst-case" => MismatchSpec::worst_case(n),
                    _ => return Err(config_err(anyhow!("unknown mismatch kind '{kind}'"))),
                };
                m = apply_mismatch(&m, &spec).map_err(config_err)?;
            }
            sink(out.as_deref(), "model.dem")?.write_all(serialize_dem(&m).as_bytes())?;
        }
        Command::Sample {
            model,
            shots,
            seed,
            out,
        } => {
            let m = model.load()?;
            let sampler = Sampler::new(&m, seed);
            let mut w = sink(out.as_deref(), "shots.txt")?;
            for shot in sampler.iter(shots) {
                writeln!(w, "{shot}")?;
            }
        }
        Command::Decode { model, input, out } => {
            let m = model.load()?;
            let graph = DecodingGraph::build(&m).map_err(config_err)?;
            let decoder = Decoder::new(graph);
            let mut text = String::new();
            match &input {
                Some(path) => text = fs::read_to_string(path)?,
                None => {
                    io::stdin().lock().read_to_string(&mut text)?;
                }
            }
            let mut w = sink(out.as_deref(), "decoded.txt")?;
            let (mut shots, mut errors) = (0u64, 0u64);
            for (n, line) in io::Cursor::new(text).lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let shot: Shot = line
                    .parse()
                    .map_err(|e| config_err(anyhow!("shot dump line {}: {e}", n + 1)))?;
                let matching = decoder
                    .decode(&shot.detectors)
                    .map_err(|e| Failure::Runtime(anyhow!("shot {}: {e}", shot.index)))?;
                let pred = predict_observables(decoder.graph(), &matching);
                let edges: Vec<String> = matching.edges.iter().map(|e| e.to_string()).collect();
                let mask: Vec<u32> = (0..64).filter(|b| pred >> b & 1 == 1).collect();
                writeln!(
                    w,
                    "shot {} P:{} ok:{} edges:{}",
                    shot.index,
                    bits_to_hex(&mask),
                    u8::from(pred == shot.observables),
                    edges.join(",")
                )?;
                shots += 1;
                errors += u64::from(pred != shot.observables);
            }
            eprintln!("decoded {shots} shots, {errors} logical errors");
        }
        Command::Bench { run } => {
            let cfg = run.config()?;
            let report = run_experiment(&cfg)?;
            report.write_csv(io::stdout().lock())?;
            if let Some(dir) = &cfg.out_dir {
                report.write_outputs(dir)?;
            }
        }
        Command::Sweep { run, axis, values } => {
            let cfg = run.config()?;
            let axis: SweepAxis = axis.parse().map_err(|e: String| config_err(anyhow!(e)))?;
            let values: Vec<f64> = parse_list(&values, "value")?;
            let points = sweep(&cfg, axis, &values)?;
            write_sweep_csv(axis, &points, io::stdout().lock())?;
            if let Some(dir) = &cfg.out_dir {
                fs::create_dir_all(dir)?;
                write_sweep_csv(
                    axis,
                    &points,
                    BufWriter::new(fs::File::create(dir.join("sweep.csv"))?),
                )?;
            }
        }
        Command::TrainNn { run } => {
            let mut cfg = run.config()?;
            cfg.arms = vec![Arm::AlignedNn];
            cfg.nn.params = None;
            let (arms, _) = PreparedArms::prepare(&cfg)?;
            let nn = arms
                .nn()
                .ok_or_else(|| Failure::Runtime(anyhow!("no NN was trained")))?;
            nn.write_params(sink(cfg.out_dir.as_deref(), "nn_params.txt")?)?;
            if let (Some(dir), Some((curve, bpe))) = (&cfg.out_dir, &arms.loss_curve) {
                reweigh_core::nnrw::write_loss_csv(
                    curve,
                    *bpe,
                    BufWriter::new(fs::File::create(dir.join("loss_curve.csv"))?),
                )?;
            }
            if let Some((curve, _)) = &arms.loss_curve {
                if let (Some(first), Some(last)) = (curve.first(), curve.last()) {
                    eprintln!(
                        "trained {} batches, loss {first:.4} -> {last:.4}",
                        curve.len()
                    );
                }
            }
        }
        Command::Threshold { run, distances, ps } => {
            let cfg = run.config()?;
            let ds: Vec<usize> = parse_list(&distances, "distance")?;
            let ps: Vec<f64> = parse_list(&ps, "p")?;
            let estimates = estimate_threshold(&cfg, &ds, &ps)?;
            let mut w = sink(cfg.out_dir.as_deref(), "threshold.csv")?;
            writeln!(w, "arm,d,p,ler")?;
            for e in &estimates {
                for (d, p, ler) in &e.grid {
                    writeln!(w, "{},{d},{p},{ler:e}", e.arm)?;
                }
            }
            w.flush()?;
            for e in &estimates {
                match e.crossing {
                    Some(x) => eprintln!("{}: crossing at p = {x:.5}", e.arm),
                    None => eprintln!("{}: no crossing in range", e.arm),
                }
            }
        }
    }
    Ok(())
}
