use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use dmanull::config::ExperimentConfig;
use dmanull::experiment::{emit_pattern, run_table_nd, run_table_nw, synth_fixture};
use dmanull::measurement::{measured_beampattern, SweepManifest};
use dmanull::metrics::dipole_nd_analytic;
use dmanull::quantization::QuantizerSpec;
use dmanull::weights::{BeamWeights, Pattern, PatternSpec};

#[derive(Parser)]
#[command(name = "dmanull", version, about = "Null depth and null width of quantized differential microphone arrays")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Null depth table over patterns, orders and bit depths.
    TableNd(Common),
    /// Null width table over depths.
    TableNw(Common),
    /// Beampattern of one configuration, for plotting.
    Pattern {
        pattern: Pattern,
        order: usize,
        /// Bit depth, or "unquantized".
        #[arg(value_name = "BITS")]
        depth: String,
        #[command(flatten)]
        common: Common,
    },
    /// Write a synthetic recorded sweep (WAV files, weights, manifest).
    SynthFixture {
        #[arg(long)]
        out_dir: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Run the measurement pipeline on a sweep manifest.
    Measure {
        #[arg(long)]
        manifest: PathBuf,
        /// Weight-set JSON; defaults to the one named in the manifest.
        #[arg(long)]
        weights: Option<PathBuf>,
        /// JSON summary destination.
        #[arg(long)]
        summary: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Expected first-order dipole null depth from the rounding-error model.
    Oracle(Common),
}

#[derive(Args, Default)]
struct Common {
    /// Flat key = value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Any configuration key, as key=value. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    patterns: Option<String>,
    #[arg(long)]
    orders: Option<String>,
    #[arg(long)]
    bits: Option<String>,
    #[arg(long)]
    unquantized: Option<String>,
    #[arg(long)]
    nw_bits: Option<String>,
    #[arg(long)]
    f0: Option<String>,
    #[arg(long)]
    fs: Option<String>,
    #[arg(long)]
    spacing: Option<String>,
    #[arg(long)]
    runs: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    samples: Option<String>,
    #[arg(long)]
    grid: Option<String>,
    #[arg(long)]
    depths: Option<String>,
    #[arg(long)]
    cardioid3: Option<String>,
    #[arg(long)]
    format: Option<String>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Output file (default: standard output).
    #[arg(long, short)]
    output: Option<PathBuf>,
}

impl Common {
    /// Defaults, then the config file, then `--set`, then named flags.
    fn resolve(&self) -> anyhow::Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::default();
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            cfg.apply_text(&text).with_context(|| format!("in {}", path.display()))?;
        }
        for kv in &self.set {
            let Some((k, v)) = kv.split_once('=') else {
                bail!("--set expects KEY=VALUE, got {kv:?}");
            };
            cfg.set(k.trim(), v)?;
        }
        let flags = [
            ("patterns", &self.patterns),
            ("orders", &self.orders),
            ("bits", &self.bits),
            ("unquantized", &self.unquantized),
            ("nw_bits", &self.nw_bits),
            ("f0", &self.f0),
            ("fs", &self.fs),
            ("spacing", &self.spacing),
            ("runs", &self.runs),
            ("seed", &self.seed),
            ("samples", &self.samples),
            ("grid", &self.grid),
            ("depths", &self.depths),
            ("cardioid3", &self.cardioid3),
            ("format", &self.format),
        ];
        for (k, v) in flags {
            if let Some(v) = v {
                cfg.set(k, v)?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn emit(&self, text: &str) -> anyhow::Result<()> {
        write_output(self.output.as_deref(), text)
    }
}

fn write_output(path: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}

fn report_failures(failures: &[String]) -> ExitCode {
    if failures.is_empty() {
        return ExitCode::SUCCESS;
    }
    eprintln!("{} cell(s) failed:", failures.len());
    for f in failures {
        eprintln!("  {f}");
    }
    ExitCode::from(2)
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    let common = match &cli.command {
        Command::TableNd(c) | Command::TableNw(c) | Command::Oracle(c) => c,
        Command::Pattern { common, .. } | Command::SynthFixture { common, .. } | Command::Measure { common, .. } => common,
    };
    if let Some(n) = common.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let cfg = common.resolve()?;
    log::info!("resolved configuration:\n{}", cfg.to_kv());

    match &cli.command {
        Command::TableNd(c) => {
            let table = run_table_nd(&cfg)?;
            c.emit(&table.to_csv(&cfg))?;
            Ok(report_failures(&table.failures))
        }
        Command::TableNw(c) => {
            let table = run_table_nw(&cfg, &cfg.depths)?;
            c.emit(&table.to_csv(&cfg))?;
            Ok(report_failures(&table.failures))
        }
        Command::Pattern { pattern, order, depth, common } => {
            let spec = PatternSpec::new(*pattern, *order)?;
            let bits = match depth.as_str() {
                "unquantized" | "none" => None,
                b => Some(b.parse::<u32>().with_context(|| format!("bits: cannot parse {b:?}"))?),
            };
            common.emit(&emit_pattern(&cfg, &spec, bits)?)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::SynthFixture { out_dir, .. } => {
            let rep = synth_fixture(&cfg, out_dir)?;
            eprintln!(
                "wrote {} signal recordings, 1 silence recording, {} and {}",
                rep.signal_files.len(),
                rep.weights.display(),
                rep.manifest.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Measure { manifest, weights, summary, common } => {
            let man = SweepManifest::load(manifest)?;
            let wpath = weights.clone().unwrap_or_else(|| man.resolve(&man.weights));
            let w = BeamWeights::load(&wpath)?;
            let mut mcfg = cfg.measure.clone();
            mcfg.depths_db = cfg.depths.clone();
            let sweep = measured_beampattern(&man, &w, &mcfg)?;
            let mut header = cfg.to_pairs();
            header.insert(0, ("command".into(), "measure".into()));
            header.push(("manifest".into(), manifest.display().to_string()));
            header.push(("weights".into(), wpath.display().to_string()));
            common.emit(&sweep.to_csv(&header))?;
            if let Some(p) = summary {
                write_output(Some(p), &sweep.summary_json()?)?;
            }
            for n in sweep.nulls.iter().filter(|n| n.floor_limited) {
                eprintln!("null at {} deg is limited by the noise floor ({:.1} dB)", n.angle_deg, sweep.noise_floor_db);
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Oracle(c) => {
            let geom = cfg.geometry(2)?;
            let mut out = String::from("bits,nd_db\n");
            for &b in &cfg.bits {
                let q = QuantizerSpec::new(b, cfg.full_scale)?;
                out.push_str(&format!("{b},{:.4}\n", dipole_nd_analytic(&q, &geom, cfg.f0)?));
            }
            c.emit(&out)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn argument_definitions_are_consistent() {
        Cli::command().debug_assert();
    }
}
