use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use colonseg::dataset::{LabelMode, SplitAssignment};
use colonseg::manifest::{report_funnel, Manifest};
use colonseg::metrics::evaluate_methods;
use colonseg::pipeline::{self, RunOptions};
use colonseg::{server, Error, PipelineConfig, Result};

#[derive(Parser)]
#[command(name = "colonseg", version, about = "Colon air/fluid labeling, dataset preparation and evaluation")]
struct Cli {
    /// TOML configuration file; unset keys keep their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override one configuration key, e.g. `--set air_threshold_hu=-850`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    /// Manifest event log.
    #[arg(long, global = true, default_value = "manifest.jsonl")]
    manifest: PathBuf,
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, env = "COLONSEG_WORKERS", default_value_t = 0)]
    workers: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Labels {
    Air,
    FullMerged,
    FullSeparate,
}

impl From<Labels> for LabelMode {
    fn from(l: Labels) -> Self {
        match l {
            Labels::Air => LabelMode::Air,
            Labels::FullMerged => LabelMode::FullMerged,
            Labels::FullSeparate => LabelMode::FullSeparate,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Register the volumes of a directory and apply the dimension rules.
    Validate {
        #[arg(long)]
        input: PathBuf,
        /// CSV with columns scan_id,position,gender,age.
        #[arg(long)]
        roster: Option<PathBuf>,
    },
    /// Segment the air-filled colon of registered scans. With --input, the
    /// whole chain (validate, air, optional fluid) runs in one pass.
    SegmentAir {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        roster: Option<PathBuf>,
        /// Fluid predictions to post-process during a one-pass run.
        #[arg(long)]
        fluid: Option<PathBuf>,
    },
    /// Post-process imported fluid predictions into the label maps.
    FluidPost {
        #[arg(long)]
        fluid: PathBuf,
    },
    /// Apply dilated coarse masks to the images of included scans.
    PrepMasks {
        #[arg(long)]
        masks: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Export random air-bearing axial slices as PNGs for annotation.
    ExportSlices {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Stratified train/test split of the included scans.
    Split {
        #[arg(long, default_value = "splits.json")]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Write the training directory layout.
    ExportTraining {
        #[arg(long, default_value = "splits.json")]
        split: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "Dataset001_Colon")]
        name: String,
        #[arg(long, value_enum, default_value = "full-merged")]
        labels: Labels,
    },
    /// Remove small islands from every label map in a directory.
    Refine {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score predictions against reference label maps.
    Evaluate {
        /// TAG=DIR, repeatable.
        #[arg(long = "method", value_name = "TAG=DIR", required = true)]
        methods: Vec<String>,
        #[arg(long)]
        reference: PathBuf,
        #[arg(long, value_enum, default_value = "full-merged")]
        target: Labels,
        /// Island-filter predictions first.
        #[arg(long)]
        refine: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print scan counts per exclusion reason.
    Report {
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Serve the review API (and an optional static UI).
    Serve {
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long)]
        ui: Option<PathBuf>,
    },
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    let text = match &cli.config {
        Some(p) => std::fs::read_to_string(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?,
        None => String::new(),
    };
    PipelineConfig::from_toml_with_overrides(&text, &cli.overrides)
}

fn manifest_for_reading(path: &Path) -> Result<Manifest> {
    if !path.exists() {
        return Err(Error::Config(format!("manifest {} does not exist", path.display())));
    }
    Manifest::open(path)
}

fn run(cli: Cli) -> Result<()> {
    let cfg = load_config(&cli)?;
    let workers = cli.workers;
    match cli.command {
        Command::Validate { input, roster } => {
            let mut m = Manifest::open(&cli.manifest)?;
            pipeline::validate_inputs(&mut m, &input, &cfg, roster.as_deref(), workers)?;
            print_funnel(&m);
        }
        Command::SegmentAir { out, input, roster, fluid } => {
            let opts = RunOptions { output_dir: out, workers, fluid_dir: fluid, roster, manifest: Some(cli.manifest.clone()) };
            let m = match input {
                Some(input) => pipeline::run_pipeline(&input, &cfg, &opts)?,
                None => {
                    let mut m = manifest_for_reading(&cli.manifest)?;
                    pipeline::segment_air_stage(&mut m, &cfg, &opts)?;
                    m
                }
            };
            print_funnel(&m);
        }
        Command::FluidPost { fluid } => {
            let mut m = manifest_for_reading(&cli.manifest)?;
            let opts = RunOptions { workers, ..Default::default() };
            pipeline::fluid_stage(&mut m, &fluid, &cfg, &opts)?;
        }
        Command::PrepMasks { masks, out } => {
            let mut m = manifest_for_reading(&cli.manifest)?;
            pipeline::prep_masks_stage(&mut m, &masks, &out, &cfg, workers)?;
        }
        Command::ExportSlices { out, seed } => {
            let mut m = manifest_for_reading(&cli.manifest)?;
            let exports = pipeline::export_slices_stage(&mut m, &out, &cfg, seed, workers)?;
            let files: usize = exports.iter().map(|e| e.files.len()).sum();
            println!("{files} slices from {} scans written to {}", exports.len(), out.display());
        }
        Command::Split { out, seed } => {
            let mut m = manifest_for_reading(&cli.manifest)?;
            let s = pipeline::split_stage(&mut m, &out, &cfg, seed)?;
            println!(
                "train {} / test {} -> {}",
                s.count(colonseg::dataset::Split::Train),
                s.count(colonseg::dataset::Split::Test),
                out.display()
            );
        }
        Command::ExportTraining { split, out, name, labels } => {
            let mut m = manifest_for_reading(&cli.manifest)?;
            let split = SplitAssignment::load(&split)?;
            let layout = pipeline::export_training_stage(&mut m, &split, &out, &name, labels.into(), &cfg)?;
            println!("{} training and {} test cases in {}", layout.train.len(), layout.test.len(), out.display());
        }
        Command::Refine { input, out } => {
            let written = pipeline::refine_dir(&input, &out, &cfg, workers)?;
            println!("{} label maps refined into {}", written.len(), out.display());
        }
        Command::Evaluate { methods, reference, target, refine, out } => {
            let mode: LabelMode = target.into();
            let reference = pipeline::load_label_dir(&reference, mode)?;
            let mut sets = Vec::new();
            for spec in &methods {
                let (tag, dir) = spec
                    .split_once('=')
                    .ok_or_else(|| Error::Config(format!("--method {spec:?} is not TAG=DIR")))?;
                sets.push((tag.to_string(), pipeline::load_label_dir(Path::new(dir), mode)?));
            }
            let refs: Vec<_> = sets.iter().map(|(t, s)| (t.clone(), s)).collect();
            let report = pipeline::with_workers(workers, || evaluate_methods(&refs, &reference, refine, &cfg))??;
            std::fs::create_dir_all(&out).map_err(|e| Error::Config(format!("{}: {e}", out.display())))?;
            report.write_summary_csv(&out.join("summary.csv"))?;
            report.write_scans_csv(&out.join("scans.csv"))?;
            report.write_json(&out.join("report.json"))?;
            report.write_histograms_csv(&out.join("distance_histograms.csv"), 0.5)?;
            for m in &report.methods {
                for a in &m.aggregates {
                    let f = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.3}"));
                    println!("{:<16} {:<5} n={:<4} median {} [{}, {}]", m.method, a.metric.as_str(), a.n, f(a.median), f(a.ci_lo), f(a.ci_hi));
                }
            }
        }
        Command::Report { json } => {
            let m = Manifest::load(&cli.manifest)?;
            let f = print_funnel(&m);
            if let Some(p) = json {
                std::fs::write(&p, serde_json::to_string_pretty(&f)?)?;
            }
        }
        Command::Serve { host, port, ui } => {
            let m = manifest_for_reading(&cli.manifest)?;
            let addr: SocketAddr = format!("{host}:{port}")
                .parse()
                .map_err(|e| Error::Config(format!("bad address {host}:{port}: {e}")))?;
            let state = server::AppState::new(m, cfg, ui);
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(server::serve(state, addr))?;
        }
    }
    Ok(())
}

fn print_funnel(m: &Manifest) -> colonseg::manifest::Funnel {
    let f = report_funnel(m);
    println!("total      {}", f.total);
    println!("included   {}", f.included);
    if f.pending > 0 {
        println!("pending    {}", f.pending);
    }
    for (reason, n) in &f.excluded {
        if *n > 0 {
            println!("{reason:<20} {n}");
        }
    }
    f
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
