use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use augopf::config::{ModeName, RunConfig};
use augopf::core::case::parse_case;
use augopf::core::opf::SolverOptions;
use augopf::core::powerflow::build_admittance;
use augopf::error::{Error, Result};
use augopf::format::write_ybus_triplets;
use augopf::pipeline::{self, ModelArg, SolveMode};

#[derive(Parser)]
#[command(name = "augopf", version, about = "Learned AC optimal power flow solution mappings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate a case file.
    Parse {
        case: PathBuf,
        /// Write the bus admittance matrix as `row col re im` triplets.
        #[arg(long)]
        ybus: Option<PathBuf>,
    },
    /// Solve the profile loads from random initial points and write the dataset.
    Generate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write `dataset.csv`.
        #[arg(long)]
        csv: bool,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        k_init: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train a network on a generated dataset.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        /// Comma-separated hidden widths.
        #[arg(long, value_delimiter = ',')]
        hidden: Option<Vec<usize>>,
        #[arg(long, value_enum)]
        mode: Option<InputArg>,
        #[arg(long)]
        init_seed: Option<u64>,
        #[arg(long)]
        shuffle_seed: Option<u64>,
    },
    /// Compare the solver and trained models on the test partition.
    Evaluate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        /// `TAG=PATH` of a checkpoint; repeatable.
        #[arg(long = "model")]
        models: Vec<ModelArg>,
        #[arg(long)]
        out: PathBuf,
        /// Re-solve and certify every record instead of evaluating models.
        #[arg(long)]
        solver_only: bool,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Solve one load from the initial points in a file; prints CSV records.
    Solve {
        #[arg(long)]
        case: PathBuf,
        #[arg(long)]
        load: PathBuf,
        #[arg(long)]
        x0: PathBuf,
        #[arg(long, value_enum, default_value = "solver")]
        mode: SolveArg,
        #[arg(long)]
        model: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum InputArg {
    Augmented,
    LoadOnly,
}

#[derive(Clone, Copy, ValueEnum)]
enum SolveArg {
    Solver,
    Dnn,
    BestOfK,
}

fn load_config(path: &Path, workers: Option<usize>) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(path)?;
    if let Some(w) = workers {
        cfg.workers = w;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Parse { case, ybus } => {
            print!("{}", pipeline::cmd_parse(&case)?);
            if let Some(out) = ybus {
                let text = std::fs::read_to_string(&case).map_err(Error::io(&case))?;
                let c = parse_case(&text)?;
                let y = build_admittance(&c)?;
                let f = std::fs::File::create(&out).map_err(Error::io(&out))?;
                write_ybus_triplets(&c, &y, std::io::BufWriter::new(f)).map_err(Error::io(&out))?;
            }
        }
        Command::Generate {
            config,
            out,
            csv,
            workers,
            k_init,
            seed,
        } => {
            let mut cfg = load_config(&config, workers)?;
            if let Some(k) = k_init {
                cfg.generate.k_init = k;
            }
            if let Some(s) = seed {
                cfg.generate.seed = s;
            }
            cfg.check()?;
            let ds = pipeline::cmd_generate(&cfg, &out, csv)?;
            let conv = ds.records.iter().filter(|r| r.converged).count();
            println!(
                "{} records ({} starts per load), {} converged, written to {}",
                ds.records.len(),
                cfg.generate.k_init,
                conv,
                out.display()
            );
        }
        Command::Train {
            config,
            dataset,
            out,
            epochs,
            batch_size,
            lr,
            hidden,
            mode,
            init_seed,
            shuffle_seed,
        } => {
            let mut cfg = load_config(&config, None)?;
            let t = &mut cfg.train;
            if let Some(v) = epochs {
                t.epochs = v;
            }
            if let Some(v) = batch_size {
                t.batch_size = v;
            }
            if let Some(v) = lr {
                t.learning_rate = v;
            }
            if let Some(v) = hidden {
                t.hidden = v;
            }
            if let Some(m) = mode {
                t.mode = match m {
                    InputArg::Augmented => ModeName::Augmented,
                    InputArg::LoadOnly => ModeName::LoadOnly,
                };
            }
            if let Some(v) = init_seed {
                t.init_seed = v;
            }
            if let Some(v) = shuffle_seed {
                t.shuffle_seed = v;
            }
            cfg.check()?;
            let t = &cfg.train;
            println!(
                "training {:?} hidden {:?}, batch {}, epochs {}, lr {:e}, adam ({}, {}, {:e})",
                t.mode, t.hidden, t.batch_size, t.epochs, t.learning_rate, t.beta1, t.beta2, t.eps
            );
            pipeline::cmd_train(&cfg, &dataset, &out)?;
            println!("checkpoint written to {}", out.join("model.ckpt").display());
        }
        Command::Evaluate {
            config,
            dataset,
            models,
            out,
            solver_only,
            workers,
        } => {
            let cfg = load_config(&config, workers)?;
            pipeline::cmd_evaluate(&cfg, &dataset, &models, &out, solver_only)?;
            let table = if solver_only { "audit.txt" } else { "report.txt" };
            let timed = out.join("table.txt");
            let path = if !solver_only && timed.exists() { timed } else { out.join(table) };
            print!("{}", std::fs::read_to_string(&path).map_err(Error::io(&path))?);
        }
        Command::Solve {
            case,
            load,
            x0,
            mode,
            model,
        } => {
            let text = std::fs::read_to_string(&case).map_err(Error::io(&case))?;
            let c = parse_case(&text)?;
            let l = pipeline::read_load_csv(&c, &load)?;
            let starts = pipeline::read_x0_csv(&c, &x0)?;
            let ck = model.map(|p| pipeline::read_checkpoint(&p, None)).transpose()?;
            let mode = match mode {
                SolveArg::Solver => SolveMode::Solver,
                SolveArg::Dnn => SolveMode::Dnn,
                SolveArg::BestOfK => SolveMode::BestOfK,
            };
            print!(
                "{}",
                pipeline::cmd_solve(&c, &l, &starts, mode, ck.as_ref(), &SolverOptions::default())?
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.class().exit_code() as u8)
        }
    }
}
