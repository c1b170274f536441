use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use qaoa_init::bench::{
    self, BenchMethod, ExperimentConfig, ExperimentKind, PipelineConfig, CNN_CHECKPOINT, GRU_CHECKPOINT,
    LABELS_FILE,
};
use qaoa_init::checkpoint::{gru_hidden_size, load_gru, save_cnn, save_gru};
use qaoa_init::{Error, Result};

/// QAOA parameter-initialization benchmarks.
#[derive(Parser, Debug)]
#[command(name = "qaoa-bench", version)]
struct Cli {
    /// JSON pipeline configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (also QAOA_OUTPUT_DIR).
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// Worker threads (also QAOA_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train the GRU meta-optimizer and write its checkpoint.
    TrainGru {
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        hidden: Option<usize>,
        #[arg(long)]
        graphs: Option<usize>,
    },
    /// Generate depth-2 training labels with a trained GRU.
    Labels {
        #[arg(long)]
        gru: Option<PathBuf>,
        #[arg(long)]
        restarts: Option<usize>,
        /// Must match the GRU run so the same graphs are labelled.
        #[arg(long)]
        graphs: Option<usize>,
    },
    /// Train the CNN on a label file and write its checkpoint.
    TrainCnn {
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Run a benchmark grid and write raw and aggregate CSVs.
    Bench {
        #[arg(long)]
        experiment: Option<ExperimentKind>,
        /// `4..14` or `4,6,8`.
        #[arg(long)]
        nodes: Option<String>,
        /// Comma-separated edge probabilities.
        #[arg(long)]
        probabilities: Option<String>,
        #[arg(long)]
        instances: Option<usize>,
        /// Comma-separated: adam, rmsprop, adagrad, gru, gru-cnn, bilinear, random.
        #[arg(long)]
        methods: Option<String>,
        #[arg(long)]
        depth: Option<usize>,
        #[arg(long)]
        gru: Option<PathBuf>,
        #[arg(long)]
        cnn: Option<PathBuf>,
        /// Raw CSV name inside the output directory.
        #[arg(long)]
        out: Option<String>,
        #[arg(long)]
        save_graphs: bool,
    },
    /// Summarize one or more raw result CSVs.
    Report {
        #[arg(required = true)]
        csv: Vec<PathBuf>,
        /// Also write the aggregate table here.
        #[arg(long)]
        aggregate: Option<PathBuf>,
    },
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::from_file(path)?,
        None => PipelineConfig::default(),
    };
    cfg.apply_env(|k| std::env::var(k).ok())?;
    if let Some(dir) = &cli.output_dir {
        cfg.output_dir = Some(dir.clone());
    }
    if let Some(t) = cli.threads {
        cfg.threads = Some(t);
    }
    if let Some(seed) = cli.seed {
        cfg.train.seed = seed;
        if let Some(e) = cfg.experiment.as_mut() {
            e.seed = seed;
        }
    }
    Ok(cfg)
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = load_config(&cli)?;
    bench::init_thread_pool(cfg.threads);
    let out = cfg.output_dir();
    match cli.command {
        Command::TrainGru { epochs, hidden, graphs } => {
            if let Some(e) = epochs {
                cfg.train.gru.epochs = e;
            }
            if let Some(h) = hidden {
                cfg.train.gru.gru.hidden = h;
            }
            if let Some(g) = graphs {
                cfg.train.graphs = g;
            }
            ensure_dir(&out)?;
            let trained = bench::train_gru_stage(&cfg.train)?;
            let path = out.join(GRU_CHECKPOINT);
            save_gru(&trained.weights, bench::gru_metadata(&cfg.train), &path)?;
            bench::write_loss_history(&out.join("gru_loss.csv"), &trained.loss_history)?;
            println!(
                "trained GRU for {} epochs, final loss {:.6}; wrote {}",
                trained.loss_history.len(),
                trained.loss_history.last().copied().unwrap_or(f64::NAN),
                path.display()
            );
        }
        Command::Labels { gru, restarts, graphs } => {
            if let Some(r) = restarts {
                cfg.train.labels.restarts = r;
            }
            if let Some(g) = graphs {
                cfg.train.graphs = g;
            }
            let gru_path = gru.unwrap_or_else(|| out.join(GRU_CHECKPOINT));
            let hidden = gru_hidden_size(&gru_path)?;
            cfg.train.gru.gru.hidden = hidden;
            let (weights, _) = load_gru(&gru_path, hidden)?;
            ensure_dir(&out)?;
            let data = bench::label_stage(&cfg.train, &weights)?;
            let path = out.join(LABELS_FILE);
            bench::save_labels(&data, &path)?;
            println!("wrote {} labelled graphs to {}", data.len(), path.display());
        }
        Command::TrainCnn { labels, epochs } => {
            if let Some(e) = epochs {
                cfg.train.cnn.epochs = e;
            }
            let labels = labels.unwrap_or_else(|| out.join(LABELS_FILE));
            let data = bench::load_labels(&labels)?;
            ensure_dir(&out)?;
            let trained = bench::train_cnn_stage(&cfg.train, &data)?;
            let path = out.join(CNN_CHECKPOINT);
            save_cnn(&trained.weights, bench::cnn_metadata(&cfg.train, data.len()), &path)?;
            bench::write_loss_history(&out.join("cnn_loss.csv"), &trained.loss_history)?;
            println!(
                "trained CNN: loss {:.6} -> {:.6}; wrote {}",
                trained.loss_history.first().copied().unwrap_or(f64::NAN),
                trained.loss_history.last().copied().unwrap_or(f64::NAN),
                path.display()
            );
        }
        Command::Bench {
            experiment,
            nodes,
            probabilities,
            instances,
            methods,
            depth,
            gru,
            cnn,
            out: out_name,
            save_graphs,
        } => {
            let mut e = match (cfg.experiment.take(), experiment) {
                (Some(e), None) => e,
                (Some(e), Some(k)) if e.experiment == k => e,
                (_, Some(k)) => ExperimentConfig {
                    seed: cfg.train.seed,
                    ..ExperimentConfig::preset(k)
                },
                (None, None) => ExperimentConfig {
                    seed: cfg.train.seed,
                    ..ExperimentConfig::default()
                },
            };
            if let Some(n) = nodes {
                e.nodes = bench::parse_node_list(&n)?;
            }
            if let Some(p) = probabilities {
                e.probabilities = bench::parse_real_list(&p)?;
            }
            if let Some(i) = instances {
                e.instances = i;
            }
            if let Some(m) = methods {
                e.methods = bench::parse_method_list(&m)?;
            }
            if let Some(d) = depth {
                e.depth = d;
            }
            e.gru_checkpoint = gru.or(e.gru_checkpoint).or_else(|| Some(out.join(GRU_CHECKPOINT)));
            e.cnn_checkpoint = cnn.or(e.cnn_checkpoint).or_else(|| Some(out.join(CNN_CHECKPOINT)));
            e.save_graphs |= save_graphs;
            if e.methods.iter().any(|m| matches!(m, BenchMethod::Gru | BenchMethod::GruCnn | BenchMethod::Bilinear)) {
                if let Some(path) = e.gru_checkpoint.as_ref().filter(|p| p.exists()) {
                    e.gru.hidden = gru_hidden_size(path)?;
                }
            }
            let records = bench::run_experiment(&e)?;
            let path = out.join(out_name.unwrap_or_else(|| format!("{}.csv", e.experiment)));
            let agg = bench::write_results(&records, &path)?;
            if e.save_graphs {
                bench::save_graphs(&e, &out)?;
            }
            print!("{}", bench::report(&bench::aggregate(&records)));
            println!("wrote {} records to {} and {}", records.len(), path.display(), agg.display());
        }
        Command::Report { csv, aggregate } => {
            let mut records = Vec::new();
            for path in &csv {
                let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
                    path: path.clone(),
                    source: e,
                })?;
                records.extend(bench::parse_records_csv(&text).map_err(|e| {
                    Error::Config(format!("{}: {e}", path.display()))
                })?);
            }
            let rows = bench::aggregate(&records);
            print!("{}", bench::report(&rows));
            if let Some(path) = aggregate {
                std::fs::write(&path, bench::aggregate_to_csv(&rows)).map_err(|e| Error::Io { path, source: e })?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
