use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use diffext::formats::{read_mxf, write_mxf};
use diffext::harness::{load_model, run, save_model, Experiment, ExperimentConfig};
use diffext::online::{evaluate_cached, update, EvaluationCache};
use diffext::{fit, Error, ErrorKind, FitParams, Matrix, PointCloud, Result, SampleValues};

/// Function extension by normalized Gaussian-kernel diffusion.
#[derive(Parser)]
#[command(name = "diffext", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Logarithmic-spiral extension study.
    Spiral(ExperimentArgs),
    /// Sparse-view CT sinogram interpolation study.
    Ct(ExperimentArgs),
    /// Fit a model from sample points and values (MXF matrices, one sample per row).
    Fit(FitArgs),
    /// Evaluate a model at query points.
    Predict(PredictArgs),
    /// Add samples to a model, updating its cached evaluations.
    Update(UpdateArgs),
    /// Describe a model file.
    Info {
        #[arg(long)]
        model: PathBuf,
    },
}

#[derive(Args)]
struct ExperimentArgs {
    /// Flat key=value file; flags given here override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_name = "K,K,...")]
    batch_sizes: Option<String>,
    #[arg(long)]
    eval_count: Option<String>,
    #[arg(long)]
    n_bar: Option<String>,
    #[arg(long)]
    delta: Option<String>,
    #[arg(long)]
    m_reference: Option<String>,
    /// Half-width M of the sampling cube [-M, M]^n.
    #[arg(long)]
    half_width: Option<String>,
    #[arg(long)]
    noise_level: Option<String>,
    /// Image side in pixels.
    #[arg(long)]
    d: Option<String>,
    #[arg(long)]
    detectors: Option<String>,
    /// half-circle, full-wrap or scalar.
    #[arg(long)]
    embedding: Option<String>,
    /// parameter or arclength.
    #[arg(long)]
    spiral_sampling: Option<String>,
    #[arg(long)]
    grid_side: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    output_dir: Option<String>,
    /// Write measured runtimes to report.csv (otherwise zeros, for reproducible output).
    #[arg(long)]
    record_runtime: bool,
}

impl ExperimentArgs {
    fn into_config(self, experiment: Experiment) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::new(experiment);
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        let flags = [
            ("batch_sizes", self.batch_sizes),
            ("eval_count", self.eval_count),
            ("n_bar", self.n_bar),
            ("delta", self.delta),
            ("m_reference", self.m_reference),
            ("half_width", self.half_width),
            ("noise_level", self.noise_level),
            ("d", self.d),
            ("detectors", self.detectors),
            ("embedding", self.embedding),
            ("spiral_sampling", self.spiral_sampling),
            ("grid_side", self.grid_side),
            ("seed", self.seed),
            ("output_dir", self.output_dir),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, &v)?;
            }
        }
        if self.record_runtime {
            cfg.record_runtime = true;
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    points: PathBuf,
    #[arg(long)]
    values: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 2)]
    n_bar: usize,
    #[arg(long, default_value_t = 50)]
    m_reference: usize,
    #[arg(long, default_value_t = 1.0)]
    half_width: f64,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    queries: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// One identifier per query row; evaluations are cached in the model file.
    #[arg(long)]
    ids: Option<PathBuf>,
}

#[derive(Args)]
struct UpdateArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    points: PathBuf,
    #[arg(long)]
    values: PathBuf,
    /// Where to write the updated model; defaults to rewriting `--model`.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn read_points(path: &Path) -> Result<PointCloud> {
    PointCloud::from_matrix(&read_mxf(path)?)
}

fn read_values(path: &Path) -> Result<SampleValues> {
    let m = read_mxf(path)?;
    let rows: Vec<&[f64]> = (0..m.rows()).map(|r| m.row(r)).collect();
    if rows.is_empty() {
        return SampleValues::empty(m.cols());
    }
    SampleValues::from_rows(&rows)
}

fn experiment(args: ExperimentArgs, which: Experiment) -> Result<()> {
    let cfg = args.into_config(which)?;
    let out = run(&cfg)?;
    println!("method,batch,error,runtime_s");
    for r in &out.reports {
        println!("{},{},{},{:.3}", r.method, r.batch, r.error, r.runtime_s);
    }
    eprintln!(
        "wrote {} files to {}",
        out.artifacts.len(),
        cfg.output_dir.display()
    );
    Ok(())
}

fn cmd_fit(a: FitArgs) -> Result<()> {
    let points = read_points(&a.points)?;
    let values = read_values(&a.values)?;
    let params = FitParams {
        target_dim: a.n_bar,
        reference_count: a.m_reference,
        half_width: a.half_width,
        delta: a.delta,
        seed: a.seed,
    };
    let model = fit(&points, &values, &params)?;
    save_model(&a.model, &model, None)?;
    eprintln!(
        "fitted {} samples, n = {}, n_bar = {}, p = {}",
        model.len(),
        model.ambient_dim(),
        model.target_dim(),
        model.value_dim()
    );
    Ok(())
}

fn cmd_predict(a: PredictArgs) -> Result<()> {
    let (model, cache) = load_model(&a.model)?;
    let queries = read_points(&a.queries)?;
    let p = model.value_dim();
    let mut out = Matrix::zeros(queries.len(), p);
    match &a.ids {
        None => {
            for (i, e) in model.extend_batch(&queries)?.iter().enumerate() {
                for (c, v) in e.value.iter().enumerate() {
                    out.set(i, c, *v);
                }
            }
        }
        Some(ids_path) => {
            let text = std::fs::read_to_string(ids_path).map_err(|e| Error::io(ids_path, e))?;
            let ids: Vec<&str> = text
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .collect();
            if ids.len() != queries.len() {
                return Err(Error::DimensionMismatch {
                    context: "query ids vs query rows",
                    expected: queries.len(),
                    found: ids.len(),
                });
            }
            let mut cache = cache.unwrap_or_else(EvaluationCache::new);
            for (i, id) in ids.iter().enumerate() {
                let v = evaluate_cached(&model, &mut cache, id, queries.point(i))?;
                for (c, x) in v.iter().enumerate() {
                    out.set(i, c, *x);
                }
            }
            save_model(&a.model, &model, Some(&cache))?;
        }
    }
    write_mxf(&a.out, &out)
}

fn cmd_update(a: UpdateArgs) -> Result<()> {
    let (mut model, cache) = load_model(&a.model)?;
    let mut cache = cache.unwrap_or_else(EvaluationCache::new);
    let stats = update(
        &mut model,
        &mut cache,
        &read_points(&a.points)?,
        &read_values(&a.values)?,
    )?;
    save_model(a.out.as_deref().unwrap_or(&a.model), &model, Some(&cache))?;
    eprintln!(
        "added {} samples; updated {} cached entries ({} now exact) with {} kernel evaluations",
        stats.new_samples, stats.entries_updated, stats.entries_now_exact, stats.kernel_evaluations
    );
    Ok(())
}

fn cmd_info(path: &Path) -> Result<()> {
    let (model, cache) = load_model(path)?;
    println!("samples={}", model.len());
    println!("ambient_dim={}", model.ambient_dim());
    println!("target_dim={}", model.target_dim());
    println!("value_dim={}", model.value_dim());
    println!("delta={}", model.delta());
    println!("half_width={}", model.half_width());
    let sv: Vec<String> = model
        .basis()
        .singular_values()
        .iter()
        .map(|s| s.to_string())
        .collect();
    println!("singular_values={}", sv.join(","));
    println!("cached_queries={}", cache.map_or(0, |c| c.len()));
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Spiral(a) => experiment(a, Experiment::Spiral),
        Command::Ct(a) => experiment(a, Experiment::Ct),
        Command::Fit(a) => cmd_fit(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Update(a) => cmd_update(a),
        Command::Info { model } => cmd_info(&model),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.kind() {
                ErrorKind::Config => 2,
                ErrorKind::Io => 3,
                ErrorKind::Numerical => 4,
            })
        }
    }
}
