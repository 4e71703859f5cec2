use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand};
use lrcnc::io::{load_mask, RNG_NAME};
use lrcnc::metrics::quality;
use lrcnc::{
    add_gaussian_noise, apply_mask, derive_params, export_trace, load_image, make_mask,
    reshape_bands, save_image, segment_image, split_bands, Error, ImageGrid, NoiseSpec, Problem,
    PsnrMode, SolverConfig, SolverParams,
};

#[derive(Parser)]
#[command(
    name = "lrcnc",
    version,
    about = "Low-rank convex-non-convex image completion and segmentation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Recover missing pixels from a sampled image.
    Complete(CompleteArgs),
    /// Add noise, smooth with the solver, then cluster intensities.
    Segment(SegmentArgs),
    /// PSNR and SSIM between two images.
    Metrics(MetricsArgs),
}

#[derive(Args)]
#[command(group(ArgGroup::new("sampling").required(true).args(["sr", "mask"])))]
struct CompleteArgs {
    /// PGM/PPM image, or repeat once per band for a PGM band stack.
    #[arg(long, required = true)]
    input: Vec<PathBuf>,
    /// Output path; for band stacks it must contain `{band}`.
    #[arg(long)]
    output: PathBuf,
    /// Fraction of observed pixels, in (0, 1].
    #[arg(long)]
    sr: Option<f64>,
    /// Mask file written by an earlier run or by hand.
    #[arg(long)]
    mask: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Iteration trace as CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Ground truth for the reported PSNR/SSIM (defaults to the input).
    #[arg(long)]
    reference: Vec<PathBuf>,
    /// Report PSNR without the per-pixel MSE normalization.
    #[arg(long)]
    psnr_literal: bool,
    #[command(flatten)]
    solver: SolverFlags,
}

#[derive(Args)]
struct SegmentArgs {
    /// Clean PGM/PPM image, or repeat once per band for a PGM band stack.
    #[arg(long, required = true)]
    input: Vec<PathBuf>,
    #[arg(long)]
    output: PathBuf,
    /// Mean of the additive Gaussian noise (variance 0.01); 0 skips the noise.
    #[arg(long, default_value_t = 0.1)]
    noise_level: f64,
    /// Number of clusters.
    #[arg(long)]
    k: usize,
    /// Comma-separated output intensities, one per cluster in ascending order.
    #[arg(long, value_delimiter = ',')]
    palette: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Ground truth for the reported PSNR/SSIM (defaults to the clean input).
    #[arg(long)]
    reference: Vec<PathBuf>,
    #[arg(long)]
    psnr_literal: bool,
    #[command(flatten)]
    solver: SolverFlags,
}

#[derive(Args)]
struct MetricsArgs {
    #[arg(long, required = true)]
    reference: Vec<PathBuf>,
    #[arg(long, required = true)]
    input: Vec<PathBuf>,
    #[arg(long)]
    psnr_literal: bool,
}

/// Overrides for the profile defaults.
#[derive(Args)]
struct SolverFlags {
    #[arg(long)]
    a: Option<f64>,
    #[arg(long)]
    t: Option<f64>,
    #[arg(long)]
    t2: Option<f64>,
    #[arg(long)]
    rho1: Option<f64>,
    #[arg(long)]
    rho2: Option<f64>,
    #[arg(long)]
    tau1: Option<f64>,
    #[arg(long)]
    tau2: Option<f64>,
    #[arg(long)]
    tau3: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
}

impl SolverFlags {
    fn apply(&self, mut c: SolverConfig) -> SolverConfig {
        let set = |slot: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *slot = v;
            }
        };
        set(&mut c.a, self.a);
        set(&mut c.t, self.t);
        set(&mut c.t2, self.t2);
        set(&mut c.rho1, self.rho1);
        set(&mut c.rho2, self.rho2);
        set(&mut c.tau1, self.tau1);
        set(&mut c.tau2, self.tau2);
        set(&mut c.tau3, self.tau3);
        set(&mut c.tol, self.tol);
        if let Some(n) = self.max_iter {
            c.max_iter = n;
        }
        c
    }
}

struct Failure {
    stage: &'static str,
    code: u8,
    message: String,
}

fn fail(stage: &'static str) -> impl FnOnce(Error) -> Failure {
    move |e| {
        let code = match e {
            Error::Io { .. }
            | Error::UnsupportedFormat { .. }
            | Error::UnsupportedDepth { .. }
            | Error::MalformedMask { .. } => 3,
            Error::Divergence { .. } => 4,
            _ => 2,
        };
        Failure {
            stage,
            code,
            message: e.to_string(),
        }
    }
}

fn usage(stage: &'static str, message: impl Display) -> Failure {
    Failure {
        stage,
        code: 2,
        message: message.to_string(),
    }
}

/// Bands from one multi-band file or a stack of single-band files,
/// concatenated side by side.
struct Loaded {
    matrix: ImageGrid,
    bands: usize,
}

fn load_bands(paths: &[PathBuf]) -> Result<Loaded, Failure> {
    let mut bands = Vec::new();
    for p in paths {
        bands.extend(load_image(p).map_err(fail("load"))?);
    }
    if paths.len() > 1 && bands.len() != paths.len() {
        return Err(usage(
            "load",
            "band stacks must consist of single-band PGM files",
        ));
    }
    let matrix = reshape_bands(&bands).map_err(fail("load"))?;
    Ok(Loaded {
        matrix,
        bands: bands.len(),
    })
}

fn save_bands(
    output: &Path,
    matrix: &ImageGrid,
    bands: usize,
    stacked: bool,
) -> Result<(), Failure> {
    let parts = split_bands(matrix, bands).map_err(fail("write"))?;
    if !stacked {
        return save_image(output, &parts).map_err(fail("write"));
    }
    let pattern = output.to_string_lossy();
    if !pattern.contains("{band}") {
        return Err(usage(
            "write",
            "band stack output needs a `{band}` placeholder",
        ));
    }
    for (b, part) in parts.iter().enumerate() {
        let path = pattern.replace("{band}", &b.to_string());
        save_image(&path, std::slice::from_ref(part)).map_err(fail("write"))?;
    }
    Ok(())
}

fn derive(config: &SolverConfig) -> Result<SolverParams, Failure> {
    let params = derive_params(config).map_err(fail("params"))?;
    for w in &params.warnings {
        eprintln!("warning: {w}");
    }
    Ok(params)
}

fn reference_or(paths: &[PathBuf], fallback: &ImageGrid) -> Result<ImageGrid, Failure> {
    if paths.is_empty() {
        return Ok(fallback.clone());
    }
    let reference = load_bands(paths)?.matrix;
    reference
        .ensure_same_shape(fallback)
        .map_err(fail("reference"))?;
    Ok(reference)
}

fn mode(literal: bool) -> PsnrMode {
    if literal {
        PsnrMode::Literal
    } else {
        PsnrMode::Mse
    }
}

fn number(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.6}")
    } else {
        v.to_string()
    }
}

fn complete(args: CompleteArgs) -> Result<(), Failure> {
    let loaded = load_bands(&args.input)?;
    let (rows, cols) = loaded.matrix.shape();
    let mask = match (&args.mask, args.sr) {
        (Some(path), _) => {
            let m = load_mask(path).map_err(fail("mask"))?;
            if m.shape() != (rows, cols) {
                return Err(usage(
                    "mask",
                    format!(
                        "mask is {}x{} but the image is {rows}x{cols}",
                        m.rows, m.cols
                    ),
                ));
            }
            m
        }
        (None, Some(sr)) => make_mask(rows, cols, sr, args.seed).map_err(fail("mask"))?,
        (None, None) => unreachable!("clap requires --sr or --mask"),
    };
    let observed = apply_mask(&loaded.matrix, &mask).map_err(fail("mask"))?;
    let reference = reference_or(&args.reference, &loaded.matrix)?;

    let params = derive(&args.solver.apply(SolverConfig::completion()))?;
    let psnr_mode = mode(args.psnr_literal);
    let solution = Problem::with_observed(&observed, &params, &mask.observed)
        .map_err(fail("solve"))?
        .with_psnr_mode(psnr_mode)
        .run(Some(&reference))
        .map_err(fail("solve"))?;

    save_bands(
        &args.output,
        &solution.image,
        loaded.bands,
        args.input.len() > 1,
    )?;
    if let Some(path) = &args.trace {
        export_trace(&solution.trace, path).map_err(fail("trace"))?;
    }
    let q = quality(&reference, &solution.image, psnr_mode).map_err(fail("metrics"))?;
    println!(
        "command=complete status={} iterations={} psnr={} ssim={} rows={rows} cols={cols} bands={} sr={} observed={} seed={} mask_rng={RNG_NAME} lambda={} beta1={} beta2={}",
        solution.trace.status.as_str(),
        solution.trace.iterations(),
        number(q.psnr),
        number(q.ssim),
        loaded.bands,
        number(mask.sr),
        mask.observed_count(),
        mask.seed,
        number(params.lambda),
        number(params.beta1),
        number(params.beta2),
    );
    Ok(())
}

fn segment(args: SegmentArgs) -> Result<(), Failure> {
    if args.k == 0 {
        return Err(usage("params", "k must be at least 1"));
    }
    let loaded = load_bands(&args.input)?;
    let (rows, cols) = loaded.matrix.shape();
    let reference = reference_or(&args.reference, &loaded.matrix)?;
    // Level 0 means a noiseless run, not zero-mean noise.
    let noisy = if args.noise_level == 0.0 {
        loaded.matrix.clone()
    } else {
        let spec = NoiseSpec::new(args.noise_level, 0.01, args.seed).map_err(fail("noise"))?;
        add_gaussian_noise(&loaded.matrix, &spec)
    };

    let params = derive(
        &args
            .solver
            .apply(SolverConfig::segmentation(args.noise_level)),
    )?;
    let solution = Problem::new(&noisy, &params)
        .map_err(fail("solve"))?
        .run(None)
        .map_err(fail("solve"))?;
    let (segmented, clustering) =
        segment_image(&solution.image, args.k, args.seed, args.palette.as_deref())
            .map_err(fail("segment"))?;

    save_bands(&args.output, &segmented, loaded.bands, args.input.len() > 1)?;
    if let Some(path) = &args.trace {
        export_trace(&solution.trace, path).map_err(fail("trace"))?;
    }
    let q = quality(&reference, &segmented, mode(args.psnr_literal)).map_err(fail("metrics"))?;
    let centroids: Vec<String> = clustering.centroids.iter().map(|&c| number(c)).collect();
    println!(
        "command=segment status={} iterations={} psnr={} ssim={} rows={rows} cols={cols} bands={} k={} noise_level={} seed={} a={} lambda={} beta1={} beta2={} centroids={}",
        solution.trace.status.as_str(),
        solution.trace.iterations(),
        number(q.psnr),
        number(q.ssim),
        loaded.bands,
        args.k,
        number(args.noise_level),
        args.seed,
        number(params.config.a),
        number(params.lambda),
        number(params.beta1),
        number(params.beta2),
        centroids.join(","),
    );
    Ok(())
}

fn metrics(args: MetricsArgs) -> Result<(), Failure> {
    let reference = load_bands(&args.reference)?.matrix;
    let test = load_bands(&args.input)?.matrix;
    let q = quality(&reference, &test, mode(args.psnr_literal)).map_err(fail("metrics"))?;
    println!(
        "command=metrics psnr={} ssim={}",
        number(q.psnr),
        number(q.ssim)
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Complete(args) => complete(args),
        Command::Segment(args) => segment(args),
        Command::Metrics(args) => metrics(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: stage={} {}", f.stage, f.message);
            ExitCode::from(f.code)
        }
    }
}
