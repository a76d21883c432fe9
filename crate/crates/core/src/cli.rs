//! Command-line entry points: `segment`, `synth`, `eval` and `sweep-s`.
//!
//! Exit codes: 0 on success, 1 on usage errors, 2 on runtime errors. All
//! outputs (masks, reports, stdout) are deterministic for fixed inputs.

use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::error::ErrorKind;
use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};

use crate::capacity::PriorConfig;
use crate::flow::{solve_inner, InnerSolverConfig, SourceMode};
use crate::grid::ImageGrid;
use crate::image_io::{load_image, load_mask, save_image, save_mask};
use crate::metrics::{dice, hausdorff95, BinaryMask, MetricError};
use crate::report::{EvalMetrics, RunReport};
use crate::segmenter::{initialize, segment, threshold_mask, InitStrategy, SegmenterConfig};
use crate::synth::{generate_synthetic, Shape, SynthSpec};

#[derive(Parser)]
#[command(
    name = "cmfseg",
    version,
    about = "Unsupervised binary image segmentation via continuous max-flow"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Segment an image and write the foreground mask.
    Segment(SegmentArgs),
    /// Generate a synthetic test image with its ground-truth mask.
    Synth(SynthArgs),
    /// Compare a predicted mask against a ground-truth mask.
    Eval(EvalArgs),
    /// Solve once per manual source level, capacity estimation disabled.
    SweepS(SweepArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum SourceModeArg {
    Derived,
    AsPrinted,
}

impl From<SourceModeArg> for SourceMode {
    fn from(v: SourceModeArg) -> Self {
        match v {
            SourceModeArg::Derived => SourceMode::Derived,
            SourceModeArg::AsPrinted => SourceMode::AsPrinted,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum InitStrategyArg {
    Percentile,
    Constants,
}

impl From<InitStrategyArg> for InitStrategy {
    fn from(v: InitStrategyArg) -> Self {
        match v {
            InitStrategyArg::Percentile => InitStrategy::Percentile,
            InitStrategyArg::Constants => InitStrategy::Constants,
        }
    }
}

#[derive(Args, Clone)]
struct SolverFlags {
    /// Augmented Lagrangian weight.
    #[arg(long, default_value_t = 0.3)]
    c: f64,
    /// Gradient step size for the spatial flow update.
    #[arg(long, default_value_t = 0.11)]
    gamma: f64,
    /// Inner iteration cap.
    #[arg(long, default_value_t = 300)]
    max_iters: usize,
    /// Inner stopping tolerance on the conservation residual.
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
    /// Source flow update rule.
    #[arg(long, value_enum, default_value_t = SourceModeArg::Derived)]
    source_mode: SourceModeArg,
    /// Clamp the source flow to its capacity.
    #[arg(long, default_value_t = true, action = ArgAction::Set)]
    clamp_source: bool,
}

impl SolverFlags {
    fn to_config(&self) -> InnerSolverConfig {
        InnerSolverConfig {
            c: self.c,
            gamma: self.gamma,
            max_iters: self.max_iters,
            tol: self.tol,
            source_mode: self.source_mode.into(),
            clamp_source: self.clamp_source,
        }
    }
}

#[derive(Args, Clone)]
struct PriorFlags {
    /// Smoothing weight of the capacity prior.
    #[arg(long, default_value_t = 5.0)]
    beta: f64,
    /// Neighborhood half-width of the prior window.
    #[arg(long, default_value_t = 2)]
    radius: usize,
    /// Average p_t + t_level in the sink multiplier instead of p_t + s_level.
    #[arg(long, default_value_t = false, action = ArgAction::Set)]
    sink_uses_t_level: bool,
    /// Clamp bound applied to the prior exponent.
    #[arg(long, default_value_t = 50.0)]
    exponent_cap: f64,
}

impl PriorFlags {
    fn to_config(&self) -> PriorConfig {
        PriorConfig {
            beta: self.beta,
            radius: self.radius,
            sink_uses_t_level: self.sink_uses_t_level,
            exponent_cap: self.exponent_cap,
        }
    }
}

#[derive(Args)]
struct SegmentArgs {
    /// Input image (PGM P2/P5 or 8-bit PNG).
    #[arg(long)]
    input: PathBuf,
    /// Where the foreground mask PNG is written.
    #[arg(long)]
    output_mask: PathBuf,
    /// Optional ground-truth mask for metric reporting.
    #[arg(long)]
    ground_truth: Option<PathBuf>,
    /// Optional CSV report path.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Report the darker region as foreground instead of the brighter one.
    #[arg(long)]
    invert_foreground: bool,
    #[command(flatten)]
    solver: SolverFlags,
    #[command(flatten)]
    prior: PriorFlags,
    /// Outer iteration cap.
    #[arg(long, default_value_t = 20)]
    max_outer: usize,
    /// Outer stopping tolerance on the capacity change.
    #[arg(long, default_value_t = 1e-3)]
    outer_tol: f64,
    /// Label threshold.
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    /// How the initial level fields are chosen.
    #[arg(long, value_enum, default_value_t = InitStrategyArg::Percentile)]
    init_strategy: InitStrategyArg,
    /// Source level for the constants strategy.
    #[arg(long, default_value_t = 0.75)]
    init_s: f64,
    /// Sink level for the constants strategy.
    #[arg(long, default_value_t = 0.25)]
    init_t: f64,
}

impl SegmentArgs {
    fn to_config(&self) -> SegmenterConfig {
        SegmenterConfig {
            inner: self.solver.to_config(),
            prior: self.prior.to_config(),
            max_outer: self.max_outer,
            outer_tol: self.outer_tol,
            threshold: self.threshold,
            init_strategy: self.init_strategy.into(),
            init_s: self.init_s,
            init_t: self.init_t,
        }
    }

    fn config_echo(&self) -> Vec<(String, String)> {
        let opt = |p: &Option<PathBuf>| {
            p.as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_else(|| "-".into())
        };
        vec![
            ("command".into(), "segment".into()),
            ("input".into(), self.input.display().to_string()),
            (
                "output-mask".into(),
                self.output_mask.display().to_string(),
            ),
            ("ground-truth".into(), opt(&self.ground_truth)),
            ("report".into(), opt(&self.report)),
            (
                "invert-foreground".into(),
                self.invert_foreground.to_string(),
            ),
            ("c".into(), self.solver.c.to_string()),
            ("gamma".into(), self.solver.gamma.to_string()),
            ("max-iters".into(), self.solver.max_iters.to_string()),
            ("tol".into(), self.solver.tol.to_string()),
            (
                "source-mode".into(),
                match self.solver.source_mode {
                    SourceModeArg::Derived => "derived".into(),
                    SourceModeArg::AsPrinted => "as-printed".into(),
                },
            ),
            (
                "clamp-source".into(),
                self.solver.clamp_source.to_string(),
            ),
            ("beta".into(), self.prior.beta.to_string()),
            ("radius".into(), self.prior.radius.to_string()),
            (
                "sink-uses-t-level".into(),
                self.prior.sink_uses_t_level.to_string(),
            ),
            (
                "exponent-cap".into(),
                self.prior.exponent_cap.to_string(),
            ),
            ("max-outer".into(), self.max_outer.to_string()),
            ("outer-tol".into(), self.outer_tol.to_string()),
            ("threshold".into(), self.threshold.to_string()),
            (
                "init-strategy".into(),
                match self.init_strategy {
                    InitStrategyArg::Percentile => "percentile".into(),
                    InitStrategyArg::Constants => "constants".into(),
                },
            ),
            ("init-s".into(), self.init_s.to_string()),
            ("init-t".into(), self.init_t.to_string()),
        ]
    }
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    width: usize,
    #[arg(long)]
    height: usize,
    #[arg(long, default_value_t = 0.2)]
    background: f64,
    #[arg(long, default_value_t = 0.0)]
    noise_sigma: f64,
    #[arg(long, default_value_t = 0)]
    rng_seed: u64,
    /// Disc as center_i,center_j,radius,intensity; repeatable.
    #[arg(long = "disc", value_name = "I,J,R,V")]
    discs: Vec<String>,
    /// Rectangle as top,left,height,width,intensity; repeatable.
    #[arg(long = "rect", value_name = "T,L,H,W,V")]
    rects: Vec<String>,
    /// Where the image PNG is written.
    #[arg(long)]
    out_image: PathBuf,
    /// Optional ground-truth mask PNG.
    #[arg(long)]
    out_mask: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Predicted mask image.
    #[arg(long)]
    pred: PathBuf,
    /// Ground-truth mask image.
    #[arg(long)]
    truth: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    /// Input image (PGM P2/P5 or 8-bit PNG).
    #[arg(long)]
    input: PathBuf,
    /// Fixed sink level.
    #[arg(long)]
    t_level: f64,
    /// Comma-separated source levels, one solve and one mask per level.
    #[arg(long)]
    s_levels: String,
    /// Output masks are written as <prefix><level>.png.
    #[arg(long, default_value = "mask_s")]
    output_prefix: String,
    /// Label threshold.
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    #[command(flatten)]
    solver: SolverFlags,
}

/// Parse argv and run; returns the process exit code.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(err) => {
            return match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{err}");
                    0
                }
                _ => {
                    eprint!("{err}");
                    1
                }
            };
        }
    };
    let result = match cli.command {
        Command::Segment(args) => run_segment(&args),
        Command::Synth(args) => run_synth(&args),
        Command::Eval(args) => run_eval(&args),
        Command::SweepS(args) => run_sweep(&args),
    };
    match result {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err:#}");
            2
        }
    }
}

/// Reorient so the written foreground is the brighter region (mean image
/// intensity over mask vs complement); `invert` flips the choice. A mask
/// without both regions is left as segmented.
fn orient_foreground(mask: BinaryMask, image: &ImageGrid, invert: bool) -> BinaryMask {
    let mut sum_in = 0.0;
    let mut n_in = 0usize;
    let mut sum_out = 0.0;
    let mut n_out = 0usize;
    for i in 0..mask.height() {
        for j in 0..mask.width() {
            let v = image.get(i, j);
            if mask.is_set(i, j) {
                sum_in += v;
                n_in += 1;
            } else {
                sum_out += v;
                n_out += 1;
            }
        }
    }
    let mut out = mask;
    if n_in > 0 && n_out > 0 && sum_in / (n_in as f64) < sum_out / (n_out as f64) {
        out = out.complement();
    }
    if invert {
        out = out.complement();
    }
    out
}

fn metric_line(pred: &BinaryMask, truth: &BinaryMask) -> Result<(String, EvalMetrics)> {
    let d = dice(pred, truth)?;
    // An empty region leaves the surface distance undefined; report it as
    // nan rather than aborting the run.
    let hd = match hausdorff95(pred, truth) {
        Ok(v) => v,
        Err(MetricError::EmptyMask) => f64::NAN,
        Err(e) => return Err(e.into()),
    };
    Ok((
        format!("dice={d:.6} hd95={hd:.6}"),
        EvalMetrics { dice: d, hd95: hd },
    ))
}

fn run_segment(args: &SegmentArgs) -> Result<()> {
    let start = Instant::now();
    let image = load_image(&args.input)
        .with_context(|| format!("reading {}", args.input.display()))?;
    let cfg = args.to_config();
    let result = segment(&image, &cfg)?;
    let foreground = orient_foreground(result.mask.clone(), &image, args.invert_foreground);
    save_mask(&foreground, &args.output_mask)
        .with_context(|| format!("writing {}", args.output_mask.display()))?;

    let mut metrics = None;
    if let Some(truth_path) = &args.ground_truth {
        let truth = load_mask(truth_path)
            .with_context(|| format!("reading {}", truth_path.display()))?;
        let (line, m) = metric_line(&foreground, &truth)?;
        println!("{line}");
        metrics = Some(m);
    }

    let duration = start.elapsed().as_secs_f64();
    if let Some(report_path) = &args.report {
        let report = RunReport::from_result(&result, args.config_echo(), metrics, duration);
        fs::write(report_path, report.to_csv_string())
            .with_context(|| format!("writing {}", report_path.display()))?;
    }
    eprintln!(
        "segmented {} in {duration:.3}s ({} outer iterations)",
        args.input.display(),
        result.outer_iterations
    );
    Ok(())
}

fn parse_numbers(token: &str, expected: usize, what: &str) -> Result<Vec<f64>> {
    let parts: Vec<f64> = token
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .with_context(|| format!("bad {what} component {t:?}"))
        })
        .collect::<Result<_>>()?;
    if parts.len() != expected {
        bail!("{what} {token:?} needs {expected} comma-separated numbers");
    }
    Ok(parts)
}

fn run_synth(args: &SynthArgs) -> Result<()> {
    let mut shapes = Vec::new();
    for disc in &args.discs {
        let v = parse_numbers(disc, 4, "disc")?;
        shapes.push(Shape::Disc {
            center_i: v[0],
            center_j: v[1],
            radius: v[2],
            intensity: v[3],
        });
    }
    for rect in &args.rects {
        let v = parse_numbers(rect, 5, "rect")?;
        for (idx, value) in v[..4].iter().enumerate() {
            if value.fract() != 0.0 || *value < 0.0 {
                bail!(
                    "rect {rect:?} component {idx} must be a non-negative integer"
                );
            }
        }
        shapes.push(Shape::Rect {
            top: v[0] as usize,
            left: v[1] as usize,
            height: v[2] as usize,
            width: v[3] as usize,
            intensity: v[4],
        });
    }
    let spec = SynthSpec {
        width: args.width,
        height: args.height,
        shapes,
        background: args.background,
        noise_sigma: args.noise_sigma,
        rng_seed: args.rng_seed,
    };
    let (image, mask) = generate_synthetic(&spec)?;
    save_image(&image, &args.out_image)
        .with_context(|| format!("writing {}", args.out_image.display()))?;
    if let Some(mask_path) = &args.out_mask {
        save_mask(&mask, mask_path)
            .with_context(|| format!("writing {}", mask_path.display()))?;
    }
    Ok(())
}

fn run_eval(args: &EvalArgs) -> Result<()> {
    let pred = load_mask(&args.pred)
        .with_context(|| format!("reading {}", args.pred.display()))?;
    let truth = load_mask(&args.truth)
        .with_context(|| format!("reading {}", args.truth.display()))?;
    let (line, _) = metric_line(&pred, &truth)?;
    println!("{line}");
    Ok(())
}

fn run_sweep(args: &SweepArgs) -> Result<()> {
    let image = load_image(&args.input)
        .with_context(|| format!("reading {}", args.input.display()))?;
    let inner = args.solver.to_config();
    let tokens: Vec<&str> = args
        .s_levels
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .collect();
    if tokens.is_empty() {
        bail!("--s-levels needs at least one value");
    }
    for token in tokens {
        let s_level: f64 = token
            .parse()
            .with_context(|| format!("bad source level {token:?}"))?;
        let cfg = SegmenterConfig {
            inner,
            init_strategy: InitStrategy::Constants,
            init_s: s_level,
            init_t: args.t_level,
            threshold: args.threshold,
            ..SegmenterConfig::default()
        };
        // Manual capacities: initialize and solve once, no capacity updates.
        let (state, caps) = initialize(&image, &cfg)?;
        let (solved, diag) = solve_inner(state, &caps, &inner)?;
        let mask = threshold_mask(&solved.lambda, cfg.threshold);
        let path = PathBuf::from(format!("{}{}.png", args.output_prefix, token));
        save_mask(&mask, &path).with_context(|| format!("writing {}", path.display()))?;
        println!(
            "wrote {} (s={}, {} inner iterations)",
            path.display(),
            token,
            diag.iterations_run
        );
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orient_foreground_prefers_brighter_region() {
        let image = ImageGrid::from_fn(2, 2, |_, j| if j == 0 { 0.9 } else { 0.1 }).unwrap();
        // Mask marks the dark column; orientation flips it.
        let dark = BinaryMask::from_fn(2, 2, |_, j| j == 1);
        let oriented = orient_foreground(dark.clone(), &image, false);
        assert_eq!(oriented, dark.complement());
        // Inversion returns the dark region.
        let inverted = orient_foreground(dark.clone(), &image, true);
        assert_eq!(inverted, dark);
    }

    #[test]
    fn orient_foreground_keeps_uniform_masks() {
        let image = ImageGrid::from_fn(2, 2, |_, _| 0.5).unwrap();
        let full = BinaryMask::from_fn(2, 2, |_, _| true);
        assert_eq!(orient_foreground(full.clone(), &image, false), full);
        assert_eq!(
            orient_foreground(full.clone(), &image, true),
            full.complement()
        );
    }

    #[test]
    fn usage_error_exits_one() {
        assert_eq!(run_cli(["cmfseg", "segment", "--no-such-flag"]), 1);
        assert_eq!(run_cli(["cmfseg", "bogus-subcommand"]), 1);
    }

    #[test]
    fn help_exits_zero() {
        assert_eq!(run_cli(["cmfseg", "--help"]), 0);
    }

    #[test]
    fn missing_input_exits_two() {
        assert_eq!(
            run_cli([
                "cmfseg",
                "segment",
                "--input",
                "/nonexistent/image.png",
                "--output-mask",
                "/tmp/out.png"
            ]),
            2
        );
    }
}
