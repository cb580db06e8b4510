use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mfa_cli::commands::{
    cmd_bench, cmd_compare, cmd_encode, cmd_render, cmd_sweep, cmd_synth, BenchOpts, BenchSource,
    CompareOpts, EncodeOpts, FieldArg, RenderOpts, RenderSource, SweepOpts, SynthOpts,
};
use mfa_cli::error::CliError;
use mfa_cli::settings::{
    parse_bounds, parse_color, parse_f64_quad, parse_f64_triple, parse_on_off, parse_opacity,
    parse_usize_triple, ColorSpec, OpacitySpec, RenderSettings,
};
use mfa_core::filters::FilterKind;
use mfa_core::model::DomainBounds;

fn parse_field(s: &str) -> Result<FieldArg, String> {
    s.parse()
}

fn parse_filter(s: &str) -> Result<FilterKind, String> {
    s.parse()
}

fn parse_bench_source(s: &str) -> Result<BenchSource, String> {
    s.parse()
}

/// Continuous volume models: encode, query, render, and score.
#[derive(Parser)]
#[command(name = "mfa", version, disable_help_subcommand = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample an analytic field into a raw grid or a scattered point cloud
    Synth(SynthArgs),
    /// Fit a B-spline volume model to a grid or point cloud
    Encode(EncodeArgs),
    /// Ray-cast an image from a model, a filtered grid, or an analytic field
    Render(RenderArgs),
    /// Score one image against another (MSE, PSNR, SSIM, optional heatmap)
    Compare(CompareArgs),
    /// Encode and render across control-count and degree lists, scoring each
    Sweep(SweepArgs),
    /// Median render times for each source kind across volume sizes
    Bench(BenchArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// gaussian-beam, marschner-lobb, or multi-beam
    #[arg(long, value_parser = parse_field)]
    field: FieldArg,
    /// Grid resolution X,Y,Z (scalar broadcasts)
    #[arg(long, value_parser = parse_usize_triple)]
    dims: Option<[usize; 3]>,
    /// Scattered sample count (alternative to --dims)
    #[arg(long)]
    points: Option<usize>,
    /// Physical bounds x0,y0,z0,x1,y1,z1 (default: the field's domain)
    #[arg(long, value_parser = parse_bounds, allow_hyphen_values = true)]
    bounds: Option<DomainBounds<f64>>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EncodeArgs {
    /// Raw volume (expects a .meta sidecar next to it)
    #[arg(long)]
    input: Option<PathBuf>,
    /// Plain-text point cloud ("x y z value" lines)
    #[arg(long)]
    cloud: Option<PathBuf>,
    /// Fitting bounds for scattered data (default: bounding box)
    #[arg(long, value_parser = parse_bounds, allow_hyphen_values = true)]
    bounds: Option<DomainBounds<f64>>,
    /// Per-dimension polynomial degree (scalar broadcasts)
    #[arg(long, value_parser = parse_usize_triple, default_value = "2")]
    degree: [usize; 3],
    /// Per-dimension control counts (scalar broadcasts)
    #[arg(long, value_parser = parse_usize_triple)]
    nctrl: [usize; 3],
    /// Refine knots until --e-max or the caps are reached
    #[arg(long)]
    adaptive: bool,
    /// Allowable maximum relative error for --adaptive
    #[arg(long = "e-max", default_value_t = 0.01)]
    e_max: f64,
    #[arg(long = "max-rounds", default_value_t = 10)]
    max_rounds: usize,
    /// Per-dimension control-count cap for --adaptive (default: grid dims)
    #[arg(long = "max-ctrl", value_parser = parse_usize_triple)]
    max_ctrl: Option<[usize; 3]>,
    /// Output model file
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Clone)]
struct RenderFlags {
    /// key=value file; flags override its entries
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    height: Option<usize>,
    #[arg(long, value_parser = parse_f64_triple, allow_hyphen_values = true)]
    eye: Option<[f64; 3]>,
    #[arg(long = "look-at", value_parser = parse_f64_triple, allow_hyphen_values = true)]
    look_at: Option<[f64; 3]>,
    #[arg(long, value_parser = parse_f64_triple, allow_hyphen_values = true)]
    up: Option<[f64; 3]>,
    /// perspective or orthographic
    #[arg(long)]
    projection: Option<String>,
    /// Vertical field of view in degrees (perspective)
    #[arg(long)]
    fov: Option<f64>,
    /// Viewport height in world units (orthographic)
    #[arg(long = "ortho-height")]
    ortho_height: Option<f64>,
    /// Sample distance as a fraction of the volume diagonal
    #[arg(long)]
    step: Option<f64>,
    /// on or off
    #[arg(long, value_parser = parse_on_off)]
    shading: Option<bool>,
    /// Direction toward the light
    #[arg(long, value_parser = parse_f64_triple, allow_hyphen_values = true)]
    light: Option<[f64; 3]>,
    #[arg(long, value_parser = parse_f64_triple)]
    ambient: Option<[f64; 3]>,
    #[arg(long, value_parser = parse_f64_triple)]
    diffuse: Option<[f64; 3]>,
    #[arg(long, value_parser = parse_f64_triple)]
    specular: Option<[f64; 3]>,
    #[arg(long)]
    shininess: Option<f64>,
    /// Early-termination opacity threshold in (0, 1]; 1 disables
    #[arg(long = "o-max")]
    o_max: Option<f64>,
    /// r,g,b,a in [0, 1]
    #[arg(long, value_parser = parse_f64_quad)]
    background: Option<[f64; 4]>,
    /// ramp[:v0,v1[,a0,a1]] or step[:edge[,low,high]]
    #[arg(long, value_parser = parse_opacity)]
    opacity: Option<OpacitySpec>,
    /// constant[:r,g,b] or ramp:[v0,v1,]r0,g0,b0,r1,g1,b1
    #[arg(long, value_parser = parse_color)]
    color: Option<ColorSpec>,
    /// Rescale opacity by step length relative to the default step
    #[arg(long = "opacity-correction", value_parser = parse_on_off)]
    opacity_correction: Option<bool>,
    /// Worker thread count (default: all cores)
    #[arg(long)]
    workers: Option<usize>,
}

impl RenderFlags {
    fn resolve(&self) -> Result<RenderSettings, CliError> {
        let flags = RenderSettings {
            width: self.width,
            height: self.height,
            eye: self.eye,
            look_at: self.look_at,
            up: self.up,
            projection: self.projection.clone(),
            fov: self.fov,
            ortho_height: self.ortho_height,
            step: self.step,
            shading: self.shading,
            light: self.light,
            ambient: self.ambient,
            diffuse: self.diffuse,
            specular: self.specular,
            shininess: self.shininess,
            o_max: self.o_max,
            background: self.background,
            opacity: self.opacity.clone(),
            color: self.color.clone(),
            opacity_correction: self.opacity_correction,
            workers: self.workers,
        };
        flags.with_config(self.config.as_ref())
    }
}

#[derive(Args)]
struct RenderArgs {
    /// Encoded model file
    #[arg(long)]
    model: Option<PathBuf>,
    /// Raw volume to render through --filter
    #[arg(long)]
    grid: Option<PathBuf>,
    /// trilinear, tricubic, or catmull-rom (with --grid)
    #[arg(long, value_parser = parse_filter)]
    filter: Option<FilterKind>,
    /// Analytic ground-truth field
    #[arg(long, value_parser = parse_field)]
    analytic: Option<FieldArg>,
    /// Domain bounds for --analytic (default: the field's domain)
    #[arg(long, value_parser = parse_bounds, allow_hyphen_values = true)]
    bounds: Option<DomainBounds<f64>>,
    /// Output PPM image
    #[arg(long)]
    out: PathBuf,
    /// Also write an RGBA PAM image here
    #[arg(long)]
    pam: Option<PathBuf>,
    #[command(flatten)]
    flags: RenderFlags,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
    /// Write a per-pixel error heatmap PPM here
    #[arg(long)]
    heatmap: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, value_parser = parse_field)]
    field: FieldArg,
    #[arg(long, value_parser = parse_usize_triple, default_value = "64")]
    dims: [usize; 3],
    /// Control-count list, e.g. 8,16,32
    #[arg(long, value_delimiter = ',', required = true)]
    nctrl: Vec<usize>,
    /// Degree list, e.g. 1,2,3
    #[arg(long, value_delimiter = ',', required = true)]
    degree: Vec<usize>,
    /// Samples for the per-query timing columns
    #[arg(long = "query-samples", default_value_t = 20_000)]
    query_samples: usize,
    /// Output table file
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    flags: RenderFlags,
}

#[derive(Args)]
struct BenchArgs {
    /// Comma list of trilinear, tricubic, catmull-rom, mfa
    #[arg(
        long,
        value_delimiter = ',',
        value_parser = parse_bench_source,
        default_value = "trilinear,mfa,tricubic,catmull-rom"
    )]
    sources: Vec<BenchSource>,
    /// Cubic volume sizes to test
    #[arg(long, value_delimiter = ',', default_value = "16,32,64")]
    sizes: Vec<usize>,
    #[arg(long, default_value_t = 5)]
    reps: usize,
    /// Optional output table file
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    flags: RenderFlags,
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Synth(a) => cmd_synth(&SynthOpts {
            field: a.field,
            dims: a.dims,
            points: a.points,
            bounds: a.bounds,
            seed: a.seed,
            out: a.out,
        }),
        Command::Encode(a) => cmd_encode(&EncodeOpts {
            input: a.input,
            cloud: a.cloud,
            bounds: a.bounds,
            degree: a.degree,
            nctrl: a.nctrl,
            adaptive: a.adaptive,
            e_max: a.e_max,
            max_rounds: a.max_rounds,
            max_ctrl: a.max_ctrl,
            out: a.out,
        }),
        Command::Render(a) => {
            let source = match (&a.model, &a.grid, &a.analytic) {
                (Some(m), None, None) => {
                    if a.filter.is_some() {
                        return Err(CliError::usage("--filter only applies to --grid"));
                    }
                    RenderSource::Model(m.clone())
                }
                (None, Some(g), None) => RenderSource::Grid {
                    path: g.clone(),
                    filter: a.filter.ok_or_else(|| {
                        CliError::usage("--grid requires --filter <trilinear|tricubic|catmull-rom>")
                    })?,
                },
                (None, None, Some(f)) => {
                    if a.filter.is_some() {
                        return Err(CliError::usage("--filter only applies to --grid"));
                    }
                    RenderSource::Analytic(*f)
                }
                _ => {
                    return Err(CliError::usage(
                        "exactly one of --model, --grid, or --analytic is required",
                    ))
                }
            };
            cmd_render(&RenderOpts {
                source,
                bounds: a.bounds,
                settings: a.flags.resolve()?,
                out: a.out,
                pam: a.pam,
            })
        }
        Command::Compare(a) => cmd_compare(&CompareOpts {
            a: a.a,
            b: a.b,
            heatmap: a.heatmap,
        }),
        Command::Sweep(a) => cmd_sweep(&SweepOpts {
            field: a.field,
            dims: a.dims,
            nctrl: a.nctrl,
            degree: a.degree,
            settings: a.flags.resolve()?,
            query_samples: a.query_samples,
            out: a.out,
        }),
        Command::Bench(a) => cmd_bench(&BenchOpts {
            sources: a.sources,
            sizes: a.sizes,
            reps: a.reps,
            settings: a.flags.resolve()?,
            out: a.out,
        }),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0u8,
                _ => 1u8,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
