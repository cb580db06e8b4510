//! The six subcommands: synthesize fields, encode models, render any source,
//! compare images, sweep encode parameters, and benchmark render timing.

use std::fmt::Write as _;
use std::fs::File;
use std::path::PathBuf;
use std::time::Instant;

use mfa_core::encode::{
    adaptive_encode, fit_grid_separable, fit_scattered_global, max_relative_error,
    read_point_cloud, read_raw_volume, write_point_cloud, write_raw_volume, EncodeConfig,
    ScalarGrid,
};
use mfa_core::fields::{sample_grid, sample_scattered, FieldSpec};
use mfa_core::filters::FilterKind;
use mfa_core::image::ImageRgba;
use mfa_core::metrics::{error_heatmap, quality_report};
use mfa_core::model::{DomainBounds, MfaModel, ParamPoint};
use mfa_core::render::{render_filter, render_ground_truth, render_mfa};
use mfa_core::SplitMix64;

use crate::error::CliError;
use crate::settings::RenderSettings;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldArg {
    GaussianBeam,
    MarschnerLobb,
    MultiBeam,
}

impl std::str::FromStr for FieldArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian-beam" | "beam" => Ok(FieldArg::GaussianBeam),
            "marschner-lobb" | "ml" => Ok(FieldArg::MarschnerLobb),
            "multi-beam" => Ok(FieldArg::MultiBeam),
            other => Err(format!(
                "unknown field '{other}' (gaussian-beam, marschner-lobb, or multi-beam)"
            )),
        }
    }
}

impl FieldArg {
    pub fn spec(self) -> FieldSpec<f64> {
        match self {
            FieldArg::GaussianBeam => FieldSpec::gaussian_beam_default(),
            FieldArg::MarschnerLobb => FieldSpec::marschner_lobb_default(),
            FieldArg::MultiBeam => FieldSpec::multi_beam_zoom_study(),
        }
    }
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

pub struct SynthOpts {
    pub field: FieldArg,
    pub dims: Option<[usize; 3]>,
    pub points: Option<usize>,
    pub bounds: Option<DomainBounds<f64>>,
    pub seed: u64,
    pub out: PathBuf,
}

pub fn cmd_synth(opts: &SynthOpts) -> Result<(), CliError> {
    let field = opts.field.spec();
    field.validate()?;
    let bounds = opts.bounds.unwrap_or_else(|| field.default_bounds());
    match (opts.dims, opts.points) {
        (Some(dims), None) => {
            let grid = sample_grid(&field, dims, bounds)?;
            write_raw_volume(&grid, &opts.out)?;
            println!(
                "wrote grid {}x{}x{} ({} bytes) to {} (+ sidecar {}.meta)",
                dims[0],
                dims[1],
                dims[2],
                dims[0] * dims[1] * dims[2] * 4,
                opts.out.display(),
                opts.out.display()
            );
            Ok(())
        }
        (None, Some(n)) => {
            if n == 0 {
                return Err(CliError::usage("--points must be positive"));
            }
            let cloud = sample_scattered(&field, n, bounds, opts.seed)?;
            write_point_cloud(&cloud, &opts.out)?;
            println!("wrote {n} scattered samples to {}", opts.out.display());
            Ok(())
        }
        (Some(_), Some(_)) => Err(CliError::usage("--dims and --points are exclusive")),
        (None, None) => Err(CliError::usage(
            "one of --dims (grid) or --points (scattered) is required",
        )),
    }
}

// ---------------------------------------------------------------------------
// encode
// ---------------------------------------------------------------------------

pub struct EncodeOpts {
    pub input: Option<PathBuf>,
    pub cloud: Option<PathBuf>,
    pub bounds: Option<DomainBounds<f64>>,
    pub degree: [usize; 3],
    pub nctrl: [usize; 3],
    pub adaptive: bool,
    pub e_max: f64,
    pub max_rounds: usize,
    pub max_ctrl: Option<[usize; 3]>,
    pub out: PathBuf,
}

fn runge_warning(nctrl: [usize; 3], degree: [usize; 3], dims: [usize; 3]) -> Option<String> {
    for d in 0..3 {
        if degree[d] >= 3 && nctrl[d] as f64 >= 0.9 * dims[d] as f64 {
            return Some(format!(
                "warning: axis {d} uses {} control points against {} samples at degree {}; \
                 near-interpolating high-degree fits can oscillate at the volume boundary \
                 (Runge risk) - consider fewer control points or a lower degree",
                nctrl[d], dims[d], degree[d]
            ));
        }
    }
    None
}

pub fn cmd_encode(opts: &EncodeOpts) -> Result<(), CliError> {
    let model = match (&opts.input, &opts.cloud) {
        (Some(path), None) => {
            let grid: ScalarGrid<f64> = read_raw_volume(path)?;
            let cfg = EncodeConfig {
                degree: opts.degree,
                nctrl: opts.nctrl,
                adaptive: opts.adaptive,
                e_max: opts.e_max,
                max_rounds: opts.max_rounds,
                max_ctrl: opts.max_ctrl.unwrap_or(grid.dims),
            };
            if let Some(w) = runge_warning(opts.nctrl, opts.degree, grid.dims) {
                println!("{w}");
            }
            if opts.adaptive {
                let (model, report) = adaptive_encode(&grid, &cfg)?;
                print!("{report}");
                model
            } else {
                let model = fit_grid_separable(&grid, &cfg)?;
                println!(
                    "encoded {}x{}x{} grid: nctrl {:?}, max relative error {:.6e}",
                    grid.dims[0],
                    grid.dims[1],
                    grid.dims[2],
                    model.nctrl(),
                    max_relative_error(&grid, &model)
                );
                model
            }
        }
        (None, Some(path)) => {
            let cloud = read_point_cloud::<f64>(path)?;
            let bounds = opts.bounds.unwrap_or_else(|| cloud.bounding_box());
            let cfg = EncodeConfig {
                degree: opts.degree,
                nctrl: opts.nctrl,
                adaptive: false,
                e_max: opts.e_max,
                max_rounds: opts.max_rounds,
                max_ctrl: opts.max_ctrl.unwrap_or(opts.nctrl),
            };
            if opts.adaptive {
                return Err(CliError::usage(
                    "adaptive refinement is a structured-grid feature; \
                     encode point clouds without --adaptive",
                ));
            }
            let model = fit_scattered_global(&cloud, &cfg, bounds)?;
            let (lo, hi) = model.value_range();
            let range = if hi > lo { hi - lo } else { 1.0 };
            let mut worst = 0.0f64;
            for (p, v) in cloud.points.iter().zip(&cloud.values) {
                let q = bounds.normalize(*p);
                let got = model
                    .eval_value(ParamPoint::new(q[0], q[1], q[2]))
                    .map_err(|e| CliError::Numeric(e.to_string()))?;
                worst = worst.max((got - v).abs() / range);
            }
            println!(
                "encoded {} scattered samples: nctrl {:?}, max relative error {:.6e}",
                cloud.points.len(),
                model.nctrl(),
                worst
            );
            model
        }
        _ => {
            return Err(CliError::usage(
                "exactly one of --input (raw grid) or --cloud (point list) is required",
            ))
        }
    };

    let mut file = File::create(&opts.out)?;
    model.save(&mut file)?;
    let bytes = std::fs::metadata(&opts.out)?.len();
    println!(
        "wrote model ({} control values, {bytes} bytes) to {}",
        model.ctrl().len(),
        opts.out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// render
// ---------------------------------------------------------------------------

pub enum RenderSource {
    Model(PathBuf),
    Grid { path: PathBuf, filter: FilterKind },
    Analytic(FieldArg),
}

pub struct RenderOpts {
    pub source: RenderSource,
    pub bounds: Option<DomainBounds<f64>>,
    pub settings: RenderSettings,
    pub out: PathBuf,
    pub pam: Option<PathBuf>,
}

fn check_bounds_flag(
    flag: Option<DomainBounds<f64>>,
    source: &DomainBounds<f64>,
) -> Result<(), CliError> {
    if let Some(b) = flag {
        if b != *source {
            return Err(CliError::usage(
                "--bounds disagrees with the bounds stored in the source; \
                 omit the flag for file-backed sources",
            ));
        }
    }
    Ok(())
}

pub fn cmd_render(opts: &RenderOpts) -> Result<(), CliError> {
    let img = match &opts.source {
        RenderSource::Model(path) => {
            let mut file = File::open(path)?;
            let model = MfaModel::<f64>::load(&mut file)?;
            check_bounds_flag(opts.bounds, model.domain_bounds())?;
            let cfg = opts
                .settings
                .build(model.domain_bounds(), model.value_range())?;
            render_mfa(&model, &cfg)?
        }
        RenderSource::Grid { path, filter } => {
            let grid: ScalarGrid<f64> = read_raw_volume(path)?;
            check_bounds_flag(opts.bounds, &grid.bounds)?;
            let cfg = opts.settings.build(&grid.bounds, grid.value_range())?;
            render_filter(&grid, *filter, &cfg)?
        }
        RenderSource::Analytic(field) => {
            let field = field.spec();
            field.validate()?;
            let bounds = opts.bounds.unwrap_or_else(|| field.default_bounds());
            let cfg = opts.settings.build(&bounds, {
                let (lo, hi) = field.value_range_hint();
                (lo, hi)
            })?;
            render_ground_truth(&field, bounds, &cfg)?
        }
    };
    img.write_ppm(&opts.out)?;
    if let Some(pam) = &opts.pam {
        img.write_pam(pam)?;
    }
    println!(
        "wrote {}x{} image to {}",
        img.width(),
        img.height(),
        opts.out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// compare
// ---------------------------------------------------------------------------

pub struct CompareOpts {
    pub a: PathBuf,
    pub b: PathBuf,
    pub heatmap: Option<PathBuf>,
}

pub fn cmd_compare(opts: &CompareOpts) -> Result<(), CliError> {
    let a = ImageRgba::read(&opts.a)?;
    let b = ImageRgba::read(&opts.b)?;
    let report = quality_report(&a, &b)?;
    println!("{report}");
    if let Some(path) = &opts.heatmap {
        error_heatmap(&a, &b)?.write_ppm(path)?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

pub struct SweepOpts {
    pub field: FieldArg,
    pub dims: [usize; 3],
    pub nctrl: Vec<usize>,
    pub degree: Vec<usize>,
    pub settings: RenderSettings,
    pub query_samples: usize,
    pub out: PathBuf,
}

pub fn cmd_sweep(opts: &SweepOpts) -> Result<(), CliError> {
    if opts.nctrl.is_empty() || opts.degree.is_empty() {
        return Err(CliError::usage("--nctrl and --degree lists must be nonempty"));
    }
    let field = opts.field.spec();
    field.validate()?;
    let bounds = field.default_bounds();
    let grid = sample_grid(&field, opts.dims, bounds)?;
    let cfg = opts.settings.build(&bounds, {
        let (lo, hi) = field.value_range_hint();
        (lo, hi)
    })?;
    let truth = render_ground_truth(&field, bounds, &cfg)?;

    let mut table = String::from("# nctrl degree mse psnr ssim value_ns gradient_ns\n");
    for &n in &opts.nctrl {
        for &p in &opts.degree {
            let ecfg = EncodeConfig {
                degree: [p; 3],
                nctrl: [n; 3],
                adaptive: false,
                e_max: 0.05,
                max_rounds: 1,
                max_ctrl: [n; 3],
            };
            let model = fit_grid_separable(&grid, &ecfg)?;
            let img = render_mfa(&model, &cfg)?;
            let report = quality_report(&truth, &img)?;
            let (value_ns, gradient_ns) = time_queries(&model, opts.query_samples);
            let mut row = String::new();
            write!(
                row,
                "{n} {p} {:.6} {:.6} {:.6} {value_ns:.1} {gradient_ns:.1}",
                report.mse, report.psnr, report.ssim
            )
            .unwrap();
            println!("{row}");
            table.push_str(&row);
            table.push('\n');
        }
    }
    std::fs::write(&opts.out, table)?;
    println!("wrote sweep table to {}", opts.out.display());
    Ok(())
}

/// Mean per-sample query latency in nanoseconds over seeded random
/// parameters.
fn time_queries(model: &MfaModel<f64>, samples: usize) -> (f64, f64) {
    let n = samples.max(1);
    let params: Vec<ParamPoint<f64>> = {
        let mut rng = SplitMix64::new(42);
        (0..n)
            .map(|_| ParamPoint::new(rng.next_f64(), rng.next_f64(), rng.next_f64()))
            .collect()
    };
    let t0 = Instant::now();
    let mut acc = 0.0f64;
    for q in &params {
        acc += model.eval_value(*q).expect("parameter in cube");
    }
    let value_ns = t0.elapsed().as_nanos() as f64 / n as f64;
    let t1 = Instant::now();
    for q in &params {
        let g = model.eval_gradient(*q).expect("parameter in cube");
        acc += g[0];
    }
    let gradient_ns = t1.elapsed().as_nanos() as f64 / n as f64;
    std::hint::black_box(acc);
    (value_ns, gradient_ns)
}

// ---------------------------------------------------------------------------
// bench
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BenchSource {
    Trilinear,
    Tricubic,
    CatmullRom,
    Mfa,
}

impl std::str::FromStr for BenchSource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "trilinear" => Ok(BenchSource::Trilinear),
            "tricubic" => Ok(BenchSource::Tricubic),
            "catmull-rom" | "catmullrom" | "cr" => Ok(BenchSource::CatmullRom),
            "mfa" | "model" => Ok(BenchSource::Mfa),
            other => Err(format!(
                "unknown source '{other}' (trilinear, tricubic, catmull-rom, or mfa)"
            )),
        }
    }
}

impl BenchSource {
    fn name(&self) -> &'static str {
        match self {
            BenchSource::Trilinear => "trilinear",
            BenchSource::Tricubic => "tricubic",
            BenchSource::CatmullRom => "catmull-rom",
            BenchSource::Mfa => "mfa",
        }
    }
}

pub struct BenchOpts {
    pub sources: Vec<BenchSource>,
    pub sizes: Vec<usize>,
    pub reps: usize,
    pub settings: RenderSettings,
    pub out: Option<PathBuf>,
}

pub struct BenchRow {
    pub source: &'static str,
    pub size: usize,
    pub median_ms: f64,
}

/// Renders the single-beam dataset at each size through each source and
/// reports the median wall-clock time over `reps` runs.
pub fn run_bench(opts: &BenchOpts) -> Result<Vec<BenchRow>, CliError> {
    if opts.sources.is_empty() || opts.sizes.is_empty() {
        return Err(CliError::usage("--sources and --sizes must be nonempty"));
    }
    if opts.reps == 0 {
        return Err(CliError::usage("--reps must be positive"));
    }
    let field = FieldSpec::<f64>::gaussian_beam_default();
    let bounds = field.default_bounds();
    let cfg = opts.settings.build(&bounds, {
        let (lo, hi) = field.value_range_hint();
        (lo, hi)
    })?;

    let mut rows = Vec::new();
    for &size in &opts.sizes {
        if size < 4 {
            return Err(CliError::usage("bench sizes must be at least 4"));
        }
        let grid = sample_grid(&field, [size; 3], bounds)?;
        let model = if opts.sources.contains(&BenchSource::Mfa) {
            let ecfg = EncodeConfig {
                degree: [2; 3],
                nctrl: [size; 3],
                adaptive: false,
                e_max: 0.05,
                max_rounds: 1,
                max_ctrl: [size; 3],
            };
            Some(fit_grid_separable(&grid, &ecfg)?)
        } else {
            None
        };
        for &source in &opts.sources {
            let mut times = Vec::with_capacity(opts.reps);
            for _ in 0..opts.reps {
                let t0 = Instant::now();
                let img = match source {
                    BenchSource::Trilinear => render_filter(&grid, FilterKind::Trilinear, &cfg)?,
                    BenchSource::Tricubic => render_filter(&grid, FilterKind::Tricubic, &cfg)?,
                    BenchSource::CatmullRom => {
                        render_filter(&grid, FilterKind::CatmullRom, &cfg)?
                    }
                    BenchSource::Mfa => render_mfa(model.as_ref().unwrap(), &cfg)?,
                };
                times.push(t0.elapsed().as_secs_f64() * 1e3);
                std::hint::black_box(img);
            }
            rows.push(BenchRow {
                source: source.name(),
                size,
                median_ms: median(&mut times),
            });
        }
    }
    Ok(rows)
}

fn median(times: &mut [f64]) -> f64 {
    times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    times[times.len() / 2]
}

pub fn cmd_bench(opts: &BenchOpts) -> Result<(), CliError> {
    let rows = run_bench(opts)?;
    let mut table = String::from("# source size median_ms\n");
    for r in &rows {
        let line = format!("{} {} {:.3}", r.source, r.size, r.median_ms);
        println!("{line}");
        table.push_str(&line);
        table.push('\n');
    }
    if let Some(path) = &opts.out {
        std::fs::write(path, table)?;
        println!("wrote timing table to {}", path.display());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_args_parse() {
        assert_eq!("gaussian-beam".parse::<FieldArg>().unwrap(), FieldArg::GaussianBeam);
        assert_eq!("ml".parse::<FieldArg>().unwrap(), FieldArg::MarschnerLobb);
        assert!("triangle".parse::<FieldArg>().is_err());
    }

    #[test]
    fn runge_warning_trigger() {
        assert!(runge_warning([58; 3], [3; 3], [64; 3]).is_some());
        assert!(runge_warning([64; 3], [4; 3], [64; 3]).is_some());
        assert!(runge_warning([32; 3], [3; 3], [64; 3]).is_none());
        assert!(runge_warning([64; 3], [2; 3], [64; 3]).is_none());
    }

    #[test]
    fn synth_requires_exactly_one_shape() {
        let opts = SynthOpts {
            field: FieldArg::GaussianBeam,
            dims: None,
            points: None,
            bounds: None,
            seed: 0,
            out: std::env::temp_dir().join("never_written.raw"),
        };
        assert!(matches!(cmd_synth(&opts), Err(CliError::Usage(_))));
    }

    #[test]
    fn bench_sources_parse() {
        assert_eq!("mfa".parse::<BenchSource>().unwrap(), BenchSource::Mfa);
        assert_eq!(
            "catmull-rom".parse::<BenchSource>().unwrap(),
            BenchSource::CatmullRom
        );
        assert!("gpu".parse::<BenchSource>().is_err());
    }

    #[test]
    fn median_invariant_to_sample_order() {
        let mut a = vec![5.0, 1.0, 9.0, 3.0, 7.0];
        let mut b = vec![9.0, 7.0, 5.0, 3.0, 1.0];
        assert_eq!(median(&mut a), 5.0);
        assert_eq!(median(&mut a), median(&mut b));
    }
}
