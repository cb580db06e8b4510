//! Flag parsing helpers and render-settings resolution.
//!
//! Render settings come from three layers: built-in defaults, an optional
//! `key=value` config file, and command-line flags; later layers win. The
//! camera defaults frame the source bounds and the transfer-function presets
//! resolve against the source value range, so a bare `render` works on any
//! input.

use std::path::{Path, PathBuf};

use mfa_core::model::DomainBounds;
use mfa_core::render::{
    Camera, PiecewiseLinear, Projection, RenderConfig, Shading, TransferFunctions,
};

use crate::error::CliError;

/// Comma list with scalar broadcast: "2" -> [2,2,2]; "2,3,4" stays.
pub fn parse_usize_triple(s: &str) -> Result<[usize; 3], String> {
    let parts: Vec<&str> = s.split(',').collect();
    let nums: Vec<usize> = parts
        .iter()
        .map(|p| p.trim().parse().map_err(|e| format!("'{p}': {e}")))
        .collect::<Result<_, _>>()?;
    match nums.len() {
        1 => Ok([nums[0]; 3]),
        3 => Ok([nums[0], nums[1], nums[2]]),
        n => Err(format!("expected 1 or 3 comma-separated values, got {n}")),
    }
}

pub fn parse_f64_triple(s: &str) -> Result<[f64; 3], String> {
    let nums: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse().map_err(|e| format!("'{p}': {e}")))
        .collect::<Result<_, _>>()?;
    match nums.len() {
        1 => Ok([nums[0]; 3]),
        3 => Ok([nums[0], nums[1], nums[2]]),
        n => Err(format!("expected 1 or 3 comma-separated values, got {n}")),
    }
}

pub fn parse_f64_quad(s: &str) -> Result<[f64; 4], String> {
    let nums: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse().map_err(|e| format!("'{p}': {e}")))
        .collect::<Result<_, _>>()?;
    match nums.len() {
        4 => Ok([nums[0], nums[1], nums[2], nums[3]]),
        n => Err(format!("expected 4 comma-separated values, got {n}")),
    }
}

/// Six comma-separated numbers: x0,y0,z0,x1,y1,z1.
pub fn parse_bounds(s: &str) -> Result<DomainBounds<f64>, String> {
    let nums: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse().map_err(|e| format!("'{p}': {e}")))
        .collect::<Result<_, _>>()?;
    if nums.len() != 6 {
        return Err(format!("expected 6 comma-separated values, got {}", nums.len()));
    }
    for d in 0..3 {
        if nums[d] >= nums[d + 3] {
            return Err(format!("bounds min must be below max on axis {d}"));
        }
    }
    Ok(DomainBounds::new(
        [nums[0], nums[1], nums[2]],
        [nums[3], nums[4], nums[5]],
    ))
}

pub fn parse_on_off(s: &str) -> Result<bool, String> {
    match s.to_ascii_lowercase().as_str() {
        "on" | "true" | "1" | "yes" => Ok(true),
        "off" | "false" | "0" | "no" => Ok(false),
        other => Err(format!("expected on/off, got '{other}'")),
    }
}

/// Opacity transfer presets; value breakpoints default to the source range.
#[derive(Debug, Clone, PartialEq)]
pub enum OpacitySpec {
    Ramp {
        range: Option<(f64, f64)>,
        a0: f64,
        a1: f64,
    },
    Step {
        edge: Option<f64>,
        low: f64,
        high: f64,
    },
}

pub fn parse_opacity(s: &str) -> Result<OpacitySpec, String> {
    let (kind, rest) = match s.split_once(':') {
        Some((k, r)) => (k, Some(r)),
        None => (s, None),
    };
    let nums: Vec<f64> = match rest {
        None => Vec::new(),
        Some(r) => r
            .split(',')
            .map(|p| p.trim().parse().map_err(|e| format!("'{p}': {e}")))
            .collect::<Result<_, _>>()?,
    };
    match (kind, nums.len()) {
        ("ramp", 0) => Ok(OpacitySpec::Ramp {
            range: None,
            a0: 0.0,
            a1: 1.0,
        }),
        ("ramp", 2) => Ok(OpacitySpec::Ramp {
            range: Some((nums[0], nums[1])),
            a0: 0.0,
            a1: 1.0,
        }),
        ("ramp", 4) => Ok(OpacitySpec::Ramp {
            range: Some((nums[0], nums[1])),
            a0: nums[2],
            a1: nums[3],
        }),
        ("step", 0) => Ok(OpacitySpec::Step {
            edge: None,
            low: 0.0,
            high: 1.0,
        }),
        ("step", 1) => Ok(OpacitySpec::Step {
            edge: Some(nums[0]),
            low: 0.0,
            high: 1.0,
        }),
        ("step", 3) => Ok(OpacitySpec::Step {
            edge: Some(nums[0]),
            low: nums[1],
            high: nums[2],
        }),
        _ => Err(format!(
            "bad opacity spec '{s}' (use ramp[:v0,v1[,a0,a1]] or step[:edge[,low,high]])"
        )),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ColorSpec {
    Constant([f64; 3]),
    Ramp {
        range: Option<(f64, f64)>,
        rgb0: [f64; 3],
        rgb1: [f64; 3],
    },
}

pub fn parse_color(s: &str) -> Result<ColorSpec, String> {
    let (kind, rest) = match s.split_once(':') {
        Some((k, r)) => (k, Some(r)),
        None => (s, None),
    };
    let nums: Vec<f64> = match rest {
        None => Vec::new(),
        Some(r) => r
            .split(',')
            .map(|p| p.trim().parse().map_err(|e| format!("'{p}': {e}")))
            .collect::<Result<_, _>>()?,
    };
    match (kind, nums.len()) {
        ("constant", 0) => Ok(ColorSpec::Constant([1.0, 1.0, 1.0])),
        ("constant", 3) => Ok(ColorSpec::Constant([nums[0], nums[1], nums[2]])),
        ("ramp", 6) => Ok(ColorSpec::Ramp {
            range: None,
            rgb0: [nums[0], nums[1], nums[2]],
            rgb1: [nums[3], nums[4], nums[5]],
        }),
        ("ramp", 8) => Ok(ColorSpec::Ramp {
            range: Some((nums[0], nums[1])),
            rgb0: [nums[2], nums[3], nums[4]],
            rgb1: [nums[5], nums[6], nums[7]],
        }),
        _ => Err(format!(
            "bad color spec '{s}' (use constant[:r,g,b] or ramp:[v0,v1,]r0,g0,b0,r1,g1,b1)"
        )),
    }
}

/// Render settings before the source is known; every field has a config-file
/// key of the same name (kebab-case).
#[derive(Debug, Clone, Default)]
pub struct RenderSettings {
    pub width: Option<usize>,
    pub height: Option<usize>,
    pub eye: Option<[f64; 3]>,
    pub look_at: Option<[f64; 3]>,
    pub up: Option<[f64; 3]>,
    pub projection: Option<String>,
    pub fov: Option<f64>,
    pub ortho_height: Option<f64>,
    pub step: Option<f64>,
    pub shading: Option<bool>,
    pub light: Option<[f64; 3]>,
    pub ambient: Option<[f64; 3]>,
    pub diffuse: Option<[f64; 3]>,
    pub specular: Option<[f64; 3]>,
    pub shininess: Option<f64>,
    pub o_max: Option<f64>,
    pub background: Option<[f64; 4]>,
    pub opacity: Option<OpacitySpec>,
    pub color: Option<ColorSpec>,
    pub opacity_correction: Option<bool>,
    pub workers: Option<usize>,
}

impl RenderSettings {
    /// Fills every unset field from `other` (used to layer flags over a
    /// config file).
    pub fn or(self, other: RenderSettings) -> RenderSettings {
        RenderSettings {
            width: self.width.or(other.width),
            height: self.height.or(other.height),
            eye: self.eye.or(other.eye),
            look_at: self.look_at.or(other.look_at),
            up: self.up.or(other.up),
            projection: self.projection.or(other.projection),
            fov: self.fov.or(other.fov),
            ortho_height: self.ortho_height.or(other.ortho_height),
            step: self.step.or(other.step),
            shading: self.shading.or(other.shading),
            light: self.light.or(other.light),
            ambient: self.ambient.or(other.ambient),
            diffuse: self.diffuse.or(other.diffuse),
            specular: self.specular.or(other.specular),
            shininess: self.shininess.or(other.shininess),
            o_max: self.o_max.or(other.o_max),
            background: self.background.or(other.background),
            opacity: self.opacity.or(other.opacity),
            color: self.color.or(other.color),
            opacity_correction: self.opacity_correction.or(other.opacity_correction),
            workers: self.workers.or(other.workers),
        }
    }

    /// Parses a plain-text `key=value` config file; keys mirror the flags.
    pub fn from_config_file(path: &Path) -> Result<RenderSettings, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let mut s = RenderSettings::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, val) = line.split_once('=').ok_or_else(|| {
                CliError::usage(format!(
                    "{}:{}: expected key=value",
                    path.display(),
                    lineno + 1
                ))
            })?;
            let val = val.trim();
            let mk = |e: String| {
                CliError::usage(format!("{}:{}: {e}", path.display(), lineno + 1))
            };
            match key.trim() {
                "width" => s.width = Some(val.parse().map_err(|e| mk(format!("{e}")))?),
                "height" => s.height = Some(val.parse().map_err(|e| mk(format!("{e}")))?),
                "eye" => s.eye = Some(parse_f64_triple(val).map_err(mk)?),
                "look-at" => s.look_at = Some(parse_f64_triple(val).map_err(mk)?),
                "up" => s.up = Some(parse_f64_triple(val).map_err(mk)?),
                "projection" => s.projection = Some(val.to_string()),
                "fov" => s.fov = Some(val.parse().map_err(|e| mk(format!("{e}")))?),
                "ortho-height" => {
                    s.ortho_height = Some(val.parse().map_err(|e| mk(format!("{e}")))?)
                }
                "step" => s.step = Some(val.parse().map_err(|e| mk(format!("{e}")))?),
                "shading" => s.shading = Some(parse_on_off(val).map_err(mk)?),
                "light" => s.light = Some(parse_f64_triple(val).map_err(mk)?),
                "ambient" => s.ambient = Some(parse_f64_triple(val).map_err(mk)?),
                "diffuse" => s.diffuse = Some(parse_f64_triple(val).map_err(mk)?),
                "specular" => s.specular = Some(parse_f64_triple(val).map_err(mk)?),
                "shininess" => s.shininess = Some(val.parse().map_err(|e| mk(format!("{e}")))?),
                "o-max" => s.o_max = Some(val.parse().map_err(|e| mk(format!("{e}")))?),
                "background" => s.background = Some(parse_f64_quad(val).map_err(mk)?),
                "opacity" => s.opacity = Some(parse_opacity(val).map_err(mk)?),
                "color" => s.color = Some(parse_color(val).map_err(mk)?),
                "opacity-correction" => {
                    s.opacity_correction = Some(parse_on_off(val).map_err(mk)?)
                }
                "workers" => s.workers = Some(val.parse().map_err(|e| mk(format!("{e}")))?),
                other => {
                    return Err(CliError::usage(format!(
                        "{}:{}: unknown key '{other}'",
                        path.display(),
                        lineno + 1
                    )))
                }
            }
        }
        Ok(s)
    }

    /// Layers these settings over an optional config file.
    pub fn with_config(self, config: Option<&PathBuf>) -> Result<RenderSettings, CliError> {
        match config {
            Some(path) => Ok(self.or(RenderSettings::from_config_file(path)?)),
            None => Ok(self),
        }
    }

    /// Resolves everything against the source: the default camera frames the
    /// bounds and transfer presets span the value range.
    pub fn build(
        &self,
        bounds: &DomainBounds<f64>,
        value_range: (f64, f64),
    ) -> Result<RenderConfig<f64>, CliError> {
        let width = self.width.unwrap_or(256);
        let height = self.height.unwrap_or(256);
        if width == 0 || height == 0 {
            return Err(CliError::usage("image width and height must be positive"));
        }

        let center = [
            (bounds.min[0] + bounds.max[0]) / 2.0,
            (bounds.min[1] + bounds.max[1]) / 2.0,
            (bounds.min[2] + bounds.max[2]) / 2.0,
        ];
        let diag = bounds.diagonal();
        let look_at = self.look_at.unwrap_or(center);
        let eye = self.eye.unwrap_or_else(|| {
            let dir = [0.55f64, 0.4, 0.75];
            let n = (dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]).sqrt();
            [
                center[0] + 1.4 * diag * dir[0] / n,
                center[1] + 1.4 * diag * dir[1] / n,
                center[2] + 1.4 * diag * dir[2] / n,
            ]
        });
        let up = self.up.unwrap_or([0.0, 1.0, 0.0]);

        let projection = match self.projection.as_deref().unwrap_or("perspective") {
            "perspective" | "persp" => Projection::Perspective {
                fov_y_deg: self.fov.unwrap_or(45.0),
            },
            "orthographic" | "ortho" => Projection::Orthographic {
                height: self.ortho_height.unwrap_or(1.1 * diag),
            },
            other => {
                return Err(CliError::usage(format!(
                    "unknown projection '{other}' (perspective or orthographic)"
                )))
            }
        };
        let camera = Camera::new(eye, look_at, up, projection, width, height)
            .map_err(CliError::from)?;

        let (lo, hi) = value_range;
        let opacity = match self.opacity.clone().unwrap_or(OpacitySpec::Ramp {
            range: None,
            a0: 0.0,
            a1: 1.0,
        }) {
            OpacitySpec::Ramp { range, a0, a1 } => {
                let (v0, v1) = range.unwrap_or((lo, hi));
                PiecewiseLinear::new(vec![(v0, a0), (v1, a1)]).map_err(CliError::from)?
            }
            OpacitySpec::Step { edge, low, high } => {
                let e = edge.unwrap_or((lo + hi) / 2.0);
                PiecewiseLinear::new(vec![(e, low), (e, high)]).map_err(CliError::from)?
            }
        };
        let color = match self.color.clone().unwrap_or(ColorSpec::Constant([1.0; 3])) {
            ColorSpec::Constant(rgb) => {
                PiecewiseLinear::new(vec![(lo, rgb)]).map_err(CliError::from)?
            }
            ColorSpec::Ramp { range, rgb0, rgb1 } => {
                let (v0, v1) = range.unwrap_or((lo, hi));
                PiecewiseLinear::new(vec![(v0, rgb0), (v1, rgb1)]).map_err(CliError::from)?
            }
        };

        let mut cfg = RenderConfig::new(camera, TransferFunctions { opacity, color });
        if let Some(step) = self.step {
            cfg.step = step;
        }
        if let Some(o_max) = self.o_max {
            cfg.o_max = o_max;
        }
        if let Some(bg) = self.background {
            cfg.background = bg;
        }
        if self.shading.unwrap_or(false) {
            let mut sh = Shading::default();
            if let Some(l) = self.light {
                let n = (l[0] * l[0] + l[1] * l[1] + l[2] * l[2]).sqrt();
                if n == 0.0 {
                    return Err(CliError::usage("light direction must be nonzero"));
                }
                sh.light_dir = [l[0] / n, l[1] / n, l[2] / n];
            }
            if let Some(a) = self.ambient {
                sh.ambient = a;
            }
            if let Some(d) = self.diffuse {
                sh.diffuse = d;
            }
            if let Some(sp) = self.specular {
                sh.specular = sp;
            }
            if let Some(sn) = self.shininess {
                sh.shininess = sn;
            }
            cfg.shading = Some(sh);
        }
        cfg.opacity_correction = self.opacity_correction.unwrap_or(false);
        cfg.workers = self.workers;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triples_broadcast_scalars() {
        assert_eq!(parse_usize_triple("2").unwrap(), [2, 2, 2]);
        assert_eq!(parse_usize_triple("2,3,4").unwrap(), [2, 3, 4]);
        assert!(parse_usize_triple("2,3").is_err());
        assert_eq!(parse_f64_triple("0.5").unwrap(), [0.5; 3]);
    }

    #[test]
    fn opacity_specs_parse() {
        assert_eq!(
            parse_opacity("ramp").unwrap(),
            OpacitySpec::Ramp {
                range: None,
                a0: 0.0,
                a1: 1.0
            }
        );
        assert_eq!(
            parse_opacity("step:0.5,0.1,0.9").unwrap(),
            OpacitySpec::Step {
                edge: Some(0.5),
                low: 0.1,
                high: 0.9
            }
        );
        assert!(parse_opacity("triangle:1").is_err());
    }

    #[test]
    fn color_specs_parse() {
        assert_eq!(
            parse_color("constant:1,0,0").unwrap(),
            ColorSpec::Constant([1.0, 0.0, 0.0])
        );
        assert!(parse_color("constant:1,0").is_err());
    }

    #[test]
    fn build_rejects_zero_size() {
        let s = RenderSettings {
            width: Some(0),
            ..Default::default()
        };
        let b = DomainBounds::new([-1.0; 3], [1.0; 3]);
        assert!(matches!(s.build(&b, (0.0, 1.0)), Err(CliError::Usage(_))));
    }

    #[test]
    fn config_file_layers_under_flags() {
        let dir = std::env::temp_dir().join("mfa_cli_settings_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("render.cfg");
        std::fs::write(&path, "width=64\nheight=48\nstep=0.01\n# comment\n").unwrap();
        let flags = RenderSettings {
            width: Some(128),
            ..Default::default()
        };
        let merged = flags.with_config(Some(&path)).unwrap();
        assert_eq!(merged.width, Some(128)); // flag wins
        assert_eq!(merged.height, Some(48)); // config fills the gap
        assert_eq!(merged.step, Some(0.01));
    }

    #[test]
    fn config_file_rejects_unknown_keys() {
        let dir = std::env::temp_dir().join("mfa_cli_settings_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("bad.cfg");
        std::fs::write(&path, "wdith=64\n").unwrap();
        assert!(matches!(
            RenderSettings::from_config_file(&path),
            Err(CliError::Usage(_))
        ));
    }
}
