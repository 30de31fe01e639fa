//! Flat `section.key = value` run configuration.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::fracture::{DamageMode, LoadKind, LoadProgram, ModelParams};
use crate::geometry::{CellGeometry, MacroDomain};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Cell,
    HomogRun,
    FineRun,
    Validate,
    Mms,
}

impl Mode {
    pub const ALL: [Mode; 5] = [Mode::Cell, Mode::HomogRun, Mode::FineRun, Mode::Validate, Mode::Mms];

    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Cell => "cell",
            Mode::HomogRun => "homog-run",
            Mode::FineRun => "fine-run",
            Mode::Validate => "validate",
            Mode::Mms => "mms",
        }
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Mode::ALL.into_iter().find(|m| m.as_str() == s).ok_or_else(|| {
            let names: Vec<&str> = Mode::ALL.iter().map(Mode::as_str).collect();
            format!("unknown mode `{s}` (expected one of {})", names.join(", "))
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeometryConfig {
    pub r: f64,
    /// Unit-cell resolution.
    pub n: usize,
    pub x: (f64, f64),
    pub y: (f64, f64),
    /// Macro mesh segments per unit length.
    pub macro_n: usize,
    /// Period of the perforation for `fine-run`.
    pub epsilon: f64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self { r: 0.25, n: 32, x: (0.0, 1.0), y: (0.0, 1.0), macro_n: 32, epsilon: 0.25 }
    }
}

impl GeometryConfig {
    pub fn cell(&self) -> CellGeometry {
        CellGeometry::new(self.r, self.n)
    }

    pub fn domain(&self) -> MacroDomain {
        MacroDomain { x: self.x, y: self.y, resolution: self.macro_n }
    }
}

/// Straight notch: nodes within `width` of the segment start fully damaged.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Notch {
    pub a: [f64; 2],
    pub b: [f64; 2],
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSection {
    pub mode: Mode,
    pub out: PathBuf,
    /// Write fields every `vtk_stride` steps; 0 writes only the final state.
    pub vtk_stride: usize,
    pub notch: Option<Notch>,
}

impl Default for RunSection {
    fn default() -> Self {
        Self { mode: Mode::HomogRun, out: PathBuf::from("out"), vtk_stride: 10, notch: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub geometry: GeometryConfig,
    pub model: ModelParams,
    pub load: LoadProgram,
    pub run: RunSection,
    pub validate_epsilons: Vec<f64>,
    pub mms_levels: Vec<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            geometry: GeometryConfig::default(),
            model: ModelParams::default(),
            load: LoadProgram::uniaxial(1.0),
            run: RunSection::default(),
            validate_epsilons: vec![0.25, 0.125, 0.0625],
            mms_levels: vec![8, 16, 32, 64],
        }
    }
}

const KEYS: &[&str] = &[
    "geometry.r",
    "geometry.n",
    "geometry.x0",
    "geometry.x1",
    "geometry.y0",
    "geometry.y1",
    "geometry.macro_n",
    "geometry.epsilon",
    "model.gamma",
    "model.eta",
    "model.steps",
    "model.altmin_tol",
    "model.altmin_max_iters",
    "model.solver_tol",
    "model.kkt_tol",
    "model.omega",
    "model.damage",
    "load.program",
    "load.amplitude",
    "load.c",
    "run.mode",
    "run.out",
    "run.vtk_stride",
    "run.notch",
    "run.notch_width",
    "validate.epsilons",
    "mms.levels",
];

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

fn invalid(key: &str, message: impl Into<String>) -> Error {
    Error::Validation { key: key.into(), message: message.into() }
}

fn num<T: FromStr>(line: usize, key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| parse_err(line, format!("`{key}`: cannot read `{v}` as a number")))
}

fn list<T: FromStr>(line: usize, key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',').map(|x| num(line, key, x.trim())).collect()
}

/// Floats are written with the shortest representation that reads back exactly.
fn fmt_f(x: f64) -> String {
    format!("{x:?}")
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(", ")
}

impl RunConfig {
    /// Parses and validates a configuration; unset keys keep their defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut c = RunConfig::default();
        let mut seen: Vec<&str> = Vec::new();
        let mut program: Option<(usize, String)> = None;
        let mut amplitude = c.load.amplitude;
        let mut offset = 0.5;
        let mut notch: Option<[f64; 4]> = None;
        let mut notch_width = 1e-9;

        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            let body = raw.split('#').next().unwrap().trim();
            if body.is_empty() {
                continue;
            }
            let (key, value) =
                body.split_once('=').ok_or_else(|| parse_err(line, format!("expected `section.key = value`, got `{body}`")))?;
            let (key, v) = (key.trim(), value.trim());
            let known = KEYS.iter().find(|&&k| k == key).ok_or_else(|| parse_err(line, format!("unknown key `{key}`")))?;
            if seen.contains(known) {
                return Err(parse_err(line, format!("duplicate key `{key}`")));
            }
            seen.push(known);
            if v.is_empty() {
                return Err(parse_err(line, format!("`{key}` has no value")));
            }
            let g = &mut c.geometry;
            let m = &mut c.model;
            match key {
                "geometry.r" => g.r = num(line, key, v)?,
                "geometry.n" => g.n = num(line, key, v)?,
                "geometry.x0" => g.x.0 = num(line, key, v)?,
                "geometry.x1" => g.x.1 = num(line, key, v)?,
                "geometry.y0" => g.y.0 = num(line, key, v)?,
                "geometry.y1" => g.y.1 = num(line, key, v)?,
                "geometry.macro_n" => g.macro_n = num(line, key, v)?,
                "geometry.epsilon" => g.epsilon = num(line, key, v)?,
                "model.gamma" => m.gamma = num(line, key, v)?,
                "model.eta" => m.eta = num(line, key, v)?,
                "model.steps" => m.steps = num(line, key, v)?,
                "model.altmin_tol" => m.altmin_tol = num(line, key, v)?,
                "model.altmin_max_iters" => m.altmin_max_iters = num(line, key, v)?,
                "model.solver_tol" => m.solver_tol = num(line, key, v)?,
                "model.kkt_tol" => m.kkt_tol = num(line, key, v)?,
                "model.omega" => m.omega = num(line, key, v)?,
                "model.damage" => {
                    m.damage = match v {
                        "evolve" => DamageMode::Evolve,
                        "frozen" => DamageMode::Frozen,
                        _ => return Err(invalid(key, format!("`{v}` is neither `evolve` nor `frozen`"))),
                    }
                }
                "load.program" => program = Some((line, v.to_string())),
                "load.amplitude" => amplitude = num(line, key, v)?,
                "load.c" => offset = num(line, key, v)?,
                "run.mode" => c.run.mode = v.parse().map_err(|e: String| invalid(key, e))?,
                "run.out" => c.run.out = PathBuf::from(v),
                "run.vtk_stride" => c.run.vtk_stride = num(line, key, v)?,
                "run.notch" => {
                    notch = if v == "none" {
                        None
                    } else {
                        let xs: Vec<f64> = list(line, key, v)?;
                        let arr: [f64; 4] = xs
                            .try_into()
                            .map_err(|_| parse_err(line, "`run.notch` expects `x0, y0, x1, y1` or `none`"))?;
                        Some(arr)
                    }
                }
                "run.notch_width" => notch_width = num(line, key, v)?,
                "validate.epsilons" => c.validate_epsilons = list(line, key, v)?,
                "mms.levels" => c.mms_levels = list(line, key, v)?,
                _ => unreachable!("key table and match arms disagree"),
            }
        }

        c.load = match program.as_ref().map(|(_, p)| p.as_str()).unwrap_or("uniaxial") {
            "uniaxial" => LoadProgram::uniaxial(amplitude),
            "shear" => LoadProgram::shear(amplitude),
            "surfing" => LoadProgram::surfing(amplitude, offset),
            "zero" => LoadProgram::zero(),
            other => return Err(invalid("load.program", format!("no built-in load program `{other}`"))),
        };
        c.run.notch = notch.map(|[x0, y0, x1, y1]| Notch { a: [x0, y0], b: [x1, y1], width: notch_width });
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.geometry;
        if !(g.r >= 0.0 && g.r < 0.5) {
            return Err(invalid("geometry.r", format!("{} outside [0, 0.5)", g.r)));
        }
        if g.n < 4 {
            return Err(invalid("geometry.n", format!("{} is below the minimum of 4", g.n)));
        }
        if !(g.x.1 > g.x.0) {
            return Err(invalid("geometry.x1", format!("extent ({}, {}) is empty", g.x.0, g.x.1)));
        }
        if !(g.y.1 > g.y.0) {
            return Err(invalid("geometry.y1", format!("extent ({}, {}) is empty", g.y.0, g.y.1)));
        }
        if g.macro_n == 0 {
            return Err(invalid("geometry.macro_n", "must be positive"));
        }
        if !(g.epsilon > 0.0 && g.epsilon <= 1.0) {
            return Err(invalid("geometry.epsilon", format!("{} outside (0, 1]", g.epsilon)));
        }
        self.model.validate()?;
        if !self.load.amplitude.is_finite() {
            return Err(invalid("load.amplitude", "must be finite"));
        }
        if let LoadKind::Surfing { c } = self.load.kind {
            if !c.is_finite() {
                return Err(invalid("load.c", "must be finite"));
            }
        }
        if let Some(n) = self.run.notch {
            if !(n.width >= 0.0) || n.a.iter().chain(&n.b).any(|x| !x.is_finite()) {
                return Err(invalid("run.notch", "coordinates must be finite and the width nonnegative"));
            }
        }
        if self.validate_epsilons.is_empty() || self.validate_epsilons.iter().any(|&e| !(e > 0.0 && e <= 1.0)) {
            return Err(invalid("validate.epsilons", "expects a nonempty list of scales in (0, 1]"));
        }
        if self.mms_levels.len() < 2 || self.mms_levels.iter().any(|&n| n < 2) {
            return Err(invalid("mms.levels", "expects at least two resolutions, each at least 2"));
        }
        Ok(())
    }

    /// Every key with its resolved value; `parse` reads it back to an equal config.
    pub fn serialize(&self) -> String {
        let g = &self.geometry;
        let m = &self.model;
        let mut s = String::new();
        let mut kv = |k: &str, v: String| writeln!(s, "{k} = {v}").unwrap();
        kv("geometry.r", fmt_f(g.r));
        kv("geometry.n", g.n.to_string());
        kv("geometry.x0", fmt_f(g.x.0));
        kv("geometry.x1", fmt_f(g.x.1));
        kv("geometry.y0", fmt_f(g.y.0));
        kv("geometry.y1", fmt_f(g.y.1));
        kv("geometry.macro_n", g.macro_n.to_string());
        kv("geometry.epsilon", fmt_f(g.epsilon));
        kv("model.gamma", fmt_f(m.gamma));
        kv("model.eta", fmt_f(m.eta));
        kv("model.steps", m.steps.to_string());
        kv("model.altmin_tol", fmt_f(m.altmin_tol));
        kv("model.altmin_max_iters", m.altmin_max_iters.to_string());
        kv("model.solver_tol", fmt_f(m.solver_tol));
        kv("model.kkt_tol", fmt_f(m.kkt_tol));
        kv("model.omega", fmt_f(m.omega));
        kv("model.damage", if m.damage == DamageMode::Evolve { "evolve" } else { "frozen" }.into());
        kv("load.program", self.load.name().into());
        kv("load.amplitude", fmt_f(self.load.amplitude));
        if let LoadKind::Surfing { c } = self.load.kind {
            kv("load.c", fmt_f(c));
        }
        kv("run.mode", self.run.mode.as_str().into());
        kv("run.out", self.run.out.display().to_string());
        kv("run.vtk_stride", self.run.vtk_stride.to_string());
        match self.run.notch {
            Some(n) => {
                kv("run.notch", join(&[n.a[0], n.a[1], n.b[0], n.b[1]].map(fmt_f)));
                kv("run.notch_width", fmt_f(n.width));
            }
            None => kv("run.notch", "none".into()),
        }
        kv("validate.epsilons", join(&self.validate_epsilons.iter().map(|&e| fmt_f(e)).collect::<Vec<_>>()));
        kv("mms.levels", join(&self.mms_levels));
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = RunConfig::parse("# nothing but a comment\n\nrun.mode = cell\n").unwrap();
        assert_eq!(c.model.gamma, 0.1);
        assert_eq!(c.model.eta, 1e-5);
        assert_eq!(c.model.steps, 50);
        assert_eq!(c.model.altmin_tol, 1e-6);
        assert_eq!(c.run.mode, Mode::Cell);
    }

    #[test]
    fn out_of_range_radius_names_key() {
        let e = RunConfig::parse("geometry.r = 0.7").unwrap_err();
        assert_eq!(e.code(), "VALIDATION_ERROR");
        assert!(matches!(e, Error::Validation { ref key, .. } if key == "geometry.r"));
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let cases = [
            ("model.gamma = 0.1\nnot a pair\n", 2),
            ("\n\nmodel.gamma = abc", 3),
            ("model.gamma = 0.1\nmodel.gamma = 0.2", 2),
            ("foo.bar = 1", 1),
            ("run.notch = 1, 2, 3", 1),
            ("model.steps =", 1),
        ];
        for (text, line) in cases {
            match RunConfig::parse(text) {
                Err(Error::Parse { line: l, .. }) => assert_eq!(l, line, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
    }

    #[test]
    fn validation_errors() {
        for (text, key) in [
            ("model.eta = 0.5", "model.eta"),
            ("model.steps = 0", "model.steps"),
            ("load.program = twist", "load.program"),
            ("run.mode = sprint", "run.mode"),
            ("geometry.x1 = -1", "geometry.x1"),
            ("mms.levels = 8", "mms.levels"),
        ] {
            match RunConfig::parse(text) {
                Err(Error::Validation { key: k, .. }) => assert_eq!(k, key),
                other => panic!("{text}: {other:?}"),
            }
        }
    }

    #[test]
    fn inline_comments_and_notch() {
        let c = RunConfig::parse("run.notch = 0, 0.5, 0.2, 0.5  # left edge\nload.program = surfing\nload.c = 0.25").unwrap();
        assert_eq!(c.run.notch.unwrap().b, [0.2, 0.5]);
        assert_eq!(c.load, LoadProgram::surfing(1.0, 0.25));
        assert_eq!(RunConfig::parse(&c.serialize()).unwrap(), c);
    }

    proptest! {
        #[test]
        fn round_trip(
            r in 0.0f64..0.49,
            n in 4usize..200,
            gamma in 1e-3f64..1.0,
            eta_frac in 1e-6f64..0.9,
            steps in 1usize..500,
            amp in -10.0f64..10.0,
            prog in 0usize..4,
            notch in proptest::option::of(proptest::array::uniform4(-1.0f64..2.0)),
            eps in proptest::collection::vec(1e-3f64..1.0, 1..5),
            mode in 0usize..5,
        ) {
            let mut c = RunConfig::default();
            c.geometry.r = r;
            c.geometry.n = n;
            c.model.gamma = gamma;
            c.model.eta = gamma * eta_frac;
            c.model.steps = steps;
            c.load = match prog {
                0 => LoadProgram::uniaxial(amp),
                1 => LoadProgram::shear(amp),
                2 => LoadProgram::surfing(amp, r),
                _ => LoadProgram::zero(),
            };
            c.run.notch = notch.map(|[a, b, x, y]| Notch { a: [a, b], b: [x, y], width: r / 10.0 });
            c.run.mode = Mode::ALL[mode];
            c.validate_epsilons = eps;
            let text = c.serialize();
            prop_assert_eq!(RunConfig::parse(&text).unwrap(), c);
        }
    }
}
