//! Scenario configuration: TOML schema, validation that reports every
//! problem at once, and the small arithmetic expression language for
//! initial vorticity fields.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Curve, DepthProfile, DepthRule, GeometryError, LakeGeometry, Point};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("config does not parse: {0}")]
    Syntax(String),
    #[error("config invalid:\n{}", .0.join("\n"))]
    Invalid(Vec<String>),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub outer: CurveSpec,
    #[serde(default)]
    pub islands: Vec<CurveSpec>,
    pub depth: DepthSpec,
    pub grid: GridSpec,
    pub vorticity: VorticitySpec,
    #[serde(default)]
    pub circulations: Vec<f64>,
    pub scheme: SchemeSpec,
    #[serde(default)]
    pub experiment: Option<ExperimentSpec>,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CurveSpec {
    Circle { center: [f64; 2], radius: f64 },
    Ellipse { center: [f64; 2], rx: f64, ry: f64 },
    Polygon { vertices: Vec<[f64; 2]> },
    /// Koch-snowflake prefractal outer boundary.
    Koch { center: [f64; 2], size: f64, iterations: usize },
}

impl CurveSpec {
    pub fn build(&self) -> Result<Curve, GeometryError> {
        Ok(match self {
            CurveSpec::Circle { center, radius } => Curve::Circle {
                center: Point::new(center[0], center[1]),
                radius: *radius,
            },
            CurveSpec::Ellipse { center, rx, ry } => Curve::Ellipse {
                center: Point::new(center[0], center[1]),
                rx: *rx,
                ry: *ry,
            },
            CurveSpec::Polygon { vertices } => {
                Curve::polygon(vertices.iter().map(|v| Point::new(v[0], v[1])).collect())?
            }
            CurveSpec::Koch { center, size, iterations } => {
                Curve::koch_prefractal(Point::new(center[0], center[1]), *size, *iterations)
            }
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DepthSpec {
    Constant {
        value: f64,
        #[serde(default)]
        floor: Option<f64>,
    },
    /// `c0 + c1 x + c2 y + c3 x^2 + c4 x y + c5 y^2` away from vanishing
    /// shores.
    Polynomial {
        coefficients: [f64; 6],
        #[serde(default)]
        exponents: Vec<f64>,
        #[serde(default = "one")]
        coefficient: f64,
        #[serde(default)]
        floor: Option<f64>,
        #[serde(default)]
        blend_width: Option<f64>,
    },
    /// `b = c d(x)^a` everywhere, one exponent per boundary component
    /// (a single entry applies to all).
    DistancePower {
        exponents: Vec<f64>,
        #[serde(default = "one")]
        coefficient: f64,
        #[serde(default)]
        floor: Option<f64>,
    },
    /// `b = exp(-1/d)`: the zero-slope shore.
    ExpShore {
        #[serde(default)]
        floor: Option<f64>,
    },
}

fn one() -> f64 {
    1.0
}

impl DepthSpec {
    /// Concrete profile; a `None` floor defaults to `h^2` for vanishing
    /// shores and 0 otherwise.
    pub fn build(&self, h: f64) -> DepthProfile {
        match self {
            DepthSpec::Constant { value, floor } => DepthProfile {
                interior: DepthRule::Constant(*value),
                shore_exponents: Vec::new(),
                shore_coefficient: DepthRule::Constant(1.0),
                floor: floor.unwrap_or(0.0),
                blend_width: None,
            },
            DepthSpec::Polynomial {
                coefficients,
                exponents,
                coefficient,
                floor,
                blend_width,
            } => DepthProfile {
                interior: DepthRule::Polynomial(*coefficients),
                shore_exponents: exponents.clone(),
                shore_coefficient: DepthRule::Constant(*coefficient),
                floor: floor.unwrap_or(if exponents.iter().any(|a| *a > 0.0) {
                    h * h
                } else {
                    0.0
                }),
                blend_width: *blend_width,
            },
            DepthSpec::DistancePower {
                exponents,
                coefficient,
                floor,
            } => DepthProfile {
                interior: DepthRule::DistancePower,
                shore_exponents: exponents.clone(),
                shore_coefficient: DepthRule::Constant(*coefficient),
                floor: floor.unwrap_or(h * h),
                blend_width: None,
            },
            DepthSpec::ExpShore { floor } => DepthProfile {
                interior: DepthRule::ExpShore,
                shore_exponents: Vec::new(),
                shore_coefficient: DepthRule::Constant(1.0),
                floor: floor.unwrap_or(h * h),
                blend_width: None,
            },
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// Cell size; alternatively give `n` for `h = box width / n`.
    #[serde(default)]
    pub h: Option<f64>,
    #[serde(default)]
    pub n: Option<usize>,
}

impl GridSpec {
    pub fn cell_size(&self, box_width: f64) -> Option<f64> {
        match (self.h, self.n) {
            (Some(h), _) => Some(h),
            (None, Some(n)) if n > 0 => Some(box_width / n as f64),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum VorticitySpec {
    /// Indicator of a disk.
    Patch { center: [f64; 2], radius: f64, value: f64 },
    /// Smooth compactly supported bump.
    Bump { center: [f64; 2], radius: f64, amplitude: f64 },
    /// Arithmetic expression over `x`, `y` and `r`.
    Expression { expr: String },
}

impl VorticitySpec {
    pub fn build(&self) -> Result<Box<dyn Fn(Point) -> f64 + Send + Sync>, String> {
        match self {
            VorticitySpec::Patch { center, radius, value } => {
                let (c, r, v) = (Point::new(center[0], center[1]), *radius, *value);
                Ok(Box::new(move |p| if p.dist(c) < r { v } else { 0.0 }))
            }
            VorticitySpec::Bump { center, radius, amplitude } => {
                let (c, r, a) = (Point::new(center[0], center[1]), *radius, *amplitude);
                Ok(Box::new(move |p| {
                    let s = p.dist(c) / r;
                    if s < 1.0 {
                        a * (1.0 - 1.0 / (1.0 - s * s)).exp() * 1f64.exp()
                    } else {
                        0.0
                    }
                }))
            }
            VorticitySpec::Expression { expr } => {
                let compiled = expr::parse(expr)?;
                Ok(Box::new(move |p| compiled.eval(p.x, p.y)))
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SchemeSpec {
    #[serde(default)]
    pub epsilon: f64,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    pub t_end: f64,
    #[serde(default = "default_snapshots")]
    pub snapshots: usize,
}

fn default_cfl() -> f64 {
    0.45
}

fn default_snapshots() -> usize {
    20
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ExperimentSpec {
    LakeSequence {
        /// Sequence indices `n`, strictly increasing, at least 3.
        parameters: Vec<usize>,
        rule: SequenceRuleSpec,
    },
    Nonsmooth { rungs: usize },
    Viscosity {
        /// Strictly decreasing viscosities.
        epsilons: Vec<f64>,
    },
    Gamma {
        parameters: Vec<usize>,
        shrink0: f64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum SequenceRuleSpec {
    DepthShift,
    DomainErosion { delta0: f64 },
    Constant,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "default_out")]
    pub directory: String,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec {
            directory: default_out(),
        }
    }
}

fn default_out() -> String {
    "out".into()
}

/// Parse and validate; reports every validation problem, each named with
/// its key path.
pub fn parse_config(path: &std::path::Path) -> Result<ScenarioConfig, ConfigError> {
    let text = std::fs::read_to_string(path)?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let config: ScenarioConfig =
        toml::from_str(text).map_err(|e| ConfigError::Syntax(e.to_string()))?;
    let problems = validate(&config);
    if problems.is_empty() {
        Ok(config)
    } else {
        Err(ConfigError::Invalid(problems))
    }
}

pub fn emit_config(config: &ScenarioConfig) -> String {
    toml::to_string_pretty(config).expect("scenario serializes")
}

fn validate(config: &ScenarioConfig) -> Vec<String> {
    let mut problems = Vec::new();
    match config.outer.build() {
        Ok(outer) => {
            let islands: Result<Vec<Curve>, _> =
                config.islands.iter().map(|s| s.build()).collect();
            match islands {
                Ok(islands) => {
                    if let Err(e) = LakeGeometry::new(outer, islands) {
                        problems.push(format!("outer/islands: {e}"));
                    }
                }
                Err(e) => problems.push(format!("islands: {e}")),
            }
        }
        Err(e) => problems.push(format!("outer: {e}")),
    }
    match (&config.grid.h, &config.grid.n) {
        (Some(h), _) if *h <= 0.0 => problems.push(format!("grid.h: must be positive, got {h}")),
        (None, Some(n)) if *n < 8 => problems.push(format!("grid.n: must be at least 8, got {n}")),
        (None, None) => problems.push("grid: give either h or n".into()),
        _ => {}
    }
    if !(config.scheme.cfl > 0.0 && config.scheme.cfl < 1.0) {
        problems.push(format!("scheme.cfl: must lie in (0, 1), got {}", config.scheme.cfl));
    }
    if config.scheme.epsilon < 0.0 {
        problems.push(format!("scheme.epsilon: must be >= 0, got {}", config.scheme.epsilon));
    }
    if config.scheme.t_end <= 0.0 {
        problems.push(format!("scheme.t_end: must be positive, got {}", config.scheme.t_end));
    }
    if config.scheme.snapshots == 0 {
        problems.push("scheme.snapshots: must be at least 1".into());
    }
    if config.circulations.len() != config.islands.len() {
        problems.push(format!(
            "circulations: {} entries for {} islands",
            config.circulations.len(),
            config.islands.len()
        ));
    }
    if let VorticitySpec::Expression { expr } = &config.vorticity {
        if let Err(e) = expr::parse(expr) {
            problems.push(format!("vorticity.expr: {e}"));
        }
    }
    if let DepthSpec::DistancePower { exponents, coefficient, .. } = &config.depth {
        if exponents.is_empty() {
            problems.push("depth.exponents: need at least one entry".into());
        }
        if exponents.iter().any(|a| *a < 0.0) {
            problems.push("depth.exponents: must be >= 0".into());
        }
        if *coefficient <= 0.0 {
            problems.push(format!("depth.coefficient: must be positive, got {coefficient}"));
        }
    }
    match &config.experiment {
        Some(ExperimentSpec::LakeSequence { parameters, .. })
        | Some(ExperimentSpec::Gamma { parameters, .. }) => {
            if parameters.len() < 3 {
                problems.push("experiment.parameters: need at least 3 points".into());
            }
            if !parameters.windows(2).all(|w| w[1] > w[0]) {
                problems.push("experiment.parameters: must be strictly increasing".into());
            }
        }
        Some(ExperimentSpec::Viscosity { epsilons }) => {
            if epsilons.len() < 2 {
                problems.push("experiment.epsilons: need at least 2 viscosities".into());
            }
            if !epsilons.windows(2).all(|w| w[1] < w[0]) {
                problems.push("experiment.epsilons: must be strictly decreasing".into());
            }
        }
        Some(ExperimentSpec::Nonsmooth { rungs }) => {
            if *rungs < 2 {
                problems.push(format!("experiment.rungs: need at least 2, got {rungs}"));
            }
        }
        None => {}
    }
    problems
}

/// Tiny arithmetic expressions over `x`, `y` and `r = sqrt(x^2+y^2)`:
/// `+ - * / ^`, parentheses, and the usual scalar functions.
pub mod expr {
    #[derive(Debug, Clone)]
    pub enum Expr {
        Num(f64),
        X,
        Y,
        R,
        Neg(Box<Expr>),
        Add(Box<Expr>, Box<Expr>),
        Sub(Box<Expr>, Box<Expr>),
        Mul(Box<Expr>, Box<Expr>),
        Div(Box<Expr>, Box<Expr>),
        Pow(Box<Expr>, Box<Expr>),
        Call(Func, Box<Expr>),
    }

    #[derive(Debug, Clone, Copy)]
    pub enum Func {
        Sin,
        Cos,
        Tan,
        Exp,
        Log,
        Sqrt,
        Abs,
        Tanh,
    }

    impl Expr {
        pub fn eval(&self, x: f64, y: f64) -> f64 {
            match self {
                Expr::Num(v) => *v,
                Expr::X => x,
                Expr::Y => y,
                Expr::R => x.hypot(y),
                Expr::Neg(e) => -e.eval(x, y),
                Expr::Add(a, b) => a.eval(x, y) + b.eval(x, y),
                Expr::Sub(a, b) => a.eval(x, y) - b.eval(x, y),
                Expr::Mul(a, b) => a.eval(x, y) * b.eval(x, y),
                Expr::Div(a, b) => a.eval(x, y) / b.eval(x, y),
                Expr::Pow(a, b) => a.eval(x, y).powf(b.eval(x, y)),
                Expr::Call(f, e) => {
                    let v = e.eval(x, y);
                    match f {
                        Func::Sin => v.sin(),
                        Func::Cos => v.cos(),
                        Func::Tan => v.tan(),
                        Func::Exp => v.exp(),
                        Func::Log => v.ln(),
                        Func::Sqrt => v.sqrt(),
                        Func::Abs => v.abs(),
                        Func::Tanh => v.tanh(),
                    }
                }
            }
        }
    }

    struct Parser<'a> {
        src: &'a [u8],
        pos: usize,
    }

    pub fn parse(text: &str) -> Result<Expr, String> {
        let mut p = Parser {
            src: text.as_bytes(),
            pos: 0,
        };
        let e = p.expr()?;
        p.skip_ws();
        if p.pos != p.src.len() {
            return Err(format!("unexpected input at byte {}", p.pos));
        }
        Ok(e)
    }

    impl<'a> Parser<'a> {
        fn skip_ws(&mut self) {
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
                self.pos += 1;
            }
        }

        fn peek(&mut self) -> Option<u8> {
            self.skip_ws();
            self.src.get(self.pos).copied()
        }

        fn expr(&mut self) -> Result<Expr, String> {
            let mut lhs = self.term()?;
            loop {
                match self.peek() {
                    Some(b'+') => {
                        self.pos += 1;
                        lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                    }
                    Some(b'-') => {
                        self.pos += 1;
                        lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                    }
                    _ => return Ok(lhs),
                }
            }
        }

        fn term(&mut self) -> Result<Expr, String> {
            let mut lhs = self.unary()?;
            loop {
                match self.peek() {
                    Some(b'*') => {
                        self.pos += 1;
                        lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
                    }
                    Some(b'/') => {
                        self.pos += 1;
                        lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
                    }
                    _ => return Ok(lhs),
                }
            }
        }

        // unary minus binds looser than the power, so -x^2 = -(x^2)
        fn unary(&mut self) -> Result<Expr, String> {
            if self.peek() == Some(b'-') {
                self.pos += 1;
                return Ok(Expr::Neg(Box::new(self.unary()?)));
            }
            self.power()
        }

        fn power(&mut self) -> Result<Expr, String> {
            let base = self.primary()?;
            if self.peek() == Some(b'^') {
                self.pos += 1;
                // right associative, and the exponent may be signed
                let exp = self.unary()?;
                return Ok(Expr::Pow(Box::new(base), Box::new(exp)));
            }
            Ok(base)
        }

        fn primary(&mut self) -> Result<Expr, String> {
            match self.peek() {
                Some(b'(') => {
                    self.pos += 1;
                    let e = self.expr()?;
                    if self.peek() != Some(b')') {
                        return Err("missing closing parenthesis".into());
                    }
                    self.pos += 1;
                    Ok(e)
                }
                Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
                Some(c) if c.is_ascii_alphabetic() => self.ident(),
                other => Err(format!("unexpected token {other:?}")),
            }
        }

        fn number(&mut self) -> Result<Expr, String> {
            self.skip_ws();
            let start = self.pos;
            while self.pos < self.src.len()
                && (self.src[self.pos].is_ascii_digit()
                    || self.src[self.pos] == b'.'
                    || self.src[self.pos] == b'e'
                    || self.src[self.pos] == b'E'
                    || ((self.src[self.pos] == b'+' || self.src[self.pos] == b'-')
                        && self.pos > start
                        && (self.src[self.pos - 1] == b'e' || self.src[self.pos - 1] == b'E')))
            {
                self.pos += 1;
            }
            std::str::from_utf8(&self.src[start..self.pos])
                .ok()
                .and_then(|s| s.parse::<f64>().ok())
                .map(Expr::Num)
                .ok_or_else(|| format!("bad number at byte {start}"))
        }

        fn ident(&mut self) -> Result<Expr, String> {
            self.skip_ws();
            let start = self.pos;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphanumeric() {
                self.pos += 1;
            }
            let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
            match name {
                "x" => Ok(Expr::X),
                "y" => Ok(Expr::Y),
                "r" => Ok(Expr::R),
                "pi" => Ok(Expr::Num(std::f64::consts::PI)),
                "e" => Ok(Expr::Num(std::f64::consts::E)),
                _ => {
                    let func = match name {
                        "sin" => Func::Sin,
                        "cos" => Func::Cos,
                        "tan" => Func::Tan,
                        "exp" => Func::Exp,
                        "log" | "ln" => Func::Log,
                        "sqrt" => Func::Sqrt,
                        "abs" => Func::Abs,
                        "tanh" => Func::Tanh,
                        _ => return Err(format!("unknown name `{name}`")),
                    };
                    if self.peek() != Some(b'(') {
                        return Err(format!("function `{name}` needs parentheses"));
                    }
                    self.pos += 1;
                    let arg = self.expr()?;
                    if self.peek() != Some(b')') {
                        return Err(format!("unclosed call to `{name}`"));
                    }
                    self.pos += 1;
                    Ok(Expr::Call(func, Box::new(arg)))
                }
            }
        }
    }
}
