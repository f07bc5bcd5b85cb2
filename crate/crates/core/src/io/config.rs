//! Line-oriented run configuration.
//!
//! ```text
//! # comment
//! grid.dim = 2
//! grid.n = 64
//! grid.lengths = 2pi
//! solver.t_end = 0.1
//! ```
//!
//! Keys carry a dotted section prefix. List values are comma separated; a
//! single value is broadcast to every axis where that makes sense. Reals
//! accept `pi`, `2pi` and `<num>*pi`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use crate::bundle::{build_connection, BundleConnection, ConnectionFamily, ConnectionSpec, Section};
use crate::error::{Error, Result};
use crate::fiber::generator;
use crate::geometry::{build_grid, GridShape, ManifoldGrid, MetricFamily, MetricSpec};
use crate::init::InitialData;
use crate::solver::{default_dt, Scheme, SolverConfig};

/// Post-hoc trajectory checks selectable in `output.checks`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Check {
    MaxPrinciple,
    LpMonotone,
    Energy,
    DvBound,
    L2Decrement,
}

impl Check {
    pub const ALL: [Check; 5] = [
        Check::MaxPrinciple,
        Check::LpMonotone,
        Check::Energy,
        Check::DvBound,
        Check::L2Decrement,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Check::MaxPrinciple => "max_principle",
            Check::LpMonotone => "lp_monotone",
            Check::Energy => "energy",
            Check::DvBound => "dv_bound",
            Check::L2Decrement => "l2_decrement",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == s)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridConfig {
    pub dim: usize,
    pub sizes: Vec<usize>,
    pub lengths: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConnectionConfig {
    pub family: ConnectionFamily,
    pub theta: [f64; 3],
    /// Fiber axis `a` of the generator `J_a` used on each manifold axis.
    pub generators: [usize; 3],
    pub kappa: [i64; 3],
}

impl Default for ConnectionConfig {
    fn default() -> Self {
        Self {
            family: ConnectionFamily::Trivial,
            theta: [0.0; 3],
            generators: [2; 3],
            kappa: [0; 3],
        }
    }
}

impl ConnectionConfig {
    pub fn spec(&self) -> ConnectionSpec {
        let generators = self.generators.map(generator);
        match self.family {
            ConnectionFamily::Trivial => ConnectionSpec::trivial(),
            ConnectionFamily::ConstantSkew => ConnectionSpec::constant_skew(self.theta, generators),
            ConnectionFamily::Curved => ConnectionSpec::curved(self.theta, generators, self.kappa),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub checks: Vec<Check>,
}

/// A fully resolved run description.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub grid: GridConfig,
    pub metric: MetricSpec,
    pub connection: ConnectionConfig,
    pub init: InitialData,
    pub solver: SolverConfig,
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn build_grid(&self) -> Result<ManifoldGrid> {
        build_grid(&self.metric, &self.grid.sizes, &self.grid.lengths)
    }

    pub fn build_connection(&self, grid: &ManifoldGrid) -> Result<BundleConnection> {
        build_connection(&self.connection.spec(), grid)
    }

    pub fn initial_section(&self, grid: &ManifoldGrid) -> Result<Section> {
        self.init.build(grid)
    }

    /// Whether the metric is anything but flat.
    pub fn curved_metric(&self) -> bool {
        self.metric.family != MetricFamily::Flat
    }

    /// Serialises every resolved value; [`parse_config`] reproduces `self`.
    pub fn to_text(&self) -> String {
        let dim = self.grid.dim;
        let mut s = String::new();
        let mut put = |key: &str, value: String| {
            let _ = writeln!(s, "{key} = {value}");
        };
        put("grid.dim", dim.to_string());
        put("grid.n", join(&self.grid.sizes));
        put("grid.lengths", join_f(&self.grid.lengths));

        put("metric.family", self.metric.family.name().into());
        if self.metric.family == MetricFamily::Conformal {
            put("metric.amplitude", format!("{:?}", self.metric.amplitude));
            put("metric.kappa", join(&self.metric.kappa[..dim]));
        }

        let c = &self.connection;
        put("connection.family", c.family.name().into());
        if c.family != ConnectionFamily::Trivial {
            put("connection.theta", join_f(&c.theta[..dim]));
            let names: Vec<String> = c.generators[..dim].iter().map(|a| format!("e{}", a + 1)).collect();
            put("connection.generators", names.join(", "));
        }
        if c.family == ConnectionFamily::Curved {
            put("connection.kappa", join(&c.kappa[..dim]));
        }

        put("init.family", self.init.name().into());
        match &self.init {
            InitialData::Zero => {}
            InitialData::Constant(v) => put("init.value", join_f(v)),
            InitialData::FourierMode {
                mode,
                component,
                amplitude,
                phase,
            } => {
                put("init.mode", join(&mode[..dim]));
                put("init.component", component.to_string());
                put("init.amplitude", format!("{amplitude:?}"));
                put("init.phase", format!("{phase:?}"));
            }
            InitialData::RandomBandlimited { seed, kmax, linf } => {
                put("init.seed", seed.to_string());
                put("init.kmax", kmax.to_string());
                if let Some(l) = linf {
                    put("init.linf", format!("{l:?}"));
                }
            }
        }

        let sv = &self.solver;
        put("solver.lambda", format!("{:?}", sv.lambda));
        put("solver.mu", format!("{:?}", sv.mu));
        put("solver.dt", format!("{:?}", sv.dt));
        put("solver.t_end", format!("{:?}", sv.t_end));
        put("solver.scheme", sv.scheme.name().into());
        put("solver.cg_tol", format!("{:?}", sv.cg_tol));
        if let Some(it) = sv.cg_max_iter {
            put("solver.cg_max_iter", it.to_string());
        }
        put("solver.cfl_safety", format!("{:?}", sv.cfl_safety));

        put("output.dir", self.output.dir.display().to_string());
        put("output.snapshot_every", sv.snapshot_every.to_string());
        let checks: Vec<&str> = self.output.checks.iter().map(Check::name).collect();
        put(
            "output.checks",
            if checks.is_empty() {
                "none".into()
            } else {
                checks.join(", ")
            },
        );
        s
    }
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(", ")
}

fn join_f(xs: &[f64]) -> String {
    xs.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ")
}

const KEYS: &[&str] = &[
    "grid.dim",
    "grid.n",
    "grid.lengths",
    "metric.family",
    "metric.amplitude",
    "metric.kappa",
    "connection.family",
    "connection.theta",
    "connection.generators",
    "connection.kappa",
    "init.family",
    "init.value",
    "init.mode",
    "init.component",
    "init.amplitude",
    "init.phase",
    "init.seed",
    "init.kmax",
    "init.linf",
    "solver.lambda",
    "solver.mu",
    "solver.dt",
    "solver.t_end",
    "solver.scheme",
    "solver.cg_tol",
    "solver.cg_max_iter",
    "solver.cfl_safety",
    "output.dir",
    "output.snapshot_every",
    "output.checks",
];

struct Entries {
    map: BTreeMap<&'static str, (usize, String)>,
}

fn config_err(line: usize, message: impl Into<String>) -> Error {
    Error::Config {
        line,
        message: message.into(),
    }
}

/// Parses a real, accepting multiples of `pi`.
fn parse_real(s: &str) -> Option<f64> {
    let s = s.trim();
    let pi = std::f64::consts::PI;
    if s == "pi" {
        return Some(pi);
    }
    if let Some(head) = s.strip_suffix("pi") {
        let head = head.trim().trim_end_matches('*').trim();
        return head.parse::<f64>().ok().map(|c| c * pi);
    }
    s.parse::<f64>().ok()
}

impl Entries {
    fn line(&self, key: &str) -> usize {
        self.map.get(key).map_or(0, |e| e.0)
    }

    fn raw(&self, key: &str) -> Option<(usize, &str)> {
        self.map.get(key).map(|(l, v)| (*l, v.as_str()))
    }

    fn require(&self, key: &str) -> Result<(usize, &str)> {
        self.raw(key).ok_or_else(|| Error::MissingKey(key.to_string()))
    }

    fn scalar<T>(&self, key: &str, parse: impl Fn(&str) -> Option<T>, what: &str) -> Result<Option<T>> {
        match self.raw(key) {
            None => Ok(None),
            Some((line, v)) => parse(v)
                .map(Some)
                .ok_or_else(|| config_err(line, format!("`{key}`: expected {what}, got `{v}`"))),
        }
    }

    fn real(&self, key: &str) -> Result<Option<f64>> {
        self.scalar(key, parse_real, "a real number")
    }

    fn uint(&self, key: &str) -> Result<Option<usize>> {
        self.scalar(key, |s| s.parse::<usize>().ok(), "a non-negative integer")
    }

    /// Comma-separated list with exactly `dim` entries, or a single entry
    /// broadcast to all axes when `broadcast` is set.
    fn list<T: Copy>(
        &self,
        key: &str,
        dim: usize,
        broadcast: bool,
        parse: impl Fn(&str) -> Option<T>,
        what: &str,
    ) -> Result<Option<Vec<T>>> {
        let Some((line, v)) = self.raw(key) else {
            return Ok(None);
        };
        let items: Vec<&str> = v.split(',').map(str::trim).collect();
        let parsed: Option<Vec<T>> = items.iter().map(|s| parse(s)).collect();
        let parsed =
            parsed.ok_or_else(|| config_err(line, format!("`{key}`: expected a list of {what}, got `{v}`")))?;
        match parsed.len() {
            n if n == dim => Ok(Some(parsed)),
            1 if broadcast => Ok(Some(vec![parsed[0]; dim])),
            n => Err(config_err(line, format!("`{key}`: expected {dim} entries, got {n}"))),
        }
    }

    fn array3<T: Copy + Default>(
        &self,
        key: &str,
        dim: usize,
        broadcast: bool,
        parse: impl Fn(&str) -> Option<T>,
        what: &str,
    ) -> Result<Option<[T; 3]>> {
        Ok(self.list(key, dim, broadcast, parse, what)?.map(|v| {
            let mut out = [T::default(); 3];
            out[..dim].copy_from_slice(&v);
            out
        }))
    }
}

fn parse_int(s: &str) -> Option<i64> {
    s.parse().ok()
}

fn parse_generator(s: &str) -> Option<usize> {
    match s {
        "e1" => Some(0),
        "e2" => Some(1),
        "e3" => Some(2),
        _ => None,
    }
}

/// Parses and resolves a configuration. Omitted optional keys receive their
/// defaults; `solver.dt` defaults to the CFL limit for RK4 and to the grid
/// spacing for IMEX.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut map = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| config_err(line, format!("expected `key = value`, got `{content}`")))?;
        let key = key.trim();
        let value = value.trim();
        let Some(&known) = KEYS.iter().find(|k| **k == key) else {
            return Err(config_err(line, format!("unknown key `{key}`")));
        };
        if value.is_empty() {
            return Err(config_err(line, format!("`{key}` has no value")));
        }
        if let Some((first, _)) = map.insert(known, (line, value.to_string())) {
            return Err(config_err(
                line,
                format!("duplicate key `{key}` (first set on line {first})"),
            ));
        }
    }
    let e = Entries { map };

    // grid
    let (dim_line, dim_raw) = e.require("grid.dim")?;
    let dim: usize = match dim_raw.parse() {
        Ok(d @ (2 | 3)) => d,
        _ => {
            return Err(config_err(
                dim_line,
                format!("`grid.dim` must be 2 or 3, got `{dim_raw}`"),
            ))
        }
    };
    e.require("grid.n")?;
    let sizes = e
        .list("grid.n", dim, true, |s| s.parse::<usize>().ok(), "positive integers")?
        .unwrap_or_default();
    GridShape::new(&sizes).map_err(|err| config_err(e.line("grid.n"), err.to_string()))?;
    let lengths = e
        .list("grid.lengths", dim, true, parse_real, "reals")?
        .unwrap_or(vec![1.0; dim]);
    if lengths.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
        return Err(config_err(e.line("grid.lengths"), "`grid.lengths` must be positive"));
    }
    let grid = GridConfig { dim, sizes, lengths };

    // metric
    let metric = match e.raw("metric.family") {
        None | Some((_, "flat")) => MetricSpec::flat(),
        Some((line, "conformal")) => {
            let amplitude = e.real("metric.amplitude")?.unwrap_or(0.0);
            let kappa = e.array3("metric.kappa", dim, true, parse_int, "integers")?.unwrap_or({
                let mut k = [0; 3];
                k[..dim].fill(1);
                k
            });
            let spec = MetricSpec::conformal(amplitude, kappa);
            spec.validate().map_err(|err| config_err(line, err.to_string()))?;
            spec
        }
        Some((line, other)) => {
            return Err(config_err(
                line,
                format!("unknown metric family `{other}` (flat|conformal)"),
            ));
        }
    };

    // connection
    let family = match e.raw("connection.family") {
        None | Some((_, "trivial")) => ConnectionFamily::Trivial,
        Some((_, "constant_skew")) => ConnectionFamily::ConstantSkew,
        Some((_, "curved")) => ConnectionFamily::Curved,
        Some((line, other)) => {
            return Err(config_err(
                line,
                format!("unknown connection family `{other}` (trivial|constant_skew|curved)"),
            ));
        }
    };
    let connection = match family {
        ConnectionFamily::Trivial => ConnectionConfig::default(),
        _ => {
            let theta = e
                .array3("connection.theta", dim, true, parse_real, "reals")?
                .unwrap_or([0.0; 3]);
            if theta.iter().any(|t| !t.is_finite()) {
                return Err(config_err(
                    e.line("connection.theta"),
                    "`connection.theta` must be finite",
                ));
            }
            let mut generators = e
                .array3("connection.generators", dim, true, parse_generator, "e1|e2|e3")?
                .unwrap_or([2; 3]);
            generators[dim..].fill(2);
            let kappa = if family == ConnectionFamily::Curved {
                e.array3("connection.kappa", dim, true, parse_int, "integers")?
                    .unwrap_or({
                        let mut k = [0; 3];
                        k[0] = 1;
                        k
                    })
            } else {
                [0; 3]
            };
            ConnectionConfig {
                family,
                theta,
                generators,
                kappa,
            }
        }
    };

    // initial data
    let init = match e.raw("init.family") {
        None | Some((_, "zero")) => InitialData::Zero,
        Some((line, "constant")) => {
            let v = e
                .list("init.value", 3, false, parse_real, "reals")?
                .ok_or_else(|| config_err(line, "`init.family = constant` requires `init.value`"))?;
            InitialData::Constant([v[0], v[1], v[2]])
        }
        Some((_, "fourier_mode")) => {
            let mode = e.array3("init.mode", dim, false, parse_int, "integers")?.unwrap_or({
                let mut k = [0; 3];
                k[0] = 1;
                k
            });
            InitialData::FourierMode {
                mode,
                component: e.uint("init.component")?.unwrap_or(0),
                amplitude: e.real("init.amplitude")?.unwrap_or(1.0),
                phase: e.real("init.phase")?.unwrap_or(0.0),
            }
        }
        Some((_, "random_bandlimited")) => InitialData::RandomBandlimited {
            seed: e
                .scalar("init.seed", |s| s.parse::<u64>().ok(), "an unsigned integer")?
                .unwrap_or(0),
            kmax: e.uint("init.kmax")?.unwrap_or(2),
            linf: e.real("init.linf")?,
        },
        Some((line, other)) => {
            return Err(config_err(
                line,
                format!("unknown init family `{other}` (zero|constant|fourier_mode|random_bandlimited)"),
            ));
        }
    };

    // solver
    let positive = |key: &str, symbol: &str, default: Option<f64>| -> Result<f64> {
        let value = match (e.real(key)?, default) {
            (Some(v), _) => v,
            (None, Some(d)) => d,
            (None, None) => return Err(Error::MissingKey(key.to_string())),
        };
        if !(value > 0.0 && value.is_finite()) {
            return Err(config_err(e.line(key), format!("{symbol} > 0 required")));
        }
        Ok(value)
    };
    let lambda = positive("solver.lambda", "λ", Some(1.0))?;
    let mu = positive("solver.mu", "μ", Some(1.0))?;
    let t_end = positive("solver.t_end", "t_end", None)?;
    let cg_tol = positive("solver.cg_tol", "cg_tol", Some(SolverConfig::DEFAULT_CG_TOL))?;
    let cfl_safety = positive(
        "solver.cfl_safety",
        "cfl_safety",
        Some(SolverConfig::DEFAULT_CFL_SAFETY),
    )?;
    if cfl_safety > 1.0 {
        return Err(config_err(e.line("solver.cfl_safety"), "cfl_safety in (0, 1] required"));
    }
    let scheme = match e.raw("solver.scheme") {
        None => Scheme::Rk4,
        Some((line, s)) => s.parse().map_err(|msg: String| config_err(line, msg))?,
    };
    let cg_max_iter = match e.uint("solver.cg_max_iter")? {
        Some(0) => return Err(config_err(e.line("solver.cg_max_iter"), "cg_max_iter >= 1 required")),
        Some(n) => n,
        None => 10 * grid.sizes.iter().copied().max().unwrap_or(0),
    };
    let dt = match e.raw("solver.dt") {
        Some(_) => positive("solver.dt", "dt", None)?,
        None => {
            let g = build_grid(&metric, &grid.sizes, &grid.lengths)?;
            default_dt(&g, scheme, cfl_safety)
        }
    };
    let snapshot_every = e.uint("output.snapshot_every")?.unwrap_or(0);
    let solver = SolverConfig {
        lambda,
        mu,
        dt,
        t_end,
        scheme,
        cg_tol,
        cg_max_iter: Some(cg_max_iter),
        cfl_safety,
        snapshot_every,
    };

    // output
    let dir = e
        .raw("output.dir")
        .map_or_else(|| PathBuf::from("out"), |(_, v)| PathBuf::from(v));
    let checks = match e.raw("output.checks") {
        None | Some((_, "all")) => Check::ALL.to_vec(),
        Some((_, "none")) => Vec::new(),
        Some((line, v)) => {
            let mut checks = Vec::new();
            for name in v.split(',').map(str::trim) {
                let c = Check::parse(name).ok_or_else(|| {
                    config_err(
                        line,
                        format!(
                            "unknown check `{name}` (max_principle|lp_monotone|energy|dv_bound|l2_decrement|all|none)"
                        ),
                    )
                })?;
                if !checks.contains(&c) {
                    checks.push(c);
                }
            }
            checks
        }
    };

    let cfg = RunConfig {
        grid,
        metric,
        connection,
        init,
        solver,
        output: OutputConfig { dir, checks },
    };
    if let InitialData::FourierMode { component, .. } = cfg.init {
        if component > 2 {
            return Err(config_err(
                e.line("init.component"),
                "`init.component` must be 0, 1 or 2",
            ));
        }
    }
    Ok(cfg)
}
