//! Command-line driver: parameter resolution, CSV output and the subcommands.
//!
//! Every parameter is a `key` that can appear as `--key value` on the command line or as
//! `key = value` in a config file given with `--config`; flags win over the file.
//! Physical quantities need explicit units (see [`crate::units`]).

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Arg, ArgAction, ArgMatches, Command};
use nalgebra::{DVector, Vector3};

use crate::barrier::{delocalization_threshold_field, rotational_barrier, rotational_barrier_with, BarrierOptions, Relaxation};
use crate::consts::{joule_to_millikelvin, BOLTZMANN, MASS_CA40_ION};
use crate::dynamics::{delocalization_scan, simulate_observed, Constraint, LangevinConfig, ScanOptions};
use crate::electrostatics::{
    compensation_response, find_ring_minimum, pseudopotential, rf_null, solve_compensation, QuadratureOptions,
    TrapDrive, TrapGeometry,
};
use crate::equilibrium::{find_equilibrium, find_equilibrium_planar, EquilibriumOptions};
use crate::model::{InPlaneField, RingSpec};
use crate::modes::{frequency_sweep, tangential_modes, ZERO_MODE_OMEGA};
use crate::thermometry::{doppler_temperature, fwhm_from_temperature};
use crate::units::{parse_quantity, Dimension};
use crate::{Error, Result};

/// Version of the CSV layouts written by this module.
pub const SCHEMA_VERSION: u32 = 1;
/// Environment variable holding the default output directory.
pub const OUT_DIR_ENV: &str = "IONRING_OUT_DIR";

#[derive(Clone, Copy, Debug, PartialEq)]
enum Kind {
    Count,
    Bool,
    Word(&'static [&'static str]),
    Quantity(Dimension),
    /// A quantity in kg or u, or the keyword `Ca40`.
    Mass,
    Path,
}

struct Key {
    name: &'static str,
    kind: Kind,
    default: Option<&'static str>,
    help: &'static str,
}

const fn key(name: &'static str, kind: Kind, default: Option<&'static str>, help: &'static str) -> Key {
    Key { name, kind, default, help }
}

use Dimension as D;

const KEYS: &[Key] = &[
    key("ions", Kind::Count, Some("10"), "ion count N"),
    key("ions-min", Kind::Count, Some("2"), "smallest N of a sweep"),
    key("ions-max", Kind::Count, Some("15"), "largest N of a sweep"),
    key("diameter", Kind::Quantity(D::Length), Some("90um"), "ring diameter"),
    key("mass", Kind::Mass, Some("Ca40"), "ion mass (kg, u, or Ca40)"),
    key("ex", Kind::Quantity(D::Field), Some("0V_per_m"), "in-plane field, x component"),
    key("ey", Kind::Quantity(D::Field), Some("2V_per_m"), "in-plane field, y component"),
    key("e-min", Kind::Quantity(D::Field), Some("0.5V_per_m"), "first field of a sweep (along y)"),
    key("e-max", Kind::Quantity(D::Field), Some("5V_per_m"), "last field of a sweep (along y)"),
    key("points", Kind::Count, Some("10"), "grid points of a sweep"),
    key("sweep", Kind::Word(&["ions", "field"]), Some("ions"), "sweep axis"),
    key("planar", Kind::Bool, Some("false"), "let ions relax radially in the plane"),
    key("radial-freq", Kind::Quantity(D::Frequency), Some("390kHz"), "radial trap frequency for the planar model"),
    key("multistart", Kind::Count, Some("4"), "equilibrium starting points"),
    key("seed", Kind::Count, Some("0"), "random seed"),
    key("resolution", Kind::Count, Some("201"), "barrier scan grid points"),
    key("temperature", Kind::Quantity(D::Temperature), Some("3mK"), "temperature"),
    key("friction", Kind::Quantity(D::Rate), Some("1e4per_s"), "Doppler-cooling friction rate"),
    key("dt", Kind::Quantity(D::Time), None, "Langevin timestep (default: from the fastest mode)"),
    key("steps", Kind::Count, Some("1000000"), "Langevin steps after burn-in"),
    key("duration", Kind::Quantity(D::Time), None, "simulated time after burn-in; overrides steps"),
    key("burn-in", Kind::Count, Some("100000"), "Langevin steps discarded before statistics"),
    key("record-every", Kind::Count, Some("0"), "trajectory CSV stride in steps (0 = none)"),
    key("seeds", Kind::Count, Some("8"), "runs per field value"),
    key("geometry", Kind::Path, None, "electrode geometry file (default: built-in ring trap)"),
    key("rf-amplitude", Kind::Quantity(D::Voltage), Some("220V"), "rf amplitude"),
    key("rf-freq", Kind::Quantity(D::Frequency), Some("5.81MHz"), "rf drive frequency"),
    key("map-r-max", Kind::Quantity(D::Length), Some("150um"), "outer radius of the pseudopotential map"),
    key("map-z-min", Kind::Quantity(D::Length), Some("300um"), "lowest height of the map"),
    key("map-z-max", Kind::Quantity(D::Length), Some("480um"), "highest height of the map"),
    key("map-points", Kind::Count, Some("31"), "map grid points per axis"),
    key("stray-x", Kind::Quantity(D::Field), Some("3V_per_m"), "stray field, x component"),
    key("stray-y", Kind::Quantity(D::Field), Some("0V_per_m"), "stray field, y component"),
    key("stray-z", Kind::Quantity(D::Field), Some("0V_per_m"), "stray field, z component"),
    key("fwhm", Kind::Quantity(D::Frequency), None, "measured Doppler FWHM; gives the temperature"),
    key("wavelength", Kind::Quantity(D::Length), Some("729nm"), "probe transition wavelength"),
    key("svg", Kind::Bool, Some("false"), "also write an SVG line chart"),
    key("name", Kind::Path, None, "output file stem (default: the subcommand)"),
];

#[derive(Debug)]
struct Sub {
    name: &'static str,
    about: &'static str,
    keys: &'static [&'static str],
    /// Defaults that differ from the global table.
    defaults: &'static [(&'static str, &'static str)],
}

const SUBS: &[Sub] = &[
    Sub {
        name: "equilibrium",
        about: "minimum-energy configuration",
        keys: &["ions", "diameter", "mass", "ex", "ey", "planar", "radial-freq", "multistart", "seed"],
        defaults: &[],
    },
    Sub { name: "modes", about: "tangential normal modes at equilibrium", keys: &["ions", "diameter", "mass", "ex", "ey", "multistart", "seed"], defaults: &[] },
    Sub {
        name: "mode-sweep",
        about: "lowest tangential frequency against N or field",
        keys: &["sweep", "ions", "ions-min", "ions-max", "diameter", "mass", "ex", "ey", "e-min", "e-max", "points", "multistart", "seed", "svg"],
        defaults: &[],
    },
    Sub {
        name: "barrier",
        about: "rotational barrier profile",
        keys: &["ions", "diameter", "mass", "ex", "ey", "resolution", "planar", "radial-freq", "svg"],
        defaults: &[],
    },
    Sub {
        name: "threshold",
        about: "field where the barrier equals the thermal energy, per N",
        keys: &["ions-min", "ions-max", "diameter", "mass", "temperature", "resolution", "svg"],
        defaults: &[("ions-min", "5")],
    },
    Sub {
        name: "trap",
        about: "ring minimum and pseudopotential map",
        keys: &["geometry", "rf-amplitude", "rf-freq", "mass", "map-r-max", "map-z-min", "map-z-max", "map-points"],
        defaults: &[],
    },
    Sub { name: "compensate", about: "compensation voltages for a stray field", keys: &["geometry", "stray-x", "stray-y", "stray-z"], defaults: &[] },
    Sub {
        name: "simulate",
        about: "Langevin run summary",
        keys: &[
            "ions", "diameter", "mass", "ex", "ey", "temperature", "friction", "dt", "steps", "duration", "burn-in", "seed",
            "planar", "radial-freq", "record-every",
        ],
        defaults: &[],
    },
    Sub {
        name: "scan-delocalization",
        about: "delocalized fraction over a field grid",
        keys: &[
            "ions", "diameter", "mass", "temperature", "friction", "dt", "steps", "duration", "burn-in", "seed", "seeds",
            "e-min", "e-max", "points", "svg",
        ],
        defaults: &[("e-max", "3V_per_m"), ("points", "11"), ("duration", "15ms"), ("burn-in", "0")],
    },
    Sub { name: "doppler", about: "Doppler width and temperature", keys: &["temperature", "fwhm", "wavelength", "mass"], defaults: &[] },
];

fn find_key(name: &str) -> Option<&'static Key> {
    KEYS.iter().find(|k| k.name == name)
}

/// The command-line interface definition.
pub fn command() -> Command {
    let mut cmd = Command::new("ionring")
        .version(env!("CARGO_PKG_VERSION"))
        .about("Ion ring crystals: equilibria, modes, barriers, trap electrostatics and Langevin dynamics")
        .subcommand_required(true)
        .arg_required_else_help(true);
    for sub in SUBS {
        let mut c = Command::new(sub.name)
            .about(sub.about)
            .arg(Arg::new("config").long("config").value_name("FILE").help("key = value parameter file"))
            .arg(Arg::new("out").long("out").value_name("DIR").help(format!("output directory (default: ${OUT_DIR_ENV} or .)")))
            .arg(Arg::new("name").long("name").value_name("STEM").help(find_key("name").unwrap().help));
        for name in sub.keys {
            let k = find_key(name).expect("subcommand key in table");
            let default = sub.defaults.iter().find(|d| d.0 == *name).map(|d| d.1).or(k.default);
            let help = match default {
                Some(d) => format!("{} [default: {d}]", k.help),
                None => k.help.to_string(),
            };
            c = c.arg(Arg::new(k.name).long(k.name).value_name("VALUE").allow_hyphen_values(true).action(ArgAction::Set).help(help));
        }
        cmd = cmd.subcommand(c);
    }
    cmd
}

/// Resolved parameters of one invocation.
#[derive(Clone, Debug)]
pub struct Params {
    sub: &'static Sub,
    values: BTreeMap<&'static str, String>,
    explicit: Vec<&'static str>,
}

/// `key = value` lines; `#` starts a comment.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::Config(format!("config line {}: expected key = value", ln + 1)));
        };
        let (k, v) = (k.trim(), v.trim());
        if k == "config" || (k != "out" && find_key(k).is_none()) {
            return Err(Error::Config(format!("config line {}: unknown key '{k}'", ln + 1)));
        }
        if out.insert(k.to_string(), v.to_string()).is_some() {
            return Err(Error::Config(format!("config line {}: duplicate key '{k}'", ln + 1)));
        }
    }
    Ok(out)
}

impl Params {
    fn resolve(sub: &'static Sub, matches: &ArgMatches) -> Result<(Self, Option<String>)> {
        let mut file = match matches.get_one::<String>("config") {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Error::Config(format!("cannot read config file '{path}': {e}")))?;
                parse_config(&text)?
            }
            None => BTreeMap::new(),
        };
        let out = matches.get_one::<String>("out").cloned().or_else(|| file.remove("out"));
        let mut values = BTreeMap::new();
        let mut explicit = Vec::new();
        for name in sub.keys.iter().copied().chain(["name"]) {
            let given = matches.get_one::<String>(name).cloned().or_else(|| file.get(name).cloned());
            if given.is_some() {
                explicit.push(name);
            }
            let default = sub.defaults.iter().find(|d| d.0 == name).map(|d| d.1.to_string());
            if let Some(v) = given.or(default).or_else(|| find_key(name).unwrap().default.map(String::from)) {
                values.insert(name, v);
            }
        }
        let p = Params { sub, values, explicit };
        for name in p.values.keys() {
            p.check(name)?;
        }
        Ok((p, out))
    }

    fn check(&self, name: &str) -> Result<()> {
        let k = find_key(name).unwrap();
        match k.kind {
            Kind::Count => self.count(name).map(drop),
            Kind::Bool => self.flag(name).map(drop),
            Kind::Word(_) => self.word(name).map(drop),
            Kind::Quantity(_) | Kind::Mass => self.quantity(name).map(drop),
            Kind::Path => Ok(()),
        }
    }

    fn raw(&self, name: &str) -> Option<&str> {
        self.values.get(name).map(String::as_str)
    }

    fn bad(name: &str, v: &str, what: &str) -> Error {
        Error::Config(format!("--{name} '{v}': {what}"))
    }

    pub fn count(&self, name: &str) -> Result<usize> {
        let v = self.raw(name).ok_or_else(|| Error::Config(format!("--{name} is required")))?;
        v.parse::<usize>().map_err(|_| Self::bad(name, v, "expected a non-negative integer"))
    }

    pub fn flag(&self, name: &str) -> Result<bool> {
        match self.raw(name) {
            Some("true") => Ok(true),
            Some("false") | None => Ok(false),
            Some(v) => Err(Self::bad(name, v, "expected true or false")),
        }
    }

    fn word(&self, name: &str) -> Result<&str> {
        let v = self.raw(name).unwrap_or("");
        match find_key(name).unwrap().kind {
            Kind::Word(options) if options.contains(&v) => Ok(v),
            Kind::Word(options) => Err(Self::bad(name, v, &format!("expected one of {}", options.join(", ")))),
            _ => Ok(v),
        }
    }

    /// Quantity in SI units, or `None` when the key has no value.
    pub fn optional(&self, name: &str) -> Result<Option<f64>> {
        let Some(v) = self.raw(name) else { return Ok(None) };
        let value = match find_key(name).map(|k| k.kind) {
            Some(Kind::Mass) if v == "Ca40" => MASS_CA40_ION,
            Some(Kind::Mass) => parse_quantity(v, Dimension::Mass).map_err(|e| Error::Config(format!("--{name}: {e}")))?,
            Some(Kind::Quantity(dim)) => parse_quantity(v, dim).map_err(|e| Error::Config(format!("--{name}: {e}")))?,
            _ => return Err(Error::Config(format!("--{name} is not a physical quantity"))),
        };
        Ok(Some(value))
    }

    pub fn quantity(&self, name: &str) -> Result<f64> {
        self.optional(name)?.ok_or_else(|| Error::Config(format!("--{name} is required")))
    }

    fn ring(&self) -> Result<RingSpec> {
        RingSpec::new(self.quantity("diameter")?, self.quantity("mass")?, self.count("ions")?)
            .map_err(|e| Error::Config(e.to_string()))
    }

    fn field(&self) -> Result<InPlaneField> {
        InPlaneField::new(self.quantity("ex")?, self.quantity("ey")?)
    }

    fn equilibrium_options(&self) -> Result<EquilibriumOptions> {
        Ok(EquilibriumOptions { multistart: self.count("multistart")?, seed: self.count("seed")? as u64, ..Default::default() })
    }

    fn geometry(&self) -> Result<TrapGeometry> {
        match self.raw("geometry") {
            Some(path) => std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read geometry file '{path}': {e}")))?
                .parse(),
            None => Ok(TrapGeometry::ring_trap()),
        }
    }

    fn langevin(&self) -> Result<LangevinConfig> {
        Ok(LangevinConfig {
            temperature: self.quantity("temperature")?,
            friction: self.quantity("friction")?,
            dt: self.optional("dt")?,
            steps: self.count("steps")?,
            duration: self.optional("duration")?,
            burn_in: self.count("burn-in")?,
            seed: self.count("seed")? as u64,
            constraint: if self.flag("planar")? {
                Constraint::Planar { radial_omega: TAU * self.quantity("radial-freq")? }
            } else {
                Constraint::Ring
            },
            ..Default::default()
        })
    }

    fn stem(&self) -> Result<String> {
        let stem = self.raw("name").unwrap_or(self.sub.name);
        let ok = !stem.is_empty()
            && stem != "."
            && stem != ".."
            && stem.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c));
        if ok {
            Ok(stem.to_string())
        } else {
            Err(Error::Config(format!("--name '{stem}' must be a plain file stem")))
        }
    }

    /// Header lines recording every parameter of the subcommand.
    fn header(&self) -> Vec<String> {
        let mut lines = vec![
            format!("ionring {}", self.sub.name),
            format!("schema_version = {SCHEMA_VERSION}"),
            format!("tool_version = {}", env!("CARGO_PKG_VERSION")),
        ];
        for name in self.sub.keys {
            let v = self.raw(name).unwrap_or("none");
            lines.push(format!("param {name} = {v}"));
        }
        lines
    }
}

/// A CSV table with a `#` metadata header.
#[derive(Clone, Debug, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: Vec<String>, columns: &[&str]) -> Self {
        Table { header, columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    fn result(&mut self, key: &str, value: impl std::fmt::Display) {
        self.header.push(format!("result {key} = {value}"));
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for h in &self.header {
            let _ = writeln!(s, "# {h}");
        }
        let _ = writeln!(s, "{}", self.columns.join(","));
        for r in &self.rows {
            let _ = writeln!(s, "{}", r.join(","));
        }
        s
    }

    /// Numeric column by name.
    fn column(&self, name: &str) -> Vec<f64> {
        let i = self.columns.iter().position(|c| c == name).expect("column");
        self.rows.iter().map(|r| r[i].parse().unwrap_or(f64::NAN)).collect()
    }
}

/// Shortest round-trip representation.
fn num(x: f64) -> String {
    format!("{x:e}")
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![a],
        _ => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Plain SVG polyline chart of `y` against `x`.
pub fn svg_line_chart(title: &str, xlabel: &str, ylabel: &str, x: &[f64], y: &[f64]) -> String {
    let (w, h, m) = (640.0, 420.0, 60.0);
    let pts: Vec<(f64, f64)> = x.iter().zip(y).filter(|(a, b)| a.is_finite() && b.is_finite()).map(|(a, b)| (*a, *b)).collect();
    let lo_hi = |v: &mut dyn Iterator<Item = f64>| {
        let (lo, hi) = v.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), t| (l.min(t), h.max(t)));
        if lo.is_finite() && hi > lo {
            (lo, hi)
        } else if lo.is_finite() {
            (lo - 0.5, lo + 0.5)
        } else {
            (0.0, 1.0)
        }
    };
    let (x0, x1) = lo_hi(&mut pts.iter().map(|p| p.0));
    let (y0, y1) = lo_hi(&mut pts.iter().map(|p| p.1));
    let sx = |v: f64| m + (v - x0) / (x1 - x0) * (w - 2.0 * m);
    let sy = |v: f64| h - m - (v - y0) / (y1 - y0) * (h - 2.0 * m);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="16">{title}</text>"#, w / 2.0);
    let _ = writeln!(s, r#"<line x1="{m}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#, h - m, w - m, h - m);
    let _ = writeln!(s, r#"<line x1="{m}" y1="{m}" x2="{m}" y2="{}" stroke="black"/>"#, h - m);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle" font-size="13">{xlabel}</text>"#, w / 2.0, h - 15.0);
    let _ = writeln!(s, r#"<text x="16" y="{}" text-anchor="middle" font-size="13" transform="rotate(-90 16 {})">{ylabel}</text>"#, h / 2.0, h / 2.0);
    for (v, anchor, px, py) in [(x0, "start", m, h - m + 18.0), (x1, "end", w - m, h - m + 18.0)] {
        let _ = writeln!(s, r#"<text x="{px}" y="{py}" text-anchor="{anchor}" font-size="11">{v:.4}</text>"#);
    }
    for (v, py) in [(y0, h - m), (y1, m)] {
        let _ = writeln!(s, r#"<text x="{}" y="{py}" text-anchor="end" font-size="11">{v:.4}</text>"#, m - 4.0);
    }
    let path: Vec<String> = pts.iter().map(|&(a, b)| format!("{:.2},{:.2}", sx(a), sy(b))).collect();
    let _ = writeln!(s, r#"<polyline fill="none" stroke="steelblue" stroke-width="2" points="{}"/>"#, path.join(" "));
    s.push_str("</svg>\n");
    s
}

/// Files produced by one subcommand.
#[derive(Clone, Debug, Default)]
pub struct Output {
    pub files: Vec<(String, String)>,
    /// One-line summary for standard output.
    pub summary: String,
}

impl Output {
    fn csv(&mut self, stem: &str, table: &Table) {
        self.files.push((format!("{stem}.csv"), table.render()));
    }

    fn svg(&mut self, stem: &str, chart: String) {
        self.files.push((format!("{stem}.svg"), chart));
    }
}

fn cmd_equilibrium(p: &Params, stem: &str) -> Result<Output> {
    let ring = p.ring()?;
    let field = p.field()?;
    let opts = p.equilibrium_options()?;
    let mut t = Table::new(p.header(), &["ion", "theta_rad", "r_um", "x_um", "y_um"]);
    let (angles, radii, energy, grad, converged, zigzag) = if p.flag("planar")? {
        let res = find_equilibrium_planar(&ring, &field, TAU * p.quantity("radial-freq")?, &opts)?;
        (res.state.angles().to_vec(), res.state.radii().to_vec(), res.energy, res.gradient_norm, res.converged, res.zigzag)
    } else {
        let res = find_equilibrium(&ring, &field, &opts)?;
        (res.state.angles().to_vec(), vec![ring.radius(); ring.ions], res.energy, res.gradient_norm, res.converged, None)
    };
    if !converged {
        return Err(Error::NotConverged { iterations: opts.max_iterations, gradient_norm: grad });
    }
    t.result("energy_J", num(energy));
    t.result("gradient_norm", num(grad));
    if let Some(z) = zigzag {
        t.result("zigzag", z);
    }
    for (i, (th, r)) in angles.iter().zip(&radii).enumerate() {
        let (s, c) = th.sin_cos();
        t.push(vec![i.to_string(), num(*th), num(r * 1e6), num(r * s * 1e6), num(r * c * 1e6)]);
    }
    let mut out = Output { summary: format!("N={} E=({}, {}) V/m energy={energy:e} J", ring.ions, field.ex, field.ey), ..Default::default() };
    out.csv(stem, &t);
    Ok(out)
}

fn cmd_modes(p: &Params, stem: &str) -> Result<Output> {
    let ring = p.ring()?;
    let field = p.field()?;
    let opts = p.equilibrium_options()?;
    let eq = find_equilibrium(&ring, &field, &opts)?;
    if !eq.converged {
        return Err(Error::NotConverged { iterations: eq.iterations, gradient_norm: eq.gradient_norm });
    }
    let spectrum = tangential_modes(&eq.state, &ring, &field)?;
    let mut t = Table::new(p.header(), &["mode", "omega_rad_per_s", "f_Hz", "kind"]);
    let lowest = spectrum.lowest_nonzero().map_or(0.0, |w| w / TAU);
    t.result("f_lowest_Hz", num(lowest));
    t.result("n_zero_modes", spectrum.zero_modes);
    t.result("n_unstable_modes", spectrum.unstable_modes);
    for (k, w) in spectrum.omegas.iter().enumerate() {
        // Negative entries are imaginary frequencies.
        let kind = if *w < 0.0 && w.abs() >= ZERO_MODE_OMEGA {
            "unstable"
        } else if w.abs() < ZERO_MODE_OMEGA {
            "zero"
        } else {
            "stable"
        };
        t.push(vec![k.to_string(), num(*w), num(w / TAU), kind.to_string()]);
    }
    let mut out = Output { summary: format!("f_lowest = {lowest:.6e} Hz"), ..Default::default() };
    out.csv(stem, &t);
    Ok(out)
}

fn cmd_mode_sweep(p: &Params, stem: &str) -> Result<Output> {
    let (d, m) = (p.quantity("diameter")?, p.quantity("mass")?);
    let points: Vec<(usize, InPlaneField)> = match p.word("sweep")? {
        "ions" => {
            let field = p.field()?;
            (p.count("ions-min")?..=p.count("ions-max")?).map(|n| (n, field)).collect()
        }
        _ => {
            let ex = p.quantity("ex")?;
            let n = p.count("ions")?;
            linspace(p.quantity("e-min")?, p.quantity("e-max")?, p.count("points")?)
                .into_iter()
                .map(|e| InPlaneField::new(ex, e).map(|f| (n, f)))
                .collect::<Result<_>>()?
        }
    };
    if points.is_empty() {
        return Err(Error::Config("sweep has no points".into()));
    }
    let sweep = frequency_sweep(d, m, &points, &p.equilibrium_options()?)?;
    let mut t = Table::new(p.header(), &["N", "E_x", "E_y", "f_lowest_Hz", "n_zero_modes"]);
    for s in &sweep {
        t.push(vec![s.ions.to_string(), num(s.field.ex), num(s.field.ey), num(s.lowest_hz), s.zero_modes.to_string()]);
    }
    let mut out = Output { summary: format!("{} sweep points", sweep.len()), ..Default::default() };
    out.csv(stem, &t);
    if p.flag("svg")? {
        let by_ions = p.word("sweep")? == "ions";
        let x = if by_ions { t.column("N") } else { t.column("E_y") };
        let xlabel = if by_ions { "N" } else { "E_y (V/m)" };
        let y: Vec<f64> = t.column("f_lowest_Hz").iter().map(|f| f / 1e3).collect();
        out.svg(stem, svg_line_chart("Lowest tangential mode", xlabel, "f (kHz)", &x, &y));
    }
    Ok(out)
}

fn cmd_barrier(p: &Params, stem: &str) -> Result<Output> {
    let ring = p.ring()?;
    let field = p.field()?;
    let relaxation = if p.flag("planar")? {
        Relaxation::Planar { radial_omega: TAU * p.quantity("radial-freq")? }
    } else {
        Relaxation::Ring
    };
    let opts = BarrierOptions { resolution: p.count("resolution")?, relaxation, ..Default::default() };
    let b = rotational_barrier_with(&ring, &field, &opts)?;
    let prof = &b.profile;
    let floor = prof.energies[prof.min_index];
    let mut t = Table::new(p.header(), &["theta_rad", "V_joule", "V_over_kB_mK"]);
    t.result("V_B_J", num(b.joule));
    t.result("V_B_mK", num(b.millikelvin));
    t.result("hysteresis", prof.hysteresis);
    for (th, e) in prof.probe_angles.iter().zip(&prof.energies) {
        let v = e - floor;
        t.push(vec![num(*th), num(v), num(joule_to_millikelvin(v))]);
    }
    let mut out = Output { summary: format!("N,Ex,Ey,V_B_mK\n{},{},{},{}", ring.ions, field.ex, field.ey, b.millikelvin), ..Default::default() };
    out.csv(stem, &t);
    if p.flag("svg")? {
        out.svg(stem, svg_line_chart("Rotational barrier", "probe angle (rad)", "V/kB (mK)", &t.column("theta_rad"), &t.column("V_over_kB_mK")));
    }
    Ok(out)
}

fn cmd_threshold(p: &Params, stem: &str) -> Result<Output> {
    let (d, m) = (p.quantity("diameter")?, p.quantity("mass")?);
    let temperature = p.quantity("temperature")?;
    let opts = BarrierOptions { resolution: p.count("resolution")?, ..Default::default() };
    let mut t = Table::new(p.header(), &["N", "E_threshold_V_per_m", "V_B_mK", "bracket_low_V_per_m", "bracket_high_V_per_m"]);
    for n in p.count("ions-min")?.max(2)..=p.count("ions-max")? {
        let ring = RingSpec::new(d, m, n)?;
        let th = delocalization_threshold_field(&ring, temperature, &opts)
            .map_err(|e| Error::ScanFailed { ions: n, source: Box::new(e) })?;
        let vb = if th.field > 0.0 { rotational_barrier(&ring, &InPlaneField::along_y(th.field))?.millikelvin } else { 0.0 };
        t.push(vec![n.to_string(), num(th.field), num(vb), num(th.bracket.0), num(th.bracket.1)]);
    }
    let mut out = Output { summary: format!("{} threshold rows at T = {temperature} K", t.rows.len()), ..Default::default() };
    out.csv(stem, &t);
    if p.flag("svg")? {
        out.svg(stem, svg_line_chart("Delocalization threshold", "N", "E (V/m)", &t.column("N"), &t.column("E_threshold_V_per_m")));
    }
    Ok(out)
}

fn cmd_trap(p: &Params, stem: &str) -> Result<Output> {
    let geometry = p.geometry()?;
    let drive = TrapDrive::new(p.quantity("rf-amplitude")?, TAU * p.quantity("rf-freq")?)?;
    let mass = p.quantity("mass")?;
    let min = find_ring_minimum(&geometry, &drive, mass)?;
    let mut t = Table::new(p.header(), &["r_um", "z_um", "psi_J", "psi_over_kB_K"]);
    t.result("r0_um", num(min.radius * 1e6));
    t.result("z0_um", num(min.height * 1e6));
    t.result("f_radial_Hz", num(min.omega_radial / TAU));
    t.result("f_vertical_Hz", num(min.omega_vertical / TAU));
    t.result("residual_field_V_per_m", num(min.residual_field));
    let n = p.count("map-points")?;
    let (z0, z1) = (p.quantity("map-z-min")?, p.quantity("map-z-max")?);
    if !(z0 > 0.0 && z1 >= z0) {
        return Err(Error::Config("map heights must satisfy 0 < map-z-min <= map-z-max".into()));
    }
    for r in linspace(0.0, p.quantity("map-r-max")?, n) {
        for z in linspace(z0, z1, n) {
            let psi = pseudopotential(&Vector3::new(r, 0.0, z), &geometry, &drive, mass)?;
            t.push(vec![num(r * 1e6), num(z * 1e6), num(psi), num(psi / BOLTZMANN)]);
        }
    }
    let mut out = Output {
        summary: format!(
            "r0 = {:.2} um, z0 = {:.2} um, f_r = {:.1} kHz, f_z = {:.1} kHz",
            min.radius * 1e6,
            min.height * 1e6,
            min.omega_radial / TAU / 1e3,
            min.omega_vertical / TAU / 1e3
        ),
        ..Default::default()
    };
    out.csv(stem, &t);
    Ok(out)
}

fn cmd_compensate(p: &Params, stem: &str) -> Result<Output> {
    let geometry = p.geometry()?;
    let stray = Vector3::new(p.quantity("stray-x")?, p.quantity("stray-y")?, p.quantity("stray-z")?);
    let response = compensation_response(&geometry, &QuadratureOptions::default())?;
    let v = solve_compensation(&stray, &response)?;
    let residual = &response * &v + DVector::from_column_slice(stray.as_slice());
    let (_, z0) = rf_null(&geometry)?;
    let mut t = Table::new(p.header(), &["electrode", "voltage_V"]);
    t.result("height_um", num(z0 * 1e6));
    t.result("residual_in_plane_V_per_m", num(residual[0].hypot(residual[1])));
    t.result("residual_z_V_per_m", num(residual[2]));
    for (e, volts) in geometry.compensation_electrodes().iter().zip(v.iter()) {
        t.push(vec![e.name.clone(), num(*volts)]);
    }
    let mut out = Output { summary: format!("residual in-plane field {:.3e} V/m", residual[0].hypot(residual[1])), ..Default::default() };
    out.csv(stem, &t);
    Ok(out)
}

fn cmd_simulate(p: &Params, stem: &str) -> Result<Output> {
    let ring = p.ring()?;
    let field = p.field()?;
    let cfg = p.langevin()?;
    let every = p.count("record-every")?;
    let mut traj = (every > 0).then(|| {
        let mut cols = vec!["t_s".to_string()];
        cols.extend((1..=ring.ions).map(|i| format!("theta_{i}_rad")));
        cols.push("collective_angle_rad".into());
        Table { header: p.header(), columns: cols, rows: Vec::new() }
    });
    let s = simulate_observed(&ring, &field, &cfg, &mut |f| {
        if let Some(tr) = traj.as_mut() {
            if f.step >= 0 && (f.step as usize).is_multiple_of(every) {
                let mut row = vec![num(f.time)];
                row.extend(f.angles.iter().map(|a| num(*a)));
                row.push(num(f.collective));
                tr.rows.push(row);
            }
        }
    })?;
    let mut t = Table::new(
        p.header(),
        &[
            "N", "E_x", "E_y", "T_K", "seed", "dt_s", "steps", "simulated_time_s", "kinetic_temperature_K", "collective_mean_rad",
            "collective_variance_rad2", "winding_rad", "net_winding_rad", "hops", "delocalized", "energy_mean_J",
        ],
    );
    t.push(vec![
        ring.ions.to_string(),
        num(field.ex),
        num(field.ey),
        num(cfg.temperature),
        cfg.seed.to_string(),
        num(s.dt),
        s.steps.to_string(),
        num(s.simulated_time),
        num(s.kinetic_temperature),
        num(s.collective.mean),
        num(s.collective.variance),
        num(s.winding),
        num(s.net_winding),
        s.hops.to_string(),
        s.delocalized.to_string(),
        num(s.energy.mean),
    ]);
    let mut out = Output {
        summary: format!(
            "T_kin = {:.4e} K, winding = {:.3} rad, hops = {}, delocalized = {}",
            s.kinetic_temperature, s.winding, s.hops, s.delocalized
        ),
        ..Default::default()
    };
    out.csv(stem, &t);
    if let Some(tr) = traj {
        out.csv(&format!("{stem}_trajectory"), &tr);
    }
    Ok(out)
}

fn cmd_scan(p: &Params, stem: &str) -> Result<Output> {
    let ring = p.ring()?;
    let temperature = p.quantity("temperature")?;
    let fields = linspace(p.quantity("e-min")?, p.quantity("e-max")?, p.count("points")?);
    let opts = ScanOptions { seeds: p.count("seeds")?, base: LangevinConfig { stop_when_delocalized: true, ..p.langevin()? } };
    let scan = delocalization_scan(&ring, temperature, &fields, &opts)?;
    let mut t = Table::new(p.header(), &["field_V_per_m", "seeds", "delocalized", "fraction"]);
    t.result("threshold_V_per_m", num(scan.threshold));
    t.result("bracketed", scan.bracketed);
    for pt in &scan.points {
        let k = pt.delocalized.iter().filter(|d| **d).count();
        t.push(vec![num(pt.field), pt.delocalized.len().to_string(), k.to_string(), num(pt.fraction)]);
    }
    let mut out = Output { summary: format!("threshold = {:.4} V/m (bracketed: {})", scan.threshold, scan.bracketed), ..Default::default() };
    out.csv(stem, &t);
    if p.flag("svg")? {
        out.svg(stem, svg_line_chart("Delocalized fraction", "E (V/m)", "fraction", &t.column("field_V_per_m"), &t.column("fraction")));
    }
    Ok(out)
}

fn cmd_doppler(p: &Params, stem: &str) -> Result<Output> {
    let (lambda, mass) = (p.quantity("wavelength")?, p.quantity("mass")?);
    let (temperature, fwhm) = match p.optional("fwhm")? {
        Some(_) if p.explicit.contains(&"temperature") => {
            return Err(Error::Config("give either --temperature or --fwhm, not both".into()))
        }
        Some(f) => (doppler_temperature(f, lambda, mass)?, f),
        None => {
            let temp = p.quantity("temperature")?;
            (temp, fwhm_from_temperature(temp, lambda, mass)?)
        }
    };
    let mut t = Table::new(p.header(), &["temperature_K", "fwhm_Hz", "wavelength_m", "mass_kg"]);
    t.push(vec![num(temperature), num(fwhm), num(lambda), num(mass)]);
    let mut out = Output { summary: format!("T = {temperature:.6e} K, FWHM = {fwhm:.6e} Hz"), ..Default::default() };
    out.csv(stem, &t);
    Ok(out)
}

/// Runs a parsed invocation and returns the files to write, without touching the disk.
pub fn execute(matches: &ArgMatches) -> Result<(Output, Option<String>)> {
    let (name, sub_matches) = matches.subcommand().ok_or_else(|| Error::Config("no subcommand".into()))?;
    let sub = SUBS.iter().find(|s| s.name == name).expect("registered subcommand");
    let (p, out_dir) = Params::resolve(sub, sub_matches)?;
    let stem = p.stem()?;
    let out = match sub.name {
        "equilibrium" => cmd_equilibrium(&p, &stem),
        "modes" => cmd_modes(&p, &stem),
        "mode-sweep" => cmd_mode_sweep(&p, &stem),
        "barrier" => cmd_barrier(&p, &stem),
        "threshold" => cmd_threshold(&p, &stem),
        "trap" => cmd_trap(&p, &stem),
        "compensate" => cmd_compensate(&p, &stem),
        "simulate" => cmd_simulate(&p, &stem),
        "scan-delocalization" => cmd_scan(&p, &stem),
        "doppler" => cmd_doppler(&p, &stem),
        other => unreachable!("subcommand {other}"),
    }?;
    Ok((out, out_dir))
}

/// Output directory: the flag or config value, else the environment variable, else `.`.
fn output_dir(configured: Option<String>) -> PathBuf {
    configured
        .or_else(|| std::env::var(OUT_DIR_ENV).ok().filter(|s| !s.is_empty()))
        .map_or_else(|| PathBuf::from("."), PathBuf::from)
}

fn write_files(dir: &Path, files: &[(String, String)]) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    files
        .iter()
        .map(|(name, body)| {
            let path = dir.join(name);
            std::fs::write(&path, body)?;
            Ok(path)
        })
        .collect()
}

/// Parses `args`, runs the subcommand and writes its files. Returns the written paths.
pub fn run<I, T>(args: I) -> Result<(Vec<PathBuf>, String)>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let matches = command().try_get_matches_from(args).map_err(|e| Error::Config(e.to_string()))?;
    let (out, dir) = execute(&matches)?;
    let paths = write_files(&output_dir(dir), &out.files)?;
    Ok((paths, out.summary))
}

/// Entry point for the binary: returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let matches = match command().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = execute(&matches).and_then(|(out, dir)| {
        let paths = write_files(&output_dir(dir), &out.files)?;
        Ok((paths, out.summary))
    });
    match result {
        Ok((paths, summary)) => {
            // a closed stdout (e.g. piped into `head`) is not an error
            let mut stdout = std::io::stdout().lock();
            let _ = writeln!(stdout, "{summary}");
            for p in paths {
                let _ = writeln!(stdout, "wrote {}", p.display());
            }
            0
        }
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            e.exit_code()
        }
    }
}
