//! Run configuration: a flat key-value text format with `[section]`
//! headers, `#` comments, and `key = value` lines.
//!
//! Grammar (one entry per line):
//!   file     := line*
//!   line     := blank | comment | section | entry
//!   comment  := '#' .*
//!   section  := '[' name ']'
//!   entry    := key '=' value      (whitespace around tokens ignored)
//!
//! Unknown sections or keys are errors, so typos surface with a line
//! diagnostic. See `configs/reference.cfg` for the bundled example.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::geometry::GeometryOptions;
use crate::grid::{Potential, ProblemSpec};
use crate::nonlinearity::{FFamily, GFamily, NonlinearitySpec};
use crate::solver::SolverOptions;

/// Parsed, validated run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub n_dim: usize,
    pub k_dim: usize,
    pub a: f64,
    pub potential_kind: PotentialKind,
    pub v0: f64,
    pub v1_amp: f64,
    pub v1_sigma: f64,
    pub v2_amp: f64,
    pub potential_csv: Option<PathBuf>,
    pub lambda: f64,
    pub f_family: FFamily,
    pub p: f64,
    pub g_family: GFamily,
    pub q: f64,
    pub rho: f64,

    pub nr: usize,
    pub nz: usize,
    pub rmax: f64,
    pub zhalf: f64,

    pub solver: SolverOptions,
    pub geometry: GeometryOptions,

    pub n_phi: usize,
    pub omega: f64,
    pub t_samples: usize,
    pub lattice_density: usize,
    pub input_snapshot: Option<PathBuf>,

    pub toy_n_plus: usize,
    pub toy_n_minus: usize,
    pub toy_p: f64,
    pub toy_q: f64,
    pub toy_lambda: f64,
    pub toy_directions: usize,
    pub toy_density: usize,
    pub toy_samples: usize,

    pub seed: u64,
    pub threads: usize,
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PotentialKind {
    Constant,
    Separable,
    Table,
}

/// Raw (section, key) -> (value, line number) map.
struct RawConfig {
    entries: BTreeMap<(String, String), (String, usize)>,
    used: std::cell::RefCell<std::collections::BTreeSet<(String, String)>>,
}

impl RawConfig {
    fn get(&self, section: &str, key: &str) -> Option<&str> {
        let k = (section.to_string(), key.to_string());
        let v = self.entries.get(&k).map(|(v, _)| v.as_str());
        if v.is_some() {
            self.used.borrow_mut().insert(k);
        }
        v
    }

    fn parse_or<T: std::str::FromStr>(&self, section: &str, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        match self.get(section, key) {
            None => Ok(default),
            Some(v) => v.parse::<T>().map_err(|e| {
                let line = self.entries[&(section.to_string(), key.to_string())].1;
                Error::Config(format!("line {line}: [{section}] {key}: {e}"))
            }),
        }
    }

    fn unknown_keys(&self) -> Vec<String> {
        let used = self.used.borrow();
        self.entries
            .iter()
            .filter(|(k, _)| !used.contains(*k))
            .map(|((s, k), (_, line))| format!("line {line}: unknown key [{s}] {k}"))
            .collect()
    }
}

fn parse_raw(text: &str) -> Result<RawConfig> {
    let mut entries = BTreeMap::new();
    let mut section = String::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = match raw_line.find('#') {
            Some(pos) => &raw_line[..pos],
            None => raw_line,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| Error::Config(format!("line {lineno}: unterminated section header")))?
                .trim();
            if name.is_empty() {
                return Err(Error::Config(format!("line {lineno}: empty section name")));
            }
            section = name.to_string();
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {lineno}: expected 'key = value'")))?;
        let key = key.trim();
        let value = value.trim();
        if key.is_empty() {
            return Err(Error::Config(format!("line {lineno}: empty key")));
        }
        if section.is_empty() {
            return Err(Error::Config(format!(
                "line {lineno}: entry before any [section] header"
            )));
        }
        let prev = entries.insert(
            (section.clone(), key.to_string()),
            (value.to_string(), lineno),
        );
        if prev.is_some() {
            return Err(Error::Config(format!(
                "line {lineno}: duplicate key [{section}] {key}"
            )));
        }
    }
    Ok(RawConfig {
        entries,
        used: std::cell::RefCell::new(Default::default()),
    })
}

impl RunConfig {
    /// Parses and validates configuration text.
    pub fn parse(text: &str) -> Result<Self> {
        let raw = parse_raw(text)?;
        let potential_kind = match raw.get("problem", "potential").unwrap_or("constant") {
            "constant" => PotentialKind::Constant,
            "separable" => PotentialKind::Separable,
            "table" => PotentialKind::Table,
            other => {
                return Err(Error::Config(format!(
                    "[problem] potential must be constant|separable|table, got '{other}'"
                )))
            }
        };
        let f_family = match raw.get("problem", "f_family").unwrap_or("power") {
            "power" => FFamily::Power,
            "log-arctan" => FFamily::LogArctan,
            other => {
                return Err(Error::Config(format!(
                    "[problem] f_family must be power|log-arctan, got '{other}'"
                )))
            }
        };
        let g_family = match raw.get("problem", "g_family").unwrap_or("power") {
            "power" => GFamily::Power,
            "exp-damped" => GFamily::ExpDamped,
            "arctan-damped" => GFamily::ArctanDamped,
            "zero" => GFamily::Zero,
            other => {
                return Err(Error::Config(format!(
                    "[problem] g_family must be power|exp-damped|arctan-damped|zero, got '{other}'"
                )))
            }
        };
        let defaults_solver = SolverOptions::default();
        let defaults_geo = GeometryOptions::default();
        let cfg = RunConfig {
            n_dim: raw.parse_or("problem", "n", 3usize)?,
            k_dim: raw.parse_or("problem", "k", 2usize)?,
            a: raw.parse_or("problem", "a", 1.0)?,
            potential_kind,
            v0: raw.parse_or("problem", "v0", -9.0)?,
            v1_amp: raw.parse_or("problem", "v1_amp", 0.0)?,
            v1_sigma: raw.parse_or("problem", "v1_sigma", 1.0)?,
            v2_amp: raw.parse_or("problem", "v2_amp", 0.0)?,
            potential_csv: raw.get("problem", "potential_csv").map(PathBuf::from),
            lambda: raw.parse_or("problem", "lambda", 0.0)?,
            f_family,
            p: raw.parse_or("problem", "p", 4.0)?,
            g_family,
            q: raw.parse_or("problem", "q", 3.0)?,
            rho: raw.parse_or("problem", "rho", 1.0)?,
            nr: raw.parse_or("grid", "nr", 96usize)?,
            nz: raw.parse_or("grid", "nz", 96usize)?,
            rmax: raw.parse_or("grid", "rmax", 6.0)?,
            zhalf: raw.parse_or("grid", "zhalf", 4.0)?,
            solver: SolverOptions {
                tol_solve: raw.parse_or("solver", "tol_solve", defaults_solver.tol_solve)?,
                envelope_tol: raw.parse_or("solver", "envelope_tol", defaults_solver.envelope_tol)?,
                max_outer: raw.parse_or("solver", "max_outer", defaults_solver.max_outer)?,
                max_refine: raw.parse_or("solver", "max_refine", defaults_solver.max_refine)?,
                inner_multistarts: raw.parse_or(
                    "solver",
                    "inner_multistarts",
                    defaults_solver.inner_multistarts,
                )?,
                inner_iters: raw.parse_or("solver", "inner_iters", defaults_solver.inner_iters)?,
                inner_grad_tol: raw.parse_or(
                    "solver",
                    "inner_grad_tol",
                    defaults_solver.inner_grad_tol,
                )?,
                minres_tol: raw.parse_or("solver", "minres_tol", defaults_solver.minres_tol)?,
                minres_max_iters: raw.parse_or(
                    "solver",
                    "minres_max_iters",
                    defaults_solver.minres_max_iters,
                )?,
            },
            geometry: GeometryOptions {
                multistarts: raw.parse_or("geometry", "multistarts", defaults_geo.multistarts)?,
                descent_iters: raw.parse_or(
                    "geometry",
                    "descent_iters",
                    defaults_geo.descent_iters,
                )?,
                validation_samples: raw.parse_or(
                    "geometry",
                    "validation_samples",
                    defaults_geo.validation_samples,
                )?,
                tau_ball_samples: raw.parse_or(
                    "geometry",
                    "tau_ball_samples",
                    defaults_geo.tau_ball_samples,
                )?,
                bisection_steps: raw.parse_or(
                    "geometry",
                    "bisection_steps",
                    defaults_geo.bisection_steps,
                )?,
                kappa_samples: raw.parse_or(
                    "geometry",
                    "kappa_samples",
                    defaults_geo.kappa_samples,
                )?,
                grad_tol: raw.parse_or("geometry", "grad_tol", defaults_geo.grad_tol)?,
            },
            n_phi: raw.parse_or("maxwell", "n_phi", 32usize)?,
            omega: raw.parse_or("maxwell", "omega", 3.0)?,
            t_samples: raw.parse_or("maxwell", "t_samples", 32usize)?,
            lattice_density: raw.parse_or("maxwell", "lattice_density", 48usize)?,
            input_snapshot: raw.get("maxwell", "input_snapshot").map(PathBuf::from),
            toy_n_plus: raw.parse_or("toy", "n_plus", 1usize)?,
            toy_n_minus: raw.parse_or("toy", "n_minus", 1usize)?,
            toy_p: raw.parse_or("toy", "p", 4.0)?,
            toy_q: raw.parse_or("toy", "q", 3.0)?,
            toy_lambda: raw.parse_or("toy", "lambda", 0.0)?,
            toy_directions: raw.parse_or("toy", "directions", 8usize)?,
            toy_density: raw.parse_or("toy", "density", 64usize)?,
            toy_samples: raw.parse_or("toy", "samples", 10_000usize)?,
            seed: raw.parse_or("run", "seed", 42u64)?,
            threads: raw.parse_or("run", "threads", 1usize)?,
            out_dir: PathBuf::from(raw.get("run", "out").unwrap_or("out")),
        };
        let unknown = raw.unknown_keys();
        if !unknown.is_empty() {
            return Err(Error::Config(unknown.join("; ")));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<(Self, String)> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let cfg = Self::parse(&text)?;
        Ok((cfg, text))
    }

    fn validate(&self) -> Result<()> {
        if self.nr < 8 || self.nz < 8 {
            return Err(Error::Config(format!(
                "[grid] nr and nz must be >= 8, got {} x {}",
                self.nr, self.nz
            )));
        }
        if !(self.rmax > 0.0 && self.zhalf > 0.0) {
            return Err(Error::Config("[grid] rmax and zhalf must be positive".into()));
        }
        if self.lambda < 0.0 {
            return Err(Error::Config("[problem] lambda must be >= 0".into()));
        }
        if self.potential_kind == PotentialKind::Table && self.potential_csv.is_none() {
            return Err(Error::Config(
                "[problem] potential = table requires potential_csv".into(),
            ));
        }
        if self.n_phi < 4 {
            return Err(Error::Config("[maxwell] n_phi must be >= 4".into()));
        }
        if !(self.omega > 0.0) {
            return Err(Error::Config("[maxwell] omega must be positive".into()));
        }
        Ok(())
    }

    /// Builds the ProblemSpec, loading the potential table when configured.
    pub fn problem_spec(&self) -> Result<ProblemSpec> {
        let potential = match self.potential_kind {
            PotentialKind::Constant => Potential::Constant(self.v0),
            PotentialKind::Separable => Potential::Separable {
                v0: self.v0,
                radial_amp: self.v1_amp,
                radial_sigma: self.v1_sigma,
                axial_amp: self.v2_amp,
            },
            PotentialKind::Table => {
                let path = self.potential_csv.as_ref().expect("validated");
                Potential::Table(crate::formats::load_potential_csv(path)?)
            }
        };
        let nonlinearity =
            NonlinearitySpec::new(self.f_family, self.p, self.g_family, self.q, self.rho)?;
        let spec = ProblemSpec {
            n_dim: self.n_dim,
            k_dim: self.k_dim,
            a: self.a,
            potential,
            lambda: self.lambda,
            nonlinearity,
        };
        spec.validate(self.zhalf)?;
        Ok(spec)
    }
}

/// SHA-256 of the raw configuration text, hex-encoded; embedded in every
/// report for reproducibility.
pub fn config_sha256(text: &str) -> String {
    use sha2::{Digest, Sha256};
    let digest = Sha256::digest(text.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}
