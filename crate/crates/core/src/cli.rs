//! Batch runner behind the `lckit` binary: suite configuration, check
//! execution over seeded samples, JSON reports and report comparison.
//!
//! Residuals are serialized as decimal strings with 17 significant digits so
//! a report round-trips every `f64` bit for bit.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fields::{FieldExpr, Point};
use crate::gallery;
use crate::lck::{self, HermitianStructure, LckResiduals};
use crate::reduce::{self, QuotientChartData};
use crate::weyl;

pub const SCHEMA_VERSION: u32 = 1;
pub const JOBS_ENV: &str = "LCKIT_JOBS";
pub const DEFAULT_SAMPLES: usize = 200;
pub const DEFAULT_SEED: u64 = 42;

/// Process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Pass = 0,
    CheckFailure = 1,
    ConfigError = 2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Lck(usize),
    LeeParallel,
    WeylMetric,
    WeylJ,
    DensityCurvature,
    SectionZeroSet,
    PiStar,
}

struct CheckDef {
    name: &'static str,
    kind: Kind,
    describe: &'static str,
}

const CHECKS: &[CheckDef] = &[
    CheckDef { name: "fundamental_compat", kind: Kind::Lck(0), describe: "J orthogonal and J² = −1" },
    CheckDef { name: "lee_residual", kind: Kind::Lck(1), describe: "(dΩ)₀, the part of dΩ not of the form ω∧Ω" },
    CheckDef { name: "dOmega_minus_omega_wedge_Omega", kind: Kind::Lck(2), describe: "dΩ − ω∧Ω, relative" },
    CheckDef { name: "d_omega", kind: Kind::Lck(3), describe: "dω of the extracted Lee form, relative" },
    CheckDef { name: "nijenhuis", kind: Kind::Lck(4), describe: "Nijenhuis tensor of J, relative" },
    CheckDef { name: "lee_parallel", kind: Kind::LeeParallel, describe: "Levi-Civita derivative of the Lee form" },
    CheckDef { name: "weyl_metric", kind: Kind::WeylMetric, describe: "∇g − ω⊗g for the Weyl connection" },
    CheckDef { name: "weyl_j", kind: Kind::WeylJ, describe: "∇J for the Weyl connection" },
    CheckDef { name: "density_curvature", kind: Kind::DensityCurvature, describe: "curvature of the weight-2 density line" },
    CheckDef { name: "section_zero_set", kind: Kind::SectionZeroSet, describe: "|μ∘s| along the quotient section" },
    CheckDef { name: "pi_star_compat", kind: Kind::PiStar, describe: "spread of π*ḡ against g on horizontal lifts" },
];

fn check_def(name: &str) -> Option<&'static CheckDef> {
    CHECKS.iter().find(|c| c.name == name)
}

pub fn check_names() -> Vec<&'static str> {
    CHECKS.iter().map(|c| c.name).collect()
}

/// A named suite: default structures and checks with default tolerances.
pub struct Suite {
    pub name: &'static str,
    pub anchor: &'static str,
    pub structures: &'static [&'static str],
    pub checks: &'static [(&'static str, f64)],
}

const LCK_CORE: &[(&str, f64)] = &[
    ("fundamental_compat", 1e-8),
    ("lee_residual", 1e-8),
    ("dOmega_minus_omega_wedge_Omega", 1e-8),
    ("d_omega", 1e-8),
    ("nijenhuis", 1e-8),
];

pub const SUITES: &[Suite] = &[
    Suite { name: "lck-core", anchor: "the two LCK conditions and integrability", structures: &["boothby:n=2"], checks: LCK_CORE },
    Suite {
        name: "vaisman",
        anchor: "parallel Lee form",
        structures: &["boothby:n=2", "vaisman:sphere:n=2:A=1,1"],
        checks: &[
            ("fundamental_compat", 1e-8),
            ("lee_residual", 1e-8),
            ("dOmega_minus_omega_wedge_Omega", 1e-8),
            ("d_omega", 1e-8),
            ("nijenhuis", 1e-8),
            ("lee_parallel", 1e-8),
        ],
    },
    Suite {
        name: "weyl",
        anchor: "canonical Weyl connection of an LCK structure",
        structures: &["boothby:n=2"],
        checks: &[("weyl_metric", 1e-9), ("weyl_j", 1e-8), ("density_curvature", 1e-8)],
    },
    Suite {
        name: "reduction-hopf",
        anchor: "weighted Hopf reductions, Λ = (−1, 1, …, 1)",
        structures: &["reduced:hopf:n=3"],
        checks: &[
            ("section_zero_set", 1e-10),
            ("fundamental_compat", 1e-7),
            ("lee_residual", 1e-7),
            ("dOmega_minus_omega_wedge_Omega", 1e-7),
            ("d_omega", 1e-7),
            ("nijenhuis", 1e-7),
            ("lee_parallel", 1e-7),
            ("pi_star_compat", 1e-8),
        ],
    },
];

pub fn suite(name: &str) -> Option<&'static Suite> {
    SUITES.iter().find(|s| s.name == name)
}

/// A structure to check, with its quotient data when it comes from a reduction.
pub struct Target {
    pub id: String,
    pub structure: HermitianStructure,
    pub quotient: Option<QuotientChartData>,
}

fn parse_n(id: &str) -> Result<usize> {
    id.split(':')
        .find_map(|p| p.strip_prefix("n="))
        .ok_or_else(|| Error::Config(format!("`{id}` is missing n=")))?
        .parse()
        .map_err(|_| Error::Config(format!("`{id}`: n must be an integer")))
}

/// Resolves gallery identifiers plus `reduced:hopf:n=N`, `reduced:hopf-holomorphic:n=N`
/// and `reduced:witness`.
pub fn resolve(id: &str) -> Result<Target> {
    let quotient = if let Some(rest) = id.strip_prefix("reduced:") {
        let q = match rest.split(':').next() {
            Some("hopf") => reduce::boothby_hopf_quotient(parse_n(id)?)?,
            Some("hopf-holomorphic") => reduce::boothby_hopf_quotient_holomorphic(parse_n(id)?)?,
            Some("witness") => reduce::witness_quotient()?,
            _ => return Err(Error::Config(format!("unknown structure `{id}`"))),
        };
        Some(q)
    } else {
        None
    };
    let structure = match &quotient {
        Some(q) => reduce::reduced_structure(q)?,
        None => gallery::structure(id)?,
    };
    Ok(Target { id: id.to_string(), structure, quotient })
}

fn valid_ids() -> String {
    let mut ids: Vec<&str> = gallery::catalogue().iter().map(|(id, _)| *id).filter(|id| !id.starts_with("action:")).collect();
    ids.extend(["reduced:hopf:n=N", "reduced:hopf-holomorphic:n=N", "reduced:witness"]);
    ids.join(", ")
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteConfig {
    pub structures: Vec<String>,
    pub suite: String,
    pub checks: Vec<String>,
    pub samples: usize,
    pub seed: u64,
    pub tolerances: BTreeMap<String, f64>,
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
}

/// Raw settings from a config file or the command line; later sources override earlier ones.
#[derive(Debug, Clone, Default)]
pub struct Settings {
    pub structures: Vec<String>,
    pub suite: Option<String>,
    pub checks: Vec<String>,
    pub samples: Option<String>,
    pub seed: Option<String>,
    pub tolerances: BTreeMap<String, String>,
    pub out: Option<String>,
    pub jobs: Option<String>,
}

impl Settings {
    /// Parses `key = value` lines; `#` starts a comment. Lists are `;`-separated.
    pub fn parse_file(text: &str) -> Result<Settings> {
        let mut s = Settings::default();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", no + 1)))?;
            let (k, v) = (k.trim(), v.trim().to_string());
            let list = || v.split(';').map(|x| x.trim().to_string()).filter(|x| !x.is_empty()).collect();
            match k {
                "structure" | "structures" => s.structures = list(),
                "check" | "checks" => s.checks = list(),
                "suite" => s.suite = Some(v),
                "samples" => s.samples = Some(v),
                "seed" => s.seed = Some(v),
                "out" => s.out = Some(v),
                "jobs" => s.jobs = Some(v),
                _ => match k.strip_prefix("tol.") {
                    Some(c) => {
                        s.tolerances.insert(c.to_string(), v);
                    }
                    None => return Err(Error::Config(format!("line {}: unknown key `{k}`", no + 1))),
                },
            }
        }
        Ok(s)
    }

    pub fn overlay(mut self, o: Settings) -> Settings {
        if !o.structures.is_empty() {
            self.structures = o.structures;
        }
        if !o.checks.is_empty() {
            self.checks = o.checks;
        }
        self.suite = o.suite.or(self.suite);
        self.samples = o.samples.or(self.samples);
        self.seed = o.seed.or(self.seed);
        self.out = o.out.or(self.out);
        self.jobs = o.jobs.or(self.jobs);
        self.tolerances.extend(o.tolerances);
        self
    }

    /// Validates everything except structure ids, which are resolved when the suite runs.
    pub fn into_config(self, env_jobs: Option<String>) -> Result<SuiteConfig> {
        let suite_name = self.suite.unwrap_or_else(|| "lck-core".to_string());
        let su = suite(&suite_name).ok_or_else(|| {
            let names: Vec<&str> = SUITES.iter().map(|s| s.name).collect();
            Error::Config(format!("unknown suite `{suite_name}`; valid suites: {}", names.join(", ")))
        })?;
        let unknown = |c: &str| {
            Error::Config(format!("unknown check `{c}`; valid checks: {}", check_names().join(", ")))
        };
        for c in self.checks.iter().chain(self.tolerances.keys()) {
            check_def(c).ok_or_else(|| unknown(c))?;
        }
        let checks =
            if self.checks.is_empty() { su.checks.iter().map(|(c, _)| c.to_string()).collect() } else { self.checks };
        let mut tolerances = BTreeMap::new();
        for c in &checks {
            let default = su.checks.iter().find(|(n, _)| n == c).map(|(_, t)| *t).unwrap_or(1e-8);
            tolerances.insert(c.clone(), default);
        }
        for (c, v) in self.tolerances {
            let t: f64 = v.parse().map_err(|_| Error::Config(format!("tol.{c}: `{v}` is not a number")))?;
            if !(t >= 0.0) {
                return Err(Error::Config(format!("tol.{c} must be non-negative")));
            }
            tolerances.insert(c, t);
        }
        let samples = match self.samples {
            Some(v) => v.parse().ok().filter(|&n: &usize| n > 0).ok_or_else(|| {
                Error::Config(format!("samples must be a positive integer, got `{v}`"))
            })?,
            None => DEFAULT_SAMPLES,
        };
        let seed = match self.seed {
            Some(v) => v.parse().map_err(|_| Error::Config(format!("seed must be a 64-bit integer, got `{v}`")))?,
            None => DEFAULT_SEED,
        };
        let jobs = match self.jobs.or(env_jobs) {
            Some(v) => Some(v.parse().ok().filter(|&n: &usize| n > 0).ok_or_else(|| {
                Error::Config(format!("jobs must be a positive integer, got `{v}`"))
            })?),
            None => None,
        };
        let structures = if self.structures.is_empty() {
            su.structures.iter().map(|s| s.to_string()).collect()
        } else {
            self.structures
        };
        Ok(SuiteConfig { structures, suite: suite_name, checks, samples, seed, tolerances, out: self.out.map(PathBuf::from), jobs })
    }
}

/// `f64` with 17 significant digits.
pub fn fmt17(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

fn parse17(s: &str) -> Result<f64> {
    s.parse().map_err(|_| Error::Config(format!("`{s}` is not a decimal number")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub structure: String,
    pub samples: usize,
    pub max_residual: String,
    pub tolerance: String,
    pub pass: bool,
    pub wall_time_s: f64,
}

impl CheckResult {
    pub fn residual(&self) -> f64 {
        parse17(&self.max_residual).unwrap_or(f64::NAN)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub version: String,
    pub conventions_hash: String,
    pub suite: String,
    pub seed: u64,
    pub samples: usize,
    pub pass: bool,
    pub checks: Vec<CheckResult>,
}

impl Report {
    pub fn exit(&self) -> Exit {
        if self.pass {
            Exit::Pass
        } else {
            Exit::CheckFailure
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Report> {
        let r: Report = serde_json::from_str(text).map_err(|e| Error::Config(format!("unreadable report: {e}")))?;
        if r.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!("report schema {} is not {SCHEMA_VERSION}", r.schema_version)));
        }
        Ok(r)
    }
}

/// Hash of the sign and normalization conventions, computed from golden values
/// so it changes whenever one of them does.
pub fn conventions_hash() -> String {
    let mut text = String::from("coords=(x1,y1,..);J d/dx=d/dy;Omega(X,Y)=g(JX,Y);d^w=d-w^;\n");
    let mut golden = |name: &str, v: Result<f64>| {
        let _ = writeln!(text, "{name}={}", v.map(fmt17).unwrap_or_else(|e| e.to_string()));
    };
    let flat = gallery::standard_kahler(2);
    golden("Omega_x1y1", flat.as_ref().map_err(Clone::clone).and_then(|h| Ok(lck::fundamental_form(h, &[0.0; 4], 0)?.component(&[0, 1]).value())));
    golden(
        "bracket_x1_y1",
        flat.as_ref().map_err(Clone::clone).and_then(|h| {
            let f1 = FieldExpr::scalar(h.chart.clone(), |x| Ok(x[0].clone()));
            let f2 = FieldExpr::scalar(h.chart.clone(), |x| Ok(x[1].clone()));
            Ok(lck::twisted_poisson(h, &f1, &f2, &[0.0; 4], 0)?.value())
        }),
    );
    golden(
        "boothby_lee_x1",
        gallery::boothby_vaisman(2).and_then(|h| Ok(lck::lee_form(&h, &[1.0, 0.0, 0.0, 0.0], 1)?.omega.component(&[0]).value())),
    );
    golden("mu_weighted_1_1", (gallery::kahler_weighted_momentum(&[1.0, 1.0]))(&crate::jets::seed(&[1.0, 0.0, 0.0, 0.0], 0)).map(|j| j.value()));
    golden(
        "witness_density_curvature_x2x1",
        weyl::density_curvature(&gallery::non_lck_witness(), &[0.3, 0.2, -0.1, 0.4]).map(|f| f.component(&[0, 2]).value()),
    );
    hex::encode(Sha256::digest(text.as_bytes()))
}

fn sample_max(points: &[Point], f: impl Fn(&Point) -> Result<f64> + Sync + Send) -> Result<f64> {
    let per: Vec<f64> = points.par_iter().map(f).collect::<Result<_>>()?;
    // NaN must not be swallowed by the max
    Ok(per.into_iter().fold(0.0, |a, b| if b.is_nan() || a.is_nan() { f64::NAN } else { a.max(b) }))
}

fn needs_quotient<'a>(t: &'a Target, check: &str) -> Result<&'a QuotientChartData> {
    t.quotient
        .as_ref()
        .ok_or_else(|| Error::Config(format!("check `{check}` needs a reduced structure, `{}` is not one", t.id)))
}

fn run_check(t: &Target, def: &CheckDef, points: &[Point], lck_cache: &mut Option<Vec<LckResiduals>>) -> Result<f64> {
    let h = &t.structure;
    Ok(match def.kind {
        Kind::Lck(i) => {
            if lck_cache.is_none() {
                let per: Vec<LckResiduals> = points.par_iter().map(|p| lck::lck_residuals_at(h, p)).collect::<Result<_>>()?;
                *lck_cache = Some(per);
            }
            let per = lck_cache.as_ref().expect("filled above");
            per.iter().map(|r| r.named()[i].1).fold(0.0, f64::max)
        }
        Kind::LeeParallel => reduce::lee_parallelism(h, points)?,
        Kind::WeylMetric => sample_max(points, |p| weyl::nabla_metric_residual(h, p))?,
        Kind::WeylJ => sample_max(points, |p| weyl::check_nabla_j(h, p))?,
        Kind::DensityCurvature => sample_max(points, |p| Ok(weyl::density_curvature(h, p)?.sup()))?,
        Kind::SectionZeroSet => needs_quotient(t, def.name)?.section_residual(points)?,
        Kind::PiStar => reduce::compatibility_pi_star(needs_quotient(t, def.name)?, h, points)?.spread,
    })
}

/// Runs every configured check on every configured structure.
pub fn run_suite(cfg: &SuiteConfig) -> Result<Report> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    pool.install(|| {
        let mut results = Vec::new();
        for id in &cfg.structures {
            let target = resolve(id).map_err(|e| match e {
                Error::Config(m) => Error::Config(format!("{m}; valid ids: {}", valid_ids())),
                other => other,
            })?;
            let points = crate::sample_points(&target.structure.chart, cfg.samples, cfg.seed);
            let mut cache = None;
            for name in &cfg.checks {
                let def = check_def(name).ok_or_else(|| Error::Config(format!("unknown check `{name}`")))?;
                let tol = cfg.tolerances[name];
                let start = Instant::now();
                let r = run_check(&target, def, &points, &mut cache)?;
                results.push(CheckResult {
                    name: name.clone(),
                    structure: id.clone(),
                    samples: points.len(),
                    max_residual: fmt17(r),
                    tolerance: fmt17(tol),
                    pass: r <= tol,
                    wall_time_s: start.elapsed().as_secs_f64(),
                });
            }
        }
        Ok(Report {
            schema_version: SCHEMA_VERSION,
            version: env!("CARGO_PKG_VERSION").to_string(),
            conventions_hash: conventions_hash(),
            suite: cfg.suite.clone(),
            seed: cfg.seed,
            samples: cfg.samples,
            pass: results.iter().all(|c| c.pass),
            checks: results,
        })
    })
}

/// Human-readable summary, one line per check.
pub fn summary(r: &Report) -> String {
    let mut s = String::new();
    for c in &r.checks {
        let _ = writeln!(
            s,
            "{} {:<32} {:<28} max {} tol {}",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.structure,
            c.max_residual,
            c.tolerance
        );
    }
    let _ = write!(s, "{}: {} checks, {}", r.suite, r.checks.len(), if r.pass { "all pass" } else { "failures" });
    s
}

#[derive(Debug, Clone, Serialize)]
pub struct Listing {
    pub structures: Vec<(String, String)>,
    pub suites: Vec<(String, String)>,
    pub checks: Vec<(String, String)>,
}

/// Registered structures, actions, suites and checks with short descriptions.
pub fn list_gallery() -> Listing {
    let mut structures: Vec<(String, String)> = vec![
        ("boothby:n=2".into(), "parallel Lee form; standard Vaisman gauge of the Hopf surface".into()),
        ("boothby:n=3".into(), "parallel Lee form; the ambient of the Hopf reduction".into()),
        ("cone:sphere:n=2:A=1,1".into(), "the metric cone over a Sasaki manifold is Kähler".into()),
        ("vaisman:sphere:n=2:A=1,1".into(), "Vaisman gauge of the cone, Lee form −dt".into()),
        ("action:weighted:-1,1,1".into(), "weighted circle action with one negative weight".into()),
        ("reduced:hopf:n=3".into(), "Λ = (−1, 1, 1) reduction of boothby:n=3, chart s(w) = (|w|, w)/√2".into()),
        ("reduced:hopf-holomorphic:n=3".into(), "same reduction over holomorphic quotient coordinates".into()),
        ("reduced:witness".into(), "witness × ℂ² reduced by Λ = (0, 0, −1, 1); not LCK".into()),
    ];
    structures.extend(gallery::catalogue().into_iter().map(|(a, b)| (a.to_string(), b.to_string())));
    Listing {
        structures,
        suites: SUITES.iter().map(|s| (s.name.to_string(), s.anchor.to_string())).collect(),
        checks: CHECKS.iter().map(|c| (c.name.to_string(), c.describe.to_string())).collect(),
    }
}

impl Listing {
    pub fn text(&self) -> String {
        let mut s = String::new();
        for (title, rows) in [("structures", &self.structures), ("suites", &self.suites), ("checks", &self.checks)] {
            let _ = writeln!(s, "{title}:");
            for (id, about) in rows {
                let _ = writeln!(s, "  {id:<34} {about}");
            }
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Difference {
    pub structure: String,
    pub check: String,
    pub detail: String,
}

/// Differences between two reports, ignoring wall times. Residuals differing by
/// at most `rel_tol` relative are treated as equal.
pub fn report_diff(a: &Report, b: &Report, rel_tol: f64) -> Vec<Difference> {
    let mut out = Vec::new();
    let key = |c: &CheckResult| (c.structure.clone(), c.name.clone());
    let left: BTreeMap<_, _> = a.checks.iter().map(|c| (key(c), c)).collect();
    let right: BTreeMap<_, _> = b.checks.iter().map(|c| (key(c), c)).collect();
    let diff = |k: &(String, String), detail: String| Difference { structure: k.0.clone(), check: k.1.clone(), detail };
    if a.conventions_hash != b.conventions_hash {
        out.push(diff(&(String::new(), String::new()), "conventions hash differs".into()));
    }
    for (k, ca) in &left {
        let Some(cb) = right.get(k) else {
            out.push(diff(k, "only in the first report".into()));
            continue;
        };
        if ca.pass != cb.pass {
            out.push(diff(k, format!("pass {} -> {}", ca.pass, cb.pass)));
        }
        let (ra, rb) = (ca.residual(), cb.residual());
        let same = ca.max_residual == cb.max_residual || (ra - rb).abs() <= rel_tol * ra.abs().max(rb.abs());
        if !same {
            out.push(diff(k, format!("max_residual {} -> {}", ca.max_residual, cb.max_residual)));
        }
        if ca.tolerance != cb.tolerance || ca.samples != cb.samples {
            out.push(diff(k, "tolerance or sample count differs".into()));
        }
    }
    for k in right.keys().filter(|k| !left.contains_key(*k)) {
        out.push(diff(k, "only in the second report".into()));
    }
    out
}
