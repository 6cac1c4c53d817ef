//! Multi-level convergence studies.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;

use super::{analytic_eigenvalues_disk, eigenvalue_error, lifted_errors, AnalyticEigenspace};
use crate::assembly::{assemble_forms, FeSpace, MassPlacement};
use crate::eigsolve::{solve_generalized, EigenOptions, InnerSolver};
use crate::geometry::SmoothDomain;
use crate::mesh::{curve_mesh, generate_star_mesh};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DomainSpec {
    Disk,
    Flower { alpha: f64, beta: f64 },
}

impl DomainSpec {
    pub fn build(&self) -> Result<SmoothDomain> {
        match *self {
            DomainSpec::Disk => Ok(SmoothDomain::unit_disk()),
            DomainSpec::Flower { alpha, beta } => SmoothDomain::flower(alpha, beta),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            DomainSpec::Disk => "disk",
            DomainSpec::Flower { .. } => "flower",
        }
    }
}

/// Source of the reference eigenvalue.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReferenceSpec {
    /// Closed-form unit-disk spectrum (boundary mass placement only).
    Analytic,
    /// A value supplied by the caller.
    Value(f64),
    /// Computed on `level` with geometric order `order` and degree `degree`.
    Computed { order: usize, degree: usize, level: usize },
}

/// Everything a study needs. [`StudyConfig::default`] is the unit-disk
/// study with five levels starting from 20 boundary edges.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub domain: DomainSpec,
    pub order: usize,
    pub degree: usize,
    pub levels: usize,
    pub base_edges: usize,
    /// Rank (1-based) of the tracked eigenvalue.
    pub tracked: usize,
    pub placement: MassPlacement,
    pub n_eig: usize,
    pub tol: f64,
    pub shift: f64,
    pub max_iter: usize,
    pub inner: InnerSolver,
    pub seed: u64,
    pub reference: ReferenceSpec,
    pub output: Option<PathBuf>,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            domain: DomainSpec::Disk,
            order: 1,
            degree: 1,
            levels: 5,
            base_edges: 20,
            tracked: 6,
            placement: MassPlacement::Boundary,
            n_eig: 10,
            tol: 1e-12,
            shift: -1.0,
            max_iter: 500,
            inner: InnerSolver::SparseCholesky,
            seed: 0,
            reference: ReferenceSpec::Analytic,
            output: None,
        }
    }
}

const REQUIRED_KEYS: [&str; 3] = ["domain", "order", "degree"];
const KNOWN_KEYS: [&str; 20] = [
    "domain",
    "alpha",
    "beta",
    "order",
    "degree",
    "levels",
    "base_edges",
    "tracked",
    "placement",
    "n_eig",
    "tol",
    "shift",
    "max_iter",
    "inner_solver",
    "seed",
    "reference",
    "reference_order",
    "reference_degree",
    "reference_level",
    "output",
];

fn parse_value<T: std::str::FromStr>(key: &str, value: &str, line: usize) -> Result<T> {
    value.parse().map_err(|_| Error::Parse {
        line,
        message: format!("invalid value '{value}' for '{key}'"),
    })
}

impl StudyConfig {
    /// Parse flat `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries: Vec<(String, String, usize)> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("expected 'key = value', got '{line}'"),
                });
            };
            let (k, v) = (k.trim().to_ascii_lowercase(), v.trim().to_string());
            if !KNOWN_KEYS.contains(&k.as_str()) {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("unknown key '{k}'"),
                });
            }
            if entries.iter().any(|(e, _, _)| *e == k) {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("duplicate key '{k}'"),
                });
            }
            entries.push((k, v, i + 1));
        }
        let missing: Vec<&str> = REQUIRED_KEYS
            .iter()
            .copied()
            .filter(|k| !entries.iter().any(|(e, _, _)| e == k))
            .collect();
        if !missing.is_empty() {
            return Err(Error::BadParameter(format!("missing required keys: {}", missing.join(", "))));
        }
        let get = |key: &str| entries.iter().find(|(k, _, _)| k == key).map(|(_, v, l)| (v.as_str(), *l));

        let mut cfg = StudyConfig::default();
        let (domain, line) = get("domain").unwrap();
        let alpha = get("alpha").map(|(v, l)| parse_value::<f64>("alpha", v, l)).transpose()?;
        let beta = get("beta").map(|(v, l)| parse_value::<f64>("beta", v, l)).transpose()?;
        cfg.domain = match domain.to_ascii_lowercase().as_str() {
            "disk" => {
                if alpha.is_some() || beta.is_some() {
                    return Err(Error::BadParameter("alpha and beta only apply to the flower domain".into()));
                }
                DomainSpec::Disk
            }
            "flower" => DomainSpec::Flower {
                alpha: alpha.unwrap_or(0.3),
                beta: beta.unwrap_or(0.4),
            },
            other => {
                return Err(Error::Parse {
                    line,
                    message: format!("domain must be 'disk' or 'flower', got '{other}'"),
                })
            }
        };
        macro_rules! set {
            ($field:ident, $key:literal) => {
                if let Some((v, l)) = get($key) {
                    cfg.$field = parse_value($key, v, l)?;
                }
            };
        }
        set!(order, "order");
        set!(degree, "degree");
        set!(levels, "levels");
        set!(base_edges, "base_edges");
        set!(tracked, "tracked");
        set!(n_eig, "n_eig");
        set!(tol, "tol");
        set!(shift, "shift");
        set!(max_iter, "max_iter");
        set!(seed, "seed");
        if let Some((v, l)) = get("placement") {
            cfg.placement = v.parse().map_err(|e: Error| Error::Parse {
                line: l,
                message: e.to_string(),
            })?;
        }
        if let Some((v, l)) = get("inner_solver") {
            cfg.inner = InnerSolver::parse(v).map_err(|e| Error::Parse {
                line: l,
                message: e.to_string(),
            })?;
        }
        if let Some((v, _)) = get("output") {
            cfg.output = Some(PathBuf::from(v));
        }
        let ref_order = get("reference_order").map(|(v, l)| parse_value::<usize>("reference_order", v, l)).transpose()?;
        let ref_degree = get("reference_degree").map(|(v, l)| parse_value::<usize>("reference_degree", v, l)).transpose()?;
        let ref_level = get("reference_level").map(|(v, l)| parse_value::<usize>("reference_level", v, l)).transpose()?;
        let computed = ReferenceSpec::Computed {
            order: ref_order.unwrap_or(3),
            degree: ref_degree.unwrap_or(4),
            level: ref_level.unwrap_or(cfg.levels + 1),
        };
        cfg.reference = match get("reference") {
            Some((v, l)) => match v.to_ascii_lowercase().as_str() {
                "analytic" => ReferenceSpec::Analytic,
                "computed" => computed,
                _ => ReferenceSpec::Value(parse_value("reference", v, l)?),
            },
            None if cfg.domain == DomainSpec::Disk && cfg.placement == MassPlacement::Boundary => {
                ReferenceSpec::Analytic
            }
            None => computed,
        };
        if !matches!(cfg.reference, ReferenceSpec::Computed { .. })
            && (ref_order.is_some() || ref_degree.is_some() || ref_level.is_some())
        {
            return Err(Error::BadParameter(
                "reference_order, reference_degree and reference_level need reference = computed".into(),
            ));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::BadParameter(m));
        if !(1..=3).contains(&self.order) {
            return bad(format!("order must be 1, 2 or 3, got {}", self.order));
        }
        if !(1..=4).contains(&self.degree) {
            return bad(format!("degree must be between 1 and 4, got {}", self.degree));
        }
        if self.levels == 0 {
            return bad("levels must be at least 1".into());
        }
        if self.base_edges < 8 || !self.base_edges.is_multiple_of(2) {
            return bad(format!("base_edges must be even and at least 8, got {}", self.base_edges));
        }
        if self.tracked == 0 {
            return bad("tracked is a 1-based rank".into());
        }
        if self.n_eig < self.tracked + 1 {
            return bad(format!(
                "n_eig ({}) must exceed the tracked rank ({}) to bracket its cluster",
                self.n_eig, self.tracked
            ));
        }
        if !(self.tol > 0.0) {
            return bad(format!("tol must be positive, got {}", self.tol));
        }
        if !(self.shift < 0.0) {
            return bad(format!("shift must be negative, got {}", self.shift));
        }
        match self.reference {
            ReferenceSpec::Analytic => {
                if self.domain != DomainSpec::Disk || self.placement != MassPlacement::Boundary {
                    return bad("the analytic reference needs the disk with boundary placement".into());
                }
            }
            ReferenceSpec::Value(v) => {
                if !v.is_finite() {
                    return bad("reference value must be finite".into());
                }
            }
            ReferenceSpec::Computed { order, degree, level } => {
                if !(1..=3).contains(&order) || !(1..=4).contains(&degree) || level == 0 {
                    return bad(format!(
                        "invalid computed reference (order {order}, degree {degree}, level {level})"
                    ));
                }
            }
        }
        self.domain.build()?;
        Ok(())
    }

    /// Boundary edges of level `n` (1-based).
    pub fn boundary_edges(&self, level: usize) -> usize {
        self.base_edges << (level - 1)
    }

    /// The effective configuration in the input format.
    pub fn to_config_string(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "domain = {}", self.domain.name());
        if let DomainSpec::Flower { alpha, beta } = self.domain {
            let _ = writeln!(s, "alpha = {alpha}");
            let _ = writeln!(s, "beta = {beta}");
        }
        let _ = writeln!(s, "order = {}", self.order);
        let _ = writeln!(s, "degree = {}", self.degree);
        let _ = writeln!(s, "levels = {}", self.levels);
        let _ = writeln!(s, "base_edges = {}", self.base_edges);
        let _ = writeln!(s, "tracked = {}", self.tracked);
        let _ = writeln!(s, "placement = {}", self.placement);
        let _ = writeln!(s, "n_eig = {}", self.n_eig);
        let _ = writeln!(s, "tol = {:e}", self.tol);
        let _ = writeln!(s, "shift = {}", self.shift);
        let _ = writeln!(s, "max_iter = {}", self.max_iter);
        let _ = writeln!(s, "inner_solver = {}", self.inner.name());
        let _ = writeln!(s, "seed = {}", self.seed);
        match self.reference {
            ReferenceSpec::Analytic => s.push_str("reference = analytic\n"),
            ReferenceSpec::Value(v) => {
                let _ = writeln!(s, "reference = {v:e}");
            }
            ReferenceSpec::Computed { order, degree, level } => {
                let _ = writeln!(
                    s,
                    "reference = computed\nreference_order = {order}\nreference_degree = {degree}\nreference_level = {level}"
                );
            }
        }
        if let Some(o) = &self.output {
            let _ = writeln!(s, "output = {}", o.display());
        }
        s
    }

    fn eigen_options(&self) -> EigenOptions {
        EigenOptions {
            n_eig: self.n_eig,
            shift: self.shift,
            tol: self.tol,
            max_iter: self.max_iter,
            seed: self.seed,
            inner: self.inner,
            krylov_dim: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelResult {
    pub level: usize,
    pub boundary_edges: usize,
    pub h: f64,
    pub ndof: usize,
    /// All computed eigenvalues, ascending.
    pub eigenvalues: Vec<f64>,
    /// Tracked eigenvalue after cluster matching.
    pub lambda: f64,
    /// 1-based rank of `lambda` in `eigenvalues`.
    pub rank: usize,
    /// Whether `lambda` lies within the cluster radius of the reference.
    pub in_cluster: bool,
    pub e_lambda: f64,
    pub e_l2: Option<f64>,
    pub e_h10: Option<f64>,
    pub max_residual: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EocRow {
    /// Consecutive level numbers.
    pub pair: (usize, usize),
    pub order_lambda: f64,
    pub order_l2: f64,
    pub order_h10: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyReport {
    pub config: StudyConfig,
    pub reference: f64,
    pub cluster_radius: f64,
    pub levels: Vec<LevelResult>,
    pub eoc: Vec<EocRow>,
}

impl StudyReport {
    /// EOC between the two finest levels.
    pub fn final_eoc(&self) -> Option<&EocRow> {
        self.eoc.last()
    }

    pub fn levels_csv(&self) -> String {
        let mut s = String::from("level,h,ndof,lambda,e_lambda,e_l2,e_h10\n");
        for l in &self.levels {
            let _ = writeln!(
                s,
                "{},{:.12e},{},{:.15e},{},{},{}",
                l.level,
                l.h,
                l.ndof,
                l.lambda,
                num(l.e_lambda),
                opt(l.e_l2),
                opt(l.e_h10)
            );
        }
        s
    }

    pub fn eoc_csv(&self) -> String {
        let mut s = String::from("pair,order_lambda,order_l2,order_h10\n");
        for r in &self.eoc {
            let _ = writeln!(
                s,
                "{}-{},{},{},{}",
                r.pair.0,
                r.pair.1,
                fixed(r.order_lambda),
                fixed(r.order_l2),
                fixed(r.order_h10)
            );
        }
        s
    }

    /// Whitespace-separated columns `level h e_lambda e_l2 e_h10`.
    pub fn plot_data(&self) -> String {
        let mut s = String::from("# level h e_lambda e_l2 e_h10\n");
        for l in &self.levels {
            let _ = writeln!(s, "{} {:.12e} {} {} {}", l.level, l.h, num(l.e_lambda), opt(l.e_l2), opt(l.e_h10));
        }
        s
    }
}

fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.12e}")
    } else {
        "nan".into()
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "nan".into(), num)
}

fn fixed(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.4}")
    } else {
        "nan".into()
    }
}

/// Human-readable summary in the layout of a convergence table.
pub fn format_table(report: &StudyReport) -> String {
    let c = &report.config;
    let mut s = String::new();
    let _ = writeln!(
        s,
        "domain {}  r = {}  k = {}  placement {}  tracked rank {}  reference {:.12}",
        c.domain.name(),
        c.order,
        c.degree,
        c.placement,
        c.tracked,
        report.reference
    );
    let _ = writeln!(
        s,
        "{:>5} {:>11} {:>8} {:>18} {:>11} {:>6} {:>11} {:>6} {:>11} {:>6}",
        "level", "h", "ndof", "lambda", "e_lambda", "eoc", "e_l2", "eoc", "e_h10", "eoc"
    );
    for (i, l) in report.levels.iter().enumerate() {
        let row = i.checked_sub(1).and_then(|j| report.eoc.get(j));
        let o = |f: fn(&EocRow) -> f64| row.map_or_else(|| "-".into(), |r| fixed(f(r)));
        let _ = writeln!(
            s,
            "{:>5} {:>11.4e} {:>8} {:>18.12} {:>11.4e} {:>6} {:>11} {:>6} {:>11} {:>6}",
            l.level,
            l.h,
            l.ndof,
            l.lambda,
            l.e_lambda,
            o(|r| r.order_lambda),
            l.e_l2.map_or_else(|| "-".into(), |v| format!("{v:.4e}")),
            o(|r| r.order_l2),
            l.e_h10.map_or_else(|| "-".into(), |v| format!("{v:.4e}")),
            o(|r| r.order_h10),
        );
    }
    s
}

/// Write `levels.csv`, `eoc.csv`, `convergence.dat`, `table.txt` and the
/// effective `config.cfg` into `dir`.
pub fn write_report(report: &StudyReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("levels.csv"), report.levels_csv())?;
    std::fs::write(dir.join("eoc.csv"), report.eoc_csv())?;
    std::fs::write(dir.join("convergence.dat"), report.plot_data())?;
    std::fs::write(dir.join("table.txt"), format_table(report))?;
    std::fs::write(dir.join("config.cfg"), report.config.to_config_string())?;
    Ok(())
}

struct Solved {
    space: FeSpace,
    dom: SmoothDomain,
    values: Vec<f64>,
    vectors: Vec<Vec<f64>>,
    max_residual: f64,
    iterations: usize,
}

fn solve_level(cfg: &StudyConfig, order: usize, degree: usize, level: usize) -> Result<Solved> {
    let dom = cfg.domain.build()?;
    let mesh = generate_star_mesh(&dom, cfg.boundary_edges(level))?;
    let curved = curve_mesh(&mesh, &dom, order)?;
    let space = FeSpace::new(Arc::new(curved), degree)?;
    let forms = assemble_forms(&space)?;
    let a = forms.a();
    let m = forms.m(cfg.placement);
    let mut res = solve_generalized(&a, &m, &cfg.eigen_options())?;
    res.normalize_with(&forms.volume_mass);
    Ok(Solved {
        space,
        dom,
        max_residual: res.max_residual(),
        iterations: res.iterations,
        values: res.values,
        vectors: res.vectors,
    })
}

/// Distance from `values[j]` to its nearest distinct neighbour.
fn gap(values: &[f64], j: usize) -> f64 {
    let v = values[j];
    values
        .iter()
        .map(|w| (w - v).abs())
        .filter(|d| *d > 1e-6 * v.abs().max(1.0))
        .fold(f64::INFINITY, f64::min)
}

/// Reference eigenvalue and cluster radius.
fn reference(cfg: &StudyConfig) -> Result<(f64, f64)> {
    let j = cfg.tracked - 1;
    match cfg.reference {
        ReferenceSpec::Analytic => {
            let vals: Vec<f64> = analytic_eigenvalues_disk(cfg.tracked + 3).into_iter().map(|(v, _)| v).collect();
            Ok((vals[j], 0.3 * gap(&vals, j)))
        }
        ReferenceSpec::Value(v) => Ok((v, f64::INFINITY)),
        ReferenceSpec::Computed { order, degree, level } => {
            let s = solve_level(cfg, order, degree, level)?;
            Ok((s.values[j], 0.3 * gap(&s.values, j)))
        }
    }
}

/// Pick the tracked eigenvalue: the rank-`j` value when it lies in the
/// cluster around the reference, else the value nearest to the reference.
fn select(values: &[f64], j: usize, reference: f64, radius: f64) -> (usize, bool) {
    let inside = |v: f64| (v - reference).abs() <= radius;
    if inside(values[j]) {
        return (j, true);
    }
    let nearest = (0..values.len())
        .min_by(|&a, &b| (values[a] - reference).abs().total_cmp(&(values[b] - reference).abs()))
        .unwrap();
    if inside(values[nearest]) {
        (nearest, true)
    } else {
        (j, false)
    }
}

fn run_level(cfg: &StudyConfig, level: usize, reference: f64, radius: f64) -> Result<LevelResult> {
    let s = solve_level(cfg, cfg.order, cfg.degree, level)?;
    let (rank0, in_cluster) = select(&s.values, cfg.tracked - 1, reference, radius);
    let lambda = s.values[rank0];
    let (e_l2, e_h10) = if cfg.reference == ReferenceSpec::Analytic {
        let e = lifted_errors(&s.space, &s.dom, &s.vectors[rank0], &AnalyticEigenspace::disk_rank(cfg.tracked))?;
        (Some(e.l2), Some(e.h10))
    } else {
        (None, None)
    };
    Ok(LevelResult {
        level,
        boundary_edges: cfg.boundary_edges(level),
        h: s.space.mesh().h(),
        ndof: s.space.n_dofs(),
        eigenvalues: s.values.clone(),
        lambda,
        rank: rank0 + 1,
        in_cluster,
        e_lambda: eigenvalue_error(lambda, reference),
        e_l2,
        e_h10,
        max_residual: s.max_residual,
        iterations: s.iterations,
    })
}

fn order_between(a: Option<f64>, b: Option<f64>) -> f64 {
    match (a, b) {
        // the mesh family halves h between levels
        (Some(x), Some(y)) if x > 0.0 && y > 0.0 => (x / y).log2(),
        _ => f64::NAN,
    }
}

fn eoc_rows(levels: &[LevelResult]) -> Vec<EocRow> {
    levels
        .windows(2)
        .filter(|w| w[1].level == w[0].level + 1)
        .map(|w| EocRow {
            pair: (w[0].level, w[1].level),
            order_lambda: order_between(Some(w[0].e_lambda), Some(w[1].e_lambda)),
            order_l2: order_between(w[0].e_l2, w[1].e_l2),
            order_h10: order_between(w[0].e_h10, w[1].e_h10),
        })
        .collect()
}

/// Run every level of the study; levels are independent and run in parallel.
/// If a level fails, the error carries the report of the levels that
/// completed.
pub fn run_study(cfg: &StudyConfig) -> Result<StudyReport> {
    cfg.validate()?;
    let (reference, radius) = reference(cfg)?;
    let results: Vec<Result<LevelResult>> = (1..=cfg.levels)
        .into_par_iter()
        .map(|n| run_level(cfg, n, reference, radius))
        .collect();
    let mut levels = Vec::new();
    let mut failure = None;
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(l) => levels.push(l),
            Err(e) => {
                failure.get_or_insert((i + 1, e));
            }
        }
    }
    let eoc = eoc_rows(&levels);
    let report = StudyReport {
        config: cfg.clone(),
        reference,
        cluster_radius: radius,
        levels,
        eoc,
    };
    match failure {
        None => Ok(report),
        Some((level, source)) => Err(Error::PartialReport {
            level,
            source: Box::new(source),
            report: Box::new(report),
        }),
    }
}
