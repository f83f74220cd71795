//! Problem configuration files.
//!
//! ```toml
//! [problem]
//! shape = "disk:1"        # or: mask = "mask.csv"
//! n = 128
//!
//! [metric]
//! kind = "riemannian"     # isotropic | riemannian | l1 | linf
//! weight = 1.0            # number, "id:<name>", or "file:<path>"
//! tensor = [2.0, 0.3, 1.0]  # s11, s12, s22; or { s11 = "file:..", s12 = .., s22 = .. }
//!
//! [boundary]
//! data = "linear-x"       # linear-x | linear-y | const:c | top-edge:amp[,slope] | file:<path>
//!
//! [solver]
//! tol_gap = 1e-3
//!
//! [output]
//! dir = "out"
//! ```
//!
//! Relative paths are resolved against the directory of the config file.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field_io;
use crate::grid::{build_mask, DomainMask, ScalarGrid};
use crate::imaging::Phantom;
use crate::metric::{MetricField, NormKind};
use crate::numerics::Sym2;
use crate::shape::Shape;
use crate::solver::SolverOptions;

pub const MIN_RESOLUTION: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub shape: Option<String>,
    pub mask: Option<String>,
    #[serde(default = "default_n")]
    pub n: usize,
}

fn default_n() -> usize {
    64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WeightSource {
    Value(f64),
    Named(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TensorSource {
    Constant([f64; 3]),
    Files { s11: String, s12: String, s22: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricSection {
    #[serde(default = "default_kind")]
    pub kind: String,
    #[serde(default = "default_weight")]
    pub weight: WeightSource,
    pub tensor: Option<TensorSource>,
}

fn default_kind() -> String {
    "isotropic".into()
}

fn default_weight() -> WeightSource {
    WeightSource::Value(1.0)
}

impl Default for MetricSection {
    fn default() -> Self {
        MetricSection { kind: default_kind(), weight: default_weight(), tensor: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundarySection {
    pub data: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub problem: ProblemSection,
    #[serde(default)]
    pub metric: MetricSection,
    pub boundary: BoundarySection,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

/// Analytic boundary data, evaluated on every cell (only ghosts matter).
#[derive(Debug, Clone, PartialEq)]
pub enum BoundaryData {
    LinearX,
    LinearY,
    Constant(f64),
    /// `amp + slope * x` on cells above the domain, within its x-range; 0 elsewhere.
    TopEdge { amp: f64, slope: f64 },
    File(String),
}

fn numbers(s: &str, what: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| match t.trim().parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(Error::Config(format!("bad number `{t}` in {what}"))),
        })
        .collect()
}

impl FromStr for BoundaryData {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (head, rest) = s.split_once(':').unwrap_or((s, ""));
        match (head.trim(), rest) {
            ("linear-x", "") => Ok(BoundaryData::LinearX),
            ("linear-y", "") => Ok(BoundaryData::LinearY),
            ("const", r) => match numbers(r, "const")?.as_slice() {
                [c] => Ok(BoundaryData::Constant(*c)),
                _ => Err(Error::Config("const takes one value".into())),
            },
            ("top-edge", "") => Ok(BoundaryData::TopEdge { amp: 1.0, slope: 0.0 }),
            ("top-edge", r) => match numbers(r, "top-edge")?.as_slice() {
                [amp] => Ok(BoundaryData::TopEdge { amp: *amp, slope: 0.0 }),
                [amp, slope] => Ok(BoundaryData::TopEdge { amp: *amp, slope: *slope }),
                _ => Err(Error::Config("top-edge takes amp[,slope]".into())),
            },
            ("file", r) if !r.is_empty() => Ok(BoundaryData::File(r.to_string())),
            _ => Err(Error::Config(format!("unknown boundary data `{s}`"))),
        }
    }
}

impl std::fmt::Display for BoundaryData {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BoundaryData::LinearX => write!(f, "linear-x"),
            BoundaryData::LinearY => write!(f, "linear-y"),
            BoundaryData::Constant(c) => write!(f, "const:{c}"),
            BoundaryData::TopEdge { amp, slope } => write!(f, "top-edge:{amp},{slope}"),
            BoundaryData::File(p) => write!(f, "file:{p}"),
        }
    }
}

/// Named analytic weights.
pub fn weight_by_id(id: &str) -> Result<fn(f64, f64) -> f64> {
    Ok(match id {
        "one" => |_, _| 1.0,
        "layered" => |_, y| 1.0 + 0.5 * y,
        "bump" => |x, y| Phantom::bump().eval(x, y),
        "radial" => |x, y| 1.0 + x * x + y * y,
        _ => return Err(Error::Config(format!("unknown weight id `{id}` (one, layered, bump, radial)"))),
    })
}

/// A fully materialized problem.
#[derive(Debug, Clone)]
pub struct Problem {
    pub mask: DomainMask,
    pub f: ScalarGrid,
    pub metric: MetricField,
    pub solver: SolverOptions,
}

impl ProblemSpec {
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self> {
        let mut spec: ProblemSpec = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        spec.base_dir = base_dir.to_path_buf();
        spec.check()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        ProblemSpec::from_toml(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Programmatic spec for a shape, resolution, and boundary data.
    pub fn simple(shape: &Shape, n: usize, data: &BoundaryData) -> Self {
        ProblemSpec {
            problem: ProblemSection { shape: Some(shape.to_string()), mask: None, n },
            metric: MetricSection::default(),
            boundary: BoundarySection { data: data.to_string() },
            solver: SolverOptions::default(),
            output: OutputSection::default(),
            base_dir: PathBuf::from("."),
        }
    }

    fn resolve(&self, p: &str) -> PathBuf {
        let p = Path::new(p);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    fn file_ref<'a>(&self, s: &'a str) -> Option<&'a str> {
        s.strip_prefix("file:")
    }

    /// Static checks; file existence is checked here too.
    pub fn check(&self) -> Result<()> {
        if self.problem.n < MIN_RESOLUTION {
            return Err(Error::Config(format!("resolution must be at least {MIN_RESOLUTION}, got {}", self.problem.n)));
        }
        match (&self.problem.shape, &self.problem.mask) {
            (Some(s), None) => {
                s.parse::<Shape>()?;
            }
            (None, Some(m)) => self.must_exist(m)?,
            _ => return Err(Error::Config("give exactly one of problem.shape and problem.mask".into())),
        }
        NormKind::parse(&self.metric.kind)?;
        if let WeightSource::Named(w) = &self.metric.weight {
            match (w.strip_prefix("id:"), self.file_ref(w)) {
                (Some(id), _) => {
                    weight_by_id(id)?;
                }
                (_, Some(p)) => self.must_exist(p)?,
                _ => return Err(Error::Config(format!("weight `{w}` must be a number, id:<name> or file:<path>"))),
            }
        }
        if let Some(TensorSource::Files { s11, s12, s22 }) = &self.metric.tensor {
            for p in [s11, s12, s22] {
                let p = self.file_ref(p).ok_or_else(|| Error::Config(format!("tensor entry `{p}` must be file:<path>")))?;
                self.must_exist(p)?;
            }
        }
        if let BoundaryData::File(p) = self.boundary.data.parse::<BoundaryData>()? {
            self.must_exist(&p)?;
        }
        if self.solver.threads == 0 {
            return Err(Error::Config("solver.threads must be at least 1".into()));
        }
        Ok(())
    }

    fn must_exist(&self, p: &str) -> Result<()> {
        let path = self.resolve(p);
        if path.is_file() {
            Ok(())
        } else {
            Err(Error::Config(format!("referenced file {} does not exist", path.display())))
        }
    }

    fn read(&self, p: &str, mask: &DomainMask, what: &str) -> Result<ScalarGrid> {
        let field = field_io::read_field(&self.resolve(p))?;
        mask.grid.check(&field.grid, what)?;
        Ok(field)
    }

    pub fn build(&self) -> Result<Problem> {
        self.check()?;
        let mask = match (&self.problem.shape, &self.problem.mask) {
            (Some(s), _) => build_mask(&s.parse()?, self.problem.n)?,
            (_, Some(m)) => field_io::read_mask(&self.resolve(m))?,
            _ => unreachable!("checked"),
        };
        let g = mask.grid;

        let f = match self.boundary.data.parse::<BoundaryData>()? {
            BoundaryData::LinearX => ScalarGrid::from_fn(g, |x, _| x),
            BoundaryData::LinearY => ScalarGrid::from_fn(g, |_, y| y),
            BoundaryData::Constant(c) => ScalarGrid::constant(g, c),
            BoundaryData::TopEdge { amp, slope } => {
                let [x0, _, x1, y1] = interior_bbox(&mask);
                ScalarGrid::from_fn(g, |x, y| if y > y1 && x > x0 && x < x1 { amp + slope * x } else { 0.0 })
            }
            BoundaryData::File(p) => self.read(&p, &mask, "boundary data")?,
        };

        let weight = match &self.metric.weight {
            WeightSource::Value(a) => ScalarGrid::constant(g, *a),
            WeightSource::Named(w) => match w.strip_prefix("id:") {
                Some(id) => ScalarGrid::from_fn(g, weight_by_id(id)?),
                None => self.read(self.file_ref(w).expect("checked"), &mask, "weight")?,
            },
        };
        let kind = NormKind::parse(&self.metric.kind)?;
        let tensor = match (&self.metric.tensor, kind) {
            (_, k) if k != NormKind::Riemannian => None,
            (None, _) => Some(vec![Sym2::IDENTITY; g.len()]),
            (Some(TensorSource::Constant([a, b, c])), _) => Some(vec![Sym2::new(*a, *b, *c); g.len()]),
            (Some(TensorSource::Files { s11, s12, s22 }), _) => {
                let r = |p: &String, w| self.read(self.file_ref(p).expect("checked"), &mask, w);
                let (a, b, c) = (r(s11, "s11")?, r(s12, "s12")?, r(s22, "s22")?);
                Some((0..g.len()).map(|k| Sym2::new(a.values[k], b.values[k], c.values[k])).collect())
            }
        };
        let metric = MetricField::new(kind, weight, tensor)?;
        let report = metric.validate(Some(&mask));
        if !report.valid {
            let v = &report.violations[0];
            return Err(Error::InvalidMetric(format!(
                "{} violation(s); first at cell {}: {} = {}",
                report.violations.len(),
                v.cell,
                v.what,
                v.value
            )));
        }
        Ok(Problem { mask, f, metric, solver: self.solver.clone() })
    }
}

/// `[xmin, ymin, xmax, ymax]` of the interior cells' closure.
pub fn interior_bbox(mask: &DomainMask) -> [f64; 4] {
    let h = mask.grid.h;
    let mut b = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
    for &c in &mask.interior_cells {
        let [x, y] = mask.grid.center(c);
        b = [b[0].min(x - 0.5 * h), b[1].min(y - 0.5 * h), b[2].max(x + 0.5 * h), b[3].max(y + 0.5 * h)];
    }
    b
}
