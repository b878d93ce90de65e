use std::path::Path;

use num_rational::Rational64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::{parse_rational, Cell, ExactPoint, WindowSpec};
use crate::stable::{walk_dim, DEFAULT_SPECTRAL_CAP};

/// How the random open sets `D` inside `B` are drawn.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DomainFamily {
    /// Each `level`-cell of `B` is kept with probability `density`; `D` is the
    /// interior of the union.
    RandomCellUnion { level: u32, density: f64 },
    /// Each interior vertex of `B` is kept with probability `p`.
    RandomVertexSubset { p: f64 },
    /// `B` without one closed cell, addressed by a 0-cell of `B` and a path
    /// of child digits `1..3`.
    Slit { base: String, path: String },
}

/// A target set: the vertices of a cell that lie outside the closed `B`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSpec {
    pub level: i32,
    /// Lower-left corner as `a,b` for the point `(a, b sqrt 3)`.
    pub lower_left: String,
}

impl TargetSpec {
    pub fn cell(&self) -> Result<Cell> {
        Ok(Cell::new(self.level, self.lower_left.parse()?))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LemmaConfig {
    /// Graph level of the coarser scale; the finer one is `level + 1`.
    pub level: u32,
    /// Ball scale `m` at the coarser level; the finer one is `m + 1`.
    pub m: i32,
    pub instances: usize,
    /// Shapes of `D`, drawn relative to `2^-m B`.
    pub domain: DomainFamily,
    pub p1_sq: String,
    pub p3_sq: String,
    pub p5_sq: String,
    pub p3_sweep: Vec<String>,
    /// Largest tolerated relative change of a constant across one dilation.
    pub tolerance: f64,
}

impl Default for LemmaConfig {
    fn default() -> Self {
        Self {
            level: 4,
            m: 1,
            instances: 50,
            domain: DomainFamily::RandomCellUnion {
                level: 2,
                density: 0.6,
            },
            p1_sq: "1/4".into(),
            p3_sq: "9/16".into(),
            p5_sq: "3/4".into(),
            p3_sweep: vec!["1/16".into(), "1/4".into(), "9/16".into()],
            tolerance: 0.25,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScalingConfig {
    /// Graph level for the base-walk cell-exit fit.
    pub walk_level: u32,
    pub walk_cells: Vec<u32>,
    pub walk_paths: u64,
    /// Graph level and window for the exit-time fit.
    pub exit_level: u32,
    pub exit_window: String,
    /// Ball radii `2^-j`.
    pub exit_radii: Vec<u32>,
    pub tolerance: f64,
}

impl Default for ScalingConfig {
    fn default() -> Self {
        Self {
            walk_level: 6,
            walk_cells: vec![1, 2, 3],
            walk_paths: 100_000,
            exit_level: 5,
            exit_window: "pair".into(),
            exit_radii: vec![1, 2, 3],
            tolerance: 0.1,
        }
    }
}

/// Every parameter of the boundary Harnack, lemma and scaling batteries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub alphas: Vec<f64>,
    pub level: u32,
    /// Second level for the stability comparison; 0 disables it.
    pub compare_level: u32,
    /// Ambient window, e.g. `pair:1` for `2 (F+ u F-)`.
    pub window: String,
    /// The set `B`, a union of two adjacent 0-cells.
    pub b: String,
    /// Common vertex of the two cells of `B`.
    pub x0: String,
    /// Squared radius of `B'` around `x0`.
    pub b_prime_radius_sq: String,
    pub targets: Vec<TargetSpec>,
    pub domain: DomainFamily,
    pub instances: usize,
    pub seed: u64,
    pub spectral_cap: usize,
    /// Largest tolerated fraction of excluded instances.
    pub max_excluded: f64,
    /// Largest tolerated relative change of max R between the two levels.
    pub stability: f64,
    /// Level for the window-truncation diagnostic; 0 disables it.
    pub truncation_level: u32,
    /// Admits `1 <= alpha < d_w`; results are marked as outside the
    /// hypothesis and never count as passing.
    pub exploratory: bool,
    pub out_dir: String,
    pub lemmas: LemmaConfig,
    pub scaling: ScalingConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            alphas: vec![0.3, 0.5, 0.7, 0.9],
            level: 7,
            compare_level: 8,
            window: "pair:1".into(),
            b: "pair".into(),
            x0: "0,0".into(),
            b_prime_radius_sq: "1/4".into(),
            targets: vec![
                TargetSpec {
                    level: 1,
                    lower_left: "1,0".into(),
                },
                TargetSpec {
                    level: 1,
                    lower_left: "-3/2,0".into(),
                },
            ],
            domain: DomainFamily::RandomCellUnion {
                level: 3,
                density: 0.6,
            },
            instances: 100,
            seed: 1,
            spectral_cap: DEFAULT_SPECTRAL_CAP,
            max_excluded: 0.05,
            stability: 0.2,
            truncation_level: 4,
            exploratory: false,
            out_dir: "out".into(),
            lemmas: LemmaConfig::default(),
            scaling: ScalingConfig::default(),
        }
    }
}

/// Parsed geometric parts of a config.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub window: WindowSpec,
    pub b: WindowSpec,
    pub x0: ExactPoint,
    pub b_prime_r2: Rational64,
    pub targets: [Cell; 2],
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let c: Self = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            e => e,
        })
    }

    /// Canonical TOML rendering; parsing it gives back the same config.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical rendering, in hex.
    pub fn hash(&self) -> String {
        let d = Sha256::digest(self.to_toml().as_bytes());
        d.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.alphas.is_empty() {
            return bad("alphas must not be empty".into());
        }
        let dw = walk_dim();
        for &a in &self.alphas {
            if self.exploratory {
                if !(a > 0.0 && a < dw) {
                    return bad(format!("alpha = {a} must lie in (0, d_w) = (0, {dw:.6})"));
                }
            } else if !(a > 0.0 && a < 1.0) {
                return bad(format!(
                    "alpha = {a} violates the hypothesis 0 < alpha < 1 of the boundary Harnack \
                     inequality; set exploratory = true to run it outside the hypothesis"
                ));
            }
        }
        if self.compare_level != 0 && self.compare_level == self.level {
            return bad("compare_level must differ from level".into());
        }
        if self.instances == 0 || self.lemmas.instances == 0 {
            return bad("instance counts must be positive".into());
        }
        if !(0.0..1.0).contains(&self.max_excluded) {
            return bad(format!("max_excluded = {} must lie in [0, 1)", self.max_excluded));
        }
        if !(self.stability > 0.0) || !(self.lemmas.tolerance > 0.0) || !(self.scaling.tolerance > 0.0) {
            return bad("tolerances must be positive".into());
        }
        match &self.domain {
            DomainFamily::RandomCellUnion { level, density } => {
                if *level > self.level {
                    return bad(format!("domain cell level {level} exceeds graph level {}", self.level));
                }
                if !(*density > 0.0 && *density <= 1.0) {
                    return bad(format!("density = {density} must lie in (0, 1]"));
                }
            }
            DomainFamily::RandomVertexSubset { p } => {
                if !(*p > 0.0 && *p <= 1.0) {
                    return bad(format!("p = {p} must lie in (0, 1]"));
                }
            }
            DomainFamily::Slit { base, path } => {
                base.parse::<crate::geometry::CellIndex>()?;
                if path.chars().any(|c| !('1'..='3').contains(&c)) {
                    return bad(format!("slit path `{path}` must use the digits 1, 2, 3"));
                }
            }
        }
        if let DomainFamily::RandomCellUnion { level, .. } = self.lemmas.domain {
            if level as i64 + self.lemmas.m as i64 > self.lemmas.level as i64 {
                return bad(format!(
                    "lemma domain cells of level {level} at scale m = {} are finer than lemma level {}",
                    self.lemmas.m, self.lemmas.level
                ));
            }
        }
        if self.lemmas.m < 0 {
            return bad("lemma scale m must be nonnegative".into());
        }
        let r = self.resolve()?;
        if r.b.cells().len() != 2 {
            return bad("B must consist of exactly two 0-cells".into());
        }
        let cells: Vec<Cell> = r.b.cells().iter().map(|c| c.cell()).collect();
        if !cells.iter().all(|c| c.vertices.contains(&r.x0)) {
            return bad(format!("x0 = {} is not a common vertex of the cells of B", r.x0));
        }
        if !(r.b_prime_r2 > Rational64::from_integer(0)) || r.b_prime_r2 > Rational64::new(1, 4) {
            return bad("b_prime_radius_sq must lie in (0, 1/4] so that B' lies in B".into());
        }
        if !r.b.cells().iter().all(|c| r.window.cells().contains(c)) {
            return bad("B must lie inside the window".into());
        }
        for p in [&self.lemmas.p1_sq, &self.lemmas.p3_sq, &self.lemmas.p5_sq]
            .into_iter()
            .chain(&self.lemmas.p3_sweep)
        {
            let v = parse_rational(p)?;
            if !(v > Rational64::from_integer(0)) {
                return bad(format!("radius {p} must be positive"));
            }
        }
        let p5 = parse_rational(&self.lemmas.p5_sq)?;
        if parse_rational(&self.lemmas.p1_sq)? >= p5 || parse_rational(&self.lemmas.p3_sq)? >= p5 {
            return bad("p1 and p3 must be below p5".into());
        }
        if self.scaling.walk_cells.iter().any(|&j| j >= self.scaling.walk_level) {
            return bad("walk_cells must be below walk_level".into());
        }
        if self.scaling.walk_cells.len() < 2 || self.scaling.exit_radii.len() < 2 {
            return bad("a fit needs at least two scales".into());
        }
        self.scaling.exit_window.parse::<WindowSpec>()?;
        Ok(())
    }

    pub fn resolve(&self) -> Result<Resolved> {
        if self.targets.len() != 2 {
            return Err(Error::Config("exactly two targets are required".into()));
        }
        Ok(Resolved {
            window: self.window.parse()?,
            b: self.b.parse()?,
            x0: self.x0.parse()?,
            b_prime_r2: parse_rational(&self.b_prime_radius_sq)?,
            targets: [self.targets[0].cell()?, self.targets[1].cell()?],
        })
    }
}
