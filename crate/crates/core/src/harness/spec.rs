//! Experiment descriptions: cells, grids and run settings.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::{ModelParams, DEFAULT_NODE_BUDGET};
use crate::recon::{
    indel_rate_bound, unclamped_anchor_length, ReconConfig, UnresolvedChild, DEFAULT_ANCHOR_CONSTANT,
};

/// How the indel rates of a cell are set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndelSpec {
    /// Total rate `p_i + p_d`, split evenly.
    Rate(f64),
    Split { p_i: f64, p_d: f64 },
    /// The total rate `alpha / (4 d k^{2/3} a)` with `a = ceil(C ln n)`,
    /// split evenly. `C` defaults to the cell's anchor constant.
    AtBound {
        alpha: f64,
        #[serde(default)]
        anchor_constant: Option<f64>,
        /// `alpha` above `epsilon / d` is allowed but logged.
        #[serde(default = "default_epsilon")]
        epsilon: f64,
    },
}

pub const DEFAULT_EPSILON: f64 = 0.5;

fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}

impl Default for IndelSpec {
    fn default() -> Self {
        IndelSpec::Rate(0.0)
    }
}

/// Island and anchor lengths replacing the derived ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    pub island: usize,
    /// Defaults to `ceil(C ln n)`, cut to `island - 1`.
    #[serde(default)]
    pub anchor: Option<usize>,
}

fn default_anchor_constant() -> f64 {
    DEFAULT_ANCHOR_CONSTANT
}

fn default_zeta() -> f64 {
    0.1
}

/// One point of the parameter space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSpec {
    pub d: usize,
    pub height: usize,
    pub k: usize,
    pub p_s: f64,
    #[serde(default)]
    pub indel: IndelSpec,
    #[serde(default = "default_anchor_constant")]
    pub anchor_constant: f64,
    /// Half-width of the length event, relative to `k`.
    #[serde(default = "default_zeta")]
    pub zeta: f64,
    /// Overrides the default `beta = 1/d`.
    #[serde(default)]
    pub beta: Option<f64>,
    #[serde(default)]
    pub layout: Option<Layout>,
    #[serde(default)]
    pub unresolved: UnresolvedChild,
}

impl CellSpec {
    pub fn new(d: usize, height: usize, k: usize, p_s: f64, indel: IndelSpec) -> Self {
        CellSpec {
            d,
            height,
            k,
            p_s,
            indel,
            anchor_constant: DEFAULT_ANCHOR_CONSTANT,
            zeta: default_zeta(),
            beta: None,
            layout: None,
            unresolved: UnresolvedChild::default(),
        }
    }

    /// `(p_i, p_d)`.
    pub fn indel_rates(&self) -> (f64, f64) {
        match self.indel {
            IndelSpec::Rate(p) => (p / 2.0, p / 2.0),
            IndelSpec::Split { p_i, p_d } => (p_i, p_d),
            IndelSpec::AtBound { alpha, anchor_constant, epsilon } => {
                if alpha > epsilon / self.d as f64 {
                    log::warn!("alpha = {alpha} exceeds epsilon / d = {}", epsilon / self.d as f64);
                }
                let n = self.d.checked_pow(self.height as u32).unwrap_or(usize::MAX);
                let a = unclamped_anchor_length(anchor_constant.unwrap_or(self.anchor_constant), n);
                let p = indel_rate_bound(alpha, self.d, self.k, a);
                (p / 2.0, p / 2.0)
            }
        }
    }

    /// Validated model parameters and reconstruction settings, or the reason
    /// the cell cannot run.
    pub fn build(&self, node_budget: usize) -> Result<(ModelParams, ReconConfig)> {
        let (p_i, p_d) = self.indel_rates();
        let params = ModelParams::new(self.d, self.height, self.k, self.p_s, p_d, p_i)?;
        let nodes = params.shape().checked_node_count();
        if nodes.is_none_or(|n| n > node_budget as u128) {
            return Err(Error::NodeBudget {
                nodes: nodes.unwrap_or(u128::MAX),
                budget: node_budget,
            });
        }
        if !(0.0..1.0).contains(&self.zeta) {
            return Err(Error::InvalidConfig(format!("zeta must lie in [0, 1), got {}", self.zeta)));
        }
        let mut config = ReconConfig::derive(&params, self.anchor_constant, self.beta)?.with_unresolved(self.unresolved);
        if let Some(layout) = self.layout {
            let a = layout
                .anchor
                .unwrap_or_else(|| unclamped_anchor_length(self.anchor_constant, config.n).min(layout.island.saturating_sub(1)));
            config = config.with_layout(layout.island, a)?;
        } else if config.anchor_clamped {
            log::warn!("anchor length cut to {} to fit islands of length {}", config.a, config.ell);
        }
        Ok((params, config))
    }
}

fn one<T>(x: T) -> Vec<T> {
    vec![x]
}

fn default_anchor_constants() -> Vec<f64> {
    one(DEFAULT_ANCHOR_CONSTANT)
}

fn default_zetas() -> Vec<f64> {
    one(default_zeta())
}

fn default_none<T>() -> Vec<Option<T>> {
    vec![None]
}

fn default_indel() -> Vec<IndelSpec> {
    one(IndelSpec::default())
}

fn default_unresolved() -> Vec<UnresolvedChild> {
    one(UnresolvedChild::default())
}

/// A Cartesian product of parameter values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub d: Vec<usize>,
    pub height: Vec<usize>,
    pub k: Vec<usize>,
    pub p_s: Vec<f64>,
    #[serde(default = "default_indel")]
    pub indel: Vec<IndelSpec>,
    #[serde(default = "default_anchor_constants")]
    pub anchor_constant: Vec<f64>,
    #[serde(default = "default_zetas")]
    pub zeta: Vec<f64>,
    #[serde(default = "default_none")]
    pub beta: Vec<Option<f64>>,
    #[serde(default = "default_none")]
    pub layout: Vec<Option<Layout>>,
    #[serde(default = "default_unresolved")]
    pub unresolved: Vec<UnresolvedChild>,
}

impl Grid {
    /// Cells in row-major order, the last field varying fastest.
    pub fn cells(&self) -> Vec<CellSpec> {
        let mut out = Vec::new();
        for &d in &self.d {
            for &height in &self.height {
                for &k in &self.k {
                    for &p_s in &self.p_s {
                        for &indel in &self.indel {
                            for &anchor_constant in &self.anchor_constant {
                                for &zeta in &self.zeta {
                                    for &beta in &self.beta {
                                        for &layout in &self.layout {
                                            for &unresolved in &self.unresolved {
                                                out.push(CellSpec {
                                                    d,
                                                    height,
                                                    k,
                                                    p_s,
                                                    indel,
                                                    anchor_constant,
                                                    zeta,
                                                    beta,
                                                    layout,
                                                    unresolved,
                                                });
                                            }
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

fn default_true() -> bool {
    true
}

fn default_node_budget() -> usize {
    DEFAULT_NODE_BUDGET
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub name: String,
    pub seed: u64,
    pub trials: u64,
    /// Explicit cells, run before the grid.
    #[serde(default)]
    pub cells: Vec<CellSpec>,
    #[serde(default)]
    pub grid: Option<Grid>,
    /// Run the ground-truth checks on every trial.
    #[serde(default = "default_true")]
    pub oracle: bool,
    /// Wall-clock limit per cell; a cell that runs over keeps the trials done
    /// so far and is marked partial.
    #[serde(default)]
    pub time_budget_secs: Option<f64>,
    #[serde(default = "default_node_budget")]
    pub node_budget: usize,
    /// Worker threads; all cores when absent.
    #[serde(default)]
    pub threads: Option<usize>,
    /// Report directory.
    #[serde(default)]
    pub output: Option<std::path::PathBuf>,
}

impl ExperimentSpec {
    pub fn new(name: impl Into<String>, seed: u64, trials: u64, cells: Vec<CellSpec>) -> Self {
        ExperimentSpec {
            name: name.into(),
            seed,
            trials,
            cells,
            grid: None,
            oracle: true,
            time_budget_secs: None,
            node_budget: DEFAULT_NODE_BUDGET,
            threads: None,
            output: None,
        }
    }

    pub fn all_cells(&self) -> Vec<CellSpec> {
        let mut cells = self.cells.clone();
        if let Some(grid) = &self.grid {
            cells.extend(grid.cells());
        }
        cells
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trials must be positive".into()));
        }
        if self.all_cells().is_empty() {
            return Err(Error::InvalidConfig("experiment has no cells".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::InvalidConfig("threads must be positive".into()));
        }
        if self.time_budget_secs.is_some_and(|t| !(t > 0.0)) {
            return Err(Error::InvalidConfig("time budget must be positive".into()));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bound_rate_matches_the_formula() {
        let c = CellSpec::new(5, 2, 3375, 0.05, IndelSpec::AtBound { alpha: 0.2, anchor_constant: None, epsilon: DEFAULT_EPSILON });
        let (p_i, p_d) = c.indel_rates();
        // a = ceil(8 ln 25) = 26
        let want = 0.2 / (4.0 * 5.0 * 225.0 * 26.0);
        assert!((p_i + p_d - want).abs() < 1e-18);
        assert_eq!(p_i, p_d);
    }

    #[test]
    fn layout_overrides_derived_lengths() {
        let mut c = CellSpec::new(5, 2, 3375, 0.05, IndelSpec::Rate(0.0));
        c.beta = Some(0.01);
        let (_, cfg) = c.build(DEFAULT_NODE_BUDGET).unwrap();
        assert_eq!((cfg.ell, cfg.a), (15, 14));
        c.layout = Some(Layout { island: 52, anchor: Some(26) });
        let (_, cfg) = c.build(DEFAULT_NODE_BUDGET).unwrap();
        assert_eq!((cfg.ell, cfg.a), (52, 26));
        c.layout = Some(Layout { island: 10, anchor: None });
        assert_eq!(c.build(DEFAULT_NODE_BUDGET).unwrap().1.a, 9);
        // ceil(20 ln 25) = 65 is kept once the islands are long enough
        c.anchor_constant = 20.0;
        c.layout = Some(Layout { island: 130, anchor: None });
        assert_eq!(c.build(DEFAULT_NODE_BUDGET).unwrap().1.a, 65);
    }

    #[test]
    fn infeasible_cells_are_errors() {
        let c = CellSpec::new(5, 2, 3375, 0.5, IndelSpec::Rate(0.0));
        assert!(matches!(c.build(DEFAULT_NODE_BUDGET), Err(Error::InvalidConfig(_))));
        let c = CellSpec::new(5, 2, 3375, 0.3, IndelSpec::Rate(0.0));
        assert!(matches!(c.build(DEFAULT_NODE_BUDGET), Err(Error::InfeasibleParameters { .. })));
        let c = CellSpec::new(5, 2, 3375, 0.05, IndelSpec::Rate(0.0));
        assert!(matches!(c.build(10), Err(Error::NodeBudget { nodes: 31, budget: 10 })));
        let c = CellSpec::new(5, 2, 3375, 0.05, IndelSpec::Split { p_i: 1.5, p_d: 0.0 });
        assert!(c.build(DEFAULT_NODE_BUDGET).is_err());
    }

    #[test]
    fn grid_expands_in_order() {
        let g: Grid = serde_json::from_str(r#"{"d":[3,5],"height":[1],"k":[100,200],"p_s":[0.1],"beta":[null,0.01]}"#).unwrap();
        let cells = g.cells();
        assert_eq!(cells.len(), 8);
        assert_eq!((cells[0].d, cells[0].k, cells[0].beta), (3, 100, None));
        assert_eq!((cells[1].d, cells[1].k, cells[1].beta), (3, 100, Some(0.01)));
        assert_eq!((cells[7].d, cells[7].k), (5, 200));
        assert_eq!(cells[0].anchor_constant, DEFAULT_ANCHOR_CONSTANT);
    }

    #[test]
    fn spec_json_defaults() {
        let s = ExperimentSpec::from_json(
            r#"{"name":"x","seed":1,"trials":2,"cells":[{"d":3,"height":1,"k":50,"p_s":0.1,"indel":{"rate":0.01}}]}"#,
        )
        .unwrap();
        assert!(s.oracle);
        assert_eq!(s.cells[0].indel, IndelSpec::Rate(0.01));
        assert_eq!(s.cells[0].unresolved, UnresolvedChild::Skip);
        assert!(ExperimentSpec::from_json(r#"{"name":"x","seed":1,"trials":0,"cells":[]}"#).is_err());
        let at: IndelSpec = serde_json::from_str(r#"{"at_bound":{"alpha":0.2}}"#).unwrap();
        assert_eq!(at, IndelSpec::AtBound { alpha: 0.2, anchor_constant: None, epsilon: DEFAULT_EPSILON });
    }
}
