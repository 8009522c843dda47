//! Experiment configuration: a versioned JSON schema describing the
//! network model, simulation settings, sweep factors, and tolerances.
//! Validation reports every problem found, not just the first.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::blockalg::CVec;
use crate::error::{Error, Result};
use crate::netmodel::{
    diag_ru, AsyncNetworkModel, CombinationPolicy, LinkProbs, QuadraticScenario, StepSizePolicy,
    Topology,
};
use crate::sim::SimConfig;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: u32,
    pub model: ModelSpec,
    #[serde(default)]
    pub action: Option<Action>,
    #[serde(default)]
    pub sim: SimSpec,
    #[serde(default)]
    pub sweep: SweepSpec,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default = "default_output")]
    pub output: String,
    #[serde(default)]
    pub formats: Formats,
}

fn default_output() -> String {
    "out".into()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Analyze,
    Simulate,
    Compare,
    Sweep,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub agents: usize,
    pub m: usize,
    pub topology: TopologySpec,
    pub combination: CombinationSpec,
    pub steps: StepSpec,
    /// Target vector, one (re, im) pair per coordinate.
    pub w_o: ComplexVecSpec,
    /// Per-agent regressor covariance diagonals (length M each).
    pub r_u_diag: Vec<Vec<f64>>,
    pub sigma_v2: Vec<f64>,
    #[serde(default)]
    pub perturb_eps: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComplexVecSpec {
    pub re: Vec<f64>,
    #[serde(default)]
    pub im: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TopologySpec {
    Complete,
    Ring,
    RandomGeometric { radius: f64, seed: u64 },
    Custom { neighbors: Vec<Vec<usize>> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CombinationSpec {
    /// Column-major N x N left-stochastic matrix, given as rows.
    Fixed { matrix: Vec<Vec<f64>> },
    BernoulliLinks { q: QSpec },
    Gossip { beta: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum QSpec {
    Uniform(f64),
    PerLink(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepSpec {
    Constant { mu: Vec<f64> },
    BernoulliOnOff { mu0: Vec<f64>, q: Vec<f64> },
    UniformRange { mu_max: Vec<f64> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSpec {
    #[serde(default = "d_horizon")]
    pub horizon: usize,
    #[serde(default = "d_runs")]
    pub runs: usize,
    #[serde(default = "d_seed")]
    pub master_seed: u64,
    #[serde(default = "d_window")]
    pub steady_window: f64,
    #[serde(default)]
    pub couple_longterm: bool,
    #[serde(default = "d_record")]
    pub record_every: usize,
}

fn d_horizon() -> usize {
    10_000
}
fn d_runs() -> usize {
    50
}
fn d_seed() -> u64 {
    1
}
fn d_window() -> f64 {
    0.2
}
fn d_record() -> usize {
    10
}

impl Default for SimSpec {
    fn default() -> Self {
        Self {
            horizon: d_horizon(),
            runs: d_runs(),
            master_seed: d_seed(),
            steady_window: d_window(),
            couple_longterm: false,
            record_every: d_record(),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default)]
    pub factors: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "d_msd_rel")]
    pub msd_rel: f64,
    #[serde(default = "d_slope_msd")]
    pub slope_msd: f64,
    #[serde(default = "d_slope_dis")]
    pub slope_disagreement: f64,
    #[serde(default = "d_slope_gap")]
    pub slope_gap: f64,
}

fn d_msd_rel() -> f64 {
    0.10
}
fn d_slope_msd() -> f64 {
    0.15
}
fn d_slope_dis() -> f64 {
    1.75
}
fn d_slope_gap() -> f64 {
    0.4
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            msd_rel: d_msd_rel(),
            slope_msd: d_slope_msd(),
            slope_disagreement: d_slope_dis(),
            slope_gap: d_slope_gap(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Formats {
    #[serde(default = "yes")]
    pub json: bool,
    #[serde(default = "yes")]
    pub csv: bool,
}

fn yes() -> bool {
    true
}

impl Default for Formats {
    fn default() -> Self {
        Self { json: true, csv: true }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        Ok(cfg)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    /// Builds the validated model, collecting every validation error.
    pub fn build_model(&self) -> Result<AsyncNetworkModel> {
        let mut errs = Vec::new();
        if self.schema != SCHEMA_VERSION {
            errs.push(format!("schema: expected {SCHEMA_VERSION}, got {}", self.schema));
        }
        let n = self.model.agents;
        let m = self.model.m;
        if n == 0 {
            errs.push("model.agents: must be positive".into());
        }
        if m == 0 {
            errs.push("model.m: must be positive".into());
        }
        let topology = match &self.model.topology {
            TopologySpec::Complete => Topology::complete(n.max(1)),
            TopologySpec::Ring => Topology::ring(n.max(1)),
            TopologySpec::RandomGeometric { radius, seed } => {
                Topology::random_geometric(n.max(1), *radius, *seed)
            }
            TopologySpec::Custom { neighbors } => match Topology::new(n.max(1), neighbors.clone())
            {
                Ok(t) => t,
                Err(e) => {
                    errs.push(format!("model.topology: {e}"));
                    Topology::complete(n.max(1))
                }
            },
        };
        let combination = match &self.model.combination {
            CombinationSpec::Fixed { matrix } => {
                if matrix.len() != n || matrix.iter().any(|row| row.len() != n) {
                    errs.push(format!("model.combination.matrix: must be {n}x{n}"));
                    CombinationPolicy::Fixed(crate::netmodel::RMat::identity(n.max(1), n.max(1)))
                } else {
                    CombinationPolicy::Fixed(crate::netmodel::RMat::from_fn(n, n, |r, c| {
                        matrix[r][c]
                    }))
                }
            }
            CombinationSpec::BernoulliLinks { q } => CombinationPolicy::BernoulliLinks {
                q: match q {
                    QSpec::Uniform(v) => LinkProbs::Uniform(*v),
                    QSpec::PerLink(rows) => LinkProbs::PerLink(rows.clone()),
                },
            },
            CombinationSpec::Gossip { beta } => CombinationPolicy::Gossip { beta: *beta },
        };
        let steps = match &self.model.steps {
            StepSpec::Constant { mu } => StepSizePolicy::Constant { mu: mu.clone() },
            StepSpec::BernoulliOnOff { mu0, q } => {
                StepSizePolicy::BernoulliOnOff { mu0: mu0.clone(), q: q.clone() }
            }
            StepSpec::UniformRange { mu_max } => {
                StepSizePolicy::UniformRange { mu_max: mu_max.clone() }
            }
        };
        if steps.n_agents() != n {
            errs.push(format!(
                "model.steps: {} agents, topology has {n}",
                steps.n_agents()
            ));
        }
        if self.model.w_o.re.len() != m {
            errs.push(format!("model.w_o.re: length {} != m = {m}", self.model.w_o.re.len()));
        }
        if !self.model.w_o.im.is_empty() && self.model.w_o.im.len() != m {
            errs.push(format!("model.w_o.im: length {} != m = {m}", self.model.w_o.im.len()));
        }
        if self.model.r_u_diag.len() != n {
            errs.push(format!("model.r_u_diag: {} rows, need {n}", self.model.r_u_diag.len()));
        }
        for (k, d) in self.model.r_u_diag.iter().enumerate() {
            if d.len() != m {
                errs.push(format!("model.r_u_diag[{k}]: length {} != m = {m}", d.len()));
            }
            if d.iter().any(|&x| x <= 0.0) {
                errs.push(format!("model.r_u_diag[{k}]: entries must be positive"));
            }
        }
        if self.model.sigma_v2.len() != n {
            errs.push(format!("model.sigma_v2: {} entries, need {n}", self.model.sigma_v2.len()));
        }
        if self.model.sigma_v2.iter().any(|&s| s < 0.0) {
            errs.push("model.sigma_v2: entries must be nonnegative".into());
        }
        if self.model.perturb_eps < 0.0 {
            errs.push("model.perturb_eps: must be nonnegative".into());
        }
        if let Err(e) = steps.validate() {
            errs.push(format!("model.steps: {e}"));
        }
        if let Err(e) = combination.validate(&topology) {
            errs.push(format!("model.combination: {e}"));
        }
        let sim = self.sim_config();
        if let Err(e) = sim.validate() {
            errs.push(format!("sim: {e}"));
        }
        for (name, v) in [
            ("msd_rel", self.tolerances.msd_rel),
            ("slope_msd", self.tolerances.slope_msd),
            ("slope_disagreement", self.tolerances.slope_disagreement),
            ("slope_gap", self.tolerances.slope_gap),
        ] {
            if v <= 0.0 {
                errs.push(format!("tolerances.{name}: must be positive"));
            }
        }
        if !errs.is_empty() {
            return Err(Error::InvalidConfig(errs.join("; ")));
        }
        let w_o = CVec::from_iterator(
            m,
            (0..m).map(|i| {
                Complex64::new(
                    self.model.w_o.re[i],
                    self.model.w_o.im.get(i).copied().unwrap_or(0.0),
                )
            }),
        );
        let model = AsyncNetworkModel {
            topology,
            combination,
            steps,
            scenario: QuadraticScenario {
                m,
                w_o,
                r_u: self.model.r_u_diag.iter().map(|d| diag_ru(d)).collect(),
                sigma_v2: self.model.sigma_v2.clone(),
                perturb_eps: self.model.perturb_eps,
            },
        };
        model.validate()?;
        Ok(model)
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            horizon: self.sim.horizon,
            runs: self.sim.runs,
            master_seed: self.sim.master_seed,
            steady_window: self.sim.steady_window,
            couple_longterm: self.sim.couple_longterm,
            record_every: self.sim.record_every,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "schema": 1,
        "model": {
            "agents": 1,
            "m": 1,
            "topology": {"kind": "complete"},
            "combination": {"kind": "fixed", "matrix": [[1.0]]},
            "steps": {"kind": "constant", "mu": [0.01]},
            "w_o": {"re": [1.0], "im": [0.5]},
            "r_u_diag": [[1.0]],
            "sigma_v2": [0.01]
        }
    }"#;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let cfg = ExperimentConfig::from_json(MINIMAL).unwrap();
        assert_eq!(cfg.sim.horizon, 10_000);
        assert_eq!(cfg.sim.record_every, 10);
        assert_eq!(cfg.output, "out");
        assert!(cfg.formats.json && cfg.formats.csv);
        let model = cfg.build_model().unwrap();
        assert_eq!(model.topology.n(), 1);
        assert_eq!(model.scenario.w_o[0], Complex64::new(1.0, 0.5));
    }

    #[test]
    fn invalid_q_reported_by_field() {
        let text = MINIMAL.replace(
            r#""combination": {"kind": "fixed", "matrix": [[1.0]]}"#,
            r#""combination": {"kind": "bernoulli_links", "q": 1.5}"#,
        );
        let cfg = ExperimentConfig::from_json(&text).unwrap();
        let err = cfg.build_model().unwrap_err().to_string();
        assert!(err.contains("model.combination"), "{err}");
        assert!(err.contains("1.5"), "{err}");
    }

    #[test]
    fn multiple_errors_all_reported() {
        let text = MINIMAL
            .replace(r#""mu": [0.01]"#, r#""mu": [0.01, 0.02]"#)
            .replace(r#""sigma_v2": [0.01]"#, r#""sigma_v2": [-0.01]"#);
        let cfg = ExperimentConfig::from_json(&text).unwrap();
        let err = cfg.build_model().unwrap_err().to_string();
        assert!(err.contains("model.steps"), "{err}");
        assert!(err.contains("sigma_v2"), "{err}");
    }

    #[test]
    fn unknown_field_rejected() {
        let text = MINIMAL.replace(r#""schema": 1,"#, r#""schema": 1, "bogus": 2,"#);
        assert!(ExperimentConfig::from_json(&text).is_err());
    }

    #[test]
    fn round_trip_stable() {
        let cfg = ExperimentConfig::from_json(MINIMAL).unwrap();
        let a = serde_json::to_string(&cfg).unwrap();
        let b = serde_json::to_string(&ExperimentConfig::from_json(&a).unwrap()).unwrap();
        assert_eq!(a, b);
    }
}
