//! Scenario configuration: a flat TOML schema with sections for topology,
//! node profiles, target vector, error model, combining rule and run
//! controls. Unknown keys are rejected, referenced files must exist, and
//! every parameter range is validated before a command runs.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use diffnet_core::{
    mac_error_model, CombiningRule, ErrorModel, MacParams, NodeProfile, SpatialCorrelation,
    Topology, TrueParameter,
};
use rand::Rng;

use crate::error::{CliError, Result};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    topology: TopologySection,
    nodes: NodesSection,
    #[serde(default)]
    wo: WoSection,
    error: ErrorSection,
    rule: RuleSection,
    run: RunSection,
    #[serde(default)]
    theory: TheorySection,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TopologySection {
    kind: String,
    n: Option<usize>,
    side: Option<f64>,
    range: Option<f64>,
    seed: Option<u64>,
    path: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodesSection {
    m: usize,
    mu: ParamSpec,
    sigma_u2: ParamSpec,
    sigma_v2: ParamSpec,
    #[serde(default)]
    rho: f64,
    profile_seed: Option<u64>,
}

/// A per-node parameter: one shared value, an explicit per-node list, or a
/// seeded random draw from a range (optionally log-uniform).
#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum ParamSpec {
    Uniform(f64),
    PerNode(Vec<f64>),
    Random(RandomSpec),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RandomSpec {
    range: [f64; 2],
    #[serde(default)]
    log: bool,
}

impl ParamSpec {
    fn is_random(&self) -> bool {
        matches!(self, ParamSpec::Random(_))
    }

    fn resolve<R: Rng>(&self, what: &str, n: usize, rng: &mut R) -> Result<Vec<f64>> {
        match self {
            ParamSpec::Uniform(v) => Ok(vec![*v; n]),
            ParamSpec::PerNode(values) => {
                if values.len() != n {
                    return Err(CliError::Validation(format!(
                        "nodes.{what}: expected {n} per-node values, got {}",
                        values.len()
                    )));
                }
                Ok(values.clone())
            }
            ParamSpec::Random(spec) => {
                let [lo, hi] = spec.range;
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    return Err(CliError::Validation(format!(
                        "nodes.{what}: invalid range [{lo}, {hi}]"
                    )));
                }
                if spec.log && lo <= 0.0 {
                    return Err(CliError::Validation(format!(
                        "nodes.{what}: log-uniform range needs positive bounds"
                    )));
                }
                Ok((0..n)
                    .map(|_| {
                        if spec.log {
                            (rng.random_range(lo.ln()..hi.ln())).exp()
                        } else {
                            rng.random_range(lo..hi)
                        }
                    })
                    .collect())
            }
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct WoSection {
    #[serde(default = "default_wo_kind")]
    kind: String,
    path: Option<String>,
}

fn default_wo_kind() -> String {
    "normalized_ones".into()
}

impl Default for WoSection {
    fn default() -> Self {
        Self {
            kind: default_wo_kind(),
            path: None,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ErrorSection {
    kind: String,
    p: Option<f64>,
    path: Option<String>,
    cw: Option<u32>,
    r: Option<u32>,
    #[serde(default = "default_slots")]
    slots: u64,
}

fn default_slots() -> u64 {
    100_000
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleSection {
    kind: String,
    q: Option<Vec<f64>>,
    q_source: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunSection {
    iters: usize,
    runs: usize,
    window: usize,
    seed: u64,
    out: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct TheorySection {
    moments: Option<String>,
    mc_samples: Option<usize>,
    mc_seed: Option<u64>,
}

/// How the theory pipeline obtains the weight moments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MomentsChoice {
    Exact,
    MonteCarlo { samples: usize, seed: u64 },
    /// Exact when the enumeration fits, Monte Carlo otherwise.
    Auto { samples: usize, seed: u64 },
}

/// A parsed and validated scenario; `resolve` builds the runtime objects.
#[derive(Debug)]
pub struct Scenario {
    file: ScenarioFile,
    base: PathBuf,
}

/// Everything a command needs, fully constructed.
pub struct Resolved {
    pub topo: Topology,
    pub profiles: Vec<NodeProfile>,
    pub corr: SpatialCorrelation,
    pub w_o: TrueParameter,
    pub rule: CombiningRule,
    pub model: ErrorModel,
    pub mac_params: Option<MacParams>,
    pub slots: u64,
    pub iters: usize,
    pub runs: usize,
    pub window: usize,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub moments: MomentsChoice,
    /// Set iff the error spec is uniform (required by sweep/rank).
    pub uniform_p: Option<f64>,
}

impl Resolved {
    pub fn node_count(&self) -> usize {
        self.topo.node_count()
    }

    pub fn regressor_len(&self) -> usize {
        self.w_o.len()
    }

    pub fn noise_vars(&self) -> Vec<f64> {
        self.profiles.iter().map(|p| p.sigma_v2).collect()
    }
}

/// Parse a scenario file and validate it end to end (schema, ranges and
/// referenced files). Unknown keys are errors; TOML diagnostics carry line
/// positions.
pub fn parse_scenario<P: AsRef<Path>>(path: P) -> Result<Scenario> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let file: ScenarioFile = toml::from_str(&text).map_err(|e| CliError::Config {
        path: path.to_path_buf(),
        detail: e.to_string(),
    })?;
    let scenario = Scenario {
        file,
        base: path.parent().unwrap_or(Path::new(".")).to_path_buf(),
    };
    // full resolution doubles as validation
    scenario.resolve_with(None, None)?;
    Ok(scenario)
}

impl Scenario {
    pub fn resolve(&self) -> Result<Resolved> {
        self.resolve_with(None, None)
    }

    /// Build runtime objects, optionally overriding the master seed and the
    /// output directory.
    pub fn resolve_with(
        &self,
        seed_override: Option<u64>,
        out_override: Option<PathBuf>,
    ) -> Result<Resolved> {
        let f = &self.file;
        let topo = self.build_topology()?;
        let n = topo.node_count();

        // node profiles, with an optional seeded randomized draw
        let nodes = &f.nodes;
        if nodes.m < 1 {
            return Err(CliError::Validation("nodes.m must be >= 1".into()));
        }
        let any_random =
            nodes.mu.is_random() || nodes.sigma_u2.is_random() || nodes.sigma_v2.is_random();
        let mut profile_rng = match (any_random, nodes.profile_seed) {
            (true, None) => {
                return Err(CliError::Validation(
                    "nodes.profile_seed is required when any node parameter is randomized".into(),
                ))
            }
            (_, seed) => diffnet_core::rng::derive_rng(seed.unwrap_or(0), 0, 7, 0),
        };
        let mu = nodes.mu.resolve("mu", n, &mut profile_rng)?;
        let sigma_u2 = nodes.sigma_u2.resolve("sigma_u2", n, &mut profile_rng)?;
        let sigma_v2 = nodes.sigma_v2.resolve("sigma_v2", n, &mut profile_rng)?;
        let profiles: Vec<NodeProfile> = (0..n)
            .map(|k| {
                NodeProfile::new(mu[k], sigma_u2[k], sigma_v2[k])
                    .map_err(|e| CliError::Validation(format!("nodes (node {}): {e}", k + 1)))
            })
            .collect::<Result<_>>()?;

        let corr = SpatialCorrelation::power_law(nodes.rho)
            .map_err(|e| CliError::Validation(format!("nodes.rho: {e}")))?;

        let w_o = self.build_target(nodes.m)?;

        let (model, mac_params, uniform_p) = self.build_error_model(&topo)?;
        let rule = self.build_rule(&topo, &model)?;

        let run = &f.run;
        if run.iters < 1 || run.runs < 1 {
            return Err(CliError::Validation(
                "run.iters and run.runs must both be >= 1".into(),
            ));
        }
        if run.window < 1 || run.window > run.iters {
            return Err(CliError::Validation(format!(
                "run.window = {} must lie in [1, run.iters = {}]",
                run.window, run.iters
            )));
        }

        let moments = self.build_moments_choice(run.seed)?;

        let out_dir = out_override
            .or_else(|| f.run.out.as_ref().map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("out"));

        Ok(Resolved {
            topo,
            profiles,
            corr,
            w_o,
            rule,
            model,
            mac_params,
            slots: f.error.slots,
            iters: run.iters,
            runs: run.runs,
            window: run.window,
            seed: seed_override.unwrap_or(run.seed),
            out_dir,
            moments,
            uniform_p,
        })
    }

    /// Rebuild the resolved scenario with a different uniform error
    /// probability (used by the sweep and rank commands).
    pub fn is_uniform_error(&self) -> bool {
        self.file.error.kind == "uniform"
    }

    fn build_topology(&self) -> Result<Topology> {
        let t = &self.file.topology;
        match t.kind.as_str() {
            "geometric" => {
                if t.path.is_some() {
                    return Err(CliError::Validation(
                        "topology.path is not allowed with kind = \"geometric\"".into(),
                    ));
                }
                let n = t.n.ok_or_else(|| miss("topology.n"))?;
                let side = t.side.ok_or_else(|| miss("topology.side"))?;
                let range = t.range.ok_or_else(|| miss("topology.range"))?;
                let seed = t.seed.ok_or_else(|| miss("topology.seed"))?;
                Topology::random_geometric(n, side, range, seed)
                    .map_err(|e| CliError::Validation(format!("topology: {e}")))
            }
            "file" => {
                for (key, set) in [
                    ("n", t.n.is_some()),
                    ("side", t.side.is_some()),
                    ("range", t.range.is_some()),
                    ("seed", t.seed.is_some()),
                ] {
                    if set {
                        return Err(CliError::Validation(format!(
                            "topology.{key} is not allowed with kind = \"file\""
                        )));
                    }
                }
                let path = t.path.as_ref().ok_or_else(|| miss("topology.path"))?;
                Ok(Topology::from_adjacency_file(self.base.join(path))?)
            }
            other => Err(CliError::Validation(format!(
                "topology.kind = {other:?} (expected \"geometric\" or \"file\")"
            ))),
        }
    }

    fn build_target(&self, m: usize) -> Result<TrueParameter> {
        let wo = &self.file.wo;
        match wo.kind.as_str() {
            "normalized_ones" => {
                if wo.path.is_some() {
                    return Err(CliError::Validation(
                        "wo.path is not allowed with kind = \"normalized_ones\"".into(),
                    ));
                }
                Ok(TrueParameter::normalized_ones(m)?)
            }
            "file" => {
                let rel = wo.path.as_ref().ok_or_else(|| miss("wo.path"))?;
                let path = self.base.join(rel);
                let text = std::fs::read_to_string(&path).map_err(|source| CliError::Io {
                    path: path.clone(),
                    source,
                })?;
                let values: Vec<f64> = text
                    .split_whitespace()
                    .map(|tok| {
                        tok.parse::<f64>().map_err(|_| {
                            CliError::Validation(format!(
                                "wo file {}: invalid number {tok:?}",
                                path.display()
                            ))
                        })
                    })
                    .collect::<Result<_>>()?;
                if values.len() != m {
                    return Err(CliError::Validation(format!(
                        "wo file {} has {} entries but nodes.m = {m}",
                        path.display(),
                        values.len()
                    )));
                }
                Ok(TrueParameter::from_vec(values)?)
            }
            other => Err(CliError::Validation(format!(
                "wo.kind = {other:?} (expected \"normalized_ones\" or \"file\")"
            ))),
        }
    }

    fn build_error_model(
        &self,
        topo: &Topology,
    ) -> Result<(ErrorModel, Option<MacParams>, Option<f64>)> {
        let e = &self.file.error;
        match e.kind.as_str() {
            "uniform" => {
                let p = e.p.ok_or_else(|| miss("error.p"))?;
                forbid("error.path", e.path.is_some(), "uniform")?;
                forbid("error.cw", e.cw.is_some(), "uniform")?;
                forbid("error.r", e.r.is_some(), "uniform")?;
                let model = ErrorModel::uniform(topo, p)
                    .map_err(|err| CliError::Validation(format!("error.p: {err}")))?;
                Ok((model, None, Some(p)))
            }
            "csv" => {
                let rel = e.path.as_ref().ok_or_else(|| miss("error.path"))?;
                forbid("error.p", e.p.is_some(), "csv")?;
                forbid("error.cw", e.cw.is_some(), "csv")?;
                forbid("error.r", e.r.is_some(), "csv")?;
                let model = ErrorModel::from_link_csv(topo, self.base.join(rel))?;
                Ok((model, None, None))
            }
            "mac" => {
                let cw = e.cw.ok_or_else(|| miss("error.cw"))?;
                let r = e.r.ok_or_else(|| miss("error.r"))?;
                forbid("error.p", e.p.is_some(), "mac")?;
                forbid("error.path", e.path.is_some(), "mac")?;
                let params = MacParams::new(cw, r)
                    .map_err(|err| CliError::Validation(format!("error: {err}")))?;
                let model = mac_error_model(topo, &params)?;
                Ok((model, Some(params), None))
            }
            other => Err(CliError::Validation(format!(
                "error.kind = {other:?} (expected \"uniform\", \"csv\" or \"mac\")"
            ))),
        }
    }

    fn build_rule(&self, topo: &Topology, model: &ErrorModel) -> Result<CombiningRule> {
        let r = &self.file.rule;
        let plain = |rule: CombiningRule| -> Result<CombiningRule> {
            if r.q.is_some() || r.q_source.is_some() {
                return Err(CliError::Validation(format!(
                    "rule.q / rule.q_source only apply to enhanced_relative_degree, not {:?}",
                    r.kind
                )));
            }
            Ok(rule)
        };
        match r.kind.as_str() {
            "uniform" => plain(CombiningRule::Uniform),
            "maximum_degree" => plain(CombiningRule::MaximumDegree),
            "metropolis" => plain(CombiningRule::Metropolis),
            "relative_degree" => plain(CombiningRule::RelativeDegree),
            "relative_variance" => plain(CombiningRule::RelativeVariance),
            "enhanced_relative_degree" => {
                let q = match (&r.q, r.q_source.as_deref()) {
                    (Some(_), Some(_)) => {
                        return Err(CliError::Validation(
                            "rule.q and rule.q_source are mutually exclusive".into(),
                        ))
                    }
                    (Some(q), None) => {
                        if q.len() != topo.node_count() {
                            return Err(CliError::Validation(format!(
                                "rule.q: expected {} values, got {}",
                                topo.node_count(),
                                q.len()
                            )));
                        }
                        q.clone()
                    }
                    (None, Some("error_model")) | (None, None) => (0..topo.node_count())
                        .map(|k| model.mean_in_loss(topo, k))
                        .collect(),
                    (None, Some(other)) => {
                        return Err(CliError::Validation(format!(
                            "rule.q_source = {other:?} (expected \"error_model\")"
                        )))
                    }
                };
                CombiningRule::enhanced_relative_degree(q)
                    .map_err(|e| CliError::Validation(format!("rule: {e}")))
            }
            other => Err(CliError::Validation(format!(
                "rule.kind = {other:?} is not a supported combining rule"
            ))),
        }
    }

    fn build_moments_choice(&self, run_seed: u64) -> Result<MomentsChoice> {
        let t = &self.file.theory;
        let samples = t.mc_samples.unwrap_or(200_000);
        if samples < 1 {
            return Err(CliError::Validation("theory.mc_samples must be >= 1".into()));
        }
        let seed = t.mc_seed.unwrap_or(run_seed);
        match t.moments.as_deref().unwrap_or("auto") {
            "auto" => Ok(MomentsChoice::Auto { samples, seed }),
            "exact" => Ok(MomentsChoice::Exact),
            "mc" => Ok(MomentsChoice::MonteCarlo { samples, seed }),
            other => Err(CliError::Validation(format!(
                "theory.moments = {other:?} (expected \"auto\", \"exact\" or \"mc\")"
            ))),
        }
    }
}

fn miss(key: &str) -> CliError {
    CliError::Validation(format!("missing required key {key}"))
}

fn forbid(key: &str, set: bool, kind: &str) -> Result<()> {
    if set {
        return Err(CliError::Validation(format!(
            "{key} is not allowed with kind = {kind:?}"
        )));
    }
    Ok(())
}

/// Parse a probability grid given as `a:b:step` (inclusive endpoints).
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(CliError::Validation(format!(
            "grid {spec:?}: expected a:b:step"
        )));
    }
    let nums: Vec<f64> = parts
        .iter()
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| CliError::Validation(format!("grid {spec:?}: invalid number {t:?}")))
        })
        .collect::<Result<_>>()?;
    let (a, b, step) = (nums[0], nums[1], nums[2]);
    if !(0.0..=1.0).contains(&a) || !(0.0..=1.0).contains(&b) || a > b || step <= 0.0 {
        return Err(CliError::Validation(format!(
            "grid {spec:?}: need 0 <= a <= b <= 1 and step > 0"
        )));
    }
    let mut grid = Vec::new();
    let mut i = 0u64;
    loop {
        let p = a + i as f64 * step;
        if p > b + step * 1e-9 {
            break;
        }
        grid.push(p.min(1.0));
        i += 1;
    }
    Ok(grid)
}

/// Default grid when no `--grid` is given: 0 to 1 in steps of 0.1.
pub fn default_grid() -> Vec<f64> {
    (0..=10).map(|i| i as f64 * 0.1).collect()
}
