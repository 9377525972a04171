//! Declarative run configuration (TOML). Every field has a default except
//! the case path; relative paths resolve against the config file's
//! directory.

use std::f64::consts::FRAC_PI_6;
use std::fs;
use std::path::{Path, PathBuf};

use augopf_core::case::{parse_case_with_warnings, NetworkCase, ParseWarning};
use augopf_core::dataset::{BranchLabel, BranchRule, DemandCurve, LabelJob, LoadProfile};
use augopf_core::digest::{Digest, DigestWriter};
use augopf_core::inference::InputMode;
use augopf_core::nn::{AdamConfig, TrainConfig};
use augopf_core::opf::SolverOptions;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub case: PathBuf,
    /// Worker threads for label generation and evaluation; results do not
    /// depend on it.
    #[serde(default = "one")]
    pub workers: usize,
    #[serde(default)]
    pub profile: ProfileConfig,
    #[serde(default)]
    pub generate: GenerateConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mix: Option<MixConfig>,
    #[serde(default)]
    pub split: SplitConfig,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub evaluate: EvaluateSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn one() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProfileConfig {
    /// In-repo daily shape sampled every `granularity_s` seconds.
    Daily {
        n: usize,
        #[serde(default = "granularity")]
        granularity_s: f64,
        #[serde(default)]
        jitter: f64,
        #[serde(default)]
        seed: u64,
    },
    Constant {
        n: usize,
        #[serde(default = "unit")]
        value: f64,
    },
    /// Default load with one bus's reactive demand swept linearly.
    ReactiveSweep {
        /// External bus id.
        bus: u32,
        q_from_mvar: f64,
        q_to_mvar: f64,
        n: usize,
    },
}

fn granularity() -> f64 {
    30.0
}

fn unit() -> f64 {
    1.0
}

impl Default for ProfileConfig {
    fn default() -> Self {
        ProfileConfig::Daily {
            n: 2760,
            granularity_s: 30.0,
            jitter: 0.0,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerateConfig {
    pub k_init: usize,
    pub seed: u64,
    /// Half-width of the uniform initial-angle range, radians.
    pub angle_range: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rule: Option<RuleConfig>,
}

impl Default for GenerateConfig {
    fn default() -> Self {
        Self {
            k_init: 40,
            seed: 0,
            angle_range: FRAC_PI_6,
            rule: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelName {
    LowCost,
    HighCost,
}

impl From<LabelName> for BranchLabel {
    fn from(l: LabelName) -> Self {
        match l {
            LabelName::LowCost => BranchLabel::LowCost,
            LabelName::HighCost => BranchLabel::HighCost,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleConfig {
    /// External bus id whose `|V|` separates the branches.
    pub bus: u32,
    pub threshold: f64,
    pub dead_band: f64,
    pub above: LabelName,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixConfig {
    pub low: u32,
    pub high: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub train_fraction: f64,
    pub seed: u64,
    /// Trailing share of training loads held out for the loss history.
    pub validation_fraction: f64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            train_fraction: 0.8,
            seed: 0,
            validation_fraction: 0.1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeName {
    Augmented,
    LoadOnly,
}

impl From<ModeName> for InputMode {
    fn from(m: ModeName) -> Self {
        match m {
            ModeName::Augmented => InputMode::Augmented,
            ModeName::LoadOnly => InputMode::LoadOnly,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub mode: ModeName,
    pub hidden: Vec<usize>,
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub init_seed: u64,
    pub shuffle_seed: u64,
}

impl Default for TrainSection {
    fn default() -> Self {
        let adam = AdamConfig::default();
        let t = TrainConfig::default();
        Self {
            mode: ModeName::Augmented,
            hidden: vec![1024, 768, 512],
            batch_size: t.batch_size,
            epochs: t.max_epochs,
            learning_rate: adam.learning_rate,
            beta1: adam.beta1,
            beta2: adam.beta2,
            eps: adam.eps,
            init_seed: 0,
            shuffle_seed: 0,
        }
    }
}

impl TrainSection {
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            batch_size: self.batch_size,
            max_epochs: self.epochs,
            adam: AdamConfig {
                learning_rate: self.learning_rate,
                beta1: self.beta1,
                beta2: self.beta2,
                eps: self.eps,
            },
            shuffle_seed: self.shuffle_seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateSection {
    /// Time the solver and the network on up to this many test samples.
    pub timing_samples: usize,
    /// Initial points per load for best-of evaluation; 1 disables it.
    pub best_of: usize,
    /// Cap on non-convergent inputs evaluated; 0 skips them.
    pub non_convergent_samples: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub plot: Option<PlotConfig>,
}

impl Default for EvaluateSection {
    fn default() -> Self {
        Self {
            timing_samples: 100,
            best_of: 1,
            non_convergent_samples: 1000,
            plot: None,
        }
    }
}

/// Voltage-versus-reactive-load curve at one bus of the two-bus fixture.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlotConfig {
    /// External id of the bus whose reactive load is swept and whose `|V|`
    /// is plotted.
    pub bus: u32,
    pub q_from_mvar: f64,
    pub q_to_mvar: f64,
    pub n: usize,
    /// Named `(|V|, θ)` starts for the plotted bus; the other
    /// coordinates sit at their box centers.
    pub starts: Vec<PlotStart>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlotStart {
    pub name: String,
    pub vm: f64,
    pub va: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub max_iterations: usize,
    pub gradient_tol: f64,
    pub complementarity_tol: f64,
    pub feasibility_tol: f64,
    pub barrier0: f64,
    pub sigma: f64,
    pub step_fraction: f64,
    pub slack_floor: f64,
    pub multiplier0: f64,
}

impl Default for SolverSection {
    fn default() -> Self {
        let o = SolverOptions::default();
        Self {
            max_iterations: o.max_iterations,
            gradient_tol: o.gradient_tol,
            complementarity_tol: o.complementarity_tol,
            feasibility_tol: o.feasibility_tol,
            barrier0: o.barrier0,
            sigma: o.sigma,
            step_fraction: o.step_fraction,
            slack_floor: o.slack_floor,
            multiplier0: o.multiplier0,
        }
    }
}

impl SolverSection {
    pub fn options(&self) -> SolverOptions {
        SolverOptions {
            max_iterations: self.max_iterations,
            gradient_tol: self.gradient_tol,
            complementarity_tol: self.complementarity_tol,
            feasibility_tol: self.feasibility_tol,
            barrier0: self.barrier0,
            sigma: self.sigma,
            step_fraction: self.step_fraction,
            slack_floor: self.slack_floor,
            multiplier0: self.multiplier0,
            ..SolverOptions::default()
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.base_dir = base_dir.to_path_buf();
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(Error::io(path))?;
        let dir = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, dir)
    }

    /// Range checks that serde cannot express.
    pub fn check(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.workers == 0 {
            return bad("workers must be at least 1");
        }
        if self.generate.k_init == 0 {
            return bad("generate.k_init must be at least 1");
        }
        if !(self.generate.angle_range >= 0.0) {
            return bad("generate.angle_range must be non-negative");
        }
        if !(self.split.train_fraction > 0.0 && self.split.train_fraction < 1.0) {
            return bad("split.train_fraction must lie in (0, 1)");
        }
        if !(0.0..1.0).contains(&self.split.validation_fraction) {
            return bad("split.validation_fraction must lie in [0, 1)");
        }
        if self.train.batch_size == 0 {
            return bad("train.batch_size must be at least 1");
        }
        if !(self.train.learning_rate > 0.0) {
            return bad("train.learning_rate must be positive");
        }
        if self.train.hidden.contains(&0) {
            return bad("train.hidden sizes must be positive");
        }
        if self.evaluate.best_of == 0 {
            return bad("evaluate.best_of must be at least 1");
        }
        if let Some(m) = self.mix {
            if m.low == 0 && m.high == 0 {
                return bad("mix must not be 0:0");
            }
        }
        if self.mix.is_some() && self.generate.rule.is_none() {
            return bad("mix needs generate.rule to label branches");
        }
        Ok(())
    }

    pub fn case_path(&self) -> PathBuf {
        self.base_dir.join(&self.case)
    }

    pub fn load_case(&self) -> Result<(NetworkCase, Vec<ParseWarning>)> {
        let path = self.case_path();
        let text = fs::read_to_string(&path).map_err(Error::io(&path))?;
        Ok(parse_case_with_warnings(&text)?)
    }

    /// Canonical TOML of the resolved settings.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 over the resolved settings and the case file bytes. The
    /// worker count is left out since it does not change results.
    pub fn digest(&self) -> Result<Digest> {
        let mut c = self.clone();
        c.workers = 1;
        let path = self.case_path();
        let case_bytes = fs::read(&path).map_err(Error::io(&path))?;
        let mut w = DigestWriter::new();
        w.bytes(c.to_toml().as_bytes()).bytes(&case_bytes);
        Ok(w.finish())
    }

    pub fn bus_index(&self, case: &NetworkCase, id: u32) -> Result<usize> {
        case.internal_index(id)
            .ok_or_else(|| Error::Config(format!("bus {id} is not in case {}", case.name)))
    }

    pub fn branch_rule(&self, case: &NetworkCase) -> Result<Option<BranchRule>> {
        self.generate
            .rule
            .as_ref()
            .map(|r| {
                Ok(BranchRule {
                    bus: self.bus_index(case, r.bus)?,
                    threshold: r.threshold,
                    dead_band: r.dead_band,
                    above: r.above.into(),
                })
            })
            .transpose()
    }

    pub fn load_profile(&self, case: &NetworkCase) -> Result<LoadProfile> {
        use augopf_core::dataset::{reactive_sweep, synth_load_profile};
        Ok(match self.profile {
            ProfileConfig::Daily {
                n,
                granularity_s,
                jitter,
                seed,
            } => synth_load_profile(case, n, &DemandCurve::Daily, granularity_s, jitter, seed)?,
            ProfileConfig::Constant { n, value } => {
                synth_load_profile(case, n, &DemandCurve::Constant(value), 0.0, 0.0, 0)?
            }
            ProfileConfig::ReactiveSweep {
                bus,
                q_from_mvar,
                q_to_mvar,
                n,
            } => {
                let i = self.bus_index(case, bus)?;
                let base = case.base_mva;
                reactive_sweep(case, i, q_from_mvar / base, q_to_mvar / base, n)?
            }
        })
    }

    pub fn label_job<'a>(&self, options: &'a SolverOptions, rule: Option<&'a BranchRule>) -> LabelJob<'a> {
        LabelJob {
            seed: self.generate.seed,
            k_init: self.generate.k_init,
            angle_range: self.generate.angle_range,
            options,
            rule,
        }
    }
}
