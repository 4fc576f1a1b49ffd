use crate::error::{Error, Result};
use crate::estimators::{EstimatorKind, RegressionConfig, RieszConfig, Selection, GRID_SYNTHETIC};
use crate::scm::{DgpSpec, DgpTemplate};
use crate::synthgen::{RendererSpec, TextRenderer};
use crate::theory::AuditConfig;
use crate::trainer::{MouliConfig, TrainConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::PathBuf;

pub const CONFIG_VERSION: u32 = 1;

/// How the majority fraction of an assembled dataset is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupKappa {
    /// `P(spurious = label)` implied by the model.
    #[default]
    Natural,
    /// The model's κ parameter itself.
    Scm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionCriterion {
    #[default]
    Accuracy,
    SpuriousKnown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodSpec {
    Erm,
    AutoAcer,
    /// Counterfactual augmentation on the known spurious attribute.
    Cad,
    /// Invariance-score detection, then counterfactual augmentation.
    MouliCad,
    /// Invariance-score detection, then effect matching with target 0.
    MouliAutoAcer,
    Jtt,
    Irm,
}

impl MethodSpec {
    pub fn name(self) -> &'static str {
        match self {
            MethodSpec::Erm => "erm",
            MethodSpec::AutoAcer => "autoacer",
            MethodSpec::Cad => "cad",
            MethodSpec::MouliCad => "mouli_cad",
            MethodSpec::MouliAutoAcer => "mouli_autoacer",
            MethodSpec::Jtt => "jtt",
            MethodSpec::Irm => "irm",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EstimatorSpec {
    pub kind: EstimatorKind,
    pub selection: Selection,
}

/// One declarative experiment; see the README for the file syntax.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub format_version: u32,
    pub name: String,
    /// Template and structure; `kappa` is replaced by each entry of `kappas`.
    pub dgp: DgpSpec,
    pub renderer: RendererSpec,
    pub label: String,
    pub spurious_attribute: String,
    /// Attributes whose effects are estimated and regularized; empty means
    /// every rendered attribute.
    pub attributes: Vec<String>,
    pub kappas: Vec<f64>,
    pub seeds: Vec<u64>,
    /// Target size of the assembled pool before splitting.
    pub examples: usize,
    pub group_kappa: GroupKappa,
    pub estimators: Vec<EstimatorSpec>,
    /// Which estimate becomes the regularization target.
    pub target_estimator: EstimatorSpec,
    pub effect_grid: Vec<f64>,
    pub regression: RegressionConfig,
    pub riesz: RieszConfig,
    pub methods: Vec<MethodSpec>,
    /// Shared training settings; objective and strength are set per run.
    pub train: TrainConfig,
    pub r_grid: Vec<f64>,
    pub jtt_lambda_up: Vec<usize>,
    pub jtt_first_epochs: Vec<usize>,
    pub irm_lambdas: Vec<f64>,
    /// κ of the second IRM environment.
    pub irm_env_kappa: f64,
    pub mouli: MouliConfig,
    pub selection: SelectionCriterion,
    pub audit: AuditConfig,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let mut dgp = DgpSpec::new(DgpTemplate::SynText, 0.9);
        dgp.confound_observed = false;
        Self {
            format_version: CONFIG_VERSION,
            name: "syntext-unobs".into(),
            dgp,
            renderer: RendererSpec::BagOfWords(TextRenderer::default()),
            label: "y".into(),
            spurious_attribute: "spurious".into(),
            attributes: Vec::new(),
            kappas: vec![0.5, 0.7, 0.9],
            seeds: vec![0, 1, 2],
            examples: 1000,
            group_kappa: GroupKappa::Natural,
            estimators: vec![
                EstimatorSpec { kind: EstimatorKind::Direct, selection: Selection::ValLoss },
                EstimatorSpec { kind: EstimatorKind::Riesz, selection: Selection::ValLoss },
            ],
            target_estimator: EstimatorSpec { kind: EstimatorKind::Direct, selection: Selection::ValLoss },
            effect_grid: GRID_SYNTHETIC.to_vec(),
            regression: RegressionConfig::default(),
            riesz: RieszConfig::default(),
            methods: vec![MethodSpec::Erm, MethodSpec::AutoAcer],
            train: TrainConfig::default(),
            r_grid: vec![1.0, 10.0, 100.0, 1000.0],
            jtt_lambda_up: vec![2, 4, 8],
            jtt_first_epochs: vec![40, 80],
            irm_lambdas: vec![1.0, 10.0, 100.0],
            irm_env_kappa: 0.6,
            mouli: MouliConfig::default(),
            selection: SelectionCriterion::Accuracy,
            audit: AuditConfig::default(),
            output_dir: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.format_version != CONFIG_VERSION {
            return Err(Error::Config(format!("unsupported config version {}", self.format_version)));
        }
        if let Some(k) = self.kappas.iter().find(|k| !(0.5..1.0).contains(*k)) {
            return Err(Error::KappaOutOfRange(*k));
        }
        if self.kappas.is_empty() || self.seeds.is_empty() {
            return Err(Error::Config("kappas and seeds must be nonempty".into()));
        }
        if self.examples < 20 {
            return Err(Error::Config("at least 20 examples are needed".into()));
        }
        if self.r_grid.iter().any(|r| !(*r >= 0.0)) {
            return Err(Error::Config("R grid entries must be nonnegative".into()));
        }
        self.train.validate()
    }

    /// Hex SHA-256 of the canonical JSON form, the output directory excluded.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        let json = serde_json::to_string(&c).expect("config serializes");
        hex(&Sha256::digest(json.as_bytes()))
    }

    pub fn attributes_for(&self, rendered: &[String]) -> Vec<String> {
        if self.attributes.is_empty() {
            rendered.to_vec()
        } else {
            self.attributes.clone()
        }
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
