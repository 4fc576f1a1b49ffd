use super::render::{Assignment, RendererSpec};
use crate::error::{Error, Result};
use crate::scm::Scm;
use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Group {
    Majority,
    Minority,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub features: Vec<f64>,
    pub label: usize,
    /// Observed attribute values (the label excluded).
    pub attributes: BTreeMap<String, usize>,
    /// Input re-rendered with one attribute flipped, per rendered attribute.
    pub counterfactuals: BTreeMap<String, Vec<f64>>,
    pub group: Group,
    pub noise_seed: u64,
}

impl Example {
    pub fn attribute(&self, name: &str) -> Result<usize> {
        self.attributes
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    pub fn counterfactual(&self, name: &str) -> Result<&[f64]> {
        self.counterfactuals
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::Dataset(format!("no counterfactual for `{name}`")))
    }

    /// The rendering at `name = value`, factual or counterfactual.
    pub fn rendering_at(&self, name: &str, value: usize) -> Result<&[f64]> {
        if self.attribute(name)? == value {
            Ok(&self.features)
        } else {
            self.counterfactual(name)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    pub examples: Vec<Example>,
    pub spurious_attribute: String,
    pub kappa_realized: f64,
    pub split: Split,
}

impl LabeledDataset {
    pub fn new(examples: Vec<Example>, spurious_attribute: &str, split: Split) -> Self {
        let kappa_realized = realized_kappa(&examples);
        Self { examples, spurious_attribute: spurious_attribute.to_string(), kappa_realized, split }
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.examples.first().map_or(0, |e| e.features.len())
    }

    pub fn labels(&self) -> Vec<usize> {
        self.examples.iter().map(|e| e.label).collect()
    }

    pub fn attribute_values(&self, name: &str) -> Result<Vec<usize>> {
        self.examples.iter().map(|e| e.attribute(name)).collect()
    }

    pub fn attribute_names(&self) -> Vec<String> {
        self.examples
            .first()
            .map(|e| e.attributes.keys().cloned().collect())
            .unwrap_or_default()
    }

    pub fn count(&self, group: Group) -> usize {
        self.examples.iter().filter(|e| e.group == group).count()
    }

    /// Merge of several splits, e.g. train and validation for a final refit.
    pub fn concat(parts: &[&LabeledDataset], split: Split) -> Result<LabeledDataset> {
        let first = parts.first().ok_or_else(|| Error::Empty("no datasets to concatenate".into()))?;
        let examples = parts.iter().flat_map(|d| d.examples.iter().cloned()).collect();
        Ok(LabeledDataset::new(examples, &first.spurious_attribute, split))
    }
}

fn realized_kappa(examples: &[Example]) -> f64 {
    if examples.is_empty() {
        return f64::NAN;
    }
    let maj = examples.iter().filter(|e| e.group == Group::Majority).count();
    maj as f64 / examples.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSplits {
    pub train: LabeledDataset,
    pub val: LabeledDataset,
    pub test: LabeledDataset,
}

/// Number of minority examples that gives predictive correlation `kappa`
/// with `n_majority` majority examples, rounded down.
pub fn minority_count(n_majority: usize, kappa: f64) -> usize {
    let exact = n_majority as f64 * (1.0 - kappa) / kappa;
    // guard against 199.99999 when the exact ratio is integral
    (exact + 1e-9).floor() as usize
}

/// `P(label = spurious)` under the model: the group ratio of an unfiltered
/// sample.
pub fn natural_kappa(scm: &Scm, label: &str, spurious: &str) -> Result<f64> {
    let joint = scm.joint();
    [0, 1]
        .iter()
        .map(|&v| joint.prob(&[(label, v), (spurious, v)]))
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssembleConfig {
    pub n_majority: usize,
    pub kappa: f64,
    pub seed: u64,
    pub label: String,
    pub spurious_attribute: String,
    pub test_fraction: f64,
    pub val_fraction: f64,
}

impl AssembleConfig {
    pub fn new(n_majority: usize, kappa: f64, seed: u64, spurious_attribute: &str) -> Self {
        Self {
            n_majority,
            kappa,
            seed,
            label: "y".into(),
            spurious_attribute: spurious_attribute.to_string(),
            test_fraction: 0.2,
            val_fraction: 0.25,
        }
    }
}

/// Samples the model, keeps `n_majority` majority and
/// `minority_count(n_majority, kappa)` minority examples, renders them with
/// counterfactuals for every observed renderable attribute, and splits each
/// group into train/val/test.
pub fn assemble(scm: &Scm, renderer: &RendererSpec, cfg: &AssembleConfig) -> Result<DatasetSplits> {
    if !(0.5..1.0).contains(&cfg.kappa) {
        return Err(Error::KappaOutOfRange(cfg.kappa));
    }
    let label_idx = scm.index_of(&cfg.label)?;
    let sp_idx = scm.index_of(&cfg.spurious_attribute)?;
    let n_min = minority_count(cfg.n_majority, cfg.kappa);
    let p_maj = natural_kappa(scm, &cfg.label, &cfg.spurious_attribute)?;
    if (cfg.n_majority > 0 && p_maj == 0.0) || (n_min > 0 && p_maj >= 1.0) {
        return Err(Error::Dataset("the model cannot produce one of the groups".into()));
    }

    let observed: Vec<String> = scm
        .observed_names()
        .into_iter()
        .filter(|n| *n != cfg.label)
        .map(String::from)
        .collect();
    let renderable = renderer.renderable();
    let rendered: Vec<String> = observed
        .iter()
        .filter(|n| renderable.contains(&n.as_str()))
        .cloned()
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let names: Vec<String> = scm.variables().iter().map(|v| v.name.clone()).collect();
    let mut groups: [Vec<Example>; 2] = [Vec::new(), Vec::new()];
    let quota = [cfg.n_majority, n_min];
    let budget = 1000 * (cfg.n_majority + n_min + 1);
    let mut draws = 0;
    while groups[0].len() < quota[0] || groups[1].len() < quota[1] {
        draws += 1;
        if draws > budget {
            return Err(Error::Dataset(format!(
                "rejection sampling exhausted after {budget} draws"
            )));
        }
        let a = scm.sample(&mut rng);
        let noise_seed = rng.next_u64();
        let g = usize::from(a[label_idx] != a[sp_idx]);
        if groups[g].len() >= quota[g] {
            continue;
        }
        let full: Assignment = names.iter().cloned().zip(a.iter().copied()).collect();
        let features = renderer.render(&full, &rendered, noise_seed)?;
        let counterfactuals = rendered
            .iter()
            .map(|n| Ok((n.clone(), renderer.counterfactual(&full, &rendered, n, noise_seed)?)))
            .collect::<Result<_>>()?;
        groups[g].push(Example {
            features,
            label: a[label_idx],
            attributes: observed.iter().map(|n| (n.clone(), full[n])).collect(),
            counterfactuals,
            group: if g == 0 { Group::Majority } else { Group::Minority },
            noise_seed,
        });
    }

    let mut parts: [Vec<Example>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    for mut group in groups {
        group.shuffle(&mut rng);
        let n = group.len();
        let n_test = (n as f64 * cfg.test_fraction).round() as usize;
        let n_val = ((n - n_test) as f64 * cfg.val_fraction).round() as usize;
        let test = group.split_off(n - n_test);
        let val = group.split_off(group.len() - n_val);
        parts[0].extend(group);
        parts[1].extend(val);
        parts[2].extend(test);
    }
    for p in parts.iter_mut() {
        p.shuffle(&mut rng);
    }
    let [train, val, test] = parts;
    let sp = cfg.spurious_attribute.as_str();
    Ok(DatasetSplits {
        train: LabeledDataset::new(train, sp, Split::Train),
        val: LabeledDataset::new(val, sp, Split::Val),
        test: LabeledDataset::new(test, sp, Split::Test),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scm::{build_mnist34_latent, build_syntext};
    use crate::synthgen::{GlyphRenderer, TextRenderer};

    #[test]
    fn minority_sizes() {
        assert_eq!(minority_count(800, 0.8), 200);
        assert_eq!(minority_count(800, 0.5), 800);
        assert_eq!(minority_count(800, 0.99), 8);
    }

    #[test]
    fn assembled_counts_and_kappa() {
        let scm = build_syntext(0.8, true).unwrap();
        let r = RendererSpec::BagOfWords(TextRenderer::default());
        let s = assemble(&scm, &r, &AssembleConfig::new(400, 0.8, 1, "spurious")).unwrap();
        let total = s.train.len() + s.val.len() + s.test.len();
        assert_eq!(total, 500);
        for d in [&s.train, &s.val, &s.test] {
            assert!((d.kappa_realized - 0.8).abs() <= 1.0 / d.len() as f64);
        }
        let e = &s.train.examples[0];
        assert_eq!(e.counterfactuals.len(), 3);
        assert_eq!(e.group == Group::Majority, e.label == e.attributes["spurious"]);
    }

    #[test]
    fn natural_kappa_of_syntext() {
        let scm = build_syntext(0.9, true).unwrap();
        let k = natural_kappa(&scm, "y", "spurious").unwrap();
        assert!((k - (0.9 * 0.845 + 0.1 * 0.155)).abs() < 1e-12);
        let m = build_mnist34_latent(0.7).unwrap();
        assert!((natural_kappa(&m, "y", "rotation").unwrap() - 0.7).abs() < 1e-12);
    }

    #[test]
    fn unobserved_confound_is_dropped() {
        let scm = build_syntext(0.9, false).unwrap();
        let r = RendererSpec::BagOfWords(TextRenderer::default());
        let s = assemble(&scm, &r, &AssembleConfig::new(90, 0.9, 2, "spurious")).unwrap();
        let e = &s.test.examples[0];
        assert!(!e.attributes.contains_key("confound"));
        assert!(!e.counterfactuals.contains_key("confound"));
    }

    #[test]
    fn glyph_dataset() {
        let scm = build_mnist34_latent(0.7).unwrap();
        let r = RendererSpec::GlyphImage(GlyphRenderer::default());
        let s = assemble(&scm, &r, &AssembleConfig::new(70, 0.7, 3, "rotation")).unwrap();
        assert_eq!(s.train.dim(), 128);
        assert_eq!(s.train.examples[0].counterfactuals.len(), 3);
    }

    #[test]
    fn kappa_one_rejected_and_impossible_group_reported() {
        let scm = build_syntext(0.8, true).unwrap();
        let r = RendererSpec::BagOfWords(TextRenderer::default());
        let cfg = AssembleConfig::new(10, 1.0, 0, "spurious");
        assert!(matches!(assemble(&scm, &r, &cfg), Err(Error::KappaOutOfRange(_))));
        let det = build_mnist34_latent(1.0).unwrap();
        let cfg = AssembleConfig::new(10, 0.9, 0, "rotation");
        let g = RendererSpec::GlyphImage(GlyphRenderer::default());
        assert!(matches!(assemble(&det, &g, &cfg), Err(Error::Dataset(_))));
    }

    #[test]
    fn deterministic_given_seed() {
        let scm = build_syntext(0.7, true).unwrap();
        let r = RendererSpec::BagOfWords(TextRenderer::default());
        let cfg = AssembleConfig::new(50, 0.7, 5, "spurious");
        assert_eq!(assemble(&scm, &r, &cfg).unwrap(), assemble(&scm, &r, &cfg).unwrap());
    }
}
