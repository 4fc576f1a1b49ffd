use crate::error::{Error, Result};
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;

/// Attribute values of one example, keyed by variable name.
pub type Assignment = BTreeMap<String, usize>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordList {
    pub attribute: String,
    pub zero: Vec<String>,
    pub one: Vec<String>,
}

impl WordList {
    fn new(attribute: &str, zero: &[&str], one: &[&str]) -> Self {
        let own = |ws: &[&str]| ws.iter().map(|w| w.to_string()).collect();
        Self { attribute: attribute.to_string(), zero: own(zero), one: own(one) }
    }

    fn words(&self, value: usize) -> &[String] {
        if value == 0 {
            &self.zero
        } else {
            &self.one
        }
    }
}

pub fn syntext_word_lists() -> Vec<WordList> {
    vec![
        WordList::new(
            "causal",
            &["apple", "mango", "tomato", "cherry", "pear", "fruit", "banana", "pear", "grapes"],
            &["rose", "jasmine", "tulip", "lotus", "daisy", "sunflower", "flower", "marigold", "dahlia", "orchid"],
        ),
        WordList::new(
            "confound",
            &["bad", "inferior", "substandard", "inadequate", "rotten", "pathetic", "faulty", "defective"],
            &["good", "best", "awesome", "teriffic", "mighty", "gigantic", "tremendous", "mega", "colossal"],
        ),
        WordList::new(
            "spurious",
            &["horror", "gore", "crime", "thriller", "mystery", "gangster", "drama", "dark"],
            &["comedy", "romance", "fantasy", "sports", "epic", "animated", "adventure", "science"],
        ),
    ]
}

/// Bag-of-words renderer: the mean of seeded random word embeddings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TextRenderer {
    pub seed: u64,
    pub dim: usize,
    pub words_per_attribute: usize,
    /// Standard deviation of embedding entries.
    pub scale: f64,
    pub lists: Vec<WordList>,
}

impl Default for TextRenderer {
    fn default() -> Self {
        Self { seed: 0, dim: 16, words_per_attribute: 3, scale: 1.0, lists: syntext_word_lists() }
    }
}

impl TextRenderer {
    pub fn embedding(&self, word: &str) -> Vec<f64> {
        let digest = Sha256::digest(word.as_bytes());
        let mut key = [0u8; 8];
        key.copy_from_slice(&digest[..8]);
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ u64::from_le_bytes(key));
        (0..self.dim)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                self.scale * z
            })
            .collect()
    }

    /// Words drawn for one attribute. Each attribute uses its own RNG stream
    /// so flipping one attribute never changes the words of another.
    pub fn draw_words(&self, list_index: usize, value: usize, noise_seed: u64) -> Result<Vec<&str>> {
        let list = &self.lists[list_index];
        let words = list.words(value);
        if words.len() < self.words_per_attribute {
            return Err(Error::Render(format!(
                "`{}`={value} has {} words, {} needed",
                list.attribute,
                words.len(),
                self.words_per_attribute
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(noise_seed);
        rng.set_stream(list_index as u64);
        Ok(index::sample(&mut rng, words.len(), self.words_per_attribute)
            .into_iter()
            .map(|i| words[i].as_str())
            .collect())
    }

    /// Per-attribute contributions; their sum is the rendered vector.
    pub fn block_contributions(
        &self,
        assignment: &Assignment,
        rendered: &[String],
        noise_seed: u64,
    ) -> Result<Vec<(String, Vec<f64>)>> {
        for name in rendered {
            if !self.lists.iter().any(|l| &l.attribute == name) {
                return Err(Error::Render(format!("no word list for `{name}`")));
            }
        }
        let active: Vec<usize> = (0..self.lists.len())
            .filter(|&i| rendered.contains(&self.lists[i].attribute))
            .collect();
        let total = (active.len() * self.words_per_attribute) as f64;
        let mut out = Vec::with_capacity(active.len());
        for i in active {
            let name = &self.lists[i].attribute;
            let value = *assignment
                .get(name)
                .ok_or_else(|| Error::Render(format!("`{name}` is not assigned")))?;
            let mut block = vec![0.0; self.dim];
            for w in self.draw_words(i, value, noise_seed)? {
                for (b, e) in block.iter_mut().zip(self.embedding(w)) {
                    *b += e / total;
                }
            }
            out.push((name.clone(), block));
        }
        Ok(out)
    }

    pub fn render(&self, assignment: &Assignment, rendered: &[String], noise_seed: u64) -> Result<Vec<f64>> {
        let mut v = vec![0.0; self.dim];
        for (_, block) in self.block_contributions(assignment, rendered, noise_seed)? {
            for (a, b) in v.iter_mut().zip(block) {
                *a += b;
            }
        }
        Ok(v)
    }

    pub fn renderable(&self) -> Vec<&str> {
        self.lists.iter().map(|l| l.attribute.as_str()).collect()
    }
}

/// Glyph renderer: a `grid × grid × 2` image flattened channel-major.
/// Channel 0 is red, channel 1 is green.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GlyphRenderer {
    pub grid: usize,
    /// Half-width of the uniform per-pixel noise.
    pub noise: f64,
}

impl Default for GlyphRenderer {
    fn default() -> Self {
        Self { grid: 8, noise: 0.05 }
    }
}

const THREE: [&str; 8] = [
    "........",
    ".#####..",
    ".....#..",
    "..####..",
    ".....#..",
    ".....#..",
    ".#####..",
    "........",
];

const FOUR: [&str; 8] = [
    "........",
    ".#...#..",
    ".#...#..",
    ".######.",
    ".....#..",
    ".....#..",
    ".....#..",
    "........",
];

impl GlyphRenderer {
    /// Binary mask of the digit (0 draws a "3", 1 a "4"), scaled to the grid.
    pub fn mask(&self, digit: usize) -> Vec<bool> {
        let template = if digit == 0 { &THREE } else { &FOUR };
        let g = self.grid;
        let mut m = vec![false; g * g];
        for r in 0..g {
            for c in 0..g {
                let tr = r * 8 / g;
                let tc = c * 8 / g;
                m[r * g + c] = template[tr].as_bytes()[tc] == b'#';
            }
        }
        m
    }

    /// Clockwise quarter turn of a `grid × grid` plane.
    pub fn rotate(&self, plane: &[f64]) -> Vec<f64> {
        let g = self.grid;
        let mut out = vec![0.0; g * g];
        for r in 0..g {
            for c in 0..g {
                out[r * g + c] = plane[(g - 1 - c) * g + r];
            }
        }
        out
    }

    pub fn render(&self, assignment: &Assignment, noise_seed: u64) -> Result<Vec<f64>> {
        let get = |name: &str| {
            assignment
                .get(name)
                .copied()
                .ok_or_else(|| Error::Render(format!("`{name}` is not assigned")))
        };
        let (digit, color, rotation) = (get("digit")?, get("color")?, get("rotation")?);
        let g = self.grid;
        let mut plane: Vec<f64> = self.mask(digit).into_iter().map(|b| if b { 1.0 } else { 0.0 }).collect();
        if rotation == 1 {
            plane = self.rotate(&plane);
        }
        let mut out = vec![0.0; 2 * g * g];
        out[color * g * g..(color + 1) * g * g].copy_from_slice(&plane);
        if self.noise > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(noise_seed);
            use rand::Rng;
            for v in out.iter_mut() {
                *v += rng.random_range(-self.noise..=self.noise);
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RendererSpec {
    BagOfWords(TextRenderer),
    GlyphImage(GlyphRenderer),
}

impl RendererSpec {
    pub fn dims(&self) -> usize {
        match self {
            RendererSpec::BagOfWords(t) => t.dim,
            RendererSpec::GlyphImage(g) => 2 * g.grid * g.grid,
        }
    }

    /// Attributes this renderer can draw.
    pub fn renderable(&self) -> Vec<&str> {
        match self {
            RendererSpec::BagOfWords(t) => t.renderable(),
            RendererSpec::GlyphImage(_) => vec!["digit", "color", "rotation"],
        }
    }

    /// Renders the attributes in `rendered`; any other entry of the
    /// assignment is ignored.
    pub fn render(&self, assignment: &Assignment, rendered: &[String], noise_seed: u64) -> Result<Vec<f64>> {
        match self {
            RendererSpec::BagOfWords(t) => t.render(assignment, rendered, noise_seed),
            RendererSpec::GlyphImage(g) => {
                let mut a = assignment.clone();
                for name in ["digit", "color", "rotation"] {
                    if !rendered.iter().any(|r| r == name) {
                        a.insert(name.to_string(), 0);
                    }
                }
                g.render(&a, noise_seed)
            }
        }
    }

    /// Re-renders with `attribute` flipped and the same noise seed.
    pub fn counterfactual(
        &self,
        assignment: &Assignment,
        rendered: &[String],
        attribute: &str,
        noise_seed: u64,
    ) -> Result<Vec<f64>> {
        let value = *assignment
            .get(attribute)
            .ok_or_else(|| Error::UnknownVariable(attribute.to_string()))?;
        if value > 1 {
            return Err(Error::NotBinary(attribute.to_string()));
        }
        let mut flipped = assignment.clone();
        flipped.insert(attribute.to_string(), 1 - value);
        self.render(&flipped, rendered, noise_seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assign(pairs: &[(&str, usize)]) -> Assignment {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    fn names(ns: &[&str]) -> Vec<String> {
        ns.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn unrendered_attributes_do_not_matter() {
        let r = RendererSpec::BagOfWords(TextRenderer::default());
        let vis = names(&["causal", "spurious"]);
        let a = r.render(&assign(&[("causal", 1), ("confound", 0), ("spurious", 1)]), &vis, 9).unwrap();
        let b = r.render(&assign(&[("causal", 1), ("confound", 1), ("spurious", 1)]), &vis, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn flips_touch_only_their_block() {
        let t = TextRenderer::default();
        let vis = names(&["causal", "confound", "spurious"]);
        let a = assign(&[("causal", 0), ("confound", 1), ("spurious", 1)]);
        let mut b = a.clone();
        b.insert("causal".into(), 1);
        let ba = t.block_contributions(&a, &vis, 4).unwrap();
        let bb = t.block_contributions(&b, &vis, 4).unwrap();
        assert_ne!(ba[0].1, bb[0].1);
        assert_eq!(ba[1..], bb[1..]);
        let diff: f64 = t
            .render(&a, &vis, 4)
            .unwrap()
            .iter()
            .zip(t.render(&b, &vis, 4).unwrap())
            .map(|(x, y)| (x - y).powi(2))
            .sum();
        assert!(diff > 0.0);
    }

    #[test]
    fn blocks_sum_to_render() {
        let t = TextRenderer::default();
        let vis = names(&["causal", "confound", "spurious"]);
        let a = assign(&[("causal", 1), ("confound", 0), ("spurious", 1)]);
        let v = t.render(&a, &vis, 11).unwrap();
        let mut s = vec![0.0; t.dim];
        for (_, b) in t.block_contributions(&a, &vis, 11).unwrap() {
            for (x, y) in s.iter_mut().zip(b) {
                *x += y;
            }
        }
        assert_eq!(s, v);
    }

    #[test]
    fn missing_word_list_is_an_error() {
        let t = TextRenderer::default();
        let r = t.render(&assign(&[("tone", 1)]), &names(&["tone"]), 0);
        assert!(matches!(r, Err(Error::Render(_))));
    }

    #[test]
    fn glyph_rotation_and_color() {
        let g = GlyphRenderer { grid: 8, noise: 0.0 };
        let spec = RendererSpec::GlyphImage(g.clone());
        let all = names(&["digit", "color", "rotation"]);
        let base = assign(&[("digit", 1), ("color", 0), ("rotation", 0)]);
        let x = spec.render(&base, &all, 5).unwrap();
        let rot = spec.counterfactual(&base, &all, "rotation", 5).unwrap();
        assert_eq!(rot[..64], g.rotate(&x[..64])[..]);
        let col = spec.counterfactual(&base, &all, "color", 5).unwrap();
        assert_eq!(col[64..], x[..64]);
        assert_eq!(col[..64], x[64..]);
        let dig = spec.counterfactual(&base, &all, "digit", 5).unwrap();
        let m3 = g.mask(0);
        let m4 = g.mask(1);
        for i in 0..64 {
            assert_eq!(dig[i] != x[i], m3[i] != m4[i]);
        }
    }

    #[test]
    fn glyph_noise_is_seeded() {
        let spec = RendererSpec::GlyphImage(GlyphRenderer::default());
        let all = names(&["digit", "color", "rotation"]);
        let a = assign(&[("digit", 0), ("color", 1), ("rotation", 1)]);
        assert_eq!(spec.render(&a, &all, 3).unwrap(), spec.render(&a, &all, 3).unwrap());
        assert_ne!(spec.render(&a, &all, 3).unwrap(), spec.render(&a, &all, 4).unwrap());
        assert!(matches!(
            spec.render(&assign(&[("digit", 0)]), &names(&["digit"]), 0).map(|v| v.len()),
            Ok(128)
        ));
    }
}
