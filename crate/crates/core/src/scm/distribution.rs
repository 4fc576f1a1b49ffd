use crate::error::{Error, Result};

/// Mixed-radix index of `assignment` over `cards`; the first variable is the
/// most significant digit.
pub(crate) fn encode(assignment: &[usize], cards: &[usize]) -> usize {
    assignment
        .iter()
        .zip(cards)
        .fold(0, |acc, (&v, &c)| acc * c + v)
}

pub(crate) fn decode(mut index: usize, cards: &[usize]) -> Vec<usize> {
    let mut out = vec![0; cards.len()];
    for (slot, &c) in out.iter_mut().zip(cards).rev() {
        *slot = index % c;
        index /= c;
    }
    out
}

/// A dense probability table over the cartesian product of a few discrete
/// variables.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    names: Vec<String>,
    cards: Vec<usize>,
    mass: Vec<f64>,
}

impl Distribution {
    pub fn new(names: Vec<String>, cards: Vec<usize>, mass: Vec<f64>) -> Result<Self> {
        if names.len() != cards.len() {
            return Err(Error::MismatchedSupport("names and cardinalities differ in length".into()));
        }
        let size: usize = cards.iter().product();
        if mass.len() != size {
            return Err(Error::MismatchedSupport(format!(
                "expected {size} masses, got {}",
                mass.len()
            )));
        }
        if mass.iter().any(|m| !(*m >= 0.0)) {
            return Err(Error::InvalidModel("negative or non-finite probability mass".into()));
        }
        let total: f64 = mass.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidModel(format!("total mass {total} != 1")));
        }
        Ok(Self { names, cards, mass })
    }

    pub(crate) fn from_parts_unchecked(names: Vec<String>, cards: Vec<usize>, mass: Vec<f64>) -> Self {
        Self { names, cards, mass }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn cards(&self) -> &[usize] {
        &self.cards
    }

    pub fn masses(&self) -> &[f64] {
        &self.mass
    }

    pub fn total(&self) -> f64 {
        self.mass.iter().sum()
    }

    pub fn position(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    /// Iterates `(assignment, mass)` over the full support.
    pub fn iter(&self) -> impl Iterator<Item = (Vec<usize>, f64)> + '_ {
        self.mass
            .iter()
            .enumerate()
            .map(move |(i, &m)| (decode(i, &self.cards), m))
    }

    /// Mass of a full assignment given in this distribution's variable order.
    pub fn mass_of(&self, assignment: &[usize]) -> f64 {
        self.mass[encode(assignment, &self.cards)]
    }

    /// Probability of a partial event `name = value` for every listed pair.
    pub fn prob(&self, event: &[(&str, usize)]) -> Result<f64> {
        let idx = event
            .iter()
            .map(|(n, v)| Ok((self.position(n)?, *v)))
            .collect::<Result<Vec<_>>>()?;
        Ok(self
            .iter()
            .filter(|(a, _)| idx.iter().all(|&(p, v)| a[p] == v))
            .map(|(_, m)| m)
            .sum())
    }

    pub fn marginal(&self, keep: &[&str]) -> Result<Distribution> {
        let pos = keep.iter().map(|n| self.position(n)).collect::<Result<Vec<_>>>()?;
        let cards: Vec<usize> = pos.iter().map(|&p| self.cards[p]).collect();
        let mut mass = vec![0.0; cards.iter().product()];
        for (a, m) in self.iter() {
            let sub: Vec<usize> = pos.iter().map(|&p| a[p]).collect();
            mass[encode(&sub, &cards)] += m;
        }
        Ok(Distribution::from_parts_unchecked(
            keep.iter().map(|s| s.to_string()).collect(),
            cards,
            mass,
        ))
    }

    /// `P(targets | given)` as a row-stochastic table.
    pub fn conditional(&self, targets: &[&str], given: &[&str]) -> Result<Conditional> {
        let mut all: Vec<&str> = given.to_vec();
        all.extend_from_slice(targets);
        let joint = self.marginal(&all)?;
        let given_cards: Vec<usize> = joint.cards[..given.len()].to_vec();
        let target_cards: Vec<usize> = joint.cards[given.len()..].to_vec();
        let rows: usize = given_cards.iter().product();
        let width: usize = target_cards.iter().product();
        let table = (0..rows)
            .map(|r| {
                let slice = &joint.mass[r * width..(r + 1) * width];
                let z: f64 = slice.iter().sum();
                (z > 0.0).then(|| slice.iter().map(|m| m / z).collect())
            })
            .collect();
        Ok(Conditional {
            targets: targets.iter().map(|s| s.to_string()).collect(),
            target_cards,
            given: given.iter().map(|s| s.to_string()).collect(),
            given_cards,
            table,
        })
    }

    /// `E[1{name = 1}]` for a binary variable.
    pub fn expect_binary(&self, name: &str) -> Result<f64> {
        let p = self.position(name)?;
        if self.cards[p] != 2 {
            return Err(Error::NotBinary(name.to_string()));
        }
        self.prob(&[(name, 1)])
    }
}

/// A conditional table `P(targets | given)`. Rows whose conditioning event
/// has zero probability are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct Conditional {
    pub targets: Vec<String>,
    pub target_cards: Vec<usize>,
    pub given: Vec<String>,
    pub given_cards: Vec<usize>,
    pub table: Vec<Option<Vec<f64>>>,
}

impl Conditional {
    pub fn row(&self, given: &[usize]) -> Option<&[f64]> {
        self.table[encode(given, &self.given_cards)].as_deref()
    }

    pub fn prob(&self, target: &[usize], given: &[usize]) -> Option<f64> {
        self.row(given).map(|r| r[encode(target, &self.target_cards)])
    }

    /// `P(t=1 | g=1) - P(t=1 | g=0)` for a single binary target and a single
    /// binary conditioning variable. Applied to `P(Y | do(A))` this is the
    /// average causal effect.
    pub fn effect(&self) -> Result<f64> {
        if self.targets.len() != 1 || self.given.len() != 1 {
            return Err(Error::MismatchedSupport(
                "effect needs exactly one target and one conditioning variable".into(),
            ));
        }
        if self.target_cards[0] != 2 {
            return Err(Error::NotBinary(self.targets[0].clone()));
        }
        if self.given_cards[0] != 2 {
            return Err(Error::NotBinary(self.given[0].clone()));
        }
        let p = |g: usize| {
            self.prob(&[1], &[g])
                .ok_or_else(|| Error::Unsupported(format!("{} = {g}", self.given[0])))
        };
        Ok(p(1)? - p(0)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radix_round_trip() {
        let cards = [2, 3, 2];
        for i in 0..12 {
            assert_eq!(encode(&decode(i, &cards), &cards), i);
        }
        assert_eq!(decode(5, &cards), vec![0, 2, 1]);
    }

    #[test]
    fn rejects_unnormalized_mass() {
        let r = Distribution::new(vec!["a".into()], vec![2], vec![0.5, 0.6]);
        assert!(matches!(r, Err(Error::InvalidModel(_))));
    }

    #[test]
    fn conditional_rows_sum_to_one() {
        let d = Distribution::new(
            vec!["a".into(), "b".into()],
            vec![2, 2],
            vec![0.1, 0.2, 0.3, 0.4],
        )
        .unwrap();
        let c = d.conditional(&["b"], &["a"]).unwrap();
        let r0 = c.row(&[0]).unwrap();
        assert!((r0[1] - 2.0 / 3.0).abs() < 1e-15);
        assert!((c.row(&[1]).unwrap().iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_mass_rows_are_none() {
        let d = Distribution::new(
            vec!["a".into(), "b".into()],
            vec![2, 2],
            vec![0.5, 0.5, 0.0, 0.0],
        )
        .unwrap();
        let c = d.conditional(&["b"], &["a"]).unwrap();
        assert!(c.row(&[1]).is_none());
        assert!(matches!(c.effect(), Err(Error::Unsupported(_))));
    }
}
