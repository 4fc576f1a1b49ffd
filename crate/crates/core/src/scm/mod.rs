//! Exact discrete structural causal models.
//!
//! Every model here is small enough (a handful of binary variables) that all
//! observational and interventional quantities are computed by enumerating the
//! full joint table. Nothing is sampled or approximated.

mod builders;
mod distribution;
mod identify;
mod spec;

pub use builders::{
    build_mnist34_latent, build_syntext, random_dgp1, random_dgp2, random_dgp3, DgpInstance,
    SYNTEXT_Y_ROWS,
};
pub use distribution::{Conditional, Distribution};
pub(crate) use distribution::decode;
pub use identify::{identify_dgp1, identify_dgp2, tv_invariance_score};
pub use spec::{DgpSpec, DgpTemplate};

use crate::error::{Error, Result};
use rand::Rng;

const ROW_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub card: usize,
    pub observed: bool,
}

/// A discrete structural causal model: named variables with finite domains,
/// acyclic parent sets and one conditional probability table per variable.
///
/// CPD rows are indexed by the mixed-radix encoding of the parent assignment
/// (first listed parent most significant).
#[derive(Debug, Clone, PartialEq)]
pub struct Scm {
    variables: Vec<Variable>,
    parents: Vec<Vec<usize>>,
    cpds: Vec<Vec<Vec<f64>>>,
    order: Vec<usize>,
}

#[derive(Debug, Default)]
pub struct ScmBuilder {
    entries: Vec<(Variable, Vec<String>, Vec<Vec<f64>>)>,
}

impl ScmBuilder {
    /// Adds an observed variable with the given parents and CPD rows.
    pub fn variable(mut self, name: &str, card: usize, parents: &[&str], cpd: Vec<Vec<f64>>) -> Self {
        self.entries.push((
            Variable { name: name.to_string(), card, observed: true },
            parents.iter().map(|s| s.to_string()).collect(),
            cpd,
        ));
        self
    }

    pub fn hidden(mut self, name: &str) -> Self {
        if let Some(e) = self.entries.iter_mut().find(|e| e.0.name == name) {
            e.0.observed = false;
        }
        self
    }

    pub fn build(self) -> Result<Scm> {
        let names: Vec<String> = self.entries.iter().map(|e| e.0.name.clone()).collect();
        let mut variables = Vec::new();
        let mut parents = Vec::new();
        let mut cpds = Vec::new();
        for (var, pa, cpd) in self.entries {
            let idx = pa
                .iter()
                .map(|p| {
                    names
                        .iter()
                        .position(|n| n == p)
                        .ok_or_else(|| Error::UnknownVariable(p.clone()))
                })
                .collect::<Result<Vec<_>>>()?;
            variables.push(var);
            parents.push(idx);
            cpds.push(cpd);
        }
        Scm::new(variables, parents, cpds)
    }
}

impl Scm {
    pub fn builder() -> ScmBuilder {
        ScmBuilder::default()
    }

    pub fn new(variables: Vec<Variable>, parents: Vec<Vec<usize>>, cpds: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let n = variables.len();
        if parents.len() != n || cpds.len() != n {
            return Err(Error::InvalidModel("variables, parents and cpds differ in length".into()));
        }
        for (i, v) in variables.iter().enumerate() {
            if v.card == 0 {
                return Err(Error::InvalidModel(format!("`{}` has an empty domain", v.name)));
            }
            if variables[..i].iter().any(|w| w.name == v.name) {
                return Err(Error::InvalidModel(format!("duplicate variable `{}`", v.name)));
            }
        }
        for (v, pa) in parents.iter().enumerate() {
            for &p in pa {
                if p >= n || p == v {
                    return Err(Error::InvalidModel(format!(
                        "bad parent index {p} for `{}`",
                        variables[v].name
                    )));
                }
            }
            let rows: usize = pa.iter().map(|&p| variables[p].card).product();
            let cpd = &cpds[v];
            if cpd.len() != rows {
                return Err(Error::InvalidModel(format!(
                    "`{}` needs {rows} CPD rows, got {}",
                    variables[v].name,
                    cpd.len()
                )));
            }
            for (r, row) in cpd.iter().enumerate() {
                if row.len() != variables[v].card {
                    return Err(Error::InvalidModel(format!(
                        "`{}` row {r} has {} entries, domain has {}",
                        variables[v].name,
                        row.len(),
                        variables[v].card
                    )));
                }
                if row.iter().any(|p| !(*p >= 0.0)) {
                    return Err(Error::InvalidModel(format!(
                        "`{}` row {r} has a negative entry",
                        variables[v].name
                    )));
                }
                let s: f64 = row.iter().sum();
                if (s - 1.0).abs() > ROW_TOLERANCE {
                    return Err(Error::InvalidModel(format!(
                        "`{}` row {r} sums to {s}",
                        variables[v].name
                    )));
                }
            }
        }
        let order = topological_order(&parents)
            .ok_or_else(|| Error::InvalidModel("parent graph has a cycle".into()))?;
        Ok(Self { variables, parents, cpds, order })
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.variables
            .iter()
            .position(|v| v.name == name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    pub fn parents_of(&self, name: &str) -> Result<Vec<&str>> {
        let i = self.index_of(name)?;
        Ok(self.parents[i].iter().map(|&p| self.variables[p].name.as_str()).collect())
    }

    pub fn cpd(&self, name: &str) -> Result<&[Vec<f64>]> {
        Ok(&self.cpds[self.index_of(name)?])
    }

    pub fn is_observed(&self, name: &str) -> Result<bool> {
        Ok(self.variables[self.index_of(name)?].observed)
    }

    pub fn observed_names(&self) -> Vec<&str> {
        self.variables
            .iter()
            .filter(|v| v.observed)
            .map(|v| v.name.as_str())
            .collect()
    }

    /// Returns a copy with the observed flag of `name` replaced.
    pub fn with_observed(&self, name: &str, observed: bool) -> Result<Scm> {
        let i = self.index_of(name)?;
        let mut out = self.clone();
        out.variables[i].observed = observed;
        Ok(out)
    }

    /// Returns a copy with the CPD of `name` replaced, revalidated.
    pub fn with_cpd(&self, name: &str, rows: Vec<Vec<f64>>) -> Result<Scm> {
        let i = self.index_of(name)?;
        let mut cpds = self.cpds.clone();
        cpds[i] = rows;
        Scm::new(self.variables.clone(), self.parents.clone(), cpds)
    }

    fn cards(&self) -> Vec<usize> {
        self.variables.iter().map(|v| v.card).collect()
    }

    fn cpd_prob(&self, v: usize, assignment: &[usize]) -> f64 {
        let pa = &self.parents[v];
        let row = pa
            .iter()
            .fold(0, |acc, &p| acc * self.variables[p].card + assignment[p]);
        self.cpds[v][row][assignment[v]]
    }

    /// Exact joint distribution over all variables by the CPD chain product.
    pub fn joint(&self) -> Distribution {
        let cards = self.cards();
        let size: usize = cards.iter().product();
        let mass = (0..size)
            .map(|i| {
                let a = decode(i, &cards);
                (0..self.variables.len()).map(|v| self.cpd_prob(v, &a)).product()
            })
            .collect();
        Distribution::from_parts_unchecked(
            self.variables.iter().map(|v| v.name.clone()).collect(),
            cards,
            mass,
        )
    }

    /// Joint over the observed variables only.
    pub fn observed_joint(&self) -> Distribution {
        let obs = self.observed_names();
        self.joint()
            .marginal(&obs)
            .expect("observed names come from the model")
    }

    /// The mutilated model for `do(var = value)`: a point-mass CPD and no parents.
    pub fn intervene(&self, var: &str, value: usize) -> Result<Scm> {
        let i = self.index_of(var)?;
        let card = self.variables[i].card;
        if value >= card {
            return Err(Error::ValueOutOfDomain { name: var.to_string(), value, card });
        }
        let mut out = self.clone();
        out.parents[i].clear();
        let mut row = vec![0.0; card];
        row[value] = 1.0;
        out.cpds[i] = vec![row];
        out.order = topological_order(&out.parents).expect("removing edges keeps the graph acyclic");
        Ok(out)
    }

    /// `P(targets | do(treatment))`, one row per treatment value.
    pub fn interventional(&self, treatment: &str, targets: &[&str]) -> Result<Conditional> {
        let i = self.index_of(treatment)?;
        let card = self.variables[i].card;
        let mut table = Vec::with_capacity(card);
        let mut target_cards = Vec::new();
        for value in 0..card {
            let m = self.intervene(treatment, value)?.joint().marginal(targets)?;
            target_cards = m.cards().to_vec();
            table.push(Some(m.masses().to_vec()));
        }
        Ok(Conditional {
            targets: targets.iter().map(|s| s.to_string()).collect(),
            target_cards,
            given: vec![treatment.to_string()],
            given_cards: vec![card],
            table,
        })
    }

    /// Average causal effect `E[outcome | do(t=1)] - E[outcome | do(t=0)]`.
    pub fn ace(&self, treatment: &str, outcome: &str) -> Result<f64> {
        for name in [treatment, outcome] {
            if self.variables[self.index_of(name)?].card != 2 {
                return Err(Error::NotBinary(name.to_string()));
            }
        }
        let p1 = self.intervene(treatment, 1)?.joint().expect_binary(outcome)?;
        let p0 = self.intervene(treatment, 0)?.joint().expect_binary(outcome)?;
        Ok(p1 - p0)
    }

    /// Draws one full assignment by ancestral sampling.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<usize> {
        let mut a = vec![0; self.variables.len()];
        for &v in &self.order {
            let pa = &self.parents[v];
            let row = pa
                .iter()
                .fold(0, |acc, &p| acc * self.variables[p].card + a[p]);
            let u: f64 = rng.random();
            let probs = &self.cpds[v][row];
            let mut acc = 0.0;
            let mut pick = probs.len() - 1;
            for (k, p) in probs.iter().enumerate() {
                acc += p;
                if u < acc {
                    pick = k;
                    break;
                }
            }
            a[v] = pick;
        }
        a
    }

    pub fn has_descendants(&self, name: &str) -> Result<bool> {
        let i = self.index_of(name)?;
        Ok(self.parents.iter().any(|pa| pa.contains(&i)))
    }
}

fn topological_order(parents: &[Vec<usize>]) -> Option<Vec<usize>> {
    let n = parents.len();
    let mut indeg: Vec<usize> = parents.iter().map(|p| p.len()).collect();
    let mut order = Vec::with_capacity(n);
    let mut ready: Vec<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
    while let Some(v) = ready.pop() {
        order.push(v);
        for (c, pa) in parents.iter().enumerate() {
            for &p in pa {
                if p == v {
                    indeg[c] -= 1;
                    if indeg[c] == 0 {
                        ready.push(c);
                    }
                }
            }
        }
    }
    (order.len() == n).then_some(order)
}
