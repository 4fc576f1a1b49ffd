use super::Scm;
use crate::error::{Error, Result};
use rand::Rng;

pub const SYNTEXT_Y_ROWS: [f64; 4] = [0.01, 0.70, 0.30, 0.99];

pub(crate) fn check_kappa(kappa: f64) -> Result<()> {
    if (0.5..=1.0).contains(&kappa) {
        Ok(())
    } else {
        Err(Error::KappaOutOfRange(kappa))
    }
}

fn bern(p: f64) -> Vec<f64> {
    vec![1.0 - p, p]
}

/// Rows of a binary child that copies its binary parent with probability `kappa`.
fn copy_rows(kappa: f64) -> Vec<Vec<f64>> {
    vec![bern(1.0 - kappa), bern(kappa)]
}

/// Syn-Text: `causal` and `confound` are fair independent coins that generate
/// `y`; `spurious` agrees with `confound` with probability `kappa`.
pub fn build_syntext(kappa: f64, confound_observed: bool) -> Result<Scm> {
    check_kappa(kappa)?;
    let scm = Scm::builder()
        .variable("causal", 2, &[], vec![bern(0.5)])
        .variable("confound", 2, &[], vec![bern(0.5)])
        .variable("spurious", 2, &["confound"], copy_rows(kappa))
        .variable(
            "y",
            2,
            &["causal", "confound"],
            SYNTEXT_Y_ROWS.iter().map(|&p| bern(p)).collect(),
        );
    let scm = if confound_observed { scm } else { scm.hidden("confound") };
    scm.build()
}

/// MNIST34 latent attributes: `y = digit XOR color`, and `rotation` agrees
/// with `y` with probability `kappa`.
pub fn build_mnist34_latent(kappa: f64) -> Result<Scm> {
    check_kappa(kappa)?;
    Scm::builder()
        .variable("digit", 2, &[], vec![bern(0.5)])
        .variable("color", 2, &[], vec![bern(0.5)])
        .variable(
            "y",
            2,
            &["color", "digit"],
            vec![bern(0.0), bern(1.0), bern(1.0), bern(0.0)],
        )
        .variable("rotation", 2, &["y"], copy_rows(kappa))
        .build()
}

/// A generated DGP together with the roles of its variables.
#[derive(Debug, Clone)]
pub struct DgpInstance {
    pub scm: Scm,
    /// Observed attributes; the first one is the attribute of interest.
    pub attributes: Vec<String>,
    /// Input nodes: the mediators `X` for DGP-1, the core feature otherwise.
    pub inputs: Vec<String>,
    pub outcome: String,
}

pub(crate) fn dgp1_scm(kappa: f64, x_rows: Vec<Vec<f64>>, y_rows: Vec<Vec<f64>>) -> Result<Scm> {
    check_kappa(kappa)?;
    Scm::builder()
        .variable("u", 2, &[], vec![bern(0.5)])
        .variable("a", 2, &["u"], copy_rows(kappa))
        .variable("x", 2, &["u", "a"], x_rows)
        .variable("y", 2, &["x"], y_rows)
        .hidden("u")
        .build()
}

pub(crate) fn dgp2_scm(kappa: f64, c_rows: Vec<Vec<f64>>, y_rows: Vec<Vec<f64>>) -> Result<Scm> {
    check_kappa(kappa)?;
    Scm::builder()
        .variable("u", 2, &[], vec![bern(0.5)])
        .variable("c", 2, &["u"], c_rows)
        .variable("s", 2, &["u"], copy_rows(kappa))
        .variable("core", 2, &[], vec![bern(0.5)])
        .variable("y", 2, &["c", "core"], y_rows)
        .hidden("u")
        .hidden("core")
        .build()
}

pub(crate) fn dgp3_scm(kappa: f64, y_rows: Vec<Vec<f64>>) -> Result<Scm> {
    check_kappa(kappa)?;
    Scm::builder()
        .variable("u", 2, &[], vec![bern(0.5)])
        .variable("a", 2, &["u"], copy_rows(kappa))
        .variable("core", 2, &[], vec![bern(0.5)])
        .variable("y", 2, &["core", "u"], y_rows)
        .hidden("u")
        .build()
}

pub(crate) fn default_dgp(template: &str, kappa: f64) -> Result<Scm> {
    let rows = |ps: &[f64]| ps.iter().map(|&p| bern(p)).collect::<Vec<_>>();
    match template {
        "dgp1" => dgp1_scm(kappa, rows(&[0.1, 0.6, 0.4, 0.9]), rows(&[0.2, 0.8])),
        "dgp2" => dgp2_scm(kappa, rows(&[0.3, 0.7]), rows(&[0.1, 0.5, 0.5, 0.9])),
        "dgp3" => dgp3_scm(kappa, rows(&[0.1, 0.5, 0.5, 0.9])),
        other => Err(Error::Config(format!("unknown DGP template `{other}`"))),
    }
}

fn random_row<R: Rng + ?Sized>(rng: &mut R) -> Vec<f64> {
    bern(rng.random_range(0.05..0.95))
}

fn random_kappa<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.random_range(0.5..0.95)
}

/// Random DGP-1: `u -> a`, `(u, a) -> x_i`, `x -> y` with one or two binary
/// mediators (at most five variables).
pub fn random_dgp1<R: Rng + ?Sized>(rng: &mut R, two_mediators: bool) -> Result<DgpInstance> {
    let kappa = random_kappa(rng);
    let mut b = Scm::builder()
        .variable("u", 2, &[], vec![random_row(rng)])
        .variable("a", 2, &["u"], copy_rows(kappa))
        .variable("x1", 2, &["u", "a"], (0..4).map(|_| random_row(rng)).collect());
    let inputs: Vec<String> = if two_mediators {
        b = b
            .variable("x2", 2, &["u", "a", "x1"], (0..8).map(|_| random_row(rng)).collect())
            .variable("y", 2, &["x1", "x2"], (0..4).map(|_| random_row(rng)).collect());
        vec!["x1".into(), "x2".into()]
    } else {
        b = b.variable("y", 2, &["x1"], (0..2).map(|_| random_row(rng)).collect());
        vec!["x1".into()]
    };
    Ok(DgpInstance {
        scm: b.hidden("u").build()?,
        attributes: vec!["a".into()],
        inputs,
        outcome: "y".into(),
    })
}

/// Random DGP-2: hidden `u` confounds the causal `c` and the spurious `s`;
/// hidden `core` and `c` generate `y`.
pub fn random_dgp2<R: Rng + ?Sized>(rng: &mut R) -> Result<DgpInstance> {
    let kappa = random_kappa(rng);
    let c_rows = (0..2).map(|_| random_row(rng)).collect();
    let y_rows = (0..4).map(|_| random_row(rng)).collect();
    Ok(DgpInstance {
        scm: dgp2_scm(kappa, c_rows, y_rows)?,
        attributes: vec!["c".into(), "s".into()],
        inputs: vec!["core".into()],
        outcome: "y".into(),
    })
}

/// Random positively confounded DGP-3: `P(a=1|u)` and `P(y=1|core,u)` both
/// increase with `u` by at least 0.1; `a` has no edge into `y`.
pub fn random_dgp3<R: Rng + ?Sized>(rng: &mut R) -> Result<DgpInstance> {
    let kappa = rng.random_range(0.6..0.95);
    let mut y_rows = Vec::with_capacity(4);
    for _core in 0..2 {
        let lo = rng.random_range(0.05..0.75);
        let hi = rng.random_range(lo + 0.1..0.95);
        y_rows.push(bern(lo));
        y_rows.push(bern(hi));
    }
    Ok(DgpInstance {
        scm: dgp3_scm(kappa, y_rows)?,
        attributes: vec!["a".into()],
        inputs: vec!["core".into()],
        outcome: "y".into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn syntext_cpd_rows() {
        let m = build_syntext(0.8, true).unwrap();
        let rows = m.cpd("y").unwrap();
        assert_eq!(rows[3][1], 0.99);
        let d = m.joint();
        assert!((d.prob(&[("causal", 1)]).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn syntext_half_kappa_decouples_spurious() {
        let m = build_syntext(0.5, true).unwrap();
        let c = m.joint().conditional(&["spurious"], &["confound"]).unwrap();
        assert_eq!(c.prob(&[1], &[1]), Some(0.5));
        assert_eq!(c.prob(&[1], &[0]), Some(0.5));
    }

    #[test]
    fn syntext_chain_product_at_kappa_one() {
        let d = build_syntext(1.0, true).unwrap().joint();
        let m = d.prob(&[("causal", 1), ("confound", 1), ("y", 1), ("spurious", 1)]).unwrap();
        assert!((m - 0.25 * 0.99).abs() < 1e-15);
    }

    #[test]
    fn hidden_confound() {
        let m = build_syntext(0.7, false).unwrap();
        assert_eq!(m.observed_names(), vec!["causal", "spurious", "y"]);
    }

    #[test]
    fn kappa_range_enforced() {
        assert!(matches!(build_syntext(0.4, true), Err(Error::KappaOutOfRange(_))));
        assert!(matches!(build_mnist34_latent(1.01), Err(Error::KappaOutOfRange(_))));
    }

    #[test]
    fn mnist_xor_and_rotation() {
        let m = build_mnist34_latent(0.9).unwrap();
        let d = m.joint();
        assert_eq!(d.prob(&[("digit", 1), ("color", 1), ("y", 1)]).unwrap(), 0.0);
        let c = d.conditional(&["rotation"], &["y"]).unwrap();
        assert!((c.prob(&[1], &[1]).unwrap() - 0.9).abs() < 1e-15);
        let flat = build_mnist34_latent(0.5).unwrap().joint();
        let c = flat.conditional(&["rotation"], &["y"]).unwrap();
        assert_eq!(c.prob(&[1], &[0]), c.prob(&[1], &[1]));
    }

    #[test]
    fn random_instances_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for i in 0..20 {
            let d1 = random_dgp1(&mut rng, i % 2 == 0).unwrap();
            assert!(d1.scm.variables().len() <= 5);
            random_dgp2(&mut rng).unwrap();
            let d3 = random_dgp3(&mut rng).unwrap();
            assert_eq!(d3.scm.ace("a", "y").unwrap(), 0.0);
        }
    }
}
