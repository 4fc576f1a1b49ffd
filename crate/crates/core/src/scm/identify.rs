use super::distribution::{decode, encode};
use super::{Conditional, Distribution};
use crate::error::{Error, Result};

/// `P(Y|do(A)) = Σ_x P(Y|x) P(x|do(A))`.
///
/// `p_y_given_x` conditions on the mediators `X`; `p_x_do_a` has the same
/// mediators as targets, in the same order.
pub fn identify_dgp1(p_y_given_x: &Conditional, p_x_do_a: &Conditional) -> Result<Conditional> {
    if p_y_given_x.given != p_x_do_a.targets || p_y_given_x.given_cards != p_x_do_a.target_cards {
        return Err(Error::MismatchedSupport(format!(
            "P(Y|{:?}) cannot be combined with P({:?}|do(A))",
            p_y_given_x.given, p_x_do_a.targets
        )));
    }
    let width: usize = p_y_given_x.target_cards.iter().product();
    let mut table = Vec::with_capacity(p_x_do_a.table.len());
    for row in &p_x_do_a.table {
        let Some(px) = row else {
            table.push(None);
            continue;
        };
        let mut out = vec![0.0; width];
        for (xi, &pxi) in px.iter().enumerate() {
            if pxi == 0.0 {
                continue;
            }
            let py = p_y_given_x.table[xi].as_ref().ok_or_else(|| {
                Error::Unsupported(format!("{:?} = {:?}", p_y_given_x.given, decode(xi, &p_y_given_x.given_cards)))
            })?;
            for (o, p) in out.iter_mut().zip(py) {
                *o += pxi * p;
            }
        }
        table.push(Some(out));
    }
    Ok(Conditional {
        targets: p_y_given_x.targets.clone(),
        target_cards: p_y_given_x.target_cards.clone(),
        given: p_x_do_a.given.clone(),
        given_cards: p_x_do_a.given_cards.clone(),
        table,
    })
}

/// Adjustment over the remaining observed attributes:
/// `P(Y|do(target)) = Σ_{V∖target} P(V∖target) P(Y|V)`.
///
/// `p_y_given_v` must condition on exactly the variables of `p_v`, in order.
pub fn identify_dgp2(p_v: &Distribution, p_y_given_v: &Conditional, target: &str) -> Result<Conditional> {
    if p_y_given_v.given.as_slice() != p_v.names() || p_y_given_v.given_cards.as_slice() != p_v.cards() {
        return Err(Error::MismatchedSupport(format!(
            "P(Y|{:?}) conditions on different variables than P({:?})",
            p_y_given_v.given,
            p_v.names()
        )));
    }
    let t = p_v.position(target)?;
    let cards = p_v.cards();
    let rest: Vec<&str> = p_v
        .names()
        .iter()
        .filter(|n| n.as_str() != target)
        .map(String::as_str)
        .collect();
    let p_rest = p_v.marginal(&rest)?;
    let width: usize = p_y_given_v.target_cards.iter().product();
    let mut table = Vec::with_capacity(cards[t]);
    for a in 0..cards[t] {
        let mut out = vec![0.0; width];
        for (r, pr) in p_rest.iter() {
            if pr == 0.0 {
                continue;
            }
            let mut v = r.clone();
            v.insert(t, a);
            let py = p_y_given_v.table[encode(&v, cards)]
                .as_ref()
                .ok_or_else(|| Error::Unsupported(format!("{:?} = {v:?}", p_v.names())))?;
            for (o, p) in out.iter_mut().zip(py) {
                *o += pr * p;
            }
        }
        table.push(Some(out));
    }
    Ok(Conditional {
        targets: p_y_given_v.targets.clone(),
        target_cards: p_y_given_v.target_cards.clone(),
        given: vec![target.to_string()],
        given_cards: vec![cards[t]],
        table,
    })
}

/// Invariance score of `node` with respect to `outcome`:
/// `Σ_f P(f) · TV(P(Y | f without node), P(Y | f))` over the feature set `f`.
/// Zero iff `Y ⊥ node | rest of f` on the support.
pub fn tv_invariance_score(joint: &Distribution, outcome: &str, features: &[&str], node: &str) -> Result<f64> {
    let n = features
        .iter()
        .position(|f| *f == node)
        .ok_or_else(|| Error::UnknownVariable(node.to_string()))?;
    let reduced: Vec<&str> = features.iter().copied().filter(|f| *f != node).collect();
    let full = joint.conditional(&[outcome], features)?;
    let part = joint.conditional(&[outcome], &reduced)?;
    let pf = joint.marginal(features)?;
    let mut score = 0.0;
    for (f, m) in pf.iter() {
        if m == 0.0 {
            continue;
        }
        let mut g = f.clone();
        g.remove(n);
        let (Some(a), Some(b)) = (full.row(&f), part.row(&g)) else {
            continue;
        };
        let tv: f64 = a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / 2.0;
        score += m * tv;
    }
    Ok(score)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scm::Scm;

    #[test]
    fn independent_mediator_gives_marginal() {
        let m = Scm::builder()
            .variable("a", 2, &[], vec![vec![0.4, 0.6]])
            .variable("x", 2, &[], vec![vec![0.3, 0.7]])
            .variable("y", 2, &["x"], vec![vec![0.8, 0.2], vec![0.1, 0.9]])
            .build()
            .unwrap();
        let d = m.joint();
        let pyx = d.conditional(&["y"], &["x"]).unwrap();
        let pxa = m.interventional("a", &["x"]).unwrap();
        let r = identify_dgp1(&pyx, &pxa).unwrap();
        let py = d.expect_binary("y").unwrap();
        assert!((r.prob(&[1], &[0]).unwrap() - py).abs() < 1e-15);
        assert!((r.prob(&[1], &[1]).unwrap() - py).abs() < 1e-15);
    }

    #[test]
    fn copy_mediator_reduces_to_conditional() {
        let m = Scm::builder()
            .variable("a", 2, &[], vec![vec![0.4, 0.6]])
            .variable("x", 2, &["a"], vec![vec![1.0, 0.0], vec![0.0, 1.0]])
            .variable("y", 2, &["x"], vec![vec![0.8, 0.2], vec![0.1, 0.9]])
            .build()
            .unwrap();
        let pyx = m.joint().conditional(&["y"], &["x"]).unwrap();
        let r = identify_dgp1(&pyx, &m.interventional("a", &["x"]).unwrap()).unwrap();
        assert!((r.prob(&[1], &[1]).unwrap() - 0.9).abs() < 1e-15);
        assert!((r.prob(&[1], &[0]).unwrap() - 0.2).abs() < 1e-15);
    }

    #[test]
    fn mismatched_supports_rejected() {
        let m = Scm::builder()
            .variable("a", 2, &[], vec![vec![0.5, 0.5]])
            .variable("x", 2, &["a"], vec![vec![0.5, 0.5]; 2])
            .variable("y", 2, &["x"], vec![vec![0.5, 0.5]; 2])
            .build()
            .unwrap();
        let pya = m.joint().conditional(&["y"], &["a"]).unwrap();
        let pxa = m.interventional("a", &["x"]).unwrap();
        assert!(matches!(identify_dgp1(&pya, &pxa), Err(Error::MismatchedSupport(_))));
    }

    #[test]
    fn single_attribute_adjustment_is_conditional() {
        let m = Scm::builder()
            .variable("s", 2, &[], vec![vec![0.3, 0.7]])
            .variable("y", 2, &["s"], vec![vec![0.6, 0.4], vec![0.2, 0.8]])
            .build()
            .unwrap();
        let d = m.joint();
        let pv = d.marginal(&["s"]).unwrap();
        let pyv = d.conditional(&["y"], &["s"]).unwrap();
        let r = identify_dgp2(&pv, &pyv, "s").unwrap();
        assert_eq!(r.table, pyv.table);
        assert!(matches!(identify_dgp2(&pv, &pyv, "q"), Err(Error::UnknownVariable(_))));
    }
}
