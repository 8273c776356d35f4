//! Branch-and-bound over the rational relaxation. The relaxation is decided
//! by Fourier-Motzkin elimination, tracking the non-negative combination of
//! input rows behind every derived row; an infeasible node yields those
//! multipliers as its Farkas certificate.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::cert::LiaCert;
use crate::translate::{LiaProblem, Row};

pub const DEFAULT_NODE_BUDGET: usize = 10_000;
const MAX_ROWS: usize = 20_000;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LiaResult {
    Feasible(Vec<i64>),
    Infeasible(LiaCert),
    ResourceLimit,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
struct Derived {
    coeffs: Vec<BigRational>,
    rhs: BigRational,
    lambda: BTreeMap<usize, BigRational>,
}

enum Relaxation {
    Feasible(Vec<BigRational>),
    Infeasible(Vec<BigRational>),
    TooLarge,
}

fn contradiction(rows: &[Derived], m: usize) -> Option<Vec<BigRational>> {
    rows.iter()
        .find(|r| r.rhs.is_negative() && r.coeffs.iter().all(|c| c.is_zero()))
        .map(|r| {
            (0..m)
                .map(|i| r.lambda.get(&i).cloned().unwrap_or_else(BigRational::zero))
                .collect()
        })
}

fn relax(rows: &[(Vec<BigInt>, BigInt)], n: usize) -> Relaxation {
    let m = rows.len();
    let mut cur: Vec<Derived> = rows
        .iter()
        .enumerate()
        .map(|(i, (a, b))| Derived {
            coeffs: a.iter().map(|c| BigRational::from_integer(c.clone())).collect(),
            rhs: BigRational::from_integer(b.clone()),
            lambda: BTreeMap::from([(i, BigRational::one())]),
        })
        .collect();
    let mut eliminated: Vec<(usize, Vec<Derived>)> = Vec::new();
    loop {
        if let Some(l) = contradiction(&cur, m) {
            return Relaxation::Infeasible(l);
        }
        cur.retain(|r| r.coeffs.iter().any(|c| !c.is_zero()));
        // cheapest variable to eliminate
        let pick = (0..n)
            .filter_map(|v| {
                let pos = cur.iter().filter(|r| r.coeffs[v].is_positive()).count();
                let neg = cur.iter().filter(|r| r.coeffs[v].is_negative()).count();
                (pos + neg > 0).then_some((pos * neg, pos + neg, v))
            })
            .min();
        let Some((_, _, x)) = pick else { break };
        let (with, without): (Vec<Derived>, Vec<Derived>) = cur.into_iter().partition(|r| !r.coeffs[x].is_zero());
        let mut next = without;
        let (pos, neg): (Vec<&Derived>, Vec<&Derived>) = with.iter().partition(|r| r.coeffs[x].is_positive());
        for p in &pos {
            for q in &neg {
                let sp = p.coeffs[x].recip();
                let sq = -q.coeffs[x].recip();
                let coeffs = p.coeffs.iter().zip(&q.coeffs).map(|(a, b)| a * &sp + b * &sq).collect();
                let rhs = &p.rhs * &sp + &q.rhs * &sq;
                let mut lambda = BTreeMap::new();
                for (i, l) in &p.lambda {
                    *lambda.entry(*i).or_insert_with(BigRational::zero) += l * &sp;
                }
                for (i, l) in &q.lambda {
                    *lambda.entry(*i).or_insert_with(BigRational::zero) += l * &sq;
                }
                next.push(Derived { coeffs, rhs, lambda });
            }
        }
        next.sort();
        next.dedup_by(|a, b| a.coeffs == b.coeffs && a.rhs == b.rhs);
        if next.len() > MAX_ROWS {
            return Relaxation::TooLarge;
        }
        eliminated.push((x, with));
        cur = next;
    }
    // Back-substitute, latest elimination first.
    let mut val = vec![BigRational::zero(); n];
    for (x, rows) in eliminated.iter().rev() {
        let mut lo: Option<BigRational> = None;
        let mut hi: Option<BigRational> = None;
        for r in rows {
            let rest: BigRational = (0..n).filter(|&j| j != *x).map(|j| &r.coeffs[j] * &val[j]).sum();
            let bound = (&r.rhs - rest) / &r.coeffs[*x];
            if r.coeffs[*x].is_positive() {
                hi = Some(hi.map_or(bound.clone(), |h| h.min(bound)));
            } else {
                lo = Some(lo.map_or(bound.clone(), |l| l.max(bound)));
            }
        }
        let clamp = |v: BigRational, lo: &Option<BigRational>, hi: &Option<BigRational>| {
            let v = lo.as_ref().map_or(v.clone(), |l| v.max(l.clone()));
            hi.as_ref().map_or(v.clone(), |h| v.min(h.clone()))
        };
        let ilo = lo.as_ref().map(|l| l.ceil());
        let ihi = hi.as_ref().map(|h| h.floor());
        val[*x] = match (&ilo, &ihi) {
            (Some(a), Some(b)) if a > b => clamp(BigRational::zero(), &lo, &hi),
            _ => clamp(BigRational::zero(), &ilo, &ihi),
        };
    }
    Relaxation::Feasible(val)
}

/// Scales multipliers to coprime integers where possible.
fn normalize(ls: Vec<BigRational>) -> Vec<BigRational> {
    let den = ls.iter().fold(BigInt::one(), |acc, l| acc.lcm(l.denom()));
    let ints: Vec<BigInt> = ls
        .iter()
        .map(|l| (l * BigRational::from_integer(den.clone())).to_integer())
        .collect();
    let g = ints.iter().fold(BigInt::zero(), |acc, i| acc.gcd(i));
    if g.is_zero() {
        return ls;
    }
    ints.into_iter().map(|i| BigRational::from_integer(i / &g)).collect()
}

struct Search<'a> {
    p: &'a LiaProblem,
    budget: usize,
    nodes: usize,
}

enum Node {
    Model(Vec<i64>),
    Cert(LiaCert),
    Limit,
}

impl Search<'_> {
    fn node(&mut self, rows: &mut Vec<(Vec<BigInt>, BigInt)>) -> Node {
        self.nodes += 1;
        if self.nodes > self.budget {
            return Node::Limit;
        }
        let n = self.p.vars().len();
        let sol = match relax(rows, n) {
            Relaxation::Infeasible(l) => return Node::Cert(LiaCert::Farkas(normalize(l))),
            Relaxation::TooLarge => return Node::Limit,
            Relaxation::Feasible(s) => s,
        };
        let Some(x) = sol.iter().position(|v| !v.is_integer()) else {
            return match sol.iter().map(|v| v.to_integer().to_i64()).collect::<Option<Vec<_>>>() {
                Some(m) => Node::Model(m),
                None => Node::Limit,
            };
        };
        let Some(b) = sol[x].floor().to_integer().to_i64() else {
            return Node::Limit;
        };
        let unit = |c: i64| {
            let mut a = vec![BigInt::zero(); n];
            a[x] = BigInt::from(c);
            a
        };
        let mut kids = Vec::new();
        for (a, rhs) in [
            (unit(1), BigInt::from(b)),
            (unit(-1), -(BigInt::from(b) + BigInt::one())),
        ] {
            rows.push((a, rhs));
            let r = self.node(rows);
            rows.pop();
            match r {
                Node::Cert(c) => kids.push(c),
                other => return other,
            }
        }
        let right = kids.pop().expect("two children");
        let left = kids.pop().expect("two children");
        Node::Cert(LiaCert::Branch {
            var: self.p.vars()[x].clone(),
            bound: b,
            left: Box::new(left),
            right: Box::new(right),
        })
    }
}

fn dense(rows: &[Row], n: usize) -> Vec<(Vec<BigInt>, BigInt)> {
    rows.iter()
        .map(|r| {
            let mut a = vec![BigInt::zero(); n];
            for &(v, c) in &r.coeffs {
                a[v] += BigInt::from(c);
            }
            (a, BigInt::from(r.rhs))
        })
        .collect()
}

/// Decides integer feasibility of `p`.
pub fn solve_lia(p: &LiaProblem, node_budget: usize) -> LiaResult {
    let mut rows = dense(&p.rows(), p.vars().len());
    let mut s = Search {
        p,
        budget: node_budget,
        nodes: 0,
    };
    match s.node(&mut rows) {
        Node::Model(m) => LiaResult::Feasible(m),
        Node::Cert(c) => LiaResult::Infeasible(c),
        Node::Limit => LiaResult::ResourceLimit,
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::cert::check_lia;
    use crate::translate::{LinConstraint, LinOp};

    fn problem(n: usize, cs: Vec<LinConstraint>) -> LiaProblem {
        LiaProblem::new((0..n).map(|i| format!("x{i}")).collect(), cs)
    }

    fn c(coeffs: &[i64], op: LinOp, rhs: i64) -> LinConstraint {
        LinConstraint::new(coeffs.iter().copied().enumerate().collect(), op, rhs)
    }

    #[test]
    fn spec_examples() {
        let p = problem(1, vec![c(&[1], LinOp::Ge, 1), c(&[1], LinOp::Le, 0)]);
        let LiaResult::Infeasible(cert) = solve_lia(&p, 10) else {
            panic!()
        };
        assert_eq!(cert.to_string(), "(farkas 1 1)");
        check_lia(&p, &cert).unwrap();

        let p = problem(1, vec![c(&[2], LinOp::Eq, 1)]);
        let LiaResult::Infeasible(cert) = solve_lia(&p, 10) else {
            panic!()
        };
        assert!(matches!(cert, LiaCert::Branch { bound: 0, .. }), "{cert}");
        check_lia(&p, &cert).unwrap();
        assert!((-2..=2).all(|x| !p.holds(&[x])));

        let p = problem(2, vec![c(&[1, 1], LinOp::Ge, 0)]);
        assert_eq!(solve_lia(&p, 10), LiaResult::Feasible(vec![0, 0]));
    }

    #[test]
    fn unbounded_parity_hits_budget() {
        let p = problem(2, vec![c(&[2, -2], LinOp::Eq, 1)]);
        assert_eq!(solve_lia(&p, 50), LiaResult::ResourceLimit);
    }

    fn brute_force(p: &LiaProblem, n: usize) -> bool {
        let mut m = vec![-10i64; n];
        loop {
            if p.holds(&m) {
                return true;
            }
            let mut i = 0;
            while i < n && m[i] == 10 {
                m[i] = -10;
                i += 1;
            }
            if i == n {
                return false;
            }
            m[i] += 1;
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(500))]

        #[test]
        fn agrees_with_enumeration(
            n in 1usize..=3,
            raw in prop::collection::vec((prop::collection::vec(-3i64..=3, 3), 0u8..3, -5i64..=5), 1..6),
            bounds in prop::collection::vec((-5i64..=5, 0i64..=5), 3),
        ) {
            let mut cs: Vec<LinConstraint> = raw
                .iter()
                .map(|(a, op, b)| c(&a[..n], [LinOp::Le, LinOp::Ge, LinOp::Eq][*op as usize], *b))
                .collect();
            // Box every variable so no solution lies outside the search range.
            for (i, (lo, w)) in bounds.iter().take(n).enumerate() {
                let mut e = vec![0; n];
                e[i] = 1;
                cs.push(c(&e, LinOp::Ge, *lo));
                cs.push(c(&e, LinOp::Le, lo + w));
            }
            let p = problem(n, cs);
            match solve_lia(&p, DEFAULT_NODE_BUDGET) {
                LiaResult::Feasible(m) => {
                    prop_assert!(p.holds(&m));
                    prop_assert!(brute_force(&p, n));
                }
                LiaResult::Infeasible(cert) => {
                    prop_assert!(check_lia(&p, &cert).is_ok());
                    prop_assert!(!brute_force(&p, n));
                }
                LiaResult::ResourceLimit => prop_assert!(false, "budget exhausted on a bounded problem"),
            }
        }
    }
}
