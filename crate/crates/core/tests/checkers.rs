use psk_core::cert::{check_lia, check_rup};
use psk_core::solver::{solve_lia, solve_sat, LiaResult, SatResult, DEFAULT_CONFLICT_BUDGET, DEFAULT_NODE_BUDGET};
use psk_core::testkit::{
    brute_force_lia, brute_force_sat, mutate_cnf, mutate_lia, mutate_lia_problem, mutate_rup, random_cnf, random_lia,
    small_cnf_pool,
};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

#[test]
fn sat_solver_agrees_with_brute_force() {
    let mut rng = StdRng::seed_from_u64(3);
    let mut pool = small_cnf_pool(&mut rng, 150);
    pool.extend((0..300).map(|_| {
        let n = rng.gen_range(5..=10);
        random_cnf(&mut rng, n, (n as usize * 4).max(6), 3)
    }));
    for p in &pool {
        match solve_sat(p, DEFAULT_CONFLICT_BUDGET) {
            SatResult::Sat(m) => {
                assert!(brute_force_sat(p));
                assert!(p
                    .clauses()
                    .iter()
                    .all(|c| c.iter().any(|&l| m[l.unsigned_abs() as usize - 1] == (l > 0))));
            }
            SatResult::Unsat(proof) => {
                assert!(!brute_force_sat(p));
                check_rup(p, &proof).unwrap();
            }
            SatResult::ResourceLimit => panic!("budget exhausted on {} vars", p.num_vars()),
        }
    }
}

#[test]
fn lia_solver_agrees_with_brute_force() {
    let mut rng = StdRng::seed_from_u64(5);
    for _ in 0..600 {
        let n = rng.gen_range(1..=3);
        let rows = rng.gen_range(1..=4);
        let p = random_lia(&mut rng, n, rows, 3);
        match solve_lia(&p, DEFAULT_NODE_BUDGET) {
            LiaResult::Feasible(m) => assert!(p.holds(&m)),
            LiaResult::Infeasible(c) => {
                assert!(!brute_force_lia(&p, 3));
                check_lia(&p, &c).unwrap();
            }
            LiaResult::ResourceLimit => panic!("budget exhausted"),
        }
    }
}

#[test]
fn mutated_certificates_never_prove_satisfiable_problems() {
    let mut rng = StdRng::seed_from_u64(7);
    let (mut mutants, mut on_sat) = (0, 0);
    while mutants < 3000 {
        let n = rng.gen_range(2..=6);
        let m = rng.gen_range(n as usize * 3..=n as usize * 5);
        let p = random_cnf(&mut rng, n, m, 3);
        let SatResult::Unsat(proof) = solve_sat(&p, DEFAULT_CONFLICT_BUDGET) else {
            continue;
        };
        for _ in 0..10 {
            let (q, pr) = if rng.gen_bool(0.5) {
                (p.clone(), mutate_rup(&mut rng, &proof, n))
            } else {
                let mut q = mutate_cnf(&mut rng, &p);
                for _ in 0..rng.gen_range(0..4) {
                    q = mutate_cnf(&mut rng, &q);
                }
                (q, proof.clone())
            };
            let sat = brute_force_sat(&q);
            on_sat += usize::from(sat);
            mutants += 1;
            if check_rup(&q, &pr).is_ok() {
                assert!(!sat, "accepted a proof for a satisfiable CNF");
            }
        }
    }
    assert!(on_sat > 300, "{on_sat}");
    let (mut mutants, mut on_sat) = (0, 0);
    while mutants < 3000 {
        let rows = rng.gen_range(1..=4);
        let n = rng.gen_range(1..=3);
        let p = random_lia(&mut rng, n, rows, 3);
        let LiaResult::Infeasible(cert) = solve_lia(&p, DEFAULT_NODE_BUDGET) else {
            continue;
        };
        for _ in 0..10 {
            let (q, c) = if rng.gen_bool(0.5) {
                (p.clone(), mutate_lia(&mut rng, &cert))
            } else {
                let mut q = mutate_lia_problem(&mut rng, &p, rows);
                for _ in 0..rng.gen_range(0..3) {
                    q = mutate_lia_problem(&mut rng, &q, rows);
                }
                (q, cert.clone())
            };
            let feasible = brute_force_lia(&q, 3);
            on_sat += usize::from(feasible);
            mutants += 1;
            if check_lia(&q, &c).is_ok() {
                assert!(!feasible, "accepted a certificate for a feasible system");
            }
        }
    }
    assert!(on_sat > 300, "{on_sat}");
}
