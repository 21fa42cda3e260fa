//! One full cycle on the four-agent example with hand-fixed positions and
//! coefficients, compared against values worked out by hand.

mod golden;

use golden::*;
use pcd::model::{Assignment, Domain};
use pcd::solver::LocalSwarm;

fn assert_2dp(actual: f64, expected: f64, what: &str) {
    assert_eq!(round_to(actual, 2), expected, "{what}: got {actual}");
}

#[test]
fn local_fitness_table() {
    let o = run_one_cycle();
    for (i, row) in LOCAL_FITNESS.iter().enumerate() {
        for (k, &want) in row.iter().enumerate() {
            assert_2dp(o.local[i][k], want, &format!("local fitness a{i} p{k}"));
        }
    }
    // the one value worked out explicitly: a4, first particle
    assert_eq!(o.local[3][0], 10.0);
}

#[test]
fn fitness_table_with_halved_root() {
    let o = run_one_cycle();
    for (i, row) in FITNESS.iter().enumerate() {
        for (k, &want) in row.iter().enumerate() {
            assert_2dp(o.fitness[i][k], want, &format!("fitness a{i} p{k}"));
        }
    }
    assert!((o.fitness[0][0] - 14.56).abs() < 1e-12);
}

#[test]
fn root_fitness_matches_global_cost() {
    let inst = instance();
    let o = run_one_cycle();
    for (k, p) in PARTICLES.iter().enumerate() {
        let g = inst.global_cost(&Assignment::new(p.to_vec())).unwrap();
        assert!((o.fitness[0][k] - g).abs() < 1e-9, "particle {k}: {} vs {g}", o.fitness[0][k]);
    }
}

#[test]
fn best_update_table() {
    let o = run_one_cycle();
    assert_eq!(o.improved, vec![0, 1, 2, 3]);
    assert_eq!(o.star, Some(2));
    assert_2dp(o.g_best_fitness, 7.00, "P* fitness");
    for (i, row) in o.p_best.iter().enumerate() {
        for (k, p) in row.iter().enumerate() {
            assert_eq!(*p, Some(PARTICLES[k][i]));
        }
    }
    assert_eq!(o.g_best, vec![Some(0.0), Some(1.0), Some(2.0), Some(-2.0)]);
}

#[test]
fn crossover_probability_table() {
    let o = run_one_cycle();
    for (i, row) in B_P.iter().enumerate() {
        for (k, &want) in row.iter().enumerate() {
            assert_eq!(round_to(o.b_p[i][k], 3), want, "b_p a{i} p{k}: {}", o.b_p[i][k]);
        }
    }
}

#[test]
fn variable_update_table() {
    let o = run_one_cycle();
    for (i, row) in UPDATED.iter().enumerate() {
        for (k, &(v, x)) in row.iter().enumerate() {
            assert_2dp(o.v[i][k], v, &format!("v a{i} p{k}"));
            assert_2dp(o.x[i][k], x, &format!("x a{i} p{k}"));
        }
    }
    // best particle on the root: 0 + 0 + 0 + 1·(1 − 0.8)
    assert!((o.v[0][2] - 0.2).abs() < 1e-12);
}

#[test]
fn crossover_of_two_root_particles() {
    let domain = Domain::new(-10.0, 10.0);
    let mut s = LocalSwarm::from_positions(PARTICLES.iter().map(|p| p[0]).collect());
    let blended = s.crossover_pair(1, 3, 0.3, domain);
    assert!(!blended);
    assert_2dp(s.x[1], 0.17, "x_a");
    assert_2dp(s.x[3], -1.07, "x_b");
    assert_eq!(s.v, vec![0.0; 4]);
}
