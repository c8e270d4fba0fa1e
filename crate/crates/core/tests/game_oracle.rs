use gridsec::game::{
    best_response, certificate, expected_utility, solve_zero_sum_ne, MixedStrategy, PayoffMatrix,
    Player,
};
use proptest::prelude::*;
use rand::{rngs::StdRng, Rng, SeedableRng};

/// Defender's guaranteed value on a 3-row game, scanning the 2-simplex on a
/// lattice of the given step.
fn grid_minimax(u: &[Vec<f64>], step: f64) -> f64 {
    let n = (1.0 / step).round() as usize;
    let mut best = f64::NEG_INFINITY;
    for i in 0..=n {
        for j in 0..=n - i {
            let g = [i as f64 * step, j as f64 * step, (n - i - j) as f64 * step];
            let worst = (0..u[0].len())
                .map(|c| (0..3).map(|r| g[r] * u[r][c]).sum::<f64>())
                .fold(f64::NEG_INFINITY, f64::max);
            best = best.max(-worst);
        }
    }
    best
}

fn random_matrix(rng: &mut StdRng, rows: usize, cols: usize) -> Vec<Vec<f64>> {
    (0..rows)
        .map(|_| (0..cols).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect()
}

fn random_mix(rng: &mut StdRng, n: usize) -> MixedStrategy {
    let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
    let s: f64 = w.iter().sum();
    MixedStrategy::new(w.into_iter().map(|x| x / s).collect()).unwrap()
}

#[test]
fn three_by_three_matches_grid_search() {
    let mut rng = StdRng::seed_from_u64(7);
    for _ in 0..25 {
        let u = random_matrix(&mut rng, 3, 3);
        let m = PayoffMatrix::from_rows(u.clone()).unwrap();
        let eq = solve_zero_sum_ne(&m).unwrap();
        let grid = grid_minimax(&u, 1e-3);
        // the lattice can only under-estimate; Lipschitz constant <= 2 * max|u|
        assert!(grid <= eq.value + 1e-9, "{grid} > {}", eq.value);
        assert!(eq.value - grid <= 4e-3, "{} vs {grid}", eq.value);
    }
}

#[test]
fn expected_utility_matches_double_sum() {
    let mut rng = StdRng::seed_from_u64(11);
    for _ in 0..50 {
        let (r, c) = (rng.gen_range(1..7), rng.gen_range(1..7));
        let u = random_matrix(&mut rng, r, c);
        let m = PayoffMatrix::from_rows(u.clone()).unwrap();
        let (gd, ga) = (random_mix(&mut rng, r), random_mix(&mut rng, c));
        let mut want = 0.0;
        for i in 0..r {
            for j in 0..c {
                want += gd.probs()[i] * ga.probs()[j] * u[i][j];
            }
        }
        let (d, a) = expected_utility(&m, &gd, &ga).unwrap();
        assert!((a - want).abs() <= 1e-9);
        assert_eq!(d, -a);
    }
}

#[test]
fn attacker_best_response_is_column_average_argmax() {
    let u = vec![
        vec![1.0, 0.0, 0.0],
        vec![0.0, 1.0, 0.0],
        vec![0.0, 0.0, 1.0],
        vec![0.0, 0.0, 1.0],
    ];
    let m = PayoffMatrix::from_rows(u.clone()).unwrap();
    let br = best_response(&m, Player::Attacker, &MixedStrategy::uniform(4)).unwrap();
    let avgs: Vec<f64> = (0..3)
        .map(|j| u.iter().map(|r| r[j]).sum::<f64>() / 4.0)
        .collect();
    assert_eq!(br.index, 2);
    assert_eq!(br.value, avgs[2]);
    assert!(!br.is_tie());
}

#[test]
fn certificates_hold_on_random_games() {
    let mut rng = StdRng::seed_from_u64(3);
    for _ in 0..100 {
        let (r, c) = (rng.gen_range(1..9), rng.gen_range(1..9));
        let m = PayoffMatrix::from_rows(random_matrix(&mut rng, r, c)).unwrap();
        let eq = solve_zero_sum_ne(&m).unwrap();
        let cert = certificate(&m, &eq).unwrap();
        assert!(cert.worst_gain() <= 1e-6);
        assert!(cert.gap() <= 1e-6);
    }
}

#[test]
fn solve_is_deterministic() {
    let mut rng = StdRng::seed_from_u64(5);
    let m = PayoffMatrix::from_rows(random_matrix(&mut rng, 6, 6)).unwrap();
    let a = solve_zero_sum_ne(&m).unwrap();
    let b = solve_zero_sum_ne(&m).unwrap();
    assert_eq!(a, b);
}

proptest! {
    #[test]
    fn shift_moves_value_only(seed in any::<u64>(), shift in -5.0..5.0f64) {
        let mut rng = StdRng::seed_from_u64(seed);
        let m = PayoffMatrix::from_rows(random_matrix(&mut rng, 4, 4)).unwrap();
        let shifted = m.map(|v| v + shift);
        let e0 = solve_zero_sum_ne(&m).unwrap();
        let e1 = solve_zero_sum_ne(&shifted).unwrap();
        prop_assert!((e1.value - (e0.value - shift)).abs() <= 1e-6);
        // mixes may differ between equilibria; each must still certify
        // against the other game
        let swapped = gridsec::game::Equilibrium { value: e0.value - shift, ..e0.clone() };
        let cert = certificate(&shifted, &swapped).unwrap();
        prop_assert!(cert.worst_gain() <= 1e-6);
    }

    #[test]
    fn scaling_scales_value(seed in any::<u64>(), k in 0.01..1000.0f64) {
        let mut rng = StdRng::seed_from_u64(seed);
        let m = PayoffMatrix::from_rows(random_matrix(&mut rng, 5, 3)).unwrap();
        let scaled = m.map(|v| v * k);
        let e0 = solve_zero_sum_ne(&m).unwrap();
        let e1 = solve_zero_sum_ne(&scaled).unwrap();
        prop_assert!((e1.value - k * e0.value).abs() <= 1e-6 * k);
        let mix = MixedStrategy::uniform(3);
        let b0 = best_response(&m, Player::Defender, &mix).unwrap();
        let b1 = best_response(&scaled, Player::Defender, &mix).unwrap();
        prop_assert_eq!(b0.index, b1.index);
    }

    #[test]
    fn zero_sum_antisymmetry(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let m = PayoffMatrix::from_rows(random_matrix(&mut rng, 3, 5)).unwrap();
        let (d, a) = expected_utility(&m, &random_mix(&mut rng, 3), &random_mix(&mut rng, 5)).unwrap();
        prop_assert_eq!(d, -a);
    }
}
