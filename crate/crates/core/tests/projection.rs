use causal_ic::invclass::{cost, project, FeasibleSet};
use causal_ic::seed;
use proptest::prelude::*;
use rand::Rng;

struct Case {
    v: Vec<f64>,
    x_bar: Vec<f64>,
    c_up: Vec<f64>,
    c_down: Vec<f64>,
    budget: f64,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

fn random_case(rng: &mut impl Rng, k: usize) -> Case {
    let lower: Vec<f64> = (0..k).map(|_| rng.random_range(-0.5..0.0)).collect();
    let upper: Vec<f64> = (0..k).map(|_| rng.random_range(0.5..1.0)).collect();
    let x_bar: Vec<f64> = (0..k).map(|t| rng.random_range(lower[t]..upper[t])).collect();
    // Some coordinates get a free direction.
    let c_up = (0..k).map(|_| if rng.random::<f64>() < 0.15 { 0.0 } else { rng.random_range(0.3..3.0) }).collect();
    let c_down = (0..k).map(|_| if rng.random::<f64>() < 0.15 { 0.0 } else { rng.random_range(0.3..3.0) }).collect();
    let v = x_bar.iter().map(|x| x + rng.random_range(-0.8..0.8)).collect();
    Case { v, x_bar, c_up, c_down, budget: rng.random_range(0.0..1.2), lower, upper }
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Brute force over a grid with roughly `n` nodes per axis, anchored at `x̄` so
/// the anchor is always a node. Returns the closest feasible node to `v`, the
/// grid steps, and the worst value of `⟨v − p, g − p⟩` over all feasible nodes `g`.
fn grid_oracle(c: &Case, n: usize, p: &[f64]) -> (Vec<f64>, Vec<f64>, f64) {
    let k = c.v.len();
    let steps: Vec<f64> = (0..k).map(|t| (c.upper[t] - c.lower[t]) / (n - 1) as f64).collect();
    let axes: Vec<Vec<f64>> = (0..k)
        .map(|t| {
            let lo = ((c.lower[t] - c.x_bar[t]) / steps[t]).ceil() as i64;
            let hi = ((c.upper[t] - c.x_bar[t]) / steps[t]).floor() as i64;
            (lo..=hi).map(|j| c.x_bar[t] + j as f64 * steps[t]).collect()
        })
        .collect();
    let mut best = (f64::INFINITY, c.x_bar.clone());
    let mut worst_vi = f64::NEG_INFINITY;
    let mut idx = vec![0usize; k];
    let mut point = vec![0.0; k];
    let mut z = vec![0.0; k];
    loop {
        for t in 0..k {
            point[t] = axes[t][idx[t]];
            z[t] = point[t] - c.x_bar[t];
        }
        if cost(&z, &c.c_up, &c.c_down) <= c.budget {
            let d = dist2(&point, &c.v);
            if d < best.0 {
                best = (d, point.clone());
            }
            let vi: f64 = (0..k).map(|t| (c.v[t] - p[t]) * (point[t] - p[t])).sum();
            worst_vi = worst_vi.max(vi);
        }
        let mut t = 0;
        loop {
            if t == k {
                return (best.1, steps, worst_vi);
            }
            idx[t] += 1;
            if idx[t] < axes[t].len() {
                break;
            }
            idx[t] = 0;
            t += 1;
        }
    }
}

#[test]
fn matches_grid_oracle_on_random_cases() {
    let mut rng = seed::rng(41);
    for case in 0..50 {
        let k = 1 + case % 3;
        let c = random_case(&mut rng, k);
        let got = project(&c.v, &c.x_bar, &c.c_up, &c.c_down, c.budget, &c.lower, &c.upper).unwrap();
        let (grid, steps, worst_vi) = grid_oracle(&c, 200, &got);
        let z: Vec<f64> = got.iter().zip(&c.x_bar).map(|(a, b)| a - b).collect();
        assert!(cost(&z, &c.c_up, &c.c_down) <= c.budget + 1e-8, "case {case}: over budget");
        for t in 0..k {
            assert!(got[t] >= c.lower[t] - 1e-12 && got[t] <= c.upper[t] + 1e-12);
        }
        // No feasible node is closer to v than the projection.
        assert!(dist2(&got, &c.v) <= dist2(&grid, &c.v) + 1e-12, "case {case}: grid node closer");
        // Rounding the projection toward x̄ gives a feasible node, so the best
        // node is at most one grid diagonal farther away.
        let diag = steps.iter().map(|h| h * h).sum::<f64>().sqrt();
        assert!(
            dist2(&grid, &c.v).sqrt() - dist2(&got, &c.v).sqrt() <= diag,
            "case {case}: projection {got:?} vs grid {grid:?}"
        );
        // Projection characterization: the feasible set lies behind the plane at p.
        assert!(worst_vi <= 1e-9, "case {case}: <v - p, g - p> = {worst_vi}");
    }
}

#[test]
fn budget_zero_and_feasible_points() {
    let x_bar = [0.2, 0.7];
    let cu = [1.0, 2.0];
    let cd = [1.5, 0.5];
    let lo = [0.0, 0.0];
    let hi = [1.0, 1.0];
    assert_eq!(project(&[0.9, 0.1], &x_bar, &cu, &cd, 0.0, &lo, &hi).unwrap(), x_bar.to_vec());
    let inside = [0.3, 0.6];
    assert_eq!(project(&inside, &x_bar, &cu, &cd, 1.0, &lo, &hi).unwrap(), inside.to_vec());
}

fn arb_set(k: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>, f64)> {
    (
        prop::collection::vec(0.0..1.0f64, k),
        prop::collection::vec(0.0..3.0f64, k),
        prop::collection::vec(0.0..3.0f64, k),
        0.0..2.0f64,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn idempotent_and_nonexpansive(
        (x_bar, cu, cd, budget) in arb_set(4),
        a in prop::collection::vec(-1.0..2.0f64, 4),
        b in prop::collection::vec(-1.0..2.0f64, 4),
    ) {
        let lo = vec![0.0; 4];
        let hi = vec![1.0; 4];
        let set = FeasibleSet { anchor: &x_bar, cost_up: &cu, cost_down: &cd, budget, lower: &lo, upper: &hi };
        let pa = set.project(&a).unwrap();
        let pb = set.project(&b).unwrap();
        let ppa = set.project(&pa).unwrap();
        for (x, y) in pa.iter().zip(&ppa) {
            prop_assert!((x - y).abs() <= 1e-10);
        }
        prop_assert!(dist2(&pa, &pb).sqrt() <= dist2(&a, &b).sqrt() + 1e-10);
        prop_assert!(set.contains(&pa, 1e-8));
    }
}
