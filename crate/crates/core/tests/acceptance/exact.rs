//! Exact cross-checks of the wall transfer matrix against two independent
//! constructions: a renewal convolution of the closed-form no-wall and
//! first-return sums, and explicit enumeration of wall histories.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Zero};

use dcl_core::analytics::{exact_first_return, exact_no_wall};
use dcl_core::domainwall::{
    exact_first_return_series, exact_no_wall_series, exact_partition, StepNoise, WalkLattice, WallWeights,
};

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn int(n: i64) -> BigRational {
    rat(n, 1)
}

fn binom(n: i64, k: i64) -> BigRational {
    if k < 0 || k > n {
        return BigRational::zero();
    }
    let mut acc = BigUint::one();
    for i in 0..k {
        acc = acc * BigUint::from((n - i) as u64) / BigUint::from((i + 1) as u64);
    }
    BigRational::from_integer(acc.into())
}

fn pow(x: &BigRational, e: usize) -> BigRational {
    (0..e).fold(BigRational::one(), |a, _| a * x)
}

/// Walks of `m` unit steps from 1 to `y` never touching 0 (reflection).
fn positive_walks(m: i64, y: i64) -> BigRational {
    if y < 1 || (m + y - 1) % 2 != 0 {
        return BigRational::zero();
    }
    binom(m, (m + y - 1) / 2) - binom(m, (m + y + 1) / 2)
}

/// Renewal oracle: per-position weights after `t` steps, built only from
/// the closed forms. Returns (no-wall weight, wall weights by position).
fn renewal(q: i64, p: &BigRational, t: usize) -> (BigRational, Vec<(i64, BigRational)>) {
    let qr = int(q);
    let one = BigRational::one();
    let s = (&one - p) * (&one - p);
    let c = p * (int(2) - p) / &qr;
    let g = &qr / (&qr * &qr + &one);
    let zf = |n: usize| exact_first_return(&qr, p, n);
    // a[n]: histories of n steps ending in a no-wall block; f[n]: ending
    // right after a completed excursion.
    let mut a = vec![BigRational::zero(); t + 1];
    let mut f = vec![BigRational::zero(); t + 1];
    for n in 1..=t {
        let mut acc = BigRational::zero();
        for len in 1..=n {
            let before = if len == n { one.clone() } else { f[n - len].clone() };
            acc += pow(&s, len) * before;
        }
        a[n] = acc;
        let mut acc = BigRational::zero();
        for len in 2..=n {
            let before = if len == n { one.clone() } else { a[n - len].clone() };
            acc += zf(len) * before;
        }
        f[n] = acc;
    }
    let no_wall = if t == 0 { one.clone() } else { &a[t] + &f[t] };
    // Open excursions nucleated at step u (preceded by a no-wall block or
    // the start), then 2(t-u) hops without returning.
    let mut walls = Vec::new();
    for y in 1..=(2 * t as i64 + 1) {
        let mut acc = BigRational::zero();
        for u in 1..=t {
            let before = if u == 1 { one.clone() } else { a[u - 1].clone() };
            let m = 2 * (t - u) as i64;
            acc += before * &c * pow(&g, m as usize) * positive_walks(m, y);
        }
        if !acc.is_zero() {
            walls.push((y, acc));
        }
    }
    (no_wall, walls)
}

#[derive(Clone, Copy)]
enum Slot {
    Pinned,
    Refractory,
    Wall(i64),
}

/// Depth-first enumeration of every history, one gate layer at a time.
fn enumerate(q: i64, p: &BigRational, t: usize) -> (BigRational, Vec<(i64, BigRational)>) {
    let qr = int(q);
    let one = BigRational::one();
    let s = (&one - p) * (&one - p);
    let c = p * (int(2) - p) / &qr;
    let g = &qr / (&qr * &qr + &one);
    let mut no_wall = BigRational::zero();
    let mut walls: std::collections::BTreeMap<i64, BigRational> = Default::default();

    #[allow(clippy::too_many_arguments)]
    fn go(
        step: usize,
        t: usize,
        slot: Slot,
        weight: BigRational,
        s: &BigRational,
        c: &BigRational,
        g: &BigRational,
        no_wall: &mut BigRational,
        walls: &mut std::collections::BTreeMap<i64, BigRational>,
    ) {
        if step == t {
            match slot {
                Slot::Wall(x) => *walls.entry(x).or_insert_with(BigRational::zero) += weight,
                _ => *no_wall += weight,
            }
            return;
        }
        match slot {
            Slot::Pinned => {
                go(step + 1, t, Slot::Pinned, &weight * s, s, c, g, no_wall, walls);
                go(step + 1, t, Slot::Wall(1), &weight * c, s, c, g, no_wall, walls);
            }
            Slot::Refractory => go(step + 1, t, Slot::Pinned, &weight * s, s, c, g, no_wall, walls),
            Slot::Wall(x) => {
                // Two layers; the wall sits on an odd bond between steps.
                for d1 in [-1i64, 1] {
                    let y = x + d1;
                    if y == 0 {
                        // Annihilated in the first layer; the rest of this
                        // step is the refractory boundary event.
                        go(step + 1, t, Slot::Refractory, &weight * g, s, c, g, no_wall, walls);
                        continue;
                    }
                    for d2 in [-1i64, 1] {
                        let w = &weight * g * g;
                        go(step + 1, t, Slot::Wall(y + d2), w, s, c, g, no_wall, walls);
                    }
                }
            }
        }
    }
    go(0, t, Slot::Pinned, one.clone(), &s, &c, &g, &mut no_wall, &mut walls);
    (no_wall, walls.into_iter().collect())
}

fn dp(q: i64, p: &BigRational, t: usize) -> (BigRational, Vec<(i64, BigRational)>) {
    let w = WallWeights::exact(&int(q), p);
    let mut l = WalkLattice::semi_infinite(w, t);
    for _ in 0..t {
        l.step(true);
    }
    let walls = l
        .walls()
        .filter(|(_, w)| !w.is_zero())
        .map(|(x, w)| (x as i64, w.clone()))
        .collect();
    (l.no_wall(), walls)
}

#[test]
fn no_wall_sum_is_exact() {
    for q in [2, 3] {
        for p in [rat(1, 4), rat(1, 2)] {
            let w = WallWeights::exact(&int(q), &p);
            let series = exact_no_wall_series(&w, 10);
            for (i, z) in series.iter().enumerate() {
                assert_eq!(z, &exact_no_wall(&p, i + 1), "q={q} p={p} t={}", i + 1);
            }
        }
    }
}

#[test]
fn first_return_sum_is_exact() {
    for q in [2, 3] {
        for p in [rat(1, 4), rat(1, 2)] {
            let w = WallWeights::exact(&int(q), &p);
            let series = exact_first_return_series(&w, 10);
            for t in 2..=10 {
                assert_eq!(series[t - 1], exact_first_return(&int(q), &p, t), "q={q} p={p} t={t}");
            }
            assert!(series[0].is_zero());
        }
    }
}

#[test]
fn first_return_worked_value() {
    // q = 2, p = 1/2: 0.75 * (2/5) / 2.
    let w = WallWeights::exact(&int(2), &rat(1, 2));
    assert_eq!(exact_first_return_series(&w, 2)[1], rat(3, 20));
}

#[test]
fn transfer_matrix_matches_renewal_oracle() {
    for q in [2, 3] {
        for p in [rat(1, 4), rat(1, 2), rat(3, 10)] {
            for t in 0..=10 {
                assert_eq!(dp(q, &p, t), renewal(q, &p, t), "q={q} p={p} t={t}");
            }
        }
    }
}

#[test]
fn transfer_matrix_matches_history_enumeration() {
    for p in [rat(3, 10), rat(1, 2)] {
        for t in 0..=8 {
            assert_eq!(dp(2, &p, t), enumerate(2, &p, t), "p={p} t={t}");
        }
    }
}

#[test]
fn survival_probability_matches_oracle() {
    let p = rat(3, 10);
    for t in [6, 10, 12] {
        let (no_wall, walls) = renewal(2, &p, t);
        let total = walls.iter().fold(no_wall.clone(), |a, (_, w)| a + w);
        let w = WallWeights::exact(&int(2), &p);
        let mut l = WalkLattice::semi_infinite(w, t);
        for _ in 0..t {
            l.step(true);
        }
        for x0 in 1..6 {
            let beyond = walls
                .iter()
                .filter(|(y, _)| *y >= x0)
                .fold(BigRational::zero(), |a, (_, w)| a + w);
            assert_eq!(l.weight_at_or_beyond(x0 as usize), beyond);
            let exact = &beyond / &total;
            let mut lf = WalkLattice::semi_infinite(WallWeights::new(2.0, 0.3), t);
            for _ in 0..t {
                lf.advance(StepNoise::On);
            }
            let approx: f64 =
                exact.numer().to_string().parse::<f64>().unwrap() / exact.denom().to_string().parse::<f64>().unwrap();
            assert!((lf.survival_probability(x0 as usize) - approx).abs() < 1e-12);
        }
    }
}

#[test]
fn exact_partition_consistent() {
    let p = rat(1, 4);
    let (no_wall, walls) = renewal(3, &p, 7);
    let total = walls.iter().fold(no_wall, |a, (_, w)| a + w);
    assert_eq!(exact_partition(&WallWeights::exact(&int(3), &p), 7), total);
}
