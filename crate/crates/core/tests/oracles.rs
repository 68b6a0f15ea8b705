//! Library results checked against independent direct-sum and
//! matrix-assembly computations.

use std::f64::consts::PI;

use fsim_core::bandwidth::{curvature_bandwidth, gcv_score, kfold_score};
use fsim_core::basis::{inner_product, BasisExpansion, FourierBasis};
use fsim_core::ingest::{synth_ecology, to_dataset, EcologyRecord, SynthEcologyConfig, BINS};
use fsim_core::locfit::nw_estimate_loo;
use fsim_core::model::{compute_index, objective_loo_mse, Dataset, IndexModelSpec};
use fsim_core::optimize::{FitOptions, InitStrategy};
use fsim_core::simulate::{generate, rase, rse, Link, SimScenario};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn kernel(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        0.0
    } else {
        315.0 / 256.0 * (1.0 - s * s).powi(4)
    }
}

/// `j`-th Fourier function; without the constant the sequence starts at
/// `√2 sin 2πt`.
fn fourier(j: usize, t: f64, with_constant: bool) -> f64 {
    let j = if with_constant { j } else { j + 1 };
    if j == 0 {
        return 1.0;
    }
    let k = ((j + 1) / 2) as f64;
    if j % 2 == 1 {
        2f64.sqrt() * (2.0 * PI * k * t).sin()
    } else {
        2f64.sqrt() * (2.0 * PI * k * t).cos()
    }
}

fn eval(coeffs: &[f64], t: f64, with_constant: bool) -> f64 {
    coeffs.iter().enumerate().map(|(j, c)| c * fourier(j, t, with_constant)).sum()
}

/// Periodic rectangle rule; exact for trigonometric polynomials of degree
/// below `m`.
fn integrate(f: impl Fn(f64) -> f64, m: usize) -> f64 {
    (0..m).map(|i| f(i as f64 / m as f64)).sum::<f64>() / m as f64
}

/// Weighted least squares `[1, d, d²/2]` at `u` by Gaussian elimination on
/// the raw normal equations.
fn local_quadratic_oracle(z: &[f64], y: &[f64], u: f64, h: f64) -> Option<[f64; 3]> {
    let mut a = [[0.0; 4]; 3];
    let mut count = 0;
    for (&zi, &yi) in z.iter().zip(y) {
        let d = zi - u;
        let w = kernel(d / h);
        if w == 0.0 {
            continue;
        }
        count += 1;
        let x = [1.0, d, d * d / 2.0];
        for r in 0..3 {
            for c in 0..3 {
                a[r][c] += w * x[r] * x[c];
            }
            a[r][3] += w * x[r] * yi;
        }
    }
    if count < 3 {
        return None;
    }
    for col in 0..3 {
        let pivot = (col..3).max_by(|&p, &q| a[p][col].abs().total_cmp(&a[q][col].abs()))?;
        a.swap(col, pivot);
        if a[col][col].abs() < 1e-300 {
            return None;
        }
        for r in 0..3 {
            if r != col {
                let f = a[r][col] / a[col][col];
                for c in col..4 {
                    a[r][c] -= f * a[col][c];
                }
            }
        }
    }
    Some([a[0][3] / a[0][0], a[1][3] / a[1][1], a[2][3] / a[2][2]])
}

/// Smoother row at `u`: the oracle estimate applied to unit responses.
fn smoother_row_oracle(z: &[f64], u: f64, h: f64) -> Vec<f64> {
    (0..z.len())
        .map(|j| {
            let mut e = vec![0.0; z.len()];
            e[j] = 1.0;
            local_quadratic_oracle(z, &e, u, h).expect("nonsingular")[0]
        })
        .collect()
}

fn nw_loo_oracle(z: &[f64], y: &[f64], i: usize, h: f64) -> Option<f64> {
    let (mut num, mut den) = (0.0, 0.0);
    for j in 0..z.len() {
        if j != i {
            let w = kernel((z[i] - z[j]) / h);
            num += w * y[j];
            den += w;
        }
    }
    (den > 0.0).then(|| num / den)
}

fn random_functional(n: usize, dim: usize, seed: u64) -> (Dataset, Vec<Vec<f64>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let basis = FourierBasis::new(dim, true).unwrap();
    let mut raw = Vec::new();
    let mut xs = Vec::new();
    let mut y = Vec::new();
    for _ in 0..n {
        let c: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        y.push(rng.sample::<f64, _>(StandardNormal));
        xs.push(basis.expansion(c.clone()).unwrap());
        raw.push(c);
    }
    (Dataset::new(vec![xs], None, y).unwrap(), raw)
}

#[test]
fn nw_leave_one_out_matches_direct_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for n in [5, 12, 20] {
        let z: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        for h in [0.2, 0.5, 1.5] {
            for i in 0..n {
                match (nw_estimate_loo(&z, &y, i, h), nw_loo_oracle(&z, &y, i, h)) {
                    (Ok(a), Some(b)) => assert!((a - b).abs() < 1e-10, "{a} vs {b}"),
                    (Err(_), None) => {}
                    (a, b) => panic!("n={n} h={h} i={i}: {a:?} vs {b:?}"),
                }
            }
        }
    }
}

#[test]
fn objective_matches_double_sum() {
    for seed in 0..5 {
        let (data, raw) = random_functional(15, 5, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let c: Vec<f64> = (0..4).map(|_| rng.sample(StandardNormal)).collect();
        let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
        let h = 1.2;
        // Index by quadrature of X(t)β(t) with the raw coefficient, bandwidth h‖c‖.
        let z: Vec<f64> = raw
            .iter()
            .map(|x| integrate(|t| eval(x, t, true) * eval(&c, t, false), 64))
            .collect();
        let (mut sum, mut used) = (0.0, 0);
        for i in 0..z.len() {
            if let Some(fit) = nw_loo_oracle(&z, data.y(), i, h * norm) {
                sum += (data.y()[i] - fit).powi(2);
                used += 1;
            }
        }
        let report = objective_loo_mse(&data, &c, h).unwrap();
        assert_eq!(report.excluded_count, z.len() - used);
        assert!((report.mse - sum / used as f64).abs() < 1e-10);
    }
}

#[test]
fn index_matches_quadrature() {
    let (data, raw) = random_functional(10, 7, 3);
    let coef_basis = FourierBasis::new(6, false).unwrap();
    let beta = coef_basis.expansion(vec![0.3, -1.0, 0.2, 0.0, 0.7, -0.1]).unwrap();
    let spec = IndexModelSpec {
        beta_blocks: vec![beta.clone()],
        alpha: None,
        bandwidth: 1.0,
    };
    let z = compute_index(&data, &spec).unwrap();
    for (zi, x) in z.iter().zip(&raw) {
        let q = integrate(|t| eval(x, t, true) * eval(beta.coeffs(), t, false), 64);
        assert!((zi - q).abs() < 1e-12);
    }
}

#[test]
fn gcv_matches_assembled_smoother() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (data, _) = random_functional(20, 5, 9);
    let c: Vec<f64> = (0..4).map(|_| rng.sample(StandardNormal)).collect();
    let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
    let spec = IndexModelSpec {
        beta_blocks: vec![FourierBasis::new(4, false)
            .unwrap()
            .expansion(c.iter().map(|v| v / norm).collect())
            .unwrap()],
        alpha: None,
        bandwidth: 1.0,
    };
    let z = compute_index(&data, &spec).unwrap();
    let spread = z.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let h = 2.0 * spread;
    let n = z.len();
    let rows: Vec<Vec<f64>> = z.iter().map(|&u| smoother_row_oracle(&z, u, h)).collect();
    let y = data.y();
    let mut rss = 0.0;
    let mut trace = 0.0;
    for i in 0..n {
        let fitted: f64 = rows[i].iter().zip(y).map(|(s, v)| s * v).sum();
        rss += (y[i] - fitted).powi(2);
        trace += 1.0 - rows[i][i];
    }
    let oracle = (rss / n as f64) / (trace / n as f64).powi(2);
    let score = gcv_score(&data, &spec, h).unwrap();
    assert!((score - oracle).abs() < 1e-10 * oracle.max(1.0), "{score} vs {oracle}");
}

#[test]
fn gcv_noiseless_quadratic_is_zero() {
    let (data, _) = random_functional(30, 5, 2);
    let spec = IndexModelSpec {
        beta_blocks: vec![FourierBasis::new(4, false).unwrap().expansion(vec![0.6, 0.8, 0.0, 0.0]).unwrap()],
        alpha: None,
        bandwidth: 1.0,
    };
    let z = compute_index(&data, &spec).unwrap();
    let quad = data.with_responses(z.iter().map(|v| 1.0 - v + 0.25 * v * v).collect()).unwrap();
    let h = 3.0 * z.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    assert!(gcv_score(&quad, &spec, h).unwrap() < 1e-6);
}

#[test]
fn rase_matches_loop() {
    let sim = generate(&SimScenario::new(50, Link::G1, 17)).unwrap();
    let truth = &sim.truth;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let perturbed: Vec<f64> = truth
        .beta
        .coeffs()
        .iter()
        .map(|c| c + 0.05 * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let norm = perturbed.iter().map(|v| v * v).sum::<f64>().sqrt();
    let spec = IndexModelSpec {
        beta_blocks: vec![truth.beta.basis().expansion(perturbed.iter().map(|v| v / norm).collect()).unwrap()],
        alpha: None,
        bandwidth: 1.0,
    };
    let z = compute_index(&sim.data, &spec).unwrap();
    let h = 0.15;
    for k in [0, 2] {
        let mut sum = 0.0;
        for i in 0..z.len() {
            let est = local_quadratic_oracle(&z, sim.data.y(), z[i], h).expect("populated window")[k];
            sum += (est - truth.link.derivative(truth.index[i], k)).powi(2);
        }
        let oracle = (sum / z.len() as f64).sqrt();
        let report = rase(&sim.data, truth, &spec, k, h).unwrap();
        assert_eq!(report.adjusted, 0);
        assert!((report.value - oracle).abs() < 1e-10 * oracle.max(1.0), "k={k}: {} vs {oracle}", report.value);
    }
}

#[test]
fn rase_noiseless_quadratic_is_exact() {
    let mut sc = SimScenario::new(80, Link::G2, 4);
    sc.noise_sd = 0.0;
    let sim = generate(&sc).unwrap();
    let spec = sim.truth.spec(1.0);
    let h = 10.0;
    assert!(rase(&sim.data, &sim.truth, &spec, 2, h).unwrap().value < 1e-6);
    assert!(rase(&sim.data, &sim.truth, &spec, 0, h).unwrap().value < 1e-6);
}

#[test]
fn rase_falls_back_for_isolated_points() {
    let mut sc = SimScenario::new(40, Link::G3, 6);
    sc.noise_sd = 0.0;
    let sim = generate(&sc).unwrap();
    let z = &sim.truth.index;
    let spread = z.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    // Linear data: ĝ″ is zero wherever the substitute point lies.
    let report = rase(&sim.data, &sim.truth, &sim.truth.spec(1.0), 2, spread / 8.0).unwrap();
    assert!(report.adjusted > 0);
    assert!(report.value < 1e-6, "{}", report.value);
}

#[test]
fn rse_matches_quadrature() {
    let basis = FourierBasis::new(24, false).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..10 {
        let a: Vec<f64> = (0..24).map(|_| rng.sample(StandardNormal)).collect();
        let b: Vec<f64> = (0..24).map(|_| rng.sample(StandardNormal)).collect();
        let q = integrate(|t| (eval(&a, t, false) - eval(&b, t, false)).powi(2), 64).sqrt();
        let value = rse(&basis.expansion(a).unwrap(), &basis.expansion(b).unwrap()).unwrap();
        assert!((value - q).abs() < 1e-6);
    }
}

#[test]
fn rse_is_a_metric() {
    let basis = FourierBasis::new(6, false).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut draw = || -> BasisExpansion {
        basis
            .expansion((0..6).map(|_| rng.sample(StandardNormal)).collect())
            .unwrap()
    };
    for _ in 0..50 {
        let (a, b, c) = (draw(), draw(), draw());
        let ab = rse(&a, &b).unwrap();
        assert!((ab - rse(&b, &a).unwrap()).abs() < 1e-12);
        assert!(ab <= rse(&a, &c).unwrap() + rse(&c, &b).unwrap() + 1e-12);
    }
}

#[test]
fn covariate_coefficient_variance_law() {
    let sim = generate(&SimScenario::new(100_000, Link::G3, 21)).unwrap();
    let block = &sim.data.blocks()[0];
    for j in [1usize, 2, 12, 24] {
        let vals: Vec<f64> = block.iter().map(|x| x.coeffs()[j]).collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (vals.len() - 1) as f64;
        let expected = (j as f64 / 24.0).powi(2);
        assert!((var / expected - 1.0).abs() < 0.05, "j={j}: {var} vs {expected}");
    }
}

#[test]
fn kfold_with_one_sample_per_fold_matches_objective() {
    // A one-dimensional coefficient space has a single direction up to sign,
    // so every fold's fit yields the same index.
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let basis = FourierBasis::new(2, true).unwrap();
    let n = 12;
    let xs: Vec<BasisExpansion> = (0..n)
        .map(|_| basis.expansion(vec![0.0, rng.sample(StandardNormal)]).unwrap())
        .collect();
    let y: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let data = Dataset::new(vec![xs], None, y).unwrap();
    let h = 0.8;
    let cv = kfold_score(&data, &InitStrategy::Equal, h, n, 3, &FitOptions::default()).unwrap();
    let obj = objective_loo_mse(&data, &[1.0], h).unwrap();
    assert_eq!(cv.excluded, obj.excluded_count);
    assert!((cv.score - obj.mse).abs() < 1e-12);
}

#[test]
fn curvature_rescale_example() {
    assert!((curvature_bandwidth(0.5, 1.0) - 0.6095).abs() < 1e-4);
    assert!((curvature_bandwidth(0.5, 1.0) - 0.5f64.powf(5.0 / 7.0)).abs() < 1e-15);
}

#[test]
fn ingest_recovers_known_expansions() {
    let basis = FourierBasis::new(7, true).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut truth = Vec::new();
    let records: Vec<EcologyRecord> = (0..5)
        .map(|_| {
            let p: Vec<f64> = (0..7).map(|_| rng.sample(StandardNormal)).collect();
            let t: Vec<f64> = (0..7).map(|_| rng.sample(StandardNormal)).collect();
            let sample = |c: &[f64]| (0..BINS).map(|j| eval(c, j as f64 / 36.0, true)).collect();
            let r = EcologyRecord {
                logarea_t1: 1.0,
                logarea_t0: 0.5,
                w: 0.0,
                p: sample(&p),
                temp: sample(&t),
            };
            truth.push((p, t));
            r
        })
        .collect();
    let data = to_dataset(&records, &basis).unwrap();
    for (i, (p, t)) in truth.iter().enumerate() {
        for (got, want) in data.blocks()[0][i].coeffs().iter().zip(p) {
            assert!((got - want).abs() < 1e-3);
        }
        for (got, want) in data.blocks()[1][i].coeffs().iter().zip(t) {
            assert!((got - want).abs() < 1e-3);
        }
    }
}

#[test]
fn synthetic_ecology_reconstructs_responses() {
    let mut cfg = SynthEcologyConfig::new(30, 5);
    cfg.noise_sd = 0.0;
    cfg.link = Link::G3;
    let (records, truth) = synth_ecology(&cfg).unwrap();
    let data = to_dataset(&records, &FourierBasis::new(cfg.basis_dim, true).unwrap()).unwrap();
    let z = compute_index(&data, &truth.spec(1.0)).unwrap();
    for (yi, zi) in data.y().iter().zip(&z) {
        assert!((yi - zi).abs() < 1e-9);
    }
    // Index by direct quadrature of the sampled curves against β.
    for (r, zi) in records.iter().zip(&z) {
        let coef = |c: &BasisExpansion| c.coeffs().to_vec();
        let [b1, b2] = [coef(&truth.beta_blocks[0]), coef(&truth.beta_blocks[1])];
        let riemann = |curve: &[f64], b: &[f64]| -> f64 {
            (0..36).map(|j| curve[j] * eval(b, j as f64 / 36.0, false)).sum::<f64>() / 36.0
        };
        let q = riemann(&r.p, &b1) + riemann(&r.temp, &b2) + truth.alpha * r.w;
        assert!((q - zi).abs() < 1e-9);
    }
}

#[test]
fn inner_product_matches_quadrature() {
    let basis = FourierBasis::new(9, true).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..20 {
        let a: Vec<f64> = (0..9).map(|_| rng.sample(StandardNormal)).collect();
        let b: Vec<f64> = (0..9).map(|_| rng.sample(StandardNormal)).collect();
        let q = integrate(|t| eval(&a, t, true) * eval(&b, t, true), 64);
        let ip = inner_product(&basis.expansion(a).unwrap(), &basis.expansion(b).unwrap()).unwrap();
        assert!((ip - q).abs() < 1e-12);
    }
}
