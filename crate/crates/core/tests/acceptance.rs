//! One PASS/FAIL line per acceptance criterion. Every criterion runs even if an
//! earlier one fails; the test fails at the end if any did.

mod common;

use std::path::Path;
use std::time::Instant;

use common::*;
use nalgebra::{DMatrix, DVector};
use pds_core::cli::{cmd_sample, run_benchmark};
use pds_core::config::ExperimentConfig;
use pds_core::filters::{
    build_parametric_r, build_space_a, build_statistical_r, ParametricFilterSpec, StatisticalFilterSpec,
};
use pds_core::metrics::{empirical_moments, gaussian_w2};
use pds_core::sampler::{chain_rng, run_with_noise, GaussianNoise, NoiseSource};
use pds_core::spectral::{fft2, ifft2, random_orthogonal, OrthogonalMap};
use pds_core::targets::{sample_exact, MixtureComponent};
use pds_core::{
    run_batch, AnalyticTarget, Ensemble, Field, GaussianTarget, GridShape, GrfTarget, MetricMode, MixtureTarget,
    Preconditioner, SamplerConfig, ScoreTarget, SkewOperator, Solenoidal, StepSchedule, Trajectory,
};

type Outcome = (bool, String);

#[test]
fn acceptance() {
    let criteria: [(usize, fn() -> Outcome); 9] = [
        (1, steady_state),
        (2, solenoidal_neutrality),
        (3, acceleration),
        (4, identity_degeneration),
        (5, operator_suite),
        (6, filter_construction),
        (7, orthogonal_equivalence),
        (8, score_oracles),
        (9, determinism),
    ];
    let mut failed = Vec::new();
    for (id, check) in criteria {
        let start = Instant::now();
        let (pass, detail) = check();
        report(id, pass, &format!("{detail} [{:.1}s]", start.elapsed().as_secs_f64()));
        if !pass {
            failed.push(id);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}

fn identity(n: usize) -> DMatrix<f64> {
    DMatrix::identity(n, n)
}

/// Snapshots of every chain at `burn_in, burn_in + thin, ..., iterations`,
/// grouped per chain.
fn ensemble_snapshots(
    target: &dyn ScoreTarget,
    config: &SamplerConfig,
    chains: usize,
    burn_in: usize,
    thin: usize,
) -> Vec<Vec<Field>> {
    let mut ens = Ensemble::new(target, config, chains).unwrap();
    let mut per_chain = vec![Vec::new(); chains];
    let mut t = burn_in;
    while t <= config.schedule.iterations() {
        ens.advance_to(t).unwrap();
        for (k, x) in ens.states().into_iter().enumerate() {
            per_chain[k].push(x);
        }
        t += thin;
    }
    per_chain
}

fn s1() -> SkewOperator {
    SkewOperator::numbered(1).unwrap()
}

// ---------------------------------------------------------------------------
// 1. The discrete chain's stationary law, computed exactly.

fn steady_state() -> Outcome {
    const CHAINS: usize = 512;
    const T: usize = 5000;
    const BURN_IN: usize = 2000;
    const THIN: usize = 25;
    let eps = 0.05;
    let h = eps * eps / 2.0;

    let s = shape(1, 4, 4);
    let n = s.len();
    let mut r = rng(11);
    let mean = uniform_field(s, &mut r, -0.5, 0.5);
    let target = GaussianTarget::random(mean.clone(), 0.5, 0.7, 12).unwrap();
    let a = uniform_field(s, &mut r, 0.2, 0.35);
    let rf = symmetric_filter(s, &mut r, 0.25, 0.4);

    let sigma_inv = target.covariance().clone().try_inverse().unwrap();
    let minv = dense_m_inverse(&a, &rf);
    let k = &minv * minv.transpose();
    let roll = dense_roll(s, 1, 1);
    let skew = &roll - roll.transpose();
    let mu = to_vec(&mean);

    let cases: [(&str, bool, f64); 5] = [
        ("vanilla", false, 0.0),
        ("pds", true, 0.0),
        ("pds+S1 w=1", true, 1.0),
        ("pds+S1 w=10", true, 10.0),
        ("pds+S1 w=100", true, 100.0),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (i, (label, precond, omega)) in cases.into_iter().enumerate() {
        let (drift, noise) = if precond {
            (k.clone(), minv.clone())
        } else {
            (identity(n), identity(n))
        };
        let g = identity(n) - (drift + &skew * omega) * &sigma_inv * h;
        let q = &noise * noise.transpose() * (eps * eps);
        let oracle = discrete_lyapunov(&g, &q);
        let rho = spectral_radius(&g);

        let schedule = StepSchedule::constant(T, eps).unwrap();
        let seed = 100 + i as u64;
        let config = if precond {
            let p = Preconditioner::new(a.clone(), rf.clone()).unwrap();
            let sol = (omega > 0.0).then(|| Solenoidal::new(s1(), omega).unwrap());
            SamplerConfig::pds(schedule, p, sol, seed)
        } else {
            SamplerConfig::vanilla(schedule, seed)
        };
        let snaps = ensemble_snapshots(&target, &config, CHAINS, BURN_IN, THIN);

        // Pooled covariance; the mean's standard error comes from the spread
        // of per-chain time averages, which are independent.
        let pooled: Vec<DVector<f64>> = snaps.iter().flatten().map(to_vec).collect();
        let m = pooled.len() as f64;
        let pooled_mean = pooled.iter().fold(DVector::zeros(n), |acc, x| acc + x) / m;
        let mut cov = DMatrix::zeros(n, n);
        for x in &pooled {
            let d = x - &pooled_mean;
            cov += &d * d.transpose();
        }
        cov /= m - 1.0;
        let chain_means: Vec<DVector<f64>> = snaps
            .iter()
            .map(|c| c.iter().map(to_vec).fold(DVector::zeros(n), |acc, x| acc + x) / c.len() as f64)
            .collect();
        let mut z_max: f64 = 0.0;
        for j in 0..n {
            let vals: Vec<f64> = chain_means.iter().map(|v| v[j]).collect();
            let avg = vals.iter().sum::<f64>() / CHAINS as f64;
            let var = vals.iter().map(|v| (v - avg).powi(2)).sum::<f64>() / (CHAINS - 1) as f64;
            let se = (var / CHAINS as f64).sqrt();
            z_max = z_max.max((avg - mu[j]).abs() / se);
        }
        let rel = rel_frobenius(&cov, &oracle);
        let ok = rel <= 0.10 && z_max <= 5.0 && rho < 1.0;
        pass &= ok;
        parts.push(format!("{label}: cov {:.1}% mean {z_max:.2}se rho {rho:.4}", rel * 100.0));
    }
    (pass, parts.join("; "))
}

// ---------------------------------------------------------------------------
// 2. The skew term does not move the stationary law.

fn solenoidal_neutrality() -> Outcome {
    const CHAINS: usize = 256;
    const T: usize = 2000;
    const BURN_IN: usize = 500;
    const THIN: usize = 10;
    // K = 10⁴·I keeps ω up to 1000 small against the symmetric part, so one
    // step size is stable for every ω and the chain still mixes in ~60 steps.
    let eps = 0.0014;
    let s = shape(1, 4, 4);
    let mean = uniform_field(s, &mut rng(21), -0.5, 0.5);
    let target = GaussianTarget::random(mean, 0.5, 0.7, 22).unwrap();
    let p = Preconditioner::new(Field::ones(s), Field::filled(s, 0.01)).unwrap();

    let moments = |sol: Option<Solenoidal>, seed: u64| {
        let schedule = StepSchedule::constant(T, eps).unwrap();
        let config = SamplerConfig::pds(schedule, p.clone(), sol, seed);
        let snaps: Vec<Field> = ensemble_snapshots(&target, &config, CHAINS, BURN_IN, THIN)
            .into_iter()
            .flatten()
            .collect();
        empirical_moments(&snaps, MetricMode::Dense).unwrap().moments()
    };

    let baselines: Vec<_> = (0..5).map(|i| moments(None, 200 + i)).collect();
    let mut pairwise = Vec::new();
    for i in 0..5 {
        for j in i + 1..5 {
            pairwise.push(gaussian_w2(&baselines[i], &baselines[j]).unwrap());
        }
    }
    let avg = pairwise.iter().sum::<f64>() / pairwise.len() as f64;
    let sd = (pairwise.iter().map(|d| (d - avg).powi(2)).sum::<f64>() / (pairwise.len() - 1) as f64).sqrt();
    let band = avg + 4.0 * sd;

    let kinds = [
        ("S1", s1()),
        ("S4", SkewOperator::numbered(4).unwrap()),
        ("transpose", SkewOperator::SpectralTransposeDiff),
    ];
    let mut worst: (f64, String) = (0.0, String::new());
    let mut pass = true;
    let mut seed = 300;
    for (name, op) in kinds {
        for omega in [1.0, 10.0, 100.0, 1000.0] {
            seed += 1;
            let m = moments(Some(Solenoidal::new(op, omega).unwrap()), seed);
            let d = baselines.iter().map(|b| gaussian_w2(&m, b).unwrap()).sum::<f64>() / 5.0;
            pass &= d <= band;
            if d >= worst.0 {
                worst = (d, format!("{name} w={omega}"));
            }
        }
    }
    (
        pass,
        format!(
            "baseline W2 {avg:.4}±{sd:.4}, band {band:.4}; worst {} at {:.4}",
            worst.1, worst.0
        ),
    )
}

// ---------------------------------------------------------------------------
// 3. Fewer iterations on an ill-conditioned field.

fn acceleration() -> Outcome {
    let text = "\
seed = 3
chains = 256
target.kind = grf
target.shape = 1x32x32
target.condition = 1000
target.decay = 1
sampler.vanilla.kind = vanilla
sampler.vanilla.iterations = 5000
sampler.vanilla.epsilon = 0.03
sampler.pds.kind = pds
sampler.pds.iterations = 5000
sampler.pds.epsilon = 0.03
sampler.pds.r = statistical
sampler.pds.r_alpha = 5
sampler.pds.r_count = 200
benchmark.threshold = 0.2
benchmark.max_iterations = 5000
benchmark.stride = 10
";
    let config = ExperimentConfig::parse(text, Path::new(".")).unwrap();
    let (rows, _) = run_benchmark(&config).unwrap();
    let find = |name: &str| rows.iter().find(|r| r.sampler == name).unwrap();
    let (van, pds) = (find("vanilla"), find("pds"));
    let show = |t: Option<usize>| t.map_or("not reached".to_string(), |t| t.to_string());
    let pass = match (van.t_needed, pds.t_needed) {
        (Some(v), Some(p)) => 2 * p <= v,
        (None, Some(_)) => true,
        _ => false,
    };
    (
        pass,
        format!(
            "T_vanilla {} T_pds {} speedup {} (need >= 2)",
            show(van.t_needed),
            show(pds.t_needed),
            pds.speedup.map_or("-".into(), |s| format!("{s:.3}"))
        ),
    )
}

// ---------------------------------------------------------------------------
// 4. A ≡ 1, R ≡ 1, ω = 0 reproduces vanilla bit for bit.

fn same_bits(a: &Field, b: &Field) -> bool {
    a.shape() == b.shape()
        && a.as_slice()
            .iter()
            .zip(b.as_slice())
            .all(|(x, y)| x.to_bits() == y.to_bits())
}

fn same_trajectory(a: &Trajectory, b: &Trajectory) -> bool {
    same_bits(&a.final_state, &b.final_state)
        && a.checkpoints.len() == b.checkpoints.len()
        && a.checkpoints
            .iter()
            .zip(&b.checkpoints)
            .all(|(x, y)| x.iteration == y.iteration && same_bits(&x.state, &y.state))
}

fn identity_degeneration() -> Outcome {
    let g = shape(1, 4, 4);
    let targets: Vec<(&str, Box<dyn ScoreTarget>)> = vec![
        (
            "gaussian",
            Box::new(GaussianTarget::random(uniform_field(g, &mut rng(41), -1.0, 1.0), 0.3, 2.0, 42).unwrap()),
        ),
        ("grf", Box::new(GrfTarget::power_law(shape(2, 8, 6), 100.0, 1.0).unwrap())),
        (
            "mixture",
            Box::new(MixtureTarget::symmetric_pair(Field::filled(g, 1.5), 0.4).unwrap()),
        ),
    ];
    let mut compared = 0;
    for (name, target) in &targets {
        let s = target.shape();
        let sigmas = StepSchedule::geometric_sigmas(1.0, 0.1, 10).unwrap();
        let schedules = [
            StepSchedule::constant(300, 0.05).unwrap(),
            StepSchedule::annealed(300, sigmas, 0.005).unwrap(),
        ];
        for schedule in schedules {
            for denoise in [false, true] {
                let mut van = SamplerConfig::vanilla(schedule.clone(), 9);
                van.denoise_final = denoise;
                van.checkpoint_stride = 50;
                let reference = run_batch(target.as_ref(), &van, 3).unwrap();
                for sol in [None, Some(Solenoidal::new(s1(), 0.0).unwrap())] {
                    let pds = SamplerConfig {
                        preconditioner: Some(Preconditioner::new(Field::ones(s), Field::ones(s)).unwrap()),
                        solenoidal: sol,
                        ..van.clone()
                    };
                    let got = run_batch(target.as_ref(), &pds, 3).unwrap();
                    compared += 1;
                    if !reference.iter().zip(&got).all(|(a, b)| same_trajectory(a, b)) {
                        return (false, format!("{name}: trajectories differ ({compared} configurations checked)"));
                    }
                }
            }
        }
    }
    (true, format!("{compared} target/schedule/skew configurations bitwise identical"))
}

// ---------------------------------------------------------------------------
// 5. Linear operators against dense definitions.

fn operator_suite() -> Outcome {
    let mut r = rng(51);

    let mut roundtrip: f64 = 0.0;
    for s in [shape(1, 4, 4), shape(3, 8, 6), shape(2, 5, 7)] {
        let a = uniform_field(s, &mut r, 0.2, 2.0);
        let rf = symmetric_filter(s, &mut r, 0.2, 2.0);
        let p = Preconditioner::new(a, rf).unwrap();
        for _ in 0..5 {
            let x = uniform_field(s, &mut r, -3.0, 3.0);
            let back = p.apply_m_inverse(&p.apply_m(&x).unwrap()).unwrap();
            let fwd = p.apply_m(&p.apply_m_inverse(&x).unwrap()).unwrap();
            roundtrip = roundtrip.max(back.sub(&x).unwrap().max_abs()).max(fwd.sub(&x).unwrap().max_abs());
        }
    }

    let s = shape(1, 4, 4);
    let a = uniform_field(s, &mut r, 0.2, 2.0);
    let rf = symmetric_filter(s, &mut r, 0.2, 2.0);
    let p = Preconditioner::new(a.clone(), rf.clone()).unwrap();
    let minv = dense_m_inverse(&a, &rf);
    let k = &minv * minv.transpose();
    let mut drift: f64 = 0.0;
    for j in 0..s.len() {
        let mut e = Field::zeros(s);
        e.as_mut_slice()[j] = 1.0;
        let col = p.apply_drift_precondition(&e).unwrap();
        for i in 0..s.len() {
            drift = drift.max((col.as_slice()[i] - k[(i, j)]).abs());
        }
    }

    let mut skew: f64 = 0.0;
    let ops: Vec<SkewOperator> = (1..=6)
        .map(|i| SkewOperator::numbered(i).unwrap())
        .chain([SkewOperator::SpectralTransposeDiff])
        .collect();
    for s in [shape(1, 16, 16), shape(2, 12, 10)] {
        for op in &ops {
            let x = uniform_field(s, &mut r, -1.0, 1.0);
            let y = uniform_field(s, &mut r, -1.0, 1.0);
            let lhs = x.dot(&op.apply(&y)).unwrap();
            let rhs = op.apply(&x).dot(&y).unwrap();
            skew = skew.max((lhs + rhs).abs());
        }
    }
    // S1 itself against its permutation-matrix definition.
    let s = shape(1, 4, 4);
    let roll = dense_roll(s, 1, 1);
    let dense_s1 = &roll - roll.transpose();
    let x = uniform_field(s, &mut r, -1.0, 1.0);
    let s1_err = (to_vec(&s1().apply(&x)) - &dense_s1 * to_vec(&x)).amax();

    let mut dft: f64 = 0.0;
    let mut parseval: f64 = 0.0;
    for s in [shape(1, 8, 8), shape(2, 8, 8)] {
        let x = uniform_field(s, &mut r, -1.0, 1.0);
        let fast = fft2(&x);
        for (u, v) in fast.as_slice().iter().zip(direct_dft(&x)) {
            dft = dft.max((u.re - v.re).abs()).max((u.im - v.im).abs());
        }
        let back = ifft2(&fast);
        for (u, v) in back.as_slice().iter().zip(x.as_slice()) {
            dft = dft.max((u.re - v).abs()).max(u.im.abs());
        }
        let energy: f64 = x.as_slice().iter().map(|v| v * v).sum();
        let spectral: f64 = fast.as_slice().iter().map(|z| z.norm_sqr()).sum::<f64>() / s.plane() as f64;
        parseval = parseval.max((energy - spectral).abs() / energy);
    }

    let pass = roundtrip <= 1e-10 && drift <= 1e-9 && skew <= 1e-9 && s1_err <= 1e-12 && dft <= 1e-10 && parseval <= 1e-10;
    (
        pass,
        format!(
            "roundtrip {roundtrip:.1e}, drift vs dense {drift:.1e}, skew {skew:.1e}, S1 dense {s1_err:.1e}, dft {dft:.1e}, parseval {parseval:.1e}"
        ),
    )
}

// ---------------------------------------------------------------------------
// 6. Filters.

fn filter_construction() -> Outcome {
    let spec = ParametricFilterSpec::new(0.2 * 28.0, 1.6).unwrap();
    let r = build_parametric_r(shape(1, 28, 28), &spec);
    let (center, corner) = (r.get(0, 14, 14), r.get(0, 0, 0));
    let mut pass = (center - 1.0).abs() <= 1e-12 && (corner - 1.6).abs() <= 1e-12;

    let grf = GrfTarget::power_law(shape(2, 8, 8), 1000.0, 1.0).unwrap();
    let mut g = rng(61);
    let draws: Vec<Field> = (0..50).map(|_| sample_exact(&grf, &mut g)).collect();
    let mut stat_ok = true;
    for alpha in [1.0, 1.5, 2.0, 5.0, 10.0, 100.0] {
        let rf = build_statistical_r(&draws, &StatisticalFilterSpec::new(alpha).unwrap()).unwrap();
        stat_ok &= rf.max() == 1.0 && rf.min() > 0.0;
    }
    pass &= stat_ok;

    let s = shape(3, 6, 5);
    let mut samples: Vec<Field> = (0..20).map(|_| uniform_field(s, &mut g, 0.0, 1.0)).collect();
    for x in samples.iter_mut() {
        x.set(1, 2, 3, 0.0);
    }
    let a = build_space_a(&samples).unwrap();
    let space_ok = a.max() == 1.0 && a.min() >= 1e-6;
    pass &= space_ok;
    (
        pass,
        format!(
            "parametric center {center} corner {corner}; statistical max==1 for 6 alphas: {stat_ok}; space max {} min {:.1e}",
            a.max(),
            a.min()
        ),
    )
}

// ---------------------------------------------------------------------------
// 7. Rotating the target and the noise rotates the chain.

struct Rotated<N> {
    inner: N,
    b: OrthogonalMap,
}

impl<N: NoiseSource> NoiseSource for Rotated<N> {
    fn draw(&mut self, shape: GridShape) -> Field {
        let z = self.inner.draw(shape);
        Field::new(shape, self.b.apply(z.as_slice()).unwrap()).unwrap()
    }
}

fn rotate(b: &OrthogonalMap, x: &Field) -> Field {
    Field::new(x.shape(), b.apply(x.as_slice()).unwrap()).unwrap()
}

fn orthogonal_equivalence() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut runs = 0;
    for (k, s) in [shape(1, 2, 4), shape(2, 2, 2), shape(1, 1, 8)].into_iter().enumerate() {
        let seed = 70 + k as u64;
        let mean = uniform_field(s, &mut rng(seed), -1.0, 1.0);
        let target = GaussianTarget::random(mean.clone(), 0.5, 2.0, seed).unwrap();
        let b = random_orthogonal(s.len(), seed + 100).unwrap();
        let bm = b.matrix();
        let rotated = GaussianTarget::new(rotate(&b, &mean), bm * target.covariance() * bm.transpose()).unwrap();

        let sigmas = StepSchedule::geometric_sigmas(2.0, 0.05, 8).unwrap();
        for schedule in [
            StepSchedule::constant(1000, 0.1).unwrap(),
            StepSchedule::annealed(1000, sigmas, 0.1).unwrap(),
        ] {
            let config = SamplerConfig::vanilla(schedule, 0);
            let x0 = uniform_field(s, &mut rng(seed + 200), -2.0, 2.0);
            let mut z = GaussianNoise(chain_rng(seed, 0));
            let plain = run_with_noise(&target, &config, x0.clone(), &mut z).unwrap();
            let mut zt = Rotated {
                inner: GaussianNoise(chain_rng(seed, 0)),
                b: b.clone(),
            };
            let turned = run_with_noise(&rotated, &config, rotate(&b, &x0), &mut zt).unwrap();
            let err = turned.final_state.sub(&rotate(&b, &plain.final_state)).unwrap().max_abs();
            worst = worst.max(err);
            runs += 1;
        }
    }
    (worst <= 1e-10, format!("max |x~_T - B x_T| = {worst:.2e} over {runs} coupled runs"))
}

// ---------------------------------------------------------------------------
// 8. Scores are gradients of the log densities.

fn fd_error(target: &dyn AnalyticTarget, x: &Field) -> f64 {
    let step = 1e-5;
    let analytic = target.score(x).unwrap();
    let mut fd = Field::zeros(x.shape());
    for i in 0..x.len() {
        let mut up = x.clone();
        let mut down = x.clone();
        up.as_mut_slice()[i] += step;
        down.as_mut_slice()[i] -= step;
        fd.as_mut_slice()[i] = (target.log_density(&up).unwrap() - target.log_density(&down).unwrap()) / (2.0 * step);
    }
    fd.sub(&analytic).unwrap().norm() / analytic.norm().max(1.0)
}

fn score_oracles() -> Outcome {
    let s = shape(1, 3, 3);
    let mut r = rng(81);
    let gaussian = GaussianTarget::random(uniform_field(s, &mut r, -1.0, 1.0), 0.2, 3.0, 82).unwrap();
    let grf = GrfTarget::power_law(shape(2, 6, 8), 1000.0, 1.0).unwrap();
    let m = shape(1, 2, 3);
    let mixture = MixtureTarget::new(
        vec![0.5, 0.3, 0.2],
        vec![
            MixtureComponent {
                mean: Field::filled(m, 1.0),
                variance: 0.5,
            },
            MixtureComponent {
                mean: Field::filled(m, -1.0),
                variance: 1.0,
            },
            MixtureComponent {
                mean: uniform_field(m, &mut r, -2.0, 2.0),
                variance: 2.0,
            },
        ],
    )
    .unwrap();
    let families: [(&str, &dyn AnalyticTarget); 3] = [("gaussian", &gaussian), ("grf", &grf), ("mixture", &mixture)];
    let mut parts = Vec::new();
    let mut pass = true;
    for (name, t) in families {
        let worst = (0..20)
            .map(|_| {
                let x = uniform_field(t.shape(), &mut r, -2.5, 2.5);
                fd_error(t, &x)
            })
            .fold(0.0, f64::max);
        pass &= worst <= 1e-4;
        parts.push(format!("{name} {worst:.1e}"));
    }
    (pass, format!("worst relative fd error over 20 points: {}", parts.join(", ")))
}

// ---------------------------------------------------------------------------
// 9. Reruns are byte-identical.

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.cfg");
    std::fs::write(
        &config,
        "\
seed = 17
chains = 16
checkpoint_stride = 20
target.kind = gaussian
target.shape = 1x4x4
target.covariance = random
target.eig_min = 0.2
target.eig_max = 2
target.seed = 5
sampler.vanilla.kind = vanilla
sampler.vanilla.iterations = 200
sampler.vanilla.epsilon = 0.1
sampler.pds.kind = pds
sampler.pds.iterations = 200
sampler.pds.epsilon = 0.1
sampler.pds.r = parametric
sampler.pds.r_radius = 1
sampler.pds.r_lambda = 1.6
sampler.pds.skew = 1
sampler.pds.omega = 10
",
    )
    .unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    cmd_sample(&config, Some(&a)).unwrap();
    cmd_sample(&config, Some(&b)).unwrap();
    let csv_a = std::fs::read(a.join("metrics.csv")).unwrap();
    let csv_b = std::fs::read(b.join("metrics.csv")).unwrap();
    let mut finals_equal = true;
    for entry in std::fs::read_dir(a.join("pds")).unwrap() {
        let name = entry.unwrap().file_name();
        finals_equal &= std::fs::read(a.join("pds").join(&name)).unwrap() == std::fs::read(b.join("pds").join(&name)).unwrap();
    }
    let rows = csv_a.iter().filter(|&&c| c == b'\n').count();
    (
        csv_a == csv_b && finals_equal && rows > 1,
        format!("metrics.csv ({rows} lines) identical: {}, final dumps identical: {finals_equal}", csv_a == csv_b),
    )
}
