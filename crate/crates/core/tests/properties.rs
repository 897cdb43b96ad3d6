//! Randomized checks of structural invariants across the pipeline.

use koopman_po::simulate::euler_maruyama_step;
use koopman_po::*;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn binomial(n: u64, k: u64) -> u64 {
    (1..=k).fold(1, |acc, i| acc * (n + 1 - i) / i)
}

fn small_sim(seed: u64, m_max: usize) -> SimConfig {
    SimConfig {
        dt: 0.01,
        dt_obs: 0.05,
        relax_steps_obs: 2,
        points_per_traj: m_max + 12,
        n_traj: 3,
        m_max,
        seed,
        init_box: vec![(-1.0, 1.0); 2],
    }
}

/// Hurwitz by construction: a contraction plus a skew part.
fn stable_matrix(n: usize, entries: &[f64]) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |i, j| entries[i * n + j]);
    (&g - g.transpose()) * 0.5 - DMatrix::identity(n, n) * 0.7 + g * (0.2 / n as f64)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn zero_noise_step_is_plain_euler(
        x in prop::collection::vec(-3.0f64..3.0, 3),
        noise in prop::collection::vec(-4.0f64..4.0, 3),
        dt in 1e-5f64..1e-2,
    ) {
        let sys = make_lorenz(10.0, 28.0, 8.0 / 3.0, 0.0).unwrap();
        let f = sys.eval_drift(&x).unwrap();
        let got = euler_maruyama_step(&sys, &x, dt, &noise).unwrap();
        for d in 0..3 {
            prop_assert_eq!(got[d].to_bits(), (x[d] + dt * f[d]).to_bits());
        }
    }

    #[test]
    fn simulation_is_seed_deterministic(seed in any::<u64>(), sigma in 0.0f64..1.0) {
        let sys = make_van_der_pol(1.0, sigma).unwrap();
        let cfg = small_sim(seed, 2);
        let a = simulate_dataset(&sys, &cfg).unwrap();
        let b = simulate_dataset(&sys, &cfg).unwrap();
        prop_assert_eq!(make_fullstate_pairs(&a).unwrap().data_hash(), make_fullstate_pairs(&b).unwrap().data_hash());
        prop_assert!(a.trajectories.iter().all(|t| t.nrows() == cfg.points_per_traj));
    }

    #[test]
    fn delay_pairs_shift_by_one(seed in 0u64..1000, m in 0usize..5, dim in 0usize..2) {
        let sys = make_van_der_pol(1.0, 0.3).unwrap();
        let ds = simulate_dataset(&sys, &small_sim(seed, 4)).unwrap();
        let p = make_delay_pairs(&ds, dim, m).unwrap();
        prop_assert_eq!(p.x.shape(), p.y.shape());
        prop_assert_eq!(p.x.ncols(), m + 1);
        for k in 0..p.len() {
            for j in 0..m {
                prop_assert_eq!(p.y[(k, j + 1)].to_bits(), p.x[(k, j)].to_bits());
            }
        }
    }

    #[test]
    fn dictionary_counts_and_order(v in 1usize..5, p in 0u32..9) {
        let dict = monomial_dictionary(v, p).unwrap();
        prop_assert_eq!(dict.len() as u64, binomial(v as u64 + p as u64, p as u64));
        prop_assert!(dict.basis()[0].is_constant());
        for w in dict.basis().windows(2) {
            prop_assert!(w[0].degree() <= w[1].degree());
            prop_assert!(w[0] != w[1]);
        }
    }

    #[test]
    fn features_are_multiplicative(
        x in prop::collection::vec(-1.5f64..1.5, 3),
        i in any::<prop::sample::Index>(),
        j in any::<prop::sample::Index>(),
    ) {
        let dict = monomial_dictionary(3, 6).unwrap();
        let low: Vec<&MultiIndex> = dict.basis().iter().filter(|m| m.degree() <= 3).collect();
        let (a, b) = (low[i.index(low.len())], low[j.index(low.len())]);
        let f = dict.evaluate_point(&x).unwrap();
        let ab = dict.index_of(&a.plus(b)).unwrap();
        let fa = f[dict.index_of(a).unwrap()];
        let fb = f[dict.index_of(b).unwrap()];
        prop_assert!((f[ab] - fa * fb).abs() <= 1e-12 * (1.0 + f[ab].abs()));
    }

    #[test]
    fn ridge_shrinks_koopman_norm(seed in 0u64..500, r1 in 0.0f64..1.0, dr in 1e-3f64..10.0) {
        let sys = make_van_der_pol(1.0, 0.5).unwrap();
        let ds = simulate_dataset(&sys, &small_sim(seed, 3)).unwrap();
        let pairs = make_delay_pairs(&ds, 1, 2).unwrap();
        let dict = delay_dictionary(2, 2).unwrap();
        let fit = |ridge: f64| {
            let opts = EdmdOptions { ridge, ..EdmdOptions::default() };
            fit_koopman(&pairs, &dict, &opts).unwrap().k.norm()
        };
        let (n1, n2) = (fit(r1), fit(r1 + dr));
        prop_assert!(n2 <= n1 * (1.0 + 1e-9), "{} > {}", n2, n1);
    }

    #[test]
    fn generator_constant_column_and_sigma_squared(sigma in 0.0f64..3.0, h in prop::sample::select(vec![1u32, 3, 5])) {
        let dict = monomial_dictionary(2, 6).unwrap();
        let a0 = build_generator(&make_modified_vdp(1.0, h, 0.0).unwrap(), &dict).unwrap().a;
        let a1 = build_generator(&make_modified_vdp(1.0, h, 1.0).unwrap(), &dict).unwrap().a;
        let a = build_generator(&make_modified_vdp(1.0, h, sigma).unwrap(), &dict).unwrap().a;
        prop_assert!(a.column(0).iter().all(|&v| v == 0.0));
        let expected = &a0 + (&a1 - &a0) * (sigma * sigma);
        prop_assert!((&a - &expected).amax() <= 1e-12 * (1.0 + a.amax()));
    }

    #[test]
    fn gle_reproduces_direct_solution(
        n in 2usize..6,
        entries in prop::collection::vec(-1.0f64..1.0, 36),
        c in prop::collection::vec(-1.0f64..1.0, 6),
        n_obs in 1usize..5,
    ) {
        let a = stable_matrix(n, &entries);
        let observed: Vec<usize> = (0..n_obs.min(n - 1)).collect();
        let split = split_matrix(&a, &observed).unwrap();
        let c0 = DVector::from_fn(n, |i, _| c[i]);
        let co0 = DVector::from_fn(observed.len(), |i, _| c0[observed[i]]);
        let cu0 = DVector::from_fn(n - observed.len(), |i, _| c0[split.unobserved[i]]);
        let sol = integrate_gle(&split, &co0, &cu0, 0.5, 1e-3).unwrap();
        let direct = expm_times_vector(&a, 0.5, &c0).unwrap();
        let want = DVector::from_fn(observed.len(), |i, _| direct[observed[i]]);
        // Relative to the observed block's size over the run; the end value
        // alone can pass arbitrarily close to zero.
        let scale = want.norm().max(co0.norm()).max(1e-3);
        let err = (sol.last() - &want).norm();
        prop_assert!(err <= 1e-6 * scale, "err {} scale {}", err, scale);
    }

    #[test]
    fn unobserved_rescaling_leaves_observed_block(
        entries in prop::collection::vec(-1.0f64..1.0, 16),
        scales in prop::collection::vec(0.1f64..10.0, 3),
    ) {
        let a = stable_matrix(4, &entries);
        let split = split_matrix(&a, &[0]).unwrap();
        let scaled = split.rescale_unobserved(&scales).unwrap();
        let c = DVector::from_element(1, 1.0);
        let u = DVector::zeros(3);
        let x = integrate_gle(&split, &c, &u, 0.4, 1e-3).unwrap();
        let y = integrate_gle(&scaled, &c, &u, 0.4, 1e-3).unwrap();
        prop_assert!((x.last() - y.last()).amax() <= 1e-10);
    }
}
