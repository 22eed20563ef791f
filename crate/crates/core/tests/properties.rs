use proptest::prelude::*;

use sympstab::horn::{horn_sample, orbit_pair, OrbitSpec, SpreadSchedule};
use sympstab::hull::hull_summary;
use sympstab::io::{read_cloud_csv, write_cloud_csv};
use sympstab::linalg::{j_matrix, max_abs, symmetric_eigenvalues, Mat, C64};
use sympstab::normalform::{frequency_map_f, invariant_complex_structure, invariant_complex_structure_via, normal_form};
use sympstab::rng::stream;
use sympstab::stability::{classify, spectrum, StabilityClass, TolProfile};
use sympstab::symplectic::{
    cartan_split, conjugate, default_symplectic_tol, is_symplectic, random_symplectic, HamiltonianGenerator,
    QuadraticHamiltonian,
};

/// Signed frequencies whose pairwise sums stay at least 0.3 away from zero.
fn strong_lambdas() -> impl Strategy<Value = Vec<f64>> {
    (1usize..=3)
        .prop_flat_map(|n| prop::collection::vec((0.5f64..3.0, any::<bool>()), n))
        .prop_map(|v| v.into_iter().map(|(m, neg)| if neg { -m } else { m }).collect::<Vec<f64>>())
        .prop_filter("noncompact roots bounded away from zero", |l| {
            (0..l.len()).all(|j| (j..l.len()).all(|k| (l[j] + l[k]).abs() >= 0.3))
        })
}

fn positive_lambdas() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.2f64..4.0, 1..=3).prop_map(|mut v| {
        v.sort_by(f64::total_cmp);
        v
    })
}

fn symmetric(n: usize) -> impl Strategy<Value = QuadraticHamiltonian> {
    prop::collection::vec(-2.0f64..2.0, 4 * n * n)
        .prop_map(move |v| QuadraticHamiltonian::new(Mat::from_vec(2 * n, 2 * n, v)).unwrap())
}

fn conjugated(lambda: &[f64], seed: u64, spread: f64) -> QuadraticHamiltonian {
    let s = random_symplectic(lambda.len(), spread, seed).unwrap();
    conjugate(&QuadraticHamiltonian::normal_form(lambda).unwrap(), &s).unwrap()
}

/// Greedy nearest matching; largest distance between matched values.
fn match_distance(a: &[C64], b: &[C64]) -> f64 {
    let mut used = vec![false; b.len()];
    let mut worst: f64 = 0.0;
    for x in a {
        let (k, d) = b
            .iter()
            .enumerate()
            .filter(|(k, _)| !used[*k])
            .map(|(k, y)| (k, (x - y).norm()))
            .min_by(|p, q| p.1.total_cmp(&q.1))
            .unwrap();
        used[k] = true;
        worst = worst.max(d);
    }
    worst
}

fn close(a: &[f64], b: &[f64], rel: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= rel * x.abs().max(y.abs()).max(1.0))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn random_symplectic_is_symplectic(n in 1usize..=4, spread in 0.0f64..1.0, seed in any::<u64>()) {
        let s = random_symplectic(n, spread, seed).unwrap();
        let check = is_symplectic(s.matrix(), default_symplectic_tol(s.matrix())).unwrap();
        prop_assert!(check.holds, "{check:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn spectrum_is_conjugation_invariant(h in (1usize..=3).prop_flat_map(symmetric), seed in any::<u64>()) {
        let s = random_symplectic(h.n(), 0.4, seed).unwrap();
        let moved = conjugate(&h, &s).unwrap();
        let before = spectrum(&h).unwrap();
        let after = spectrum(&moved).unwrap();
        let scale = h.generator().matrix().norm().max(moved.generator().matrix().norm());
        let d = match_distance(&before, &after);
        prop_assert!(d <= 1e-8 * scale, "distance {d}, scale {scale}");
    }

    #[test]
    fn cartan_split_is_a_projection(h in (1usize..=3).prop_flat_map(symmetric)) {
        let a = h.generator();
        let split = cartan_split(&a);
        let sum = split.k_part.matrix() + split.s_part.matrix();
        prop_assert!(max_abs(&(sum - a.matrix())) <= 1e-12 * max_abs(a.matrix()).max(1.0));
        let again = cartan_split(&HamiltonianGenerator::new(split.k_part.matrix().clone()).unwrap());
        prop_assert!(max_abs(&(again.k_part.matrix() - split.k_part.matrix())) <= 1e-12);
        prop_assert!(max_abs(again.s_part.matrix()) <= 1e-12);
        let j = j_matrix(h.n());
        prop_assert!(max_abs(&(split.k_part.matrix() * &j - &j * split.k_part.matrix())) <= 1e-12);
        prop_assert!(max_abs(&(split.s_part.matrix() * &j + &j * split.s_part.matrix())) <= 1e-12);
    }

    #[test]
    fn classification_is_conjugation_invariant(lambda in strong_lambdas(), a in any::<u64>(), b in any::<u64>()) {
        let tol = TolProfile::default();
        let h = conjugated(&lambda, a, 0.4);
        let moved = conjugate(&h, &random_symplectic(lambda.len(), 0.4, b).unwrap()).unwrap();
        let r1 = classify(&h, &tol).unwrap();
        let r2 = classify(&moved, &tol).unwrap();
        prop_assert_eq!(r1.class, StabilityClass::StronglyStable);
        prop_assert_eq!(r1.class, r2.class);
        prop_assert!(close(&r1.spectrum.lambdas(), &r2.spectrum.lambdas(), 1e-7));
    }

    #[test]
    fn negation_flips_krein_signs(lambda in strong_lambdas(), seed in any::<u64>()) {
        let tol = TolProfile::default();
        let h = conjugated(&lambda, seed, 0.4);
        let r = classify(&h, &tol).unwrap();
        let neg = classify(&h.scaled(-1.0), &tol).unwrap();
        prop_assert_eq!(r.class, neg.class);
        let mut flipped: Vec<f64> = r.spectrum.lambdas().iter().map(|l| -l).collect();
        flipped.sort_by(f64::total_cmp);
        prop_assert!(close(&flipped, &neg.spectrum.lambdas(), 1e-7));
        let signs = |rep: &sympstab::stability::StabilityReport| {
            let mut s: Vec<(i64, i8)> = rep.spectrum.entries.iter().map(|e| ((e.lambda.abs() * 1e6).round() as i64, e.krein_sign)).collect();
            s.sort();
            s
        };
        let flipped_signs: Vec<(i64, i8)> = signs(&r).into_iter().map(|(w, s)| (w, -s)).collect();
        prop_assert_eq!(flipped_signs, signs(&neg));
    }

    #[test]
    fn classification_is_scale_equivariant(lambda in strong_lambdas(), seed in any::<u64>(), c in 0.01f64..100.0) {
        let tol = TolProfile::default();
        let h = conjugated(&lambda, seed, 0.4);
        let r = classify(&h, &tol).unwrap();
        let scaled = classify(&h.scaled(c), &tol).unwrap();
        prop_assert_eq!(r.class, scaled.class);
        let expect: Vec<f64> = r.spectrum.lambdas().iter().map(|l| l * c).collect();
        prop_assert!(close(&expect, &scaled.spectrum.lambdas(), 1e-7 * c.max(1.0)));
    }

    #[test]
    fn positive_definite_is_strongly_stable_with_positive_signs(lambda in positive_lambdas(), seed in any::<u64>()) {
        let h = conjugated(&lambda, seed, 0.5);
        let r = classify(&h, &TolProfile::default()).unwrap();
        prop_assert_eq!(r.class, StabilityClass::StronglyStable);
        prop_assert!(r.spectrum.entries.iter().all(|e| e.krein_sign == 1));
    }

    #[test]
    fn normal_form_round_trip(lambda in strong_lambdas(), seed in any::<u64>()) {
        let h = conjugated(&lambda, seed, 0.4);
        let nf = normal_form(&h, &TolProfile::default()).unwrap();
        let back = conjugate(&nf.normal_form(), &nf.diagonalizer.inverse()).unwrap();
        prop_assert!(max_abs(&(back.matrix() - h.matrix())) <= 1e-7 * max_abs(h.matrix()));
    }

    #[test]
    fn frequencies_match_spectrum_moduli(lambda in positive_lambdas(), seed in any::<u64>()) {
        let h = conjugated(&lambda, seed, 0.5);
        let f = frequency_map_f(&h).unwrap();
        let mut im: Vec<f64> = spectrum(&h).unwrap().iter().filter(|z| z.im > 0.0).map(|z| z.im).collect();
        im.sort_by(f64::total_cmp);
        prop_assert!(close(&f, &im, 1e-8));
    }

    #[test]
    fn complex_structure_is_unique(lambda in strong_lambdas(), seed in any::<u64>(), other in any::<u64>()) {
        let tol = TolProfile::default();
        let h = conjugated(&lambda, seed, 0.4);
        let a = invariant_complex_structure(&h, &tol).unwrap().j0;
        let b = invariant_complex_structure_via(&h, other, 0.4, &tol).unwrap().j0;
        prop_assert!(max_abs(&(&a - &b)) <= 1e-7 * max_abs(&a).max(1.0));
    }

    #[test]
    fn kahler_positivity_iff_positive_signs(lambda in strong_lambdas(), seed in any::<u64>()) {
        let h = conjugated(&lambda, seed, 0.4);
        let r = classify(&h, &TolProfile::default()).unwrap();
        let all_positive = r.spectrum.entries.iter().all(|e| e.krein_sign == 1);
        let definite = symmetric_eigenvalues(h.matrix()).unwrap()[0] > 0.0;
        prop_assert_eq!(all_positive, definite);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn addition_map_is_diagonally_invariant(lambda in positive_lambdas(), seed in any::<u64>()) {
        let spec = OrbitSpec::new(lambda.clone()).unwrap();
        let mut rng = stream(seed, 0);
        let (h1, h2) = orbit_pair(&spec, &spec, &SpreadSchedule::default(), &mut rng).unwrap();
        let s = random_symplectic(lambda.len(), 0.5, seed ^ 1).unwrap();
        let base = frequency_map_f(&h1.add(&h2).unwrap()).unwrap();
        let moved = frequency_map_f(&conjugate(&h1, &s).unwrap().add(&conjugate(&h2, &s).unwrap()).unwrap()).unwrap();
        prop_assert!(close(&base, &moved, 1e-8));
    }

    #[test]
    fn clouds_lie_in_the_chamber(lambda in positive_lambdas(), seed in any::<u64>()) {
        let spec = OrbitSpec::new(lambda).unwrap();
        let cloud = horn_sample(&spec, &spec, 50, seed, &SpreadSchedule::default()).unwrap();
        for p in &cloud.points {
            prop_assert!(p[0] > 0.0);
            prop_assert!(p.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn hull_contains_every_point(lambda in positive_lambdas(), seed in any::<u64>()) {
        let spec = OrbitSpec::new(lambda).unwrap();
        let cloud = horn_sample(&spec, &spec, 200, seed, &SpreadSchedule::default()).unwrap();
        let hull = hull_summary(&cloud.points).unwrap();
        for f in &hull.facets {
            for p in &cloud.points {
                let v: f64 = f.normal.iter().zip(p).map(|(a, b)| a * b).sum();
                prop_assert!(v <= f.offset + 1e-9 * f.offset.abs().max(1.0));
            }
        }
    }

    #[test]
    fn cloud_csv_round_trips(lambda in positive_lambdas(), seed in any::<u64>()) {
        let spec = OrbitSpec::new(lambda).unwrap();
        let cloud = horn_sample(&spec, &spec, 20, seed, &SpreadSchedule::default()).unwrap();
        let mut buf = Vec::new();
        write_cloud_csv(&cloud, &mut buf).unwrap();
        prop_assert_eq!(read_cloud_csv(buf.as_slice()).unwrap(), cloud);
    }
}
