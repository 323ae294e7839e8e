use compound_delay::dde::presets::build_mackey_glass;
use compound_delay::dde::{characteristic_roots, CharRoot, Rect};
use compound_delay::hilbert::StieltjesKernel;
use compound_delay::spectrum::{
    compound_spectrum_sums, line_clearance, spectral_bound, spectrum_report,
};
use compound_delay::{Error, LinearDelayModel};
use num_complex::Complex64;
use proptest::prelude::*;

fn delayed() -> LinearDelayModel {
    LinearDelayModel::scalar(1.0, StieltjesKernel::scalar_atom(-1.0, -1.0)).unwrap()
}

#[test]
fn delayed_equation_pair_sums() {
    let roots = characteristic_roots(&delayed(), &Rect::new(-3.0, 1.0, -20.0, 20.0), 50).unwrap();
    let eigs = compound_spectrum_sums(&roots, 2, &Rect::new(-2.0, 1.0, -5.0, 5.0));
    let lead = &eigs[..3];
    let re = -0.6362630104;
    assert!(lead.iter().all(|e| (e.value.re - re).abs() < 1e-8));
    let mut ims: Vec<f64> = lead.iter().map(|e| e.value.im).collect();
    ims.sort_by(|a, b| a.partial_cmp(b).unwrap());
    assert!(ims[1].abs() < 1e-10);
    assert!((ims[2] - 2.6744714028).abs() < 1e-8 && (ims[0] + ims[2]).abs() < 1e-10);
    let b = spectral_bound(&eigs);
    assert!((b.s - re).abs() < 1e-8);
    // the real sum uses two distinct roots, the others repeat a root
    let real = lead.iter().find(|e| e.value.im.abs() < 1e-10).unwrap();
    assert_eq!(real.antisym_multiplicity, 1);
    assert!(lead
        .iter()
        .filter(|e| e.value.im.abs() > 1.0)
        .all(|e| e.antisym_multiplicity == 0));
    let (j, d) = line_clearance(&eigs, 0.3).unwrap();
    assert_eq!(j, 0);
    assert!((d - 0.3362630104).abs() < 1e-8);
}

#[test]
fn mackey_glass_stationary_report() {
    let (m, _) = build_mackey_glass(0.1, 0.2, 10.0, 2.0).unwrap();
    let rep = spectrum_report(
        &m,
        2,
        &Rect::new(-3.0, 1.0, -10.0, 10.0),
        &Rect::new(-3.0, 1.0, -10.0, 10.0),
        None,
        50,
    )
    .unwrap();
    assert_eq!(rep.roots.len(), 1);
    assert!((rep.roots[0].value.re + 0.1).abs() < 1e-12);
    assert!((rep.bound.s + 0.2).abs() < 1e-12);
    assert!((rep.nu0 - 0.1).abs() < 1e-12);
    assert_eq!(rep.unstable_count, 0);
    assert!((rep.min_distance - 0.1).abs() < 1e-12);
    let err = spectrum_report(
        &m,
        2,
        &Rect::new(-3.0, 1.0, -10.0, 10.0),
        &Rect::new(-3.0, 1.0, -10.0, 10.0),
        Some(0.2),
        50,
    );
    assert!(matches!(err, Err(Error::LineHitsSpectrum { .. })));
}

#[test]
fn unstable_pair_counts() {
    // compare against a brute-force count over distinct root pairs
    let alpha = StieltjesKernel::scalar_atom(0.0, 0.5)
        .plus(&StieltjesKernel::scalar_atom(-1.0, -2.0))
        .unwrap();
    let m = LinearDelayModel::scalar(1.0, alpha).unwrap();
    let roots = characteristic_roots(&m, &Rect::new(-4.0, 3.0, -30.0, 30.0), 100).unwrap();
    let eigs = compound_spectrum_sums(&roots, 2, &Rect::new(-4.0, 6.0, -30.0, 30.0));
    let (j, _) = line_clearance(&eigs, 0.05).unwrap();
    let brute: usize = (0..roots.len())
        .flat_map(|a| (a + 1..roots.len()).map(move |b| (a, b)))
        .filter(|&(a, b)| (roots[a].value + roots[b].value).re > -0.05)
        .filter(|&(a, b)| (roots[a].value + roots[b].value).im.abs() <= 30.0)
        .count();
    assert_eq!(j, brute);
}

fn arb_roots() -> impl Strategy<Value = Vec<CharRoot>> {
    prop::collection::vec((-3.0f64..0.5, -4.0f64..4.0, 1usize..3), 1..6).prop_map(|v| {
        v.into_iter()
            .map(|(re, im, mult)| CharRoot {
                value: Complex64::new(re, im),
                multiplicity: mult,
            })
            .collect()
    })
}

proptest! {
    #[test]
    fn sums_invariant_under_permutation(roots in arb_roots(), seed in any::<u64>(), m in 1usize..4) {
        let w = Rect::new(-20.0, 5.0, -20.0, 20.0);
        let a = compound_spectrum_sums(&roots, m, &w);
        let mut shuffled = roots.clone();
        let k = shuffled.len();
        shuffled.rotate_left((seed as usize) % k);
        shuffled.reverse();
        let b = compound_spectrum_sums(&shuffled, m, &w);
        prop_assert_eq!(a.len(), b.len());
        for e in &a {
            let f = b.iter().find(|f| (f.value - e.value).norm() < 1e-9).unwrap();
            prop_assert_eq!(e.tensor_multiplicity, f.tensor_multiplicity);
            prop_assert_eq!(e.antisym_multiplicity, f.antisym_multiplicity);
            prop_assert!(e.antisym_multiplicity <= e.tensor_multiplicity);
        }
    }

    #[test]
    fn order_one_reproduces_roots(roots in arb_roots()) {
        let w = Rect::new(-20.0, 5.0, -20.0, 20.0);
        let a = compound_spectrum_sums(&roots, 1, &w);
        for r in &roots {
            prop_assert!(a.iter().any(|e| (e.value - r.value).norm() < 1e-9));
        }
        let total: usize = a.iter().map(|e| e.tensor_multiplicity).sum();
        prop_assert_eq!(total, roots.iter().map(|r| r.multiplicity).sum::<usize>());
    }
}
