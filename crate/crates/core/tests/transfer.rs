use compound_delay::dde::presets::build_mackey_glass;
use compound_delay::exterior::{check_antisymmetry, wedge, CompoundGridFunction};
use compound_delay::hilbert::{embed_scalar, Grid, HistoryElement, StieltjesKernel};
use compound_delay::transfer::*;
use compound_delay::{Error, LinearDelayModel};
use nalgebra::DMatrix;
use num_complex::Complex64;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn mg(tau: f64) -> LinearDelayModel {
    build_mackey_glass(0.1, 0.2, 10.0, tau).unwrap().0
}

fn rel(a: &CompoundGridFunction<Complex64>, b: &CompoundGridFunction<Complex64>) -> f64 {
    let mut d = a.clone();
    d.axpy(c(-1.0, 0.0), b).unwrap();
    d.norm() / b.norm()
}

#[test]
fn scalar_transfer_closed_form() {
    let gamma = 0.3;
    let tau = 1.0;
    let m = build_mackey_glass(gamma, 0.5, 10.0, tau).unwrap().0;
    let g = Grid::new(tau, 200).unwrap();
    let basis = ProperBasis::legendre(g, 1, 4).unwrap();
    assert_eq!(basis.len(), 1);
    for p in [c(0.0, 0.0), c(-0.1, 1.0), c(0.5, -3.0)] {
        let w =
            transfer_matrix(&m, p, &basis, &basis, &LaplaceOptions::new(150.0, -gamma)).unwrap();
        let want = -(-p * tau).exp() / (p + gamma);
        let got = w.matrix[(0, 0)];
        assert!(
            (got - want).norm() < 1e-6 * want.norm().max(1.0),
            "p={p}: {got} vs {want}"
        );
        assert!(w.remainder >= 0.0);
    }
}

#[test]
fn basis_is_orthonormal_and_nested() {
    let g = Grid::new(2.0, 64).unwrap();
    for m in [2usize, 3] {
        let b = ProperBasis::legendre(g, m, 6).unwrap();
        let k = m - 1;
        let mut gram = DMatrix::<f64>::zeros(b.len(), b.len());
        let mut idx = vec![0usize; k];
        let total = g.ng.pow(k as u32);
        for flat in 0..total {
            let mut f = flat;
            for j in (0..k).rev() {
                idx[j] = f % g.ng;
                f /= g.ng;
            }
            let w = b.weight(&idx);
            for a in 0..b.len() {
                for bb in 0..b.len() {
                    gram[(a, bb)] += w * b.value(a, &idx) * b.value(bb, &idx);
                }
            }
        }
        assert!(
            (gram - DMatrix::identity(b.len(), b.len())).amax() < 1e-10,
            "m={m}"
        );
        let small = ProperBasis::legendre(g, m, 3).unwrap();
        assert_eq!(small.tuples[..], b.tuples[..3]);
    }
}

#[test]
fn control_embed_matches_wedge_form() {
    let g = Grid::new(2.0, 20).unwrap();
    let model = mg(2.0);
    for m in [1usize, 2, 3] {
        let b = ProperBasis::legendre(g, m, 3).unwrap();
        for e in 0..b.len() {
            let direct = control_embed(&model, &b, e).unwrap();
            let via = control_wedge(&model, &b, e).unwrap().to_grid().unwrap();
            let mut d = direct.clone();
            d.axpy(-1.0, &via).unwrap();
            assert!(d.max_abs() < 1e-12, "m={m} e={e}");
            assert!(check_antisymmetry(&direct, 1e-12).max_violation() < 1e-12);
        }
    }
    // m = 1: unit head scaled by B
    let b1 = ProperBasis::legendre(g, 1, 1).unwrap();
    let one = control_embed(&model, &b1, 0).unwrap();
    assert_eq!(one.at(&[g.ng])[0], 1.0);
    assert_eq!(one.max_abs(), 1.0);
}

#[test]
fn constant_control_example() {
    let tau = 2.0;
    let g = Grid::new(tau, 16).unwrap();
    let model = mg(tau);
    let b = ProperBasis::legendre(g, 2, 1).unwrap();
    let emb = control_embed(&model, &b, 0).unwrap();
    let e0 = 1.0 / (tau - g.h() / 2.0).sqrt();
    let psi_i = HistoryElement::new(g, 1, vec![0.0], vec![e0; 16]).unwrap();
    let psi_inf = HistoryElement::head_only(g, vec![1.0]);
    let w = wedge(&[&psi_i, &psi_inf]).unwrap();
    for (x, y) in emb.data().iter().zip(w.data()) {
        assert!((x - 2.0 * y).abs() < 1e-12);
    }
}

#[test]
fn measurement_examples() {
    let tau = 1.0;
    let g = Grid::new(tau, 100).unwrap();
    let model = mg(tau);
    let b = ProperBasis::legendre(g, 2, 5).unwrap();
    let zero = CompoundGridFunction::<f64>::zeros(g, 2, 1);
    assert!(measurement_project(&model, &zero, &b)
        .unwrap()
        .iter()
        .all(|v| *v == 0.0));

    let f1 = embed_scalar(g, |t| (2.0 * t).cos()).unwrap();
    let f2 = embed_scalar(g, |t| 1.0 + t * t).unwrap();
    let phi = wedge(&[&f1, &f2]).unwrap();
    let got = measurement_project(&model, &phi, &b).unwrap();
    // c = delta(-tau): 1/2 [f1(-tau) f2(theta) - f2(-tau) f1(theta)]
    for e in 0..b.len() {
        let mut want = 0.0;
        for i in 0..g.ng {
            let v = 0.5 * (f1.body[0] * f2.body[i] - f2.body[0] * f1.body[i]);
            want += g.body_weight(i) * b.value(e, &[i]) * v;
        }
        assert!((got[e] - want).abs() <= 1e-8 * want.abs().max(1e-12));
    }
}

#[test]
fn laplace_route_rejects_line_left_of_bound() {
    let g = Grid::new(1.0, 20).unwrap();
    let model = mg(1.0);
    let b = ProperBasis::legendre(g, 2, 2).unwrap();
    let err = transfer_matrix(
        &model,
        c(-0.3, 1.0),
        &b,
        &b,
        &LaplaceOptions::new(50.0, -0.2),
    );
    assert!(matches!(err, Err(Error::LaplaceInvalid { .. })));
}

#[test]
fn fast_and_generic_routes_agree() {
    let tau = 1.0;
    let g = Grid::new(tau, 40).unwrap();
    let model = mg(tau);
    let opts = LaplaceOptions::new(60.0, -0.2);
    for m in [2usize, 3] {
        let b = ProperBasis::legendre(g, m, 3).unwrap();
        let p = c(-0.05, 1.3);
        let fast = transfer_matrix(&model, p, &b, &b, &opts).unwrap();
        let slow = transfer_matrix_generic(&model, p, &b, &b, &opts).unwrap();
        let d = (&fast.matrix - &slow.matrix).camax();
        assert!(d < 1e-10 * fast.matrix.camax().max(1e-3), "m={m}: {d}");
    }
}

#[test]
fn dense_scalar_ode() {
    let g = Grid::new(1.0, 10).unwrap();
    let model = LinearDelayModel::scalar(1.0, StieltjesKernel::scalar_atom(0.0, -1.0)).unwrap();
    let mut psi = CompoundGridFunction::<Complex64>::zeros(g, 1, 1);
    psi.at_mut(&[g.ng])[0] = c(1.0, 0.0);
    let sol = dense_resolvent_solve(&model, &psi, c(0.0, 0.0)).unwrap();
    // A phi = psi: body constant, head -phi(0) = 1
    for i in 0..=g.ng {
        assert!((sol.value.at(&[i])[0] - c(-1.0, 0.0)).norm() < 1e-10);
    }
    assert!(sol.diagnostics.residual < 1e-10);
}

#[test]
fn laplace_vs_dense_mackey_glass() {
    let tau = 2.0;
    let model = mg(tau);
    let p = c(-0.05, 1.0);
    let mut errs = Vec::new();
    for (ng, horizon) in [(100usize, 120.0), (200, 160.0)] {
        let g = Grid::new(tau, ng).unwrap();
        let b = ProperBasis::legendre(g, 2, 3).unwrap();
        let input = control_wedge(&model, &b, 1).unwrap();
        let neg = WedgeSum {
            terms: input.terms.iter().map(|(k, f)| (-k, f.clone())).collect(),
        };
        let lap = resolvent_laplace(&model, &neg, p, &LaplaceOptions::new(horizon, -0.2)).unwrap();
        let psi = input.to_grid().unwrap().to_complex();
        let dense = dense_resolvent_extrapolated(&model, &psi, p).unwrap();
        assert!(
            dense.diagnostics.residual < 1e-10,
            "{:?}",
            dense.diagnostics
        );
        assert!(dense.diagnostics.antisymmetry_violation < 1e-10);
        let plain = dense_resolvent_solve(&model, &psi, p).unwrap();
        let e = rel(&lap.value, &dense.value);
        let ep = rel(&lap.value, &plain.value);
        println!(
            "ng={ng} T={horizon}: extrapolated {e:.3e}, upwind {ep:.3e}, remainder {:.3e}",
            lap.remainder
        );
        errs.push((e, ep));
    }
    assert!(
        errs[0].0 <= 0.02 && errs[1].0 <= 0.01 && errs[1].0 < errs[0].0,
        "{errs:?}"
    );
    // the plain upwind solve converges at first order
    let ratio = errs[0].1 / errs[1].1;
    assert!(ratio > 1.7 && ratio < 2.3, "{errs:?}");
}

#[test]
fn conjugate_symmetry() {
    let tau = 1.0;
    let g = Grid::new(tau, 40).unwrap();
    let model = mg(tau);
    let b = ProperBasis::legendre(g, 2, 4).unwrap();
    let k = TransferKernel::build(&model, &b, &b, 40.0, 1).unwrap();
    for p in [c(-0.05, 1.3), c(0.2, 7.0)] {
        let w = k.evaluate(p, -0.2).unwrap().matrix;
        let wc = k.evaluate(p.conj(), -0.2).unwrap().matrix;
        let d = (&wc - w.map(|z| z.conj())).camax();
        assert!(d <= 1e-10 * w.camax(), "{d}");
    }
}

#[test]
fn doubling_horizon_stays_within_remainder() {
    let gamma = 0.3;
    let model = build_mackey_glass(gamma, 0.5, 10.0, 1.0).unwrap().0;
    let g = Grid::new(1.0, 50).unwrap();
    let b = ProperBasis::legendre(g, 1, 1).unwrap();
    let p = c(-0.1, 2.0);
    let short = transfer_matrix(&model, p, &b, &b, &LaplaceOptions::new(15.0, -gamma)).unwrap();
    let long = transfer_matrix(&model, p, &b, &b, &LaplaceOptions::new(30.0, -gamma)).unwrap();
    let d = (&short.matrix - &long.matrix).camax();
    assert!(
        d > 0.0 && d <= short.remainder,
        "{d} vs {}",
        short.remainder
    );
    assert!(long.remainder < short.remainder);
}

#[test]
fn nested_bases_give_leading_blocks() {
    let g = Grid::new(1.0, 30).unwrap();
    let model = mg(1.0);
    let big = ProperBasis::legendre(g, 2, 5).unwrap();
    let small = big.truncated(3);
    let opts = LaplaceOptions::new(20.0, -0.2);
    let p = c(0.0, 2.0);
    let wb = transfer_matrix(&model, p, &big, &big, &opts).unwrap();
    let ws = transfer_matrix(&model, p, &small, &small, &opts).unwrap();
    assert!((wb.block(3, 3) - &ws.matrix).camax() < 1e-13);
}

#[test]
fn refined_grid_keeps_linear_data_and_jumps() {
    let g = Grid::new(2.0, 10).unwrap();
    let f = embed_scalar(g, |t| 1.0 + 0.5 * t).unwrap();
    let jump = HistoryElement::head_only(g, vec![1.0]);
    let w = wedge(&[&f, &jump]).unwrap();
    let r = w.refined().unwrap();
    let gf = r.grid;
    let ff = embed_scalar(gf, |t| 1.0 + 0.5 * t).unwrap();
    let jf = HistoryElement::head_only(gf, vec![1.0]);
    let want = wedge(&[&ff, &jf]).unwrap();
    let mut d = r.clone();
    d.axpy(-1.0, &want).unwrap();
    assert!(d.max_abs() < 1e-14);
}

#[test]
fn dense_operator_eigenvalue_converges_to_compound_sum() {
    // x' = -x(t - 1); the real pair sum of the leading roots
    let model = LinearDelayModel::scalar(1.0, StieltjesKernel::scalar_atom(-1.0, -1.0)).unwrap();
    let exact = c(-0.6362630104, 0.0);
    let mut errs = Vec::new();
    for ng in [40usize, 80] {
        let g = Grid::new(1.0, ng).unwrap();
        let mut z = exact;
        for _ in 0..30 {
            let m0 = dense_operator_matrix(&model, &g, 2, z).unwrap();
            let eps = 1e-6;
            let m1 = dense_operator_matrix(&model, &g, 2, z + eps).unwrap();
            let dm = (m1 - &m0) / c(eps, 0.0);
            let inv = m0.lu().solve(&dm).unwrap();
            let step = -c(1.0, 0.0) / inv.trace();
            z += step;
            if step.norm() < 1e-12 {
                break;
            }
        }
        errs.push((z - exact).norm());
    }
    assert!(errs[0] < 0.1 && errs[1] < errs[0], "{errs:?}");
    let ratio = errs[0] / errs[1];
    assert!(ratio > 1.6 && ratio < 2.5, "{errs:?}");
}
