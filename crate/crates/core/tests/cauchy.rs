use compound_delay::cauchy::*;
use compound_delay::dde::presets::build_mackey_glass;
use compound_delay::exterior::{tensor, CompoundGridFunction, FaceIndex};
use compound_delay::hilbert::{embed_scalar, Grid, HistoryElement, StieltjesKernel};
use compound_delay::{Error, LinearDelayModel};

fn mg(tau: f64) -> LinearDelayModel {
    build_mackey_glass(0.1, 0.2, 10.0, tau).unwrap().0
}

fn smooth_pair(g: Grid) -> Vec<HistoryElement> {
    vec![
        embed_scalar(g, |t| (0.7 * t).cos() + 0.2).unwrap(),
        embed_scalar(g, |t| (0.5 * t).exp()).unwrap(),
    ]
}

#[test]
fn adorn_of_constant_is_weight_times_constant() {
    let g = Grid::new(1.0, 10).unwrap();
    let x = AdornedSource::constant(g, 2, 0.3, &[2.0], 12);
    for step in [0, 3, 10, 12] {
        let r = rho(0.3, step as f64 * g.h());
        for v in x.adorn(step).unwrap() {
            assert!((v - 2.0 * r).abs() < 1e-14);
        }
    }
    assert!(matches!(x.adorn(13), Err(Error::Domain(_))));
}

#[test]
fn twist_of_unit_source_is_time_since_entry() {
    let g = Grid::new(1.0, 8).unwrap();
    let steps = 12;
    let y = TwistedSource {
        grid: g,
        k: 1,
        comps: 1,
        nu: 0.0,
        y: vec![vec![1.0; 9]; steps + 1],
    };
    assert!(y.twist(0).unwrap().iter().all(|&v| v == 0.0));
    for step in [1, 5, 12] {
        let t = step as f64 * g.h();
        let out = y.twist(step).unwrap();
        for (i, v) in out.iter().enumerate() {
            // characteristic from theta_i enters through zero at time t + theta_i
            let want = t.min(-g.theta(i)).max(0.0);
            assert!(
                (v - want).abs() < 1e-12,
                "step {step} node {i}: {v} vs {want}"
            );
        }
    }
}

#[test]
fn transport_alone_is_pure_adornment() {
    let g = Grid::new(1.0, 20).unwrap();
    let model = LinearDelayModel::scalar(1.0, StieltjesKernel::zero(1, 1)).unwrap();
    let d = decompose_solution(&model, &smooth_pair(g), None, 0.2, 1.5).unwrap();
    for f in &d.faces {
        assert!(f.twisted.y.iter().flatten().all(|&v| v == 0.0));
    }
    assert!(d.summary.max_relative_residual < 1e-8, "{:?}", d.summary);
}

#[test]
fn scalar_decomposition_is_small() {
    let g = Grid::new(1.0, 100).unwrap();
    let phi = vec![embed_scalar(g, |t| 1.0 + 0.5 * t).unwrap()];
    let d = decompose_solution(&mg(1.0), &phi, None, 0.05, 2.0).unwrap();
    assert_eq!(d.faces.len(), 1);
    assert!(d.summary.max_relative_residual < 1e-3, "{:?}", d.summary);
}

#[test]
fn top_face_source_is_the_forcing() {
    let g = Grid::new(1.0, 12).unwrap();
    let nu = 0.4;
    let psi = smooth_pair(g);
    let profile: Vec<f64> = (0..=12).map(|k| (k as f64 * g.h()).sin()).collect();
    let forcing = Forcing {
        factors: psi.clone(),
        profile: profile.clone(),
    };
    let d = decompose_solution(&mg(1.0), &smooth_pair(g), Some(&forcing), nu, 1.0).unwrap();
    let top = d
        .faces
        .iter()
        .find(|f| f.face == FaceIndex::top(2))
        .unwrap();
    let eta = tensor(&[&psi[0], &psi[1]]).unwrap();
    for (j, y) in top.twisted.y.iter().enumerate() {
        let w = profile[j] * rho(-nu, j as f64 * g.h());
        for (a, b) in y.iter().zip(eta.data()) {
            assert!((a - w * b).abs() < 1e-13);
        }
    }
}

#[test]
fn incompatible_initial_data_is_rejected() {
    let g = Grid::new(1.0, 10).unwrap();
    let bad = HistoryElement::new(g, 1, vec![5.0], vec![0.0; 10]).unwrap();
    let ok = embed_scalar(g, |_| 1.0).unwrap();
    let r = decompose_solution(&mg(1.0), &[bad, ok], None, 0.0, 1.0);
    assert!(matches!(r, Err(Error::Domain(_))));
}

#[test]
fn residual_decreases_with_grid_spacing() {
    let tau = 1.0;
    let mut res = Vec::new();
    for ng in [50usize, 100, 200] {
        let g = Grid::new(tau, ng).unwrap();
        let profile: Vec<f64> = (0..=ng).map(|k| (2.0 * k as f64 * g.h()).sin()).collect();
        let forcing = Forcing {
            factors: smooth_pair(g),
            profile,
        };
        let d = decompose_solution(&mg(tau), &smooth_pair(g), Some(&forcing), 0.05, tau).unwrap();
        res.push(d.summary.max_residual);
        assert!(d.summary.norm_ratio.is_finite());
    }
    let order = ((res[0] / res[2]).ln() / 4f64.ln()).min((res[0] / res[1]).log2());
    assert!(order >= 0.9, "residuals {res:?}");
}

#[test]
fn pointwise_measure_reads_nodes_and_lower_face() {
    let g = Grid::new(1.0, 10).unwrap();
    let phi = tensor(&[
        &embed_scalar(g, |t| 1.0 + t).unwrap(),
        &embed_scalar(g, |t| 2.0 - t).unwrap(),
    ])
    .unwrap();
    let kernel = StieltjesKernel::scalar_atom(0.0, 2.0)
        .plus(&StieltjesKernel::scalar_atom(-1.0, -1.0))
        .unwrap();
    let out = pointwise_measure_series(&[phi.clone()], FaceIndex::top(2), 1, &kernel).unwrap();
    for i in 0..10 {
        let x = 1.0 + g.theta(i);
        let want = x * (2.0 * 2.0 - 1.0 * 3.0);
        assert!((out[0][i] - want).abs() < 1e-12);
    }
    let bad = pointwise_measure_series(&[phi], FaceIndex::new(2, &[0]), 1, &kernel);
    assert!(matches!(bad, Err(Error::Shape(_))));
}

#[test]
fn measurement_commutes_with_fourier_transform() {
    let g = Grid::new(1.0, 16).unwrap();
    let base = tensor(&[
        &embed_scalar(g, |t| (3.0 * t).sin() + 1.0).unwrap(),
        &embed_scalar(g, |t| t * t).unwrap(),
    ])
    .unwrap();
    let series: Vec<CompoundGridFunction<f64>> = (0..40)
        .map(|k| {
            let t = k as f64 / 40.0;
            let mut s = base.clone();
            s.scale((std::f64::consts::PI * t).sin().powi(2));
            s
        })
        .collect();
    let kernel = StieltjesKernel::scalar_atom(0.0, 1.0)
        .plus(&StieltjesKernel::scalar_density(-0.8, -0.2, 0.5))
        .unwrap();
    let r = fourier_commutation_residual(&series, FaceIndex::top(2), 0, &kernel, 128).unwrap();
    assert!(r <= 1e-6, "{r}");
}
