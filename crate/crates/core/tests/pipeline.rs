use kroninfer::denoiser::{denoise, truncated_svd, SpectralModel, SvdMode};
use kroninfer::kron_model::{generate, GraphParams};
use kroninfer::linear_map::{rank_bound, SignalOperator};
use kroninfer::solver::{infer, SolverConfig};

const X: [f64; 4] = [5.25, 0.25, 2.25, -7.75];

#[test]
fn randomized_spikes_match_deterministic() {
    let params = GraphParams::from_vec(2, 11, 0.8, &X).unwrap();
    let a = generate(&params, 0.2, 3, true).unwrap().adjacency;
    let det = denoise::<f64>(&a, 2, SvdMode::Deterministic, 0).unwrap();
    let rnd = denoise::<f64>(&a, 2, SvdMode::randomized(), 0).unwrap();

    // only components the theory places outside the bulk
    let model = SpectralModel::new(params.pbar()).unwrap();
    let op = SignalOperator::new(params.p(), params.x(), 2, 11).unwrap();
    let truth = truncated_svd(&op, rank_bound(2, 11)).unwrap().singular_values;
    let spikes = truth.iter().filter(|&&s| s / model.noise_scale() > 1.5).count();
    assert!(spikes >= 1);
    for i in 0..spikes {
        let (d, r) = (det.spectrum()[i], rnd.spectrum()[i]);
        assert!((d - r).abs() <= 0.01 * d, "component {i}: {d} vs {r}");
    }
}

#[test]
fn same_inputs_same_result() {
    let params = GraphParams::from_vec(2, 10, 0.8, &X).unwrap();
    let a = generate(&params, 0.2, 11, true).unwrap().adjacency;
    for cfg in [SolverConfig::iht(5), SolverConfig::relax(None).accelerated()] {
        let cfg = SolverConfig { seed: 42, ..cfg };
        let r1 = infer::<f64>(&a, 2, &cfg).unwrap();
        let r2 = infer::<f64>(&a, 2, &cfg).unwrap();
        assert_eq!(r1.vec_x(), r2.vec_x());
        assert_eq!(r1.d_support, r2.d_support);
        assert_eq!(r1.trace, r2.trace);
    }
}

#[test]
fn generated_graph_recovers_initiator_roughly() {
    let params = GraphParams::from_vec(2, 10, 0.8, &X).unwrap();
    let sample = generate(&params, 0.0, 1, true).unwrap();
    let res = infer::<f64>(&sample.adjacency, 2, &SolverConfig::iht(5)).unwrap();
    assert!((res.p_hat - 0.8).abs() < 0.01);
    assert!(res.squared_error(&X) < 30.0, "{}", res.squared_error(&X));
}
