use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use kroninfer::denoiser::{
    center_adjacency, estimate_p, ks_distance, shrink_singular, singular_values_full, truncated_svd, SpectralModel,
};
use kroninfer::ingest::{extract_features, parse_tu_dataset, standardize_features};
use kroninfer::kron_model::{exact_exponent, generate, Adjacency, GraphParams};
use kroninfer::linear_map::{rank_bound, SignalOperator};
use kroninfer::rng::derive_seed;
use kroninfer::solver::{infer, SolverConfig};

use crate::args::{AccelerateArg, BenchArgs, FeaturesArgs, GenerateArgs, InferArgs, MethodArg, SpectrumArgs};
use crate::error::CliError;
use crate::output::{csv_row, prepare_dir, provenance, write_text};

type Written = Result<Vec<PathBuf>, CliError>;

fn fmt_all(v: &[f64]) -> Vec<String> {
    v.iter().map(|x| x.to_string()).collect()
}

fn x_header(m: usize) -> Vec<String> {
    (1..=m * m).map(|i| format!("x_{i}")).collect()
}

fn check_shuffle(rho: f64) -> Result<(), CliError> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(CliError::Validation(format!("shuffle fraction {rho} is outside [0, 1]")));
    }
    Ok(())
}

pub fn read_adjacency(path: &Path) -> Result<Adjacency, CliError> {
    let file = fs::File::open(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let r = BufReader::new(file);
    let a = if path.extension().is_some_and(|e| e == "bin") {
        Adjacency::read_binary(r)?
    } else {
        Adjacency::read_edge_list(r)?
    };
    Ok(a)
}

fn exponent(n: usize, m: usize) -> Result<usize, CliError> {
    exact_exponent(n, m).ok_or_else(|| CliError::Validation(format!("graph size {n} is not a power of m = {m}")))
}

pub fn generate_cmd(args: &GenerateArgs) -> Written {
    let g = &args.graph;
    check_shuffle(g.shuffle)?;
    let params = GraphParams::from_vec(g.m, g.k, g.p, &g.x)?;
    let seed = args.output.seed;
    let head = provenance("generate", seed, args);
    let dir = &args.output.out;
    prepare_dir(dir)?;
    let sample = generate(&params, g.shuffle, seed, !g.undirected)?;
    let a = &sample.adjacency;

    let mut written = Vec::new();
    let bin = dir.join(format!("{}.bin", args.name));
    let file = fs::File::create(&bin).map_err(|e| CliError::Io(format!("{}: {e}", bin.display())))?;
    a.write_binary(std::io::BufWriter::new(file))?;
    written.push(bin);
    if args.edge_list {
        written.push(write_text(&dir.join(format!("{}.edges", args.name)), &head, |w| {
            a.write_edge_list(w)?;
            Ok(())
        })?);
    }
    written.push(write_text(&dir.join(format!("{}_perm.csv", args.name)), &head, |w| {
        csv_row(w, &["vertex".into(), "image".into()])?;
        for (i, &j) in sample.permutation.map().iter().enumerate() {
            csv_row(w, &[(i + 1).to_string(), (j + 1).to_string()])?;
        }
        Ok(())
    })?);
    written.push(write_text(&dir.join(format!("{}_manifest.csv", args.name)), &head, |w| {
        let mut rows = vec![
            ("m".to_string(), g.m.to_string()),
            ("K".into(), g.k.to_string()),
            ("N".into(), params.n().to_string()),
            ("p".into(), g.p.to_string()),
        ];
        rows.extend(g.x.iter().enumerate().map(|(i, v)| (format!("x_{}", i + 1), v.to_string())));
        rows.extend([
            ("shuffle".into(), g.shuffle.to_string()),
            ("seed".into(), seed.to_string()),
            ("directed".into(), (!g.undirected).to_string()),
            ("displaced".into(), sample.permutation.hamming_distance().to_string()),
            ("edges".into(), a.edge_count().to_string()),
        ]);
        csv_row(w, &["key".into(), "value".into()])?;
        for (k, v) in rows {
            csv_row(w, &[k, v])?;
        }
        Ok(())
    })?);
    Ok(written)
}

pub fn infer_cmd(args: &InferArgs) -> Written {
    let seed = args.output.seed;
    let cfg = args.solver.config(seed);
    if let Some(t) = &args.truth {
        if t.len() != args.m * args.m {
            return Err(CliError::Validation(format!("--truth has {} entries, expected {}", t.len(), args.m * args.m)));
        }
    }
    let a = read_adjacency(&args.adjacency)?;
    exponent(a.n(), args.m)?;
    cfg.validate(a.n())?;
    let head = provenance("infer", seed, args);
    prepare_dir(&args.output.out)?;
    let res = infer::<f64>(&a, args.m, &cfg)?;

    let dir = &args.output.out;
    let main = write_text(&dir.join(format!("{}.csv", args.name)), &head, |w| {
        let mut header = vec!["p_hat".to_string()];
        header.extend(x_header(args.m));
        header.extend(["mse", "iterations", "converged", "final_residual", "d_nnz", "wall_time"].map(String::from));
        csv_row(w, &header)?;
        let mut row = vec![res.p_hat.to_string()];
        row.extend(fmt_all(res.vec_x()));
        row.push(args.truth.as_ref().map(|t| res.squared_error(t).to_string()).unwrap_or_default());
        row.extend([
            res.iterations.to_string(),
            res.converged.to_string(),
            res.final_residual.to_string(),
            res.d_nnz.to_string(),
            res.wall_time.to_string(),
        ]);
        csv_row(w, &row)
    })?;
    let trace = write_text(&dir.join(format!("{}_trace.csv", args.name)), &head, |w| {
        csv_row(w, &["iteration".into(), "value".into()])?;
        for (i, v) in res.trace.iter().enumerate() {
            csv_row(w, &[(i + 1).to_string(), v.to_string()])?;
        }
        Ok(())
    })?;
    Ok(vec![main, trace])
}

struct SpikeRow {
    ell: f64,
    predicted: f64,
    observed: f64,
    alignment: f64,
}

pub fn spectrum_cmd(args: &SpectrumArgs) -> Written {
    let seed = args.output.seed;
    if args.curve_points < 2 {
        return Err(CliError::Validation("--curve-points must be at least 2".into()));
    }
    check_shuffle(args.shuffle)?;
    let (a, truth) = match &args.adjacency {
        Some(path) => (read_adjacency(path)?, None),
        None => {
            let (k, p, x) = (args.k.unwrap_or(0), args.p.unwrap_or(f64::NAN), args.x.clone().unwrap_or_default());
            let params = GraphParams::from_vec(args.m, k, p, &x)?;
            let sample = generate(&params, args.shuffle, seed, !args.undirected)?;
            (sample.adjacency, Some(params))
        }
    };
    let k = exponent(a.n(), args.m)?;
    let est = estimate_p(&a, k)?;
    let head = provenance("spectrum", seed, args);
    prepare_dir(&args.output.out)?;

    let fitted = SpectralModel::new(est.pbar_hat)?;
    let sv = singular_values_full(&center_adjacency::<f64>(&a).into_matrix())?;
    let r = rank_bound(args.m, k).min(sv.len());
    let edge = fitted.bulk_edge();
    let bulk: Vec<f64> = sv[r..].iter().map(|v| v / fitted.noise_scale()).collect();
    let ks = ks_distance(&bulk, &SpectralModel::unit());

    let spikes: Vec<SpikeRow> = match &truth {
        Some(params) => {
            let model = SpectralModel::new(params.pbar())?;
            let op = SignalOperator::new(params.p(), params.x(), args.m, k)?;
            let sigmas = truncated_svd(&op, r)?.singular_values;
            sigmas
                .iter()
                .zip(&sv)
                .map(|(&s, &obs)| (s / model.noise_scale(), obs))
                .filter(|&(ell, _)| ell > 1.0)
                .map(|(ell, observed)| {
                    let pred = model.spike(ell);
                    SpikeRow { ell, predicted: pred.location, observed, alignment: pred.alignment }
                })
                .collect()
        }
        None => sv
            .iter()
            .take(r)
            .filter_map(|&obs| {
                let ell = fitted.invert_spike(obs)?;
                let pred = fitted.spike(ell);
                Some(SpikeRow { ell, predicted: pred.location, observed: obs, alignment: pred.alignment })
            })
            .collect(),
    };

    let dir = &args.output.out;
    let name = &args.name;
    let mut written = Vec::new();
    written.push(write_text(&dir.join(format!("{name}_values.csv")), &head, |w| {
        csv_row(w, &["index".into(), "value".into(), "shrunk".into(), "above_edge".into()])?;
        for (i, &v) in sv.iter().enumerate() {
            let shrunk = if i < r { shrink_singular(v, est.pbar_hat) } else { 0.0 };
            csv_row(w, &[(i + 1).to_string(), v.to_string(), shrunk.to_string(), (v > edge).to_string()])?;
        }
        Ok(())
    })?);
    written.push(write_text(&dir.join(format!("{name}_curve.csv")), &head, |w| {
        csv_row(w, &["x".into(), "density".into()])?;
        let n = args.curve_points;
        for i in 0..n {
            let x = edge * i as f64 / (n - 1) as f64;
            csv_row(w, &[x.to_string(), fitted.density(x).to_string()])?;
        }
        Ok(())
    })?);
    written.push(write_text(&dir.join(format!("{name}_spikes.csv")), &head, |w| {
        csv_row(w, &["index", "ell", "predicted", "observed", "alignment"].map(String::from))?;
        for (i, s) in spikes.iter().enumerate() {
            csv_row(
                w,
                &[(i + 1).to_string(), s.ell.to_string(), s.predicted.to_string(), s.observed.to_string(), s.alignment.to_string()],
            )?;
        }
        Ok(())
    })?);
    written.push(write_text(&dir.join(format!("{name}_summary.csv")), &head, |w| {
        csv_row(w, &["key".into(), "value".into()])?;
        let above = sv.iter().filter(|&&v| v > edge).count();
        for (k, v) in [
            ("n", a.n().to_string()),
            ("pbar_hat", est.pbar_hat.to_string()),
            ("bulk_edge", edge.to_string()),
            ("ks_distance", ks.to_string()),
            ("above_edge", above.to_string()),
            ("spike_source", if truth.is_some() { "signal" } else { "inverted" }.to_string()),
        ] {
            csv_row(w, &[k.to_string(), v])?;
        }
        Ok(())
    })?);
    println!("KS distance of the bulk to the quarter-circle law: {ks:.4}");
    Ok(written)
}

struct BenchConfig {
    n: usize,
    params: GraphParams<f64>,
    method: MethodArg,
    accelerated: bool,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn bench_cmd(args: &BenchArgs) -> Written {
    check_shuffle(args.shuffle)?;
    if args.repeats == 0 {
        return Err(CliError::Validation("--repeats must be at least 1".into()));
    }
    let accel: &[bool] = match args.accelerate {
        AccelerateArg::Off => &[false],
        AccelerateArg::On => &[true],
        AccelerateArg::Both => &[false, true],
    };
    let mut configs = Vec::new();
    for &n in &args.n {
        let k = exponent(n, args.m)?;
        for &p in &args.p {
            let params = GraphParams::from_vec(args.m, k, p, &args.x)?;
            for &method in &args.methods {
                for &accelerated in accel {
                    configs.push(BenchConfig { n, params: params.clone(), method, accelerated });
                }
            }
        }
    }
    let seed = args.output.seed;
    let head = provenance("bench", seed, args);
    prepare_dir(&args.output.out)?;

    let mut rows = Vec::new();
    for c in &configs {
        let (mut errors, mut times) = (Vec::new(), Vec::new());
        for rep in 0..args.repeats {
            let run_seed = derive_seed(seed, rep as u64);
            let base = match c.method {
                MethodArg::Iht => SolverConfig::iht(args.s),
                MethodArg::Relax => SolverConfig::relax(None),
            };
            let mut cfg = if c.accelerated { base.accelerated() } else { base };
            cfg.block_count = cfg.block_count.map(|b| b.min(c.n));
            cfg.seed = run_seed;
            let sample = generate(&c.params, args.shuffle, run_seed, true)?;
            let res = infer::<f64>(&sample.adjacency, args.m, &cfg)?;
            errors.push(res.squared_error(&args.x));
            times.push(res.wall_time);
        }
        let (mse, sd) = mean_std(&errors);
        let (t, _) = mean_std(&times);
        eprintln!(
            "N={} p={} {:?}{}: mse {mse:.3} +- {sd:.3}, {t:.3}s",
            c.n,
            c.params.p(),
            c.method,
            if c.accelerated { " accelerated" } else { "" }
        );
        rows.push(vec![
            args.m.to_string(),
            c.n.to_string(),
            c.params.k().to_string(),
            c.params.p().to_string(),
            format!("{:?}", c.method).to_lowercase(),
            c.accelerated.to_string(),
            args.repeats.to_string(),
            mse.to_string(),
            sd.to_string(),
            t.to_string(),
        ]);
    }
    let path = write_text(&args.output.out.join(format!("{}.csv", args.name)), &head, |w| {
        csv_row(
            w,
            &["m", "N", "K", "p", "method", "accelerated", "repeats", "mse_mean", "mse_std", "wall_time_mean"].map(String::from),
        )?;
        for r in &rows {
            csv_row(w, r)?;
        }
        Ok(())
    })?;
    Ok(vec![path])
}

pub fn features_cmd(args: &FeaturesArgs) -> Written {
    let seed = args.output.seed;
    let cfg = args.solver.config(seed);
    if args.m < 2 {
        return Err(CliError::Validation(format!("initiator side {} must be at least 2", args.m)));
    }
    let corpus = parse_tu_dataset(&args.dataset)?;
    let head = provenance("features", seed, args);
    prepare_dir(&args.output.out)?;
    let (raw, report) = extract_features(&corpus, args.m, &cfg)?;
    for (g, msg) in &report.failures {
        eprintln!("warning: graph {}: {msg}", g + 1);
    }
    if report.warning_count() > 0 {
        eprintln!("{} of {} graphs produced zero rows", report.warning_count(), corpus.graphs.len());
    }
    let table = if args.raw { raw } else { standardize_features(&raw)? };
    let path = write_text(&args.output.out.join(format!("{}.csv", args.name)), &head, |w| {
        table.write_csv(w)?;
        Ok(())
    })?;
    Ok(vec![path])
}
