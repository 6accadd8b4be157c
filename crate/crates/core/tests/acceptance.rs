//! Acceptance criteria, one PASS/FAIL line each. Runs as a plain binary so
//! the lines always reach the console; exits nonzero if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng as _, SeedableRng};
use stochopt_core::data::{parse_libsvm, write_libsvm, Dataset, Label};
use stochopt_core::experiment::{run_experiment, ExperimentConfig};
use stochopt_core::kernel::{DualState, KernelOracle, KernelSpec};
use stochopt_core::pca::eig::{largest_principal_angle, orthonormalize_columns, EigState};
use stochopt_core::pca::{
    pca_train, project_relative_entropy, project_trace_simplex, reconstruct, unrelax_decompose, warmuth_step,
    PcaAlgorithm, PcaConfig, StepSchedule,
};
use stochopt_core::rng::Rng;
use stochopt_core::svm::baselines::{
    box_cap, dual_coordinate_step, dual_pair_step_biased, select_working_pair, FourierFeatures, SelectMode,
};
use stochopt_core::svm::sparsify::{build_problem, iteration_bound, slant_loss, sparsify, SparsifyConfig};
use stochopt_core::svm::{find_gamma, find_gamma_and_bias, Classifier, Sbp, SbpConfig};
use stochopt_core::synthetic::{SyntheticFamily, SyntheticSource, SyntheticSpec};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn rng(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

fn sym_eigen(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let e = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..e.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| e.eigenvalues[b].total_cmp(&e.eigenvalues[a]));
    let vals = order.iter().map(|&i| e.eigenvalues[i]).collect();
    (vals, e.eigenvectors.select_columns(&order))
}

fn level_by_bisection(heights: &[f64], volume: f64) -> f64 {
    let min = heights.iter().copied().fold(f64::INFINITY, f64::min);
    let (mut lo, mut hi) = (min, min + volume + 1.0);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        let v: f64 = heights.iter().map(|c| (mid - c).max(0.0)).sum();
        if v < volume {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn criterion_1() -> Outcome {
    let mut r = rng(1);
    let mut worst_plain = 0.0f64;
    let mut worst_biased = 0.0f64;
    let mut biased_cases = 0;
    for _ in 0..10_000 {
        let n = r.random_range(1..=12);
        let c: Vec<f64> = (0..n).map(|_| r.random_range(-5.0..5.0)).collect();
        let volume = r.random_range(0.0..3.0) * n as f64;
        let g = find_gamma(&c, volume).map_err(|e| e.to_string())?;
        worst_plain = worst_plain.max((g - level_by_bisection(&c, volume)).abs());

        let labels: Vec<Label> = (0..n).map(|_| if r.random_bool(0.5) { Label::Pos } else { Label::Neg }).collect();
        if !(labels.contains(&Label::Pos) && labels.contains(&Label::Neg)) {
            continue;
        }
        biased_cases += 1;
        let level_at = |b: f64| {
            let h: Vec<f64> = c.iter().zip(&labels).map(|(ci, y)| ci + y.sign() * b).collect();
            level_by_bisection(&h, volume)
        };
        let span = 2.0 * (10.0 + volume);
        let steps = 200;
        let grid: Vec<f64> = (0..=steps).map(|i| -span + 2.0 * span * i as f64 / steps as f64).collect();
        let best = (0..=steps).max_by(|&a, &b| level_at(grid[a]).total_cmp(&level_at(grid[b]))).unwrap();
        let (mut lo, mut hi) = (grid[best.saturating_sub(1)], grid[(best + 1).min(steps)]);
        for _ in 0..100 {
            let m1 = lo + (hi - lo) / 3.0;
            let m2 = hi - (hi - lo) / 3.0;
            if level_at(m1) < level_at(m2) {
                lo = m1;
            } else {
                hi = m2;
            }
        }
        let oracle = level_at(0.5 * (lo + hi));
        let wl = find_gamma_and_bias(&labels, &c, volume).map_err(|e| e.to_string())?;
        let at_bias = level_at(wl.bias.unwrap());
        worst_biased = worst_biased.max((wl.gamma - oracle).abs()).max((at_bias - wl.gamma).abs());
    }
    ensure(worst_plain <= 1e-9, || format!("find_gamma off by {worst_plain:e}"))?;
    ensure(worst_biased <= 1e-6, || format!("find_gamma_and_bias off by {worst_biased:e}"))?;
    Ok(format!(
        "max error {worst_plain:.1e} plain, {worst_biased:.1e} biased over {biased_cases} two-class instances"
    ))
}

fn random_svm(n: usize, d: usize, r: &mut Rng) -> Dataset {
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| r.random_range(-1.0..1.0)).collect()).collect();
    let signs: Vec<f64> = rows
        .iter()
        .map(|x| {
            let s = x[0] * x[0] + x[1] - 0.3 + r.random_range(-0.2..0.2);
            if s > 0.0 {
                1.0
            } else {
                -1.0
            }
        })
        .collect();
    Dataset::from_dense(&rows, &signs).unwrap()
}

fn criterion_2() -> Outcome {
    let mut r = rng(2);
    let mut max_ratio = 0.0f64;
    for case in 0..50 {
        let n = r.random_range(20..=200);
        let data = random_svm(n, 4, &mut r);
        let spec = KernelSpec::gaussian(r.random_range(0.3..2.0)).unwrap();
        let oracle = KernelOracle::new(spec, &data).map_err(|e| e.to_string())?;
        let lambda = r.random_range(0.01..0.5);
        let mut dense = DualState::zeros(n);
        for _ in 0..10 * n {
            let i = r.random_range(0..n);
            dual_coordinate_step(&mut dense, &oracle, lambda, i).map_err(|e| e.to_string())?;
        }
        let problem = build_problem(&dense, &oracle, None).map_err(|e| format!("case {case}: {e}"))?;
        let result = sparsify(&problem, &oracle, &SparsifyConfig::default()).map_err(|e| format!("case {case}: {e}"))?;
        let bound = iteration_bound(problem.reference_norm_sq);
        ensure(result.iterations <= bound, || format!("case {case}: {} > {bound} iterations", result.iterations))?;
        ensure(result.support_size() <= result.iterations, || format!("case {case}: support exceeds iterations"))?;
        ensure(result.objective <= 0.5, || format!("case {case}: f = {}", result.objective))?;
        let sparse = result.classifier(&oracle);
        let slant: f64 = (0..n).map(|i| slant_loss(data.y(i) * sparse.decision(data.x(i)))).sum::<f64>() / n as f64;
        let hinge: f64 = dense.responses.iter().map(|c| (1.0 - c).max(0.0)).sum::<f64>() / n as f64;
        ensure(slant <= hinge + 1e-12, || format!("case {case}: slant {slant} > hinge {hinge}"))?;
        max_ratio = max_ratio.max(result.iterations as f64 / bound.max(1) as f64);
    }
    Ok(format!("50/50 instances; iterations at most {:.0}% of the bound", 100.0 * max_ratio))
}

fn criterion_3() -> Outcome {
    let mut r = rng(3);
    let mut steps = 0usize;
    while steps < 100_000 {
        let n = r.random_range(2..=10);
        let data = random_svm(n, 3, &mut r);
        let oracle = KernelOracle::new(KernelSpec::gaussian(0.7).unwrap(), &data).map_err(|e| e.to_string())?;
        let lambda = r.random_range(0.05..2.0);
        let cap = box_cap(lambda, n);
        let mut s = DualState::zeros(n);
        for _ in 0..50 {
            let before = s.dual_objective();
            let i = r.random_range(0..n);
            dual_coordinate_step(&mut s, &oracle, lambda, i).map_err(|e| e.to_string())?;
            ensure(s.dual_objective() >= before - 1e-10, || "coordinate step decreased the dual".into())?;
            ensure(s.alpha.iter().all(|&a| (0.0..=cap).contains(&a)), || "coordinate step left the box".into())?;
            steps += 1;
        }
        let mut s = DualState::zeros(n);
        for _ in 0..50 {
            let before = s.dual_objective();
            let balance_before: f64 = (0..n).map(|m| data.y(m) * s.alpha[m]).sum();
            if let Some((i, j)) = select_working_pair(&s, &data, cap, SelectMode::Uniform, &mut r) {
                dual_pair_step_biased(&mut s, &oracle, lambda, i, j).map_err(|e| e.to_string())?;
            }
            let balance: f64 = (0..n).map(|m| data.y(m) * s.alpha[m]).sum();
            ensure(s.dual_objective() >= before - 1e-10, || "pair step decreased the dual".into())?;
            ensure(s.alpha.iter().all(|&a| (0.0..=cap).contains(&a)), || "pair step left the box".into())?;
            ensure((balance - balance_before).abs() <= 1e-12, || format!("balance drifted by {}", balance - balance_before))?;
            steps += 1;
        }
    }
    Ok(format!("{steps} steps"))
}

fn criterion_4() -> Outcome {
    let mut r = rng(4);
    let mut worst_norm = 0.0f64;
    for case in 0..20 {
        let data = random_svm(30, 3, &mut r);
        let oracle = KernelOracle::new(KernelSpec::gaussian(1.0).unwrap(), &data).map_err(|e| e.to_string())?;
        let cfg = SbpConfig {
            nu: r.random_range(0.0..0.5),
            iterations: 400,
            with_bias: case % 2 == 1,
            seed: case,
            ..Default::default()
        };
        let mut sbp = Sbp::new(&oracle, cfg).map_err(|e| e.to_string())?;
        for _ in 0..400 {
            sbp.step().map_err(|e| e.to_string())?;
            worst_norm = worst_norm.max(sbp.state().norm());
        }
    }
    ensure(worst_norm <= 1.0 + 1e-9, || format!("iterate norm reached {worst_norm}"))?;
    let pair = Dataset::from_dense(&[vec![1.0, 0.0], vec![-1.0, 0.0]], &[1.0, -1.0]).unwrap();
    let oracle = KernelOracle::new(KernelSpec::Linear, &pair).unwrap();
    let mut lowest = f64::INFINITY;
    for seed in 0..10 {
        let cfg = SbpConfig {
            iterations: 400,
            seed,
            ..Default::default()
        };
        let mut sbp = Sbp::new(&oracle, cfg).map_err(|e| e.to_string())?;
        for _ in 0..400 {
            sbp.step().map_err(|e| e.to_string())?;
        }
        let margin = sbp.averaged_objective().map_err(|e| e.to_string())?;
        lowest = lowest.min(margin);
    }
    ensure(lowest >= 0.7, || format!("margin {lowest} below 0.7 of the optimum 1"))?;
    Ok(format!("max ||w|| = {worst_norm:.12}; worst margin {lowest:.4} over 10 seeds"))
}

fn random_spectrum(r: &mut Rng, repeated: bool) -> (Vec<f64>, Vec<f64>) {
    let m = r.random_range(1..=12);
    let mut values: Vec<f64> = (0..m).map(|_| r.random_range(-1.0..2.0)).collect();
    if repeated && m > 1 {
        let v = values[0];
        for x in values.iter_mut().take(m / 2 + 1) {
            *x = v;
        }
    }
    let mult = (0..m).map(|_| r.random_range(1..=4) as f64).collect();
    (values, mult)
}

fn criterion_5() -> Outcome {
    let mut r = rng(5);
    let mut worst = 0.0f64;
    let mut trace_err = 0.0f64;
    for case in 0..10_000 {
        let (values, mult) = random_spectrum(&mut r, case % 3 == 0);
        let total: f64 = mult.iter().sum();
        let k = r.random_range(0.0..total);
        let (s, p) = project_trace_simplex(&values, &mult, k).map_err(|e| e.to_string())?;
        let phi = |s: f64| -> f64 { values.iter().zip(&mult).map(|(v, m)| m * (v + s).clamp(0.0, 1.0)).sum() };
        let (mut lo, mut hi) = (-3.0, 3.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if phi(mid) < k {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        for (pi, v) in p.iter().zip(&values) {
            worst = worst.max((pi - (v + hi).clamp(0.0, 1.0)).abs());
            worst = worst.max((pi - (v + s).clamp(0.0, 1.0)).abs());
        }
        trace_err = trace_err.max((p.iter().zip(&mult).map(|(a, m)| a * m).sum::<f64>() - k).abs());
    }
    let mut worst_re = 0.0f64;
    for case in 0..10_000 {
        let (raw, mult) = random_spectrum(&mut r, case % 3 == 0);
        let values: Vec<f64> = raw.iter().map(|v| v.abs() + 1e-3).collect();
        let total: f64 = mult.iter().sum();
        let cap = r.random_range(1.0..4.0) / total;
        let (_, p) = project_relative_entropy(&values, &mult, cap).map_err(|e| e.to_string())?;
        let psi = |z: f64| -> f64 { values.iter().zip(&mult).map(|(v, m)| m * (v / z).min(cap)).sum() };
        let (mut lo, mut hi) = (1e-12f64, 1e6f64);
        for _ in 0..300 {
            let mid = (lo * hi).sqrt();
            if psi(mid) > 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        for (pi, v) in p.iter().zip(&values) {
            worst_re = worst_re.max((pi - (v / hi).min(cap)).abs());
        }
        trace_err = trace_err.max((p.iter().zip(&mult).map(|(a, m)| a * m).sum::<f64>() - 1.0).abs());
    }
    ensure(worst <= 1e-9, || format!("trace-simplex projection off by {worst:e}"))?;
    ensure(worst_re <= 1e-9, || format!("relative-entropy projection off by {worst_re:e}"))?;
    ensure(trace_err <= 1e-9, || format!("trace error {trace_err:e}"))?;
    Ok(format!("max error {worst:.1e} / {worst_re:.1e}, trace error {trace_err:.1e}"))
}

fn random_state(d: usize, k: usize, complement: f64, r: &mut Rng) -> EigState {
    let mut basis = DMatrix::from_fn(d, k, |_, _| r.random_range(-1.0..1.0));
    orthonormalize_columns(&mut basis);
    let vals = (0..k).map(|_| r.random_range(0.0..1.0)).collect();
    EigState::from_parts(basis, vals, complement).unwrap()
}

fn dense_of(s: &EigState) -> DMatrix<f64> {
    let d = s.dim();
    let u = &s.basis;
    let proj = u * u.transpose();
    u * DMatrix::from_diagonal(&DVector::from_column_slice(&s.eigvals)) * u.transpose()
        + (DMatrix::identity(d, d) - proj) * s.complement
}

fn criterion_6() -> Outcome {
    let mut r = rng(6);
    let mut worst_val = 0.0f64;
    let mut worst_angle = 0.0f64;
    let mut angles_checked = 0;
    for case in 0..1000 {
        let d = r.random_range(2..=8);
        let k = r.random_range(0..=d);
        let complement = if case % 2 == 0 { 0.0 } else { r.random_range(0.01..0.5) };
        let mut s = random_state(d, k, complement, &mut r);
        let x: Vec<f64> = if k > 0 && case % 5 == 0 {
            let coeff = DVector::from_fn(k, |_, _| r.random_range(-1.0..1.0));
            (&s.basis * coeff).iter().copied().collect()
        } else {
            (0..d).map(|_| r.random_range(-1.0..1.0)).collect()
        };
        let eta = r.random_range(0.01..2.0);
        let xv = DVector::from_column_slice(&x);
        let target = dense_of(&s) + &xv * xv.transpose() * eta;
        s.rank1_update(eta, &x).map_err(|e| e.to_string())?;
        ensure(s.rank() <= k + 1, || "rank grew by more than one".into())?;

        let (dense_vals, dense_vecs) = sym_eigen(&target);
        let mut ours: Vec<f64> = s.eigvals.clone();
        ours.extend(std::iter::repeat_n(s.complement, d - s.rank()));
        ours.sort_by(|a, b| b.total_cmp(a));
        for (a, b) in ours.iter().zip(&dense_vals) {
            worst_val = worst_val.max((a - b).abs());
        }

        let off = |v: f64| (v - s.complement).abs() > 1e-6;
        let gap = dense_vals
            .iter()
            .filter(|&&v| off(v))
            .map(|v| (v - s.complement).abs())
            .fold(f64::INFINITY, f64::min);
        let ours_cols: Vec<usize> = (0..s.rank()).filter(|&j| off(s.eigvals[j])).collect();
        let dense_cols: Vec<usize> = (0..d).filter(|&j| off(dense_vals[j])).collect();
        if !ours_cols.is_empty() && ours_cols.len() == dense_cols.len() && gap > 1e-4 {
            let a = s.basis.select_columns(&ours_cols);
            let b = dense_vecs.select_columns(&dense_cols);
            worst_angle = worst_angle.max(largest_principal_angle(&a, &b));
            angles_checked += 1;
        }
    }
    ensure(worst_val <= 1e-8, || format!("eigenvalues off by {worst_val:e}"))?;
    ensure(worst_angle <= 1e-6, || format!("principal angle {worst_angle:e}"))?;
    ensure(angles_checked >= 800, || format!("only {angles_checked} subspace comparisons"))?;
    Ok(format!("eigenvalue error {worst_val:.1e}, angle {worst_angle:.1e} ({angles_checked} subspaces)"))
}

fn criterion_7() -> Outcome {
    let mut r = rng(7);
    let mut worst = 0.0f64;
    let mut weight_err = 0.0f64;
    for _ in 0..1000 {
        let d = r.random_range(2..=10);
        let k = r.random_range(1..d);
        let raw: Vec<f64> = (0..d).map(|_| r.random_range(0.0..1.0)).collect();
        let cap = 1.0 / (d - k) as f64;
        let (_, w) = project_relative_entropy(&raw, &vec![1.0; d], cap).map_err(|e| e.to_string())?;
        let parts = unrelax_decompose(&w, k).map_err(|e| e.to_string())?;
        ensure(parts.len() <= d, || format!("{} components for d = {d}", parts.len()))?;
        weight_err = weight_err.max((parts.iter().map(|p| p.weight).sum::<f64>() - 1.0).abs());
        for (a, b) in reconstruct(&parts, d, k).iter().zip(&w) {
            worst = worst.max((a - b).abs());
        }
    }
    ensure(weight_err <= 1e-9, || format!("weights sum off by {weight_err:e}"))?;
    ensure(worst <= 1e-8, || format!("reconstruction error {worst:e}"))?;
    Ok(format!("reconstruction error {worst:.1e}, weight error {weight_err:.1e}"))
}

fn criterion_8() -> Outcome {
    let spec = SyntheticSpec::new(SyntheticFamily::GaussianSigmaK, 32, 4).unwrap();
    let (t, k) = (10_000u64, 4usize);
    let eta = 2.0 * (k as f64 / t as f64).sqrt();
    let (vals, _) = sym_eigen(&spec.second_moment());
    let best: f64 = vals[..k].iter().sum();
    let mut total = 0.0;
    for seed in 0..16 {
        let mut src = SyntheticSource::new(spec).map_err(|e| e.to_string())?;
        let mut cfg = PcaConfig::new(PcaAlgorithm::Msg, k, t);
        cfg.schedule = StepSchedule::Constant(eta);
        cfg.seed = seed;
        let run = pca_train(&cfg, &mut src, None).map_err(|e| e.to_string())?;
        total += best - run.mean_relaxed_objective.ok_or("no relaxed objective")?;
    }
    let mean = total / 16.0;
    let bound = 1.5 * eta;
    ensure(mean <= bound, || format!("mean suboptimality {mean} > {bound}"))?;
    Ok(format!("mean suboptimality {mean:.4} <= {bound:.2}"))
}

fn two_point_runs(algorithm: PcaAlgorithm, seeds: u64, t: u64, configure: impl Fn(&mut PcaConfig)) -> Result<Vec<DMatrix<f64>>, String> {
    (0..seeds)
        .map(|seed| {
            let mut src = SyntheticSource::new(SyntheticSpec::two_point()).map_err(|e| e.to_string())?;
            let mut cfg = PcaConfig::new(algorithm, 1, t);
            cfg.seed = seed;
            configure(&mut cfg);
            pca_train(&cfg, &mut src, None).map(|run| run.reported).map_err(|e| e.to_string())
        })
        .collect()
}

fn criterion_9() -> Outcome {
    let e1 = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
    let runs = two_point_runs(PcaAlgorithm::Incremental, 1000, 200, |_| {})?;
    let stuck = runs.iter().filter(|u| largest_principal_angle(u, &e1) < 0.1).count() as f64 / 1000.0;
    ensure((stuck - 5.0 / 9.0).abs() <= 0.05, || format!("stuck fraction {stuck}"))?;
    Ok(format!("stuck on e1 in {stuck:.3} of runs (5/9 = 0.556)"))
}

fn criterion_10() -> Outcome {
    let e2 = DMatrix::from_column_slice(2, 1, &[0.0, 1.0]);
    let runs = two_point_runs(PcaAlgorithm::CappedMsg, 200, 2000, |c| {
        c.cap_rank = 2;
        c.schedule = StepSchedule::InvSqrt(1.0);
    })?;
    let good = runs.iter().filter(|u| largest_principal_angle(u, &e2) <= 0.1).count() as f64 / 200.0;
    ensure(good >= 0.9, || format!("only {good} of runs found e2"))?;
    Ok(format!("{:.1}% of runs within 0.1 rad of e2", 100.0 * good))
}

fn dense_warmuth(w: &DMatrix<f64>, x: &DVector<f64>, eta: f64, k: usize) -> DMatrix<f64> {
    let d = w.nrows();
    let (vals, vecs) = sym_eigen(w);
    let ln = DVector::from_iterator(d, vals.iter().map(|v| v.max(1e-300).ln()));
    let log_w = &vecs * DMatrix::from_diagonal(&ln) * vecs.transpose();
    let (lv, lvecs) = sym_eigen(&(log_w - x * x.transpose() * eta));
    let e: Vec<f64> = lv.iter().map(|v| v.exp()).collect();
    let cap = 1.0 / (d - k) as f64;
    let psi = |z: f64| -> f64 { e.iter().map(|v| (v / z).min(cap)).sum() };
    let (mut lo, mut hi) = (1e-300f64, e.iter().sum::<f64>() * 2.0 + 1.0);
    for _ in 0..2000 {
        let mid = if hi / lo > 4.0 { (lo * hi).sqrt() } else { 0.5 * (lo + hi) };
        if psi(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let p = DVector::from_iterator(d, e.iter().map(|v| (v / hi).min(cap)));
    &lvecs * DMatrix::from_diagonal(&p) * lvecs.transpose()
}

fn criterion_11() -> Outcome {
    let mut r = rng(11);
    let mut worst = 0.0f64;
    let mut runs = 0;
    for d in 2..=6 {
        for k in 1..d {
            let mut state = EigState::scalar(d, 1.0 / d as f64);
            let mut dense = DMatrix::identity(d, d) / d as f64;
            for t in 1..=200 {
                let x: Vec<f64> = (0..d).map(|_| r.random_range(-1.0..1.0)).collect();
                let eta = 0.5 / (t as f64).sqrt();
                warmuth_step(&mut state, &x, eta, k).map_err(|e| e.to_string())?;
                dense = dense_warmuth(&dense, &DVector::from_column_slice(&x), eta, k);
                let err = (dense_of(&state) - &dense).amax();
                worst = worst.max(err);
                ensure(err <= 1e-6, || format!("d={d} k={k} step {t}: error {err:e}"))?;
            }
            runs += 1;
        }
    }
    Ok(format!("{runs} runs of 200 steps, max entry error {worst:.1e}"))
}

fn criterion_12() -> Outcome {
    let mut r = rng(12);
    let spec = KernelSpec::gaussian(1.0).unwrap();
    let d = 5;
    let features = FourierFeatures::new(spec, d, 2048, 12).map_err(|e| e.to_string())?;
    let mut total = 0.0;
    for _ in 0..100 {
        let a: Vec<f64> = (0..d).map(|_| r.random_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..d).map(|_| r.random_range(-1.0..1.0)).collect();
        let (sa, sb) = (
            stochopt_core::SparseVector::from_dense(&a),
            stochopt_core::SparseVector::from_dense(&b),
        );
        let approx: f64 = features.map(&sa).iter().zip(features.map(&sb)).map(|(x, y)| x * y).sum();
        total += (approx - spec.eval(&sa, &sb)).abs();
    }
    let mean = total / 100.0;
    let bound = 3.0 / 4096f64.sqrt();
    ensure(mean <= bound, || format!("mean error {mean} > {bound}"))?;
    Ok(format!("mean |error| {mean:.4} <= {bound:.4} with D = 4096"))
}

fn criterion_13() -> Outcome {
    let configs = [
        "task = pca\nalgorithm = capped_msg\ndata = synthetic\nd = 8\nk = 2\nK = 3\nT = 300\nseeds = 0..3\n",
        "task = pca\nalgorithm = warmuth\ndata = synthetic\nfamily = orthogonal_sigma_k\nd = 6\nk = 2\nT = 200\n",
        "task = svm\nalgorithm = sbp\ndata = separable\nT = 200\nnu = 0.05\nseeds = 0,5\n",
        "task = svm\nalgorithm = pegasos\ndata = separable\nn = 40\nepochs = 3\n",
    ];
    let mut compared = 0;
    for text in configs {
        let mut outputs = Vec::new();
        let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
        for dir in &dirs {
            let mut cfg = ExperimentConfig::parse(text).map_err(|e| e.to_string())?;
            cfg.set("out", dir.path().to_string_lossy().into_owned()).map_err(|e| e.to_string())?;
            let report = run_experiment(&cfg).map_err(|e| e.to_string())?;
            let mut files: Vec<Vec<u8>> = report.seeds.iter().map(|s| std::fs::read(&s.csv_path).unwrap()).collect();
            files.push(std::fs::read(report.aggregate_path.as_ref().ok_or("no aggregate")?).unwrap());
            outputs.push(files);
        }
        ensure(outputs[0] == outputs[1], || format!("CSV bytes differ for config:\n{text}"))?;
        compared += outputs[0].len();
    }
    let mut r = rng(13);
    for case in 0..200 {
        let n = r.random_range(1..30);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                (0..r.random_range(1..12))
                    .map(|_| if r.random_bool(0.4) { 0.0 } else { r.random_range(-1e3..1e3) })
                    .collect()
            })
            .collect();
        let signs: Vec<f64> = (0..n).map(|_| if r.random_bool(0.5) { 1.0 } else { -1.0 }).collect();
        let ds = Dataset::from_dense(&rows, &signs).unwrap();
        let text = write_libsvm(&ds);
        let back = parse_libsvm(text.as_bytes()).map_err(|e| e.to_string())?;
        ensure(back == ds, || format!("case {case}: parsed dataset differs"))?;
        ensure(write_libsvm(&back) == text, || format!("case {case}: serialization differs"))?;
    }
    Ok(format!("{compared} CSV pairs identical; 200 LIBSVM round trips exact"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 13] = [
        ("water-level oracle", criterion_1),
        ("sparsifier bound", criterion_2),
        ("dual monotonicity and box feasibility", criterion_3),
        ("SBP feasibility and progress", criterion_4),
        ("projection oracles", criterion_5),
        ("rank-one update dense equivalence", criterion_6),
        ("unrelax decomposition", criterion_7),
        ("MSG rate", criterion_8),
        ("incremental failure probability", criterion_9),
        ("capped MSG robustness", criterion_10),
        ("Warmuth dense-oracle equivalence", criterion_11),
        ("RFF concentration", criterion_12),
        ("harness determinism", criterion_13),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let elapsed: Duration = start.elapsed();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} [{:.2}s]", i + 1, elapsed.as_secs_f64()),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail} [{:.2}s]", i + 1, elapsed.as_secs_f64());
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
