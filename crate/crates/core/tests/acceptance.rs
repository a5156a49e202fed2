//! Acceptance checks. Runs every criterion, prints one PASS/FAIL line each and
//! exits nonzero if any failed.

use nhlat::c64;
use nhlat::dynamics::{
    decay_profile, decay_profile_trapezoid, evolve, power_balance_check, symmetry_probe, EvolutionSpec, Horizon,
    Method, SymmetryVariant, Trajectory,
};
use nhlat::experiments::{argmax, fig3_spec, figure_sweep, run_sweep, Figure, SweepRecord, FIG2B_SIZES};
use nhlat::model::{bloch_hamiltonian, pbc_dispersion, LatticeParams};
use nhlat::spectral::{
    classify_states, loop_geometry, max_distance_to_loops, obc_spectrum, sfl_scaling, winding_value, Branch, Side,
    StateSelector,
};
use std::f64::consts::PI;
use std::time::Instant;

type Outcome = Result<(bool, String), String>;

fn eigenvalues(h: &faer::Mat<c64>) -> Vec<c64> {
    let evd = h.eigen().expect("eigendecomposition");
    let s = evd.S().column_vector();
    (0..h.nrows()).map(|i| s[i]).collect()
}

fn pair_distance(a: &[c64], b: [c64; 2]) -> f64 {
    let direct = (a[0] - b[0]).norm().max((a[1] - b[1]).norm());
    let swapped = (a[0] - b[1]).norm().max((a[1] - b[0]).norm());
    direct.min(swapped)
}

fn ac1() -> Outcome {
    let (em, ep) = pbc_dispersion(0.0, 4.0, 0.5);
    let split = (ep - em).norm();
    let exact = em == c64::new(0.0, -2.0) && ep == c64::new(0.0, -2.0);
    let loops = loop_geometry(4.0, 0.5, 0.0, 4001).map_err(|e| e.to_string())?;
    let point = loops.bloch_line.as_ref().is_some_and(|l| l.is_point());
    Ok((
        split < 1e-12 && exact && point,
        format!("|E+ - E-| = {split:e}, E(0) = {em}, {ep}; single-point line: {point}"),
    ))
}

fn ac2() -> Outcome {
    let v = 2.0 * 2f64.sqrt();
    let mut worst = 0.0f64;
    for i in 0..=4000 {
        let k = -PI / 2.0 + PI * i as f64 / 4000.0;
        let (em, ep) = pbc_dispersion(k, v, 0.5);
        worst = worst.max((em.im + 2f64.sqrt()).abs()).max((ep.im + 2f64.sqrt()).abs());
    }
    Ok((worst < 1e-12, format!("max |Im E + sqrt 2| = {worst:e}")))
}

fn ac3() -> Outcome {
    let k = 4001;
    let loops = loop_geometry(2.0, 0.5, 0.0, k).map_err(|e| e.to_string())?;
    let up = winding_value(loops.centroid(Branch::Upper), 2.0, 0.5, Branch::Upper, k).map_err(|e| e.to_string())?;
    let low = winding_value(loops.centroid(Branch::Lower), 2.0, 0.5, Branch::Lower, k).map_err(|e| e.to_string())?;
    let mut far = Vec::new();
    for e0 in [c64::new(50.0, 0.0), c64::new(-50.0, 0.0), c64::new(0.0, 50.0), c64::new(0.0, -50.0)] {
        for branch in [Branch::Upper, Branch::Lower] {
            far.push(winding_value(e0, 2.0, 0.5, branch, k).map_err(|e| e.to_string())?);
        }
    }
    let residual = |x: f64| (x - x.round()).abs();
    let worst = far.iter().chain([&up, &low]).map(|&x| residual(x)).fold(0.0, f64::max);
    let opposite = up.round().abs() == 1.0 && low.round() == -up.round();
    let far_zero = far.iter().all(|x| x.round() == 0.0);
    Ok((
        opposite && far_zero && worst < 1e-3,
        format!("upper {up:.6}, lower {low:.6}, far all zero: {far_zero}, worst residual {worst:e}"),
    ))
}

fn ac4() -> Outcome {
    let p = LatticeParams::new(8, 0.5, 0.0, 4.0).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for i in 0..1001 {
        let k = -PI + 2.0 * PI * i as f64 / 1001.0;
        let h = bloch_hamiltonian(k, &p).map_err(|e| e.to_string())?;
        let a = faer::Mat::from_fn(2, 2, |r, c| h[(r, c)]);
        let b = faer::Mat::from_fn(2, 2, |r, c| h[(2 + r, 2 + c)]);
        let (em, ep) = pbc_dispersion(k, 4.0, 0.5);
        let (fm, fp) = pbc_dispersion(k, 4.0, -0.5);
        worst = worst.max(pair_distance(&eigenvalues(&a), [em, ep]));
        worst = worst.max(pair_distance(&eigenvalues(&b), [fm, fp]));
    }
    Ok((worst < 1e-10, format!("max deviation over 1001 k-points {worst:e}")))
}

fn ac5() -> Outcome {
    let loops = loop_geometry(4.0, 0.5, 0.05, 4001).map_err(|e| e.to_string())?;
    let mut d = Vec::new();
    for n in [20, 70] {
        let s = obc_spectrum(&LatticeParams::new(n, 0.5, 0.05, 4.0).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
        d.push(max_distance_to_loops(&s.eigenvalues, &loops));
    }
    Ok((d[1] <= 1.1 * d[0], format!("max distance N=20 {:.6}, N=70 {:.6}", d[0], d[1])))
}

fn ac6() -> Outcome {
    let mut pass = true;
    let mut detail = Vec::new();
    for v in [2.0, 4.0] {
        let p = LatticeParams::new(20, 0.5, 0.05, v).map_err(|e| e.to_string())?;
        let rows = sfl_scaling(&p, &FIG2B_SIZES, StateSelector::MostNegativeImaginary).map_err(|e| e.to_string())?;
        let (lo, hi) = rows.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), r| (a.min(r.1), b.max(r.1)));
        pass &= hi - lo < 0.05;
        detail.push(format!("V={v}: spread {:.4}", hi - lo));
    }
    Ok((pass, detail.join(", ")))
}

fn ac7() -> Outcome {
    let p = LatticeParams::new(20, 0.5, 0.05, 4.0).map_err(|e| e.to_string())?;
    let s = obc_spectrum(&p).map_err(|e| e.to_string())?;
    let loops = loop_geometry(4.0, 0.5, 0.05, 4001).map_err(|e| e.to_string())?;
    let classes = classify_states(&s, &loops);
    let left = classes.iter().filter(|c| c.side_a == Side::Left).count();
    let right = classes.iter().filter(|c| c.side_a == Side::Right).count();
    let opposite = classes
        .iter()
        .filter(|c| matches!((c.side_a, c.side_b), (Side::Left, Side::Right) | (Side::Right, Side::Left)))
        .count();
    let fraction = opposite as f64 / classes.len() as f64;
    Ok((
        left.abs_diff(right) <= 1 && fraction >= 0.95,
        format!("side_a left {left}, right {right}; opposite sides {opposite}/{}", classes.len()),
    ))
}

fn ac8() -> Outcome {
    let spec = fig3_spec();
    let profile = decay_profile(&spec).map_err(|e| e.to_string())?;
    let traj = evolve(&spec.clone().with_sampling_dt(0.01), Method::Spectral).map_err(|e| e.to_string())?;
    let defect = power_balance_check(&traj);
    Ok((
        profile.sum_defect() < 1e-9 && defect < 1e-4,
        format!("sum-rule defect {:e}, power-balance defect {defect:e} at dt 0.01", profile.sum_defect()),
    ))
}

fn ac9() -> Outcome {
    let p = decay_profile(&fig3_spec()).map_err(|e| e.to_string())?;
    let n = p.params.n();
    let (pa1, pbn) = (p.p_a[0], p.p_b[n - 1]);
    Ok((
        p.ratio_a > 10.0 && p.ratio_b > 10.0 && pa1 < 1e-3 && pbn < 1e-3,
        format!("ratio_a {:.3}, ratio_b {:.3}, P_1^A {pa1:e}, P_N^B {pbn:e}", p.ratio_a, p.ratio_b),
    ))
}

fn sweep(figure: Figure) -> Result<Vec<SweepRecord>, String> {
    let spec = figure_sweep(figure).ok_or("no sweep preset")?;
    run_sweep(&spec, None).map_err(|e| e.to_string())
}

fn value_at(records: &[SweepRecord], x: f64) -> f64 {
    records.iter().find(|r| (r.axis_value - x).abs() < 1e-9).map_or(f64::NAN, |r| r.observable_value)
}

fn ac10() -> Outcome {
    let mut pass = true;
    let mut detail = Vec::new();

    let v = sweep(Figure::Fig3aInset)?;
    let v_best = argmax(&v).map_or(f64::NAN, |i| v[i].axis_value);
    let v_ok = (4.0..=6.0).contains(&v_best) && value_at(&v, 0.0) == 0.0;
    pass &= v_ok;
    detail.push(format!("V argmax {v_best}, P(V=0) {}", value_at(&v, 0.0)));

    let d = sweep(Figure::Fig3c)?;
    let d_best = argmax(&d).map_or(f64::NAN, |i| d[i].axis_value);
    let d_max = value_at(&d, 0.0);
    let d_small = value_at(&d, 0.05);
    let large = decay_profile(&fig3_spec().with_params(
        fig3_spec().params.with_delta(0.5).map_err(|e| e.to_string())?,
    ))
    .map_err(|e| e.to_string())?;
    let d_ok = d_best == 0.0 && d_small > 0.5 * d_max && large.ratio_a < 10.0;
    pass &= d_ok;
    detail.push(format!(
        "Delta argmax {d_best}, P(0.05)/P(0) {:.3}, ratio_a(0.5) {:.3}",
        d_small / d_max,
        large.ratio_a
    ));

    let g = sweep(Figure::Fig3d)?;
    let g_best = argmax(&g).map_or(f64::NAN, |i| g[i].axis_value);
    let g_zero = value_at(&g, 0.0);
    let g_ok = (g_best - 0.45).abs() <= 0.1 + 1e-12 && g_zero < 1e-3;
    pass &= g_ok;
    detail.push(format!("gamma argmax {g_best}, P(gamma=0) {g_zero:e}"));

    let n = sweep(Figure::Fig3bInset)?;
    let values: Vec<f64> = n.iter().map(|r| r.observable_value).collect();
    let n_ok = n.iter().all(|r| r.status == "ok") && values.windows(2).all(|w| w[1] < w[0]);
    pass &= n_ok;
    detail.push(format!(
        "N-sweep P_1^B [{}]",
        values.iter().map(|x| format!("{x:.5}")).collect::<Vec<_>>().join(", ")
    ));

    Ok((pass, detail.join("; ")))
}

fn ac11() -> Outcome {
    let spec = fig3_spec();
    let mut pass = true;
    let mut detail = Vec::new();
    for variant in SymmetryVariant::ALL {
        let r = symmetry_probe(&spec, variant).map_err(|e| e.to_string())?;
        pass &= r.holds;
        let extra = r.ratio_a.map(|x| format!(", ratio_a {x:.3}")).unwrap_or_default();
        detail.push(format!("{} deviation {:e} (tol {:e}){extra}", variant.as_str(), r.deviation, r.tolerance));
    }
    Ok((pass, detail.join("; ")))
}

fn amplitude_gap(a: &Trajectory, b: &Trajectory) -> f64 {
    let mut worst = 0.0f64;
    for (x, y) in a.states.iter().zip(&b.states) {
        for (p, q) in x.to_flat().iter().zip(y.to_flat()) {
            worst = worst.max((p - q).norm());
        }
    }
    if a.states.len() != b.states.len() {
        worst = f64::INFINITY;
    }
    worst
}

fn ac12() -> Outcome {
    let spec = fig3_spec().with_tail_epsilon(1e-9);
    let closed = decay_profile(&spec).map_err(|e| e.to_string())?;
    let traj = evolve(&spec, Method::Spectral).map_err(|e| e.to_string())?;
    let trap = decay_profile_trapezoid(&traj, spec.start_site).map_err(|e| e.to_string())?;
    let p_gap = closed
        .p_a
        .iter()
        .chain(&closed.p_b)
        .zip(trap.p_a.iter().chain(&trap.p_b))
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);

    let mut psi_gap = 0.0f64;
    let cases = [
        fig3_spec().with_horizon(Horizon::Fixed(5.0)),
        EvolutionSpec::new(LatticeParams::new(200, 0.5, 0.05, 2.0).map_err(|e| e.to_string())?, 100)
            .map_err(|e| e.to_string())?
            .with_horizon(Horizon::Fixed(30.0))
            .with_sampling_dt(0.5),
    ];
    for s in &cases {
        let a = evolve(s, Method::Spectral).map_err(|e| e.to_string())?;
        let b = evolve(s, Method::Adaptive).map_err(|e| e.to_string())?;
        psi_gap = psi_gap.max(amplitude_gap(&a, &b));
    }
    Ok((
        p_gap < 1e-6 && psi_gap < 1e-7,
        format!("closed form vs trajectory quadrature {p_gap:e}; spectral vs adaptive amplitudes {psi_gap:e}"),
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome, f64); 12] = [
        ("Bloch point", ac1, 1.0),
        ("straight Bloch line", ac2, 1.0),
        ("winding numbers", ac3, 1.0),
        ("analytic-numeric Bloch agreement", ac4, 1.0),
        ("size-dependent open-boundary spectra", ac5, 5.0),
        ("scale-free localization", ac6, 30.0),
        ("bipolar census", ac7, 5.0),
        ("sum rule and power balance", ac8, 10.0),
        ("edge burst presence", ac9, 10.0),
        ("sweep shapes", ac10, 900.0),
        ("exact symmetries", ac11, 30.0),
        ("oracle equivalence", ac12, 60.0),
    ];
    let mut failures = 0;
    for (i, (name, check, budget)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let outcome = check();
        let elapsed = started.elapsed().as_secs_f64();
        let (pass, detail) = match outcome {
            Ok((ok, detail)) => (ok && elapsed < *budget, detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failures += 1;
        }
        println!(
            "AC{} {}: {name}: {detail} [{elapsed:.2}s of {budget}s]",
            i + 1,
            if pass { "PASS" } else { "FAIL" }
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
