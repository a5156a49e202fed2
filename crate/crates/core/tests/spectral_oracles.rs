mod common;

use nhlat::c64;
use nhlat::model::{build_obc_hamiltonian, LatticeParams};
use nhlat::spectral::{
    classify_states, diagonalize, loop_geometry, max_distance_to_loops, obc_spectrum, winding_number,
    winding_value, Boundary, Branch, Side, SpectralError, StateLabel,
};

#[test]
fn hermitian_open_chain_closed_form() {
    let p = LatticeParams::new(5, 0.0, 0.0, 0.0).unwrap();
    let s = obc_spectrum(&p).unwrap();
    let mut expected: Vec<f64> = (1..=5)
        .flat_map(|m| {
            let e = 2.0 * (m as f64 * std::f64::consts::PI / 6.0).cos();
            [e, e]
        })
        .collect();
    expected.sort_by(f64::total_cmp);
    let mut got: Vec<f64> = s.eigenvalues.iter().map(|e| e.re).collect();
    got.sort_by(f64::total_cmp);
    for (a, b) in got.iter().zip(&expected) {
        assert!((a - b).abs() < 1e-12);
    }
    assert!(s.eigenvalues.iter().all(|e| e.im.abs() < 1e-12));
}

#[test]
fn every_eigenpair_passes_direct_substitution() {
    for &(n, g, d, v) in &[(20, 0.5, 0.05, 4.0), (70, 0.5, 0.05, 2.0), (33, -1.2, 0.3, 6.0), (16, 0.5, 0.0, 4.0)] {
        let p = LatticeParams::new(n, g, d, v).unwrap();
        let h = build_obc_hamiltonian(&p);
        let s = diagonalize(&h, &p, Boundary::Obc).unwrap();
        assert_eq!(s.len(), 2 * n);
        let norm = h.norm_l2();
        for m in 0..s.len() {
            let psi = s.eigenvector(m).to_flat();
            assert!((psi.iter().map(|z| z.norm_sqr()).sum::<f64>() - 1.0).abs() < 1e-12);
            let e = s.eigenvalues[m];
            let residual: f64 = (0..2 * n)
                .map(|r| {
                    let hpsi: c64 = (0..2 * n).map(|c| h[(r, c)] * psi[c]).sum();
                    (hpsi - e * psi[r]).norm_sqr()
                })
                .sum::<f64>()
                .sqrt();
            assert!(residual <= 1e-8 * norm, "residual {residual:e}");
        }
        // Sorted by Im descending, then Re ascending.
        for w in s.eigenvalues.windows(2) {
            assert!(w[0].im > w[1].im || (w[0].im == w[1].im && w[0].re <= w[1].re));
        }
    }
}

#[test]
fn non_square_input_is_rejected() {
    let p = LatticeParams::new(5, 0.5, 0.05, 4.0).unwrap();
    let h = faer::Mat::<c64>::zeros(10, 9);
    assert!(matches!(diagonalize(&h, &p, Boundary::Obc), Err(SpectralError::DimensionMismatch { .. })));
}

#[test]
fn far_points_have_zero_winding() {
    for branch in [Branch::Upper, Branch::Lower] {
        assert_eq!(winding_number(c64::new(100.0, 0.0), 2.0, 0.5, branch, 4001).unwrap(), 0);
        assert_eq!(winding_number(c64::new(0.0, -100.0), 4.0, 0.5, branch, 4001).unwrap(), 0);
    }
}

#[test]
fn centroid_windings_are_opposite() {
    for v in [2.0, 3.0, 4.5, 6.0] {
        let loops = loop_geometry(v, 0.5, 0.0, 4001).unwrap();
        let up = winding_value(loops.centroid(Branch::Upper), v, 0.5, Branch::Upper, 4001).unwrap();
        let low = winding_value(loops.centroid(Branch::Lower), v, 0.5, Branch::Lower, 4001).unwrap();
        assert!((up.abs() - 1.0).abs() < 1e-3 && (low.abs() - 1.0).abs() < 1e-3, "v={v}: {up} {low}");
        assert_eq!(up.round(), -low.round());
    }
}

#[test]
fn winding_value_is_converged_in_k() {
    let e0 = c64::new(-10.0, 0.0);
    let coarse = winding_value(e0, 2.0, 0.5, Branch::Upper, 4001).unwrap();
    let fine = winding_value(e0, 2.0, 0.5, Branch::Upper, 16001).unwrap();
    assert!((coarse - fine).abs() < 1e-8);
    assert!(coarse.abs() < 1e-6);
}

#[test]
fn bloch_line_shrinks_then_vanishes() {
    let point = loop_geometry(4.0, 0.5, 0.0, 4001).unwrap().bloch_line.unwrap();
    assert!(point.is_point());
    assert_eq!(point.im, -2.0);
    let line = loop_geometry(2.0 * 2f64.sqrt(), 0.5, 0.0, 4000).unwrap().bloch_line.unwrap();
    assert!((line.k_min + std::f64::consts::FRAC_PI_2).abs() < 2e-3);
    assert!((line.k_max - std::f64::consts::FRAC_PI_2).abs() < 2e-3);
    let gapped = loop_geometry(5.0, 0.5, 0.0, 4001).unwrap();
    assert!(gapped.bloch_line.is_none());
    assert!(gapped.min_branch_separation() > 0.0);
}

#[test]
fn obc_spectra_approach_pbc_loops() {
    let loops = loop_geometry(4.0, 0.5, 0.05, 4001).unwrap();
    let distances: Vec<f64> = [20, 40, 80, 160]
        .iter()
        .map(|&n| {
            let s = obc_spectrum(&LatticeParams::new(n, 0.5, 0.05, 4.0).unwrap()).unwrap();
            max_distance_to_loops(&s.eigenvalues, &loops)
        })
        .collect();
    for w in distances.windows(2) {
        assert!(w[1] <= 1.1 * w[0], "{distances:?}");
    }
}

#[test]
fn sfl_states_sit_on_opposite_edges() {
    for (v, n) in [(4.0, 20), (4.0, 40), (2.0, 40)] {
        let p = LatticeParams::new(n, 0.5, 0.05, v).unwrap();
        let s = obc_spectrum(&p).unwrap();
        let loops = loop_geometry(v, 0.5, 0.05, 4001).unwrap();
        let sfl: Vec<_> = classify_states(&s, &loops).into_iter().filter(|c| c.label == StateLabel::Sfl).collect();
        assert!(!sfl.is_empty());
        let opposite = sfl
            .iter()
            .filter(|c| {
                matches!((c.side_a, c.side_b), (Side::Left, Side::Right) | (Side::Right, Side::Left))
            })
            .count();
        assert!(opposite as f64 >= 0.95 * sfl.len() as f64, "v={v} n={n}: {opposite}/{}", sfl.len());
    }
}

#[test]
fn uncoupled_chains_give_skin_states() {
    let p = LatticeParams::new(20, 0.5, 0.0, 4.0).unwrap();
    let s = obc_spectrum(&p).unwrap();
    let loops = loop_geometry(4.0, 0.5, 0.0, 4001).unwrap();
    let classes = classify_states(&s, &loops);
    assert!(classes.iter().any(|c| c.label == StateLabel::Skin));
    assert!(classes.iter().all(|c| c.label != StateLabel::Sfl));
}

#[test]
fn hermitian_limit_has_no_interior_states() {
    let p = LatticeParams::new(12, 0.5, 0.05, 0.0).unwrap();
    let s = obc_spectrum(&p).unwrap();
    let loops = loop_geometry(0.0, 0.5, 0.05, 4001).unwrap();
    for c in classify_states(&s, &loops) {
        assert!(matches!(c.label, StateLabel::Extended | StateLabel::BoundaryAmbiguous), "{:?}", c.label);
    }
}
