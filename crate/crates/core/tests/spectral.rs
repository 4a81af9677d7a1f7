mod common;

use schurwalk::spectral::*;
use schurwalk::Error;

#[test]
fn degenerate_ring_has_exact_edge_states() {
    let exp = run_ring(8, 0.0, 0.0, 0).unwrap();
    assert_eq!(exp.dim(), 16);
    assert!(exp.unitarity_defect() < 1e-12);
    for point in [1i8, -1] {
        assert!(exp.min_distance(point) < 1e-12, "point {point}");
        let profile = edge_state_profile(&exp, point).unwrap();
        assert!((profile.interface_fraction - 1.0).abs() < 1e-12);
        assert_eq!(profile.interfaces, [0, 4]);
        assert!((profile.mass.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
    for gap in exp.protected_gaps().unwrap() {
        assert_eq!(gap.distance, 0.0);
    }
}

#[test]
fn spectrum_is_unitary_and_conjugation_closed() {
    for seed in 0..3 {
        let exp = run_ring(40, 0.3, 0.2, seed).unwrap();
        assert!(exp.unitarity_defect() < 1e-10);
        assert!(exp.conjugation_defect() < 1e-9);
        let phases = exp.eigenphases();
        assert!(phases.windows(2).all(|w| w[0] <= w[1]));
    }
}

#[test]
fn extended_precision_gap_agrees_with_dense_solver_when_resolvable() {
    // small rings have gaps well above f64 rounding
    for seed in 0..4 {
        let exp = run_ring(8, 0.6, 0.6, seed).unwrap();
        let gaps = exp.protected_gaps().unwrap();
        for gap in gaps {
            let dense = exp.min_distance(gap.point);
            assert!(dense > 1e-6, "seed {seed}: dense distance {dense}");
            assert!((gap.distance - dense).abs() < 1e-9 * dense.max(1.0) + 1e-12, "{gap:?} vs {dense}");
        }
    }
}

#[test]
fn pinned_gaps_for_fifty_cells() {
    // reference values from an independent 200-digit eigenvalue computation
    let exp = run_ring(50, 0.3, 0.2, 0).unwrap();
    let [plus, minus] = exp.protected_gaps().unwrap();
    assert!((plus.log10_distance - (-29.37085696689)).abs() < 1e-8, "{plus:?}");
    assert!((minus.log10_distance - (-30.05153302688)).abs() < 1e-8, "{minus:?}");
}

#[test]
fn edge_and_bulk_profiles() {
    let exp = run_ring(200, 0.3, 0.2, 1).unwrap();
    let edge = edge_state_profile(&exp, 1).unwrap();
    assert!(exp.profile(edge.index, 20).interface_fraction > 0.9);
    // eigenvector with phase near ±π/2 lives in the bulk
    let bulk = (0..exp.dim())
        .min_by(|&a, &b| {
            let d = |k: usize| (exp.eigenvalues[k].arg().abs() - std::f64::consts::FRAC_PI_2).abs();
            d(a).total_cmp(&d(b))
        })
        .unwrap();
    assert!(exp.profile(bulk, 10).interface_fraction < 0.5);
}

#[test]
fn ring_errors() {
    assert!(matches!(run_ring(7, 0.1, 0.1, 0), Err(Error::InvalidParameter(_))));
    assert!(matches!(run_ring(6, 0.1, 0.1, 0), Err(Error::InvalidParameter(_))));
    assert!(matches!(ring_angles(MAX_RING_CELLS + 2, 0.1, 0.1, 0), Err(Error::DimensionCapExceeded { .. })));
    assert!(matches!(run_ring(8, 1.2, 0.3, 0), Err(Error::BoundViolated { .. })));
    let mut exp = run_ring(20, 0.3, 0.2, 0).unwrap();
    exp.threshold = 0.0;
    assert!(matches!(edge_state_profile(&exp, 1), Err(Error::NoCandidate { point: 1 })));
}

#[test]
fn csv_and_svg_output() {
    let exp = run_ring(8, 0.0, 0.0, 0).unwrap();
    let mut buf = Vec::new();
    write_spectrum_csv(&exp, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("re,im,eigenphase,dist_to_plus1,dist_to_minus1"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 16);
    for row in &rows {
        assert_eq!(row.len(), 5);
        assert!(((row[0] * row[0] + row[1] * row[1]).sqrt() - 1.0).abs() < 1e-12);
        assert!((row[3] + row[4] - std::f64::consts::PI).abs() < 1e-12);
    }

    let profile = edge_state_profile(&exp, -1).unwrap();
    let mut buf = Vec::new();
    write_profile_csv(&profile, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("cell,mass\n"));
    assert_eq!(text.lines().count(), 9);

    let svg = spectrum_svg(&exp);
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    assert_eq!(svg.matches("<circle").count(), 1 + 16);
    assert!(svg.contains("interfaces at cells 0 and 4"));
    assert_eq!(svg.matches("class=\"interface-marker\"").count(), 2);
}
