use magwell_core::agmon::{agmon_distance, decay_profile, energy_identity_residual, Stencil, WeightFunction};
use magwell_core::eigensolve::{dense_eigenvalues, eigen_count_below, lowest_eigenpairs};
use magwell_core::field::{detect_wells, tr_plus, FieldModel, GaugeField, QuadraticGauge};
use magwell_core::lattice::{assemble, gauge_transform, BoundaryCondition, DomainMask, Grid};
use magwell_core::spectra::{ClusterReport, GapCensus};
use magwell_core::C64;
use proptest::prelude::*;

fn trig(base: f64, ax: f64, ay: f64) -> FieldModel {
    FieldModel::TrigWell {
        base,
        amp_x: ax,
        amp_y: ay,
    }
}

fn dirichlet(cells: usize, m: usize) -> Grid {
    Grid::new(cells, m, BoundaryCondition::Dirichlet).unwrap()
}

fn antisymmetric(n: usize, upper: &[f64]) -> Vec<f64> {
    let mut m = vec![0.0; n * n];
    let mut it = upper.iter();
    for i in 0..n {
        for j in i + 1..n {
            let v = *it.next().unwrap();
            m[i * n + j] = v;
            m[j * n + i] = -v;
        }
    }
    m
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn intensity_is_even_and_matches_2d(upper in prop::collection::vec(-3.0f64..3.0, 10)) {
        let b = antisymmetric(5, &upper);
        let neg: Vec<f64> = b.iter().map(|x| -x).collect();
        let t = tr_plus(&b, 5).unwrap();
        prop_assert!((t - tr_plus(&neg, 5).unwrap()).abs() <= 1e-10 * (1.0 + t));
        let b2 = antisymmetric(2, &upper[..1]);
        prop_assert!((tr_plus(&b2, 2).unwrap() - upper[0].abs()).abs() <= 1e-12);
    }

    #[test]
    fn stokes_on_rectangles(
        x0 in -1.0f64..1.0, y0 in -1.0f64..1.0, w in 0.05f64..0.8, hgt in 0.05f64..0.8,
        symmetric in any::<bool>(),
    ) {
        let model = trig(1.0, 1.0, 0.6);
        let gauge = if symmetric {
            GaugeField::symmetric(model.clone(), [0.2, -0.1])
        } else {
            GaugeField::landau(model.clone())
        };
        let c = [[x0, y0], [x0 + w, y0], [x0 + w, y0 + hgt], [x0, y0 + hgt]];
        let circ: f64 = (0..4).map(|i| gauge.line_integral(c[i], c[(i + 1) % 4])).sum();
        let flux = model.flux([x0, y0], [x0 + w, y0 + hgt]);
        prop_assert!((circ - flux).abs() <= 1e-9, "{} vs {}", circ, flux);
    }

    #[test]
    fn wells_grow_with_threshold(e1 in 0.1f64..0.6, de in 0.01f64..0.3) {
        let grid = dirichlet(3, 16);
        let model = FieldModel::default();
        let small = detect_wells(&model, e1, &grid).unwrap().mask();
        let large = detect_wells(&model, e1 + de, &grid).unwrap().mask();
        prop_assert!(small.is_subset_of(&large));
    }

    #[test]
    fn operator_is_hermitian_and_nonnegative(
        h in 0.1f64..0.5, seed in any::<u64>(), symmetric in any::<bool>(),
    ) {
        let grid = dirichlet(1, 9);
        let model = FieldModel::default();
        let gauge = if symmetric { GaugeField::symmetric(model, [0.0, 0.0]) } else { GaugeField::landau(model) };
        let op = assemble(&gauge, &grid, &DomainMask::full(&grid), h).unwrap();
        prop_assert!(op.matrix().is_exactly_hermitian());
        let mut s = seed;
        let u: Vec<C64> = (0..op.dim()).map(|_| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            C64::new((s >> 40) as f64 / 1e7 - 0.8, (s >> 20 & 0xFFFF) as f64 / 6e4 - 0.5)
        }).collect();
        prop_assert!(op.quadratic_form(&u) >= -1e-12);
    }

    #[test]
    fn gauge_covariance(h in 0.1f64..0.4, q in prop::array::uniform4(-1.0f64..1.0)) {
        let grid = dirichlet(1, 8);
        let mask = DomainMask::full(&grid);
        let shift = QuadraticGauge { hessian: [[q[0], q[1]], [q[1], q[2]]], gradient: [q[3], -q[2]] };
        let gauge = GaugeField::landau(FieldModel::default());
        let op = assemble(&gauge, &grid, &mask, h).unwrap();
        let chi: Vec<f64> = (0..grid.len()).map(|k| shift.value(grid.point(k))).collect();
        let conj = gauge_transform(&op, &chi).unwrap();
        let shifted = assemble(&gauge.clone().with_shift(shift), &grid, &mask, h).unwrap();
        let a = dense_eigenvalues(op.matrix());
        for other in [&conj, &shifted] {
            let b = dense_eigenvalues(other.matrix());
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() <= 1e-10 * x.abs().max(1.0));
            }
        }
    }

    #[test]
    fn counts_are_monotone(t1 in 0.0f64..1.5, dt in 0.0f64..1.0) {
        let grid = dirichlet(1, 8);
        let op = assemble(&GaugeField::landau(FieldModel::default()), &grid, &DomainMask::full(&grid), 0.3).unwrap();
        let c1 = eigen_count_below(&op, t1 + 1e-7);
        let c2 = eigen_count_below(&op, t1 + dt + 2e-7);
        if let (Ok(c1), Ok(c2)) = (c1, c2) {
            prop_assert!(c1 <= c2);
            let spec = dense_eigenvalues(op.matrix());
            prop_assert_eq!(c1, spec.iter().filter(|&&l| l < t1 + 1e-7).count());
        }
    }

    #[test]
    fn agmon_distance_structure(b0w in 0.5f64..1.0, db in 0.0f64..0.4, sx in 0usize..15, sy in 0usize..15) {
        let grid = dirichlet(1, 16);
        let mask = DomainMask::full(&grid);
        let model = FieldModel::default();
        let src = [grid.index(sx, sy)];
        let lo = agmon_distance(&model, &mask, &src, b0w, Stencil::Sixteen).unwrap();
        let hi = agmon_distance(&model, &mask, &src, b0w + db, Stencil::Sixteen).unwrap();
        prop_assert_eq!(lo.distance[src[0]], 0.0);
        for (a, b) in lo.distance.iter().zip(&hi.distance) {
            prop_assert!(b <= a);
        }
        // 1-Lipschitz along stencil edges
        for p in 0..grid.len() {
            let (ix, iy) = grid.ij(p);
            for &(dx, dy) in Stencil::Sixteen.offsets() {
                let (x, y) = (ix as i64 + dx, iy as i64 + dy);
                if x < 0 || y < 0 || x >= grid.side() as i64 || y >= grid.side() as i64 {
                    continue;
                }
                let q = grid.index(x as usize, y as usize);
                let w = lo.edge_weight(p, q, (dx, dy));
                prop_assert!((lo.distance[p] - lo.distance[q]).abs() <= w + 1e-12);
            }
        }
    }

    #[test]
    fn unweighted_energy_identity_is_exact(
        seed in any::<u64>(), zr in -2.0f64..2.0, zi in -2.0f64..2.0, delta in -1.0f64..1.0,
    ) {
        let grid = dirichlet(1, 10);
        let mask = DomainMask::full(&grid);
        let op = assemble(&GaugeField::landau(FieldModel::default()), &grid, &mask, 0.2).unwrap();
        let mut s = seed | 1;
        let u: Vec<C64> = (0..grid.len()).map(|_| {
            s ^= s << 13; s ^= s >> 7; s ^= s << 17;
            C64::new((s % 1000) as f64 / 500.0 - 1.0, (s / 1000 % 1000) as f64 / 500.0 - 1.0)
        }).collect();
        let zero = WeightFunction::zero(&mask);
        let r = energy_identity_residual(&op, &zero, C64::new(zr, zi), &u).unwrap();
        prop_assert!(r <= 1e-12);
        let smooth: Vec<f64> = (0..grid.len()).map(|k| { let p = grid.point(k); 0.3 * (p[0] * p[0] + p[1]) }).collect();
        let phi = WeightFunction::from_values(&mask, smooth).unwrap();
        let r1 = energy_identity_residual(&op, &phi, C64::new(zr, zi), &u).unwrap();
        let r2 = energy_identity_residual(&op, &phi, C64::new(zr + delta, zi), &u).unwrap();
        prop_assert!((r1 - r2).abs() <= 1e-12);
    }

    #[test]
    fn census_partitions_window(vals in prop::collection::vec(0.0f64..10.0, 0..12), m in 0.5f64..3.0) {
        let c = GapCensus::from_values(&vals, 0.0, 0.5, (1.0, 9.0), m).unwrap();
        let mut covered = 0.0;
        let mut last = 1.0;
        for &(a, b) in &c.gaps {
            prop_assert!(a >= last && b > a && b <= 9.0);
            prop_assert!(!c.eigenvalues.iter().any(|&l| l > a && l < b));
            covered += b - a;
            last = b;
        }
        prop_assert!((covered - 8.0).abs() <= 1e-9);
    }

    #[test]
    fn cluster_distances_recompute(
        sc in prop::collection::vec(0.0f64..1.0, 1..8),
        wl in prop::collection::vec(0.0f64..1.0, 1..8),
    ) {
        let r = ClusterReport::from_values(1.0, 1.0, 0.5, &sc, &wl, 0.0).unwrap();
        for (l, d) in r.supercell.iter().zip(&r.distances) {
            let want = wl.iter().map(|w| (l - w).abs()).fold(f64::INFINITY, f64::min);
            prop_assert_eq!(*d, want);
        }
        let same = ClusterReport::from_values(1.0, 1.0, 0.5, &sc, &sc, 0.0).unwrap();
        prop_assert!(same.distances.iter().all(|&d| d == 0.0));
    }
}

#[test]
fn decay_profile_ignores_phase_and_scale() {
    let grid = dirichlet(1, 14);
    let mask = DomainMask::full(&grid);
    let model = FieldModel::default();
    let op = assemble(&GaugeField::landau(model.clone()), &grid, &mask, 0.15).unwrap();
    let mut eig = lowest_eigenpairs(&op, 1, 1e-10).unwrap();
    let d = agmon_distance(&model, &mask, &[grid.nearest_node([0.0, 0.0])], 1.0, Stencil::Sixteen).unwrap();
    let base = decay_profile(&eig, &op, &d, 0.15, 0.3).unwrap();
    let factor = C64::from_polar(3.7, 1.1);
    for v in &mut eig.eigenvectors[0] {
        *v *= factor;
    }
    let scaled = decay_profile(&eig, &op, &d, 0.15, 0.3).unwrap();
    assert!((base - scaled).abs() <= 1e-12);
}
