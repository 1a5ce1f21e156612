mod common;

use bgrdmft::approx::exact_zbar;
use bgrdmft::force::{facet_states, simplex_repulsion, FacetPoint};
use bgrdmft::functional::general::general_form_functional;
use bgrdmft::functional::scan::{kinetic_sweep, project_tangent, t_scan};
use bgrdmft::functional::search::constrained_search;
use bgrdmft::functional::simplex::simplex_functional;
use bgrdmft::{Membership, PhaseMode, SearchOptions};

fn opts(seed: u64) -> SearchOptions {
    SearchOptions::default().with_seed(seed)
}

#[test]
fn facet_point_value_for_six_particles() {
    let (p, w) = common::hubbard(3, 6, 0);
    let r = constrained_search(&p, &w, &[0.0, 3.0, 3.0], &opts(1)).unwrap();
    assert!((r.sample.value - 10.0).abs() < 1e-6, "{}", r.sample.value);
}

#[test]
fn simplex_form_matches_search_on_triangle_sector() {
    let (p, w) = common::hubbard(3, 3, 1);
    assert_eq!(p.vertices().len(), p.affine_dim() + 1);
    let mut rng = common::rng(7);
    for i in 0..100 {
        let n = common::mixture(&p, &mut rng);
        let a = simplex_functional(&p, &w, &n, PhaseMode::Real).unwrap().value;
        let b = constrained_search(&p, &w, &n, &opts(i)).unwrap().sample.value;
        assert!((a - b).abs() < 1e-6, "n = {n:?}: simplex {a}, search {b}");
    }
}

#[test]
fn general_form_matches_search() {
    for (d, n_part, count) in [(3, 3, 40), (2, 4, 40)] {
        let (p, w) = common::hubbard(d, n_part, 0);
        let mut rng = common::rng(100 + d as u64);
        for i in 0..count {
            let n = common::mixture(&p, &mut rng);
            let a = general_form_functional(&p, &w, &n, &opts(i)).unwrap().sample.value;
            let b = constrained_search(&p, &w, &n, &opts(i)).unwrap().sample.value;
            assert!((a - b).abs() < 1e-6, "({d},{n_part},0) n = {n:?}: general {a}, search {b}");
        }
    }
}

#[test]
fn closed_form_kernel_functional_matches_search() {
    let (p, w) = common::hubbard(3, 3, 0);
    let mut rng = common::rng(5);
    for i in 0..100 {
        let n = common::mixture(&p, &mut rng);
        let (_, f) = exact_zbar(&n).unwrap();
        let b = constrained_search(&p, &w, &n, &opts(i)).unwrap().sample.value;
        assert!((f - b).abs() < 1e-6, "n = {n:?}: closed form {f}, search {b}");
    }
}

#[test]
fn kernel_coordinate_is_the_weight_of_the_uniform_state() {
    let (p, w) = common::hubbard(3, 3, 0);
    let n = [1.0, 1.5, 0.5];
    let (z, f) = exact_zbar(&n).unwrap();
    let g = general_form_functional(&p, &w, &n, &opts(0)).unwrap();
    let uniform = p.sector().states().iter().position(|s| s.occ() == [1, 1, 1]).unwrap();
    assert!((g.kernel_point.radicands[uniform] - z).abs() < 1e-6);
    assert!((g.sample.value - f).abs() < 1e-8);
}

#[test]
fn legendre_gradient_is_minus_kinetic_vector() {
    let (p, w) = common::hubbard(3, 3, 0);
    let ts = kinetic_sweep::<f64>(3, 50, 0.2, 3.0, 21);
    let samples = t_scan(&p, &w, &ts).unwrap();
    let basis = p.tangent_basis();
    let h = 1e-4;
    for (t, s) in ts.iter().zip(&samples) {
        assert_eq!(p.membership(&s.n), Membership::Interior);
        let want = project_tangent(&p, &t.0);
        let f0 = constrained_search(&p, &w, &s.n, &opts(3)).unwrap().sample.value;
        assert!((f0 - s.value).abs() < 1e-7, "search {f0} vs scan {}", s.value);
        let mut grad = vec![0.0; 3];
        for dir in 0..basis.ncols() {
            let shifted = |sg: f64| -> f64 {
                let q: Vec<f64> = (0..3).map(|i| s.n[i] + sg * h * basis[(i, dir)]).collect();
                constrained_search(&p, &w, &q, &opts(3)).unwrap().sample.value
            };
            let g = (shifted(1.0) - shifted(-1.0)) / (2.0 * h);
            for i in 0..3 {
                grad[i] += g * basis[(i, dir)];
            }
        }
        let norm = want.iter().map(|x| x * x).sum::<f64>().sqrt();
        let err = grad.iter().zip(&want).map(|(g, t)| (g + t).powi(2)).sum::<f64>().sqrt();
        assert!(err <= 1e-3 * norm, "t = {:?}: grad {grad:?}, -t {want:?}", t.0);
    }
}

#[test]
fn ground_states_never_touch_the_boundary() {
    for n_part in [3, 6] {
        for p_mom in 0..3 {
            if n_part == 3 && p_mom != 0 {
                continue; // frustrated triangles, see below
            }
            let (p, w) = common::hubbard(3, n_part, p_mom);
            let ts = kinetic_sweep::<f64>(3, 100, 1e-2, 1e1, 40 + p_mom as u64);
            for s in t_scan(&p, &w, &ts).unwrap() {
                let dmin = p.facet_distances(&s.n).unwrap().into_iter().fold(f64::INFINITY, f64::min);
                assert!(dmin > 1e-4, "(3,{n_part},{p_mom}) n = {:?}: min D = {dmin}", s.n);
            }
        }
    }
}

/// In the (3,3,±1) triangles every off-diagonal element of W is positive, so
/// the edge minimizer at the midpoint decouples from the third state: the
/// force vanishes there and ground states may approach the edge.
#[test]
fn frustrated_triangle_edges_carry_no_force_at_their_midpoints() {
    for p_mom in [1, 2] {
        let (p, w) = common::hubbard(3, 3, p_mom);
        assert!(w.matrix.iter().all(|&x| x > 0.0));
        for facet in 0..p.num_facets() {
            let on = facet_states(&p, facet);
            assert_eq!(on.len(), 2);
            let mid: Vec<f64> = (0..3)
                .map(|k| on.iter().map(|&a| p.sector().state(a).occ()[k] as f64).sum::<f64>() / 2.0)
                .collect();
            let fp = FacetPoint::new(&p, facet, mid).unwrap();
            let g = simplex_repulsion(&p, &w, &fp).unwrap().g;
            assert!(g.abs() < 1e-9, "P={p_mom} facet {facet}: G = {g}");
        }
    }
}
