use hdiv::avoid::{avoidant_fill, verify_certificate, AvoidanceScaffold};
use hdiv::carnot::{GroupPoint, StratifiedGroup};
use hdiv::deform::{verify_boundary, verify_locality};
use hdiv::multiscale::verify_filling;
use hdiv::rational::{q, qr};
use hdiv::{deform, fill, Cell, CubicalChain, GridComplex, PLChain, Point};
use proptest::prelude::*;

fn ratio() -> impl Strategy<Value = (i64, i64)> {
    (-40i64..40, 1i64..8)
}

fn point2() -> impl Strategy<Value = Point> {
    (ratio(), ratio()).prop_map(|(a, b)| Point::from_ratios(&[a, b]))
}

fn group_point() -> impl Strategy<Value = GroupPoint> {
    prop::collection::vec(ratio(), 3).prop_map(|v| GroupPoint(v.into_iter().map(|(a, b)| qr(a, b)).collect()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn cubical_boundary_squares_to_zero(
        cells in prop::collection::vec((-4i64..4, -4i64..4, -4i64..4, 0usize..3, 1i64..4), 1..8),
    ) {
        let mut c = CubicalChain::zero();
        for (x, y, z, kind, m) in cells {
            let dims = match kind { 0 => vec![0, 1], 1 => vec![1, 2], _ => vec![0, 2] };
            c.add_term(Cell::new(0, vec![x, y, z], dims).unwrap(), m);
        }
        prop_assert!(c.boundary().boundary().is_zero());
        prop_assert_eq!(c.refine_to(0).boundary(), c.boundary());
    }

    #[test]
    fn deformation_of_triangles(a in point2(), b in point2(), c in point2()) {
        prop_assume!(a != b && b != c && a != c);
        let tri = PLChain::polygon(&[a, b, c]).unwrap();
        let res = deform(&tri, &GridComplex { n: 2, scale: 0 }).unwrap();
        prop_assert!(verify_boundary(&tri, &res));
        prop_assert!(verify_locality(&res));
        prop_assert!(res.p.boundary().is_zero());
    }

    #[test]
    fn point_pairs_are_filled(a in point2(), b in point2()) {
        prop_assume!(a != b);
        let cyc = PLChain::point_pair(a, b).unwrap();
        let f = fill(&cyc).unwrap();
        prop_assert!(verify_filling(&cyc, &f.b));
    }

    #[test]
    fn heisenberg_product_is_associative(x in group_point(), y in group_point(), z in group_point()) {
        let h = StratifiedGroup::heisenberg();
        let l = h.mul(&h.mul(&x, &y).unwrap(), &z).unwrap();
        let r = h.mul(&x, &h.mul(&y, &z).unwrap()).unwrap();
        prop_assert_eq!(l, r);
        prop_assert_eq!(h.mul(&x, &h.inverse(&x)).unwrap(), h.identity());
    }

    #[test]
    fn dilations_are_automorphisms(x in group_point(), y in group_point(), t in 1i64..9, s in 1i64..5) {
        let h = StratifiedGroup::heisenberg();
        let t = qr(t, s);
        let lhs = h.dilate(&h.mul(&x, &y).unwrap(), &t).unwrap();
        let rhs = h.mul(&h.dilate(&x, &t).unwrap(), &h.dilate(&y, &t).unwrap()).unwrap();
        prop_assert_eq!(lhs, rhs);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn avoidant_pairs_are_certified(t in 0u32..64, r in 11i64..40) {
        let s = AvoidanceScaffold::build(2, 0, &q(1)).unwrap();
        // rational point on the circle of radius r + 2
        let tt = qr(t as i64 - 32, 16);
        let den = q(1) + tt.clone() * tt.clone();
        let rr = q(r + 2);
        let p = Point::new(vec![
            rr.clone() * (q(1) - tt.clone() * tt.clone()) / den.clone(),
            rr * q(2) * tt / den,
        ]);
        let cyc = PLChain::point_pair(p.clone(), p.scale(&q(-1))).unwrap();
        let c = avoidant_fill(&cyc, &q(r), &s).unwrap();
        prop_assert!(verify_certificate(&cyc, &c).ok());
    }
}
