use approx::assert_relative_eq;
use proptest::prelude::*;

use fracflat::geometry::{RegionSpec, SpdMatrix};
use fracflat::kernel::{kernel_constant, KernelModel};
use fracflat::nmc::nmc_pv;

fn spd2() -> impl Strategy<Value = SpdMatrix> {
    (0.5f64..2.0, 0.5f64..2.0, -0.4f64..0.4).prop_map(|(a, d, b)| {
        let off = b * (a * d).sqrt();
        SpdMatrix::from_rows(&[vec![a, off], vec![off, d]]).unwrap()
    })
}

fn point2() -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-3.0f64..3.0, 2)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kernel_is_symmetric(g in spd2(), x in point2(), y in point2(), s in 0.05f64..0.95) {
        prop_assume!(((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2)).sqrt() > 1e-3);
        let a = kernel_constant(&g, &x, &y, s).unwrap();
        let b = kernel_constant(&g, &y, &x, s).unwrap();
        assert_relative_eq!(a, b, max_relative = 1e-14);
    }

    #[test]
    fn kernel_is_homogeneous(g in spd2(), x in point2(), y in point2(), s in 0.05f64..0.95, lambda in 0.1f64..10.0) {
        prop_assume!(((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2)).sqrt() > 1e-3);
        let k = kernel_constant(&g, &x, &y, s).unwrap();
        let xs: Vec<f64> = x.iter().map(|v| v * lambda).collect();
        let ys: Vec<f64> = y.iter().map(|v| v * lambda).collect();
        let ks = kernel_constant(&g, &xs, &ys, s).unwrap();
        assert_relative_eq!(ks, lambda.powf(-(2.0 + s)) * k, max_relative = 1e-12);
    }

    #[test]
    fn tilted_half_space_has_zero_curvature(angle in 0.0f64..std::f64::consts::TAU, t in -2.0f64..2.0, s in 0.2f64..0.8) {
        let normal = vec![angle.cos(), angle.sin()];
        let region = RegionSpec::HalfSpace { normal: normal.clone(), offset: 0.0 };
        let y = vec![-t * normal[1], t * normal[0]];
        let r = nmc_pv(&region, &y, &KernelModel::euclidean(2, s).unwrap()).unwrap();
        prop_assert!(r.value.abs() <= 1e-6, "H = {}", r.value);
    }

    #[test]
    fn complement_flips_the_sign(radius in 0.3f64..3.0, s in 0.2f64..0.8) {
        let model = KernelModel::euclidean(2, s).unwrap();
        let ball = |inside| RegionSpec::Ball { center: vec![0.0, 0.0], radius, inside };
        let y = [0.0, radius];
        let a = nmc_pv(&ball(true), &y, &model).unwrap().value;
        let b = nmc_pv(&ball(false), &y, &model).unwrap().value;
        assert_relative_eq!(a, -b, max_relative = 1e-9);
        prop_assert!(a < 0.0);
    }
}
