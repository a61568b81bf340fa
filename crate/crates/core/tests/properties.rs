use proptest::prelude::*;

use porocrack::material::{hooke, stress_from_strain, strain_from_stress, strain_energy_density, MaterialParams};
use porocrack::tensor::Mat3;
use porocrack::SymTensor3;

fn sym(scale: f64) -> impl Strategy<Value = SymTensor3> {
    prop::array::uniform6(-scale..scale).prop_map(SymTensor3::new)
}

/// Rotation from a unit quaternion.
fn rotation() -> impl Strategy<Value = Mat3> {
    prop::array::uniform4(-1.0f64..1.0).prop_filter("nonzero", |q| q.iter().map(|v| v * v).sum::<f64>() > 1e-3).prop_map(
        |q| {
            let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
            let [w, x, y, z] = q.map(|v| v / n);
            [
                [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
                [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
                [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
            ]
        },
    )
}

fn params(beta: f64) -> MaterialParams {
    MaterialParams::new(1.0e4, 0.3, beta).unwrap()
}

proptest! {
    #[test]
    fn round_trip(eps in sym(0.02), beta in -30.0f64..30.0) {
        let p = params(beta);
        prop_assume!(1.0 + beta * eps.trace() > 0.05);
        let t = stress_from_strain(&p, &eps).unwrap();
        let back = strain_from_stress(&p, &t).unwrap();
        prop_assert!((back - eps).norm() <= 1e-11 * eps.norm().max(1e-300));
    }

    #[test]
    fn rotation_invariance(eps in sym(0.02), r in rotation(), beta in -20.0f64..20.0) {
        let p = params(beta);
        prop_assume!(1.0 + beta * eps.trace() > 0.05);
        let rotated_then = stress_from_strain(&p, &eps.rotate(&r)).unwrap();
        let then_rotated = stress_from_strain(&p, &eps).unwrap().rotate(&r);
        prop_assert!((rotated_then - then_rotated).norm() <= 1e-10 * then_rotated.norm().max(1e-12));
    }

    #[test]
    fn vanishing_beta_gives_hooke(eps in sym(0.05), k in 3i32..9) {
        let beta = 10f64.powi(-k);
        let linear = hooke(&params(0.0), &eps);
        let t = stress_from_strain(&params(beta), &eps).unwrap();
        // the relative change is β tr ε / (1 + β tr ε)
        let bound = 2.0 * beta * eps.trace().abs() + 1e-14;
        prop_assert!((t - linear).norm() <= bound * linear.norm().max(1e-12));
    }

    #[test]
    fn strain_trace_stays_below_limit(dev in sym(1.0e3), p in 0.0f64..1.0e9, beta in -50.0f64..-0.5) {
        let dev = dev - SymTensor3::identity().scale(dev.trace() / 3.0);
        let t = dev + SymTensor3::identity().scale(p);
        let eps = strain_from_stress(&params(beta), &t).unwrap();
        prop_assert!(eps.trace() < -1.0 / beta);
        prop_assert!(1.0 + beta * eps.trace() > 0.0);
    }

    #[test]
    fn energy_is_nonnegative(eps in sym(0.02), beta in -30.0f64..30.0) {
        prop_assume!(1.0 + beta * eps.trace() > 0.05);
        let t = stress_from_strain(&params(beta), &eps).unwrap();
        prop_assert!(strain_energy_density(&eps, &t) >= 0.0);
    }
}
