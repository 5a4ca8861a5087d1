mod common;

use proptest::prelude::*;
use reskernel::generators::{gen_sierpinski, random_connected};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn identities_on_random_networks(n in 3usize..40, extra_frac in 0.0f64..1.5, seed in any::<u64>()) {
        let extra = (extra_frac * n as f64) as usize;
        let net = random_connected(n, extra, seed).unwrap();
        for check in common::identity_checks(&net, seed) {
            prop_assert!(check.ok(), "{}: {:e} > {:e}", check.name, check.error, check.tol);
        }
    }
}

#[test]
fn identities_on_gasket() {
    let net = gen_sierpinski(3).unwrap();
    for seed in 0..3 {
        for check in common::identity_checks(&net, seed) {
            assert!(check.ok(), "{}: {:e} > {:e}", check.name, check.error, check.tol);
        }
    }
}
