use std::f64::consts::PI;

use psns_core::diagnostics::{estimate_cb, FieldSampler};
use psns_core::torus::{Torus, TorusGeometry};

#[test]
fn cb_estimate_is_stable_across_sample_sets() {
    let t = Torus::new(TorusGeometry::new(2.0 * PI, 4)).unwrap();
    let a = estimate_cb(&FieldSampler::new(&t, 11), 1000, 0.1).unwrap();
    let b = estimate_cb(&FieldSampler::new(&t, 12), 1000, 0.1).unwrap();
    assert!(a.value > 0.0 && b.value > 0.0);
    assert_eq!((a.pairs, b.pairs), (1000, 1000));
    let spread = (a.value - b.value).abs() / a.value.max(b.value);
    assert!(spread <= 0.25, "{} vs {}", a.value, b.value);
}
