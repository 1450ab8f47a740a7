mod common;

use common::{rational_to_f64, thermocouple_exact};
use dynbias::explorer::hyperband_schedule;
use dynbias::seed;
use dynbias::sensors::thermocouple_transfer;
use rand::Rng;

#[test]
fn thermocouple_matches_exact_rational() {
    assert_eq!(thermocouple_transfer(0.0).unwrap(), 0.0);
    let mut rng = seed::rng(5);
    let mut worst = 0.0f64;
    for i in 0..100 {
        let t = if i == 0 { 1820.0 } else { rng.gen_range(0.0..1820.0) };
        let oracle = rational_to_f64(&thermocouple_exact(t));
        let got = thermocouple_transfer(t).unwrap();
        worst = worst.max(((got - oracle) / oracle).abs());
    }
    assert!(worst <= 1e-12, "worst relative error {worst:e}");
}

#[test]
fn thermocouple_fixture_values() {
    // printed polynomial evaluated in exact decimal arithmetic
    for (t, v) in [(1820.0, 1.381350307433e+01), (1000.0, 4.832637976380e+00), (250.5, 2.924440565435e-01), (41.0, -2.744066350964e-04)] {
        let got = thermocouple_transfer(t).unwrap();
        assert!(((got - v) / v).abs() < 1e-11, "{t}: {got} vs {v}");
    }
}

#[test]
fn hyperband_table_for_81_and_3() {
    let expected: Vec<Vec<(usize, f64)>> = vec![
        vec![(81, 1.0), (27, 3.0), (9, 9.0), (3, 27.0), (1, 81.0)],
        vec![(34, 3.0), (11, 9.0), (3, 27.0), (1, 81.0)],
        vec![(15, 9.0), (5, 27.0), (1, 81.0)],
        vec![(8, 27.0), (2, 81.0)],
        vec![(5, 81.0)],
    ];
    let got: Vec<Vec<(usize, f64)>> = hyperband_schedule(81.0, 3)
        .unwrap()
        .iter()
        .map(|b| b.rungs.iter().map(|r| (r.n_configs, r.resource)).collect())
        .collect();
    assert_eq!(got, expected);
}
