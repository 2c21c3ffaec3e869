use std::sync::OnceLock;

use multiprime::elementary::{reference_exp_full, EvalContext};
use multiprime::series::sinh_term_count;
use multiprime::FixedPoint;
use proptest::prelude::*;

fn ctx() -> &'static EvalContext {
    static C: OnceLock<EvalContext> = OnceLock::new();
    C.get_or_init(|| EvalContext::with_both(13, 33220).unwrap())
}

#[test]
fn worked_example_term_count() {
    let x = FixedPoint::from_int(2, 0)
        .sqrt(33300)
        .unwrap()
        .sub(&FixedPoint::one(0));
    let (v, tr) = ctx().exp_traced(&x, 33220).unwrap();
    let tr = tr.unwrap();
    assert!(tr.norm <= 33220.0);
    assert!(tr.achieved_r >= 100.0);
    assert!(tr.series_terms <= 160, "{}", tr.series_terms);
    assert_eq!(
        tr.series_terms,
        sinh_term_count(tr.residual.abs().log2(), 33220 + 32)
    );
    assert!(v.close_to(&reference_exp_full(&x, 33220).unwrap(), -33220 + 8));
}

#[test]
fn context_is_shareable() {
    let c = ctx();
    let xs: Vec<FixedPoint> = (1..5)
        .map(|i| FixedPoint::from_f64(i as f64 * 0.37, 60))
        .collect();
    let par: Vec<FixedPoint> = std::thread::scope(|s| {
        let hs: Vec<_> = xs
            .iter()
            .map(|x| s.spawn(move || c.exp(x, 8000).unwrap()))
            .collect();
        hs.into_iter().map(|h| h.join().unwrap()).collect()
    });
    for (x, v) in xs.iter().zip(par) {
        assert_eq!(v, c.exp(x, 8000).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn monotone_precision(v in 0.001f64..2.0, b in 3000u64..12000) {
        let x = FixedPoint::from_f64(v, 60);
        let lo = ctx().exp(&x, b).unwrap();
        let hi = ctx().exp(&x, b + 64).unwrap();
        prop_assert!(lo.close_to(&hi, -(b as i64) + 3));
        let (c1, s1) = ctx().cos_sin(&x, b).unwrap();
        let (c2, s2) = ctx().cos_sin(&x, b + 64).unwrap();
        prop_assert!(c1.close_to(&c2, -(b as i64)) && s1.close_to(&s2, -(b as i64)));
        let l1 = ctx().log(&x, b).unwrap();
        let l2 = ctx().log(&x, b + 64).unwrap();
        prop_assert!(l1.close_to(&l2, -(b as i64)));
    }

    #[test]
    fn reduction_norm_within_precision(v in -40.0f64..40.0, b in 2240u64..33220) {
        let x = FixedPoint::from_f64(v, 60);
        if let (_, Some(tr)) = ctx().exp_traced(&x, b).unwrap() {
            prop_assert!(tr.norm <= b as f64);
            prop_assert!(tr.num_bits + tr.den_bits <= b + tr.coeffs[0].unsigned_abs() + 13);
        }
    }
}
